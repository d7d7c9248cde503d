// Copyright 2026 The LatentFP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "latentfp/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "latentfp/rng.hpp"

namespace latentfp {
namespace {

constexpr std::array<int, 64> kLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

// Stream tags under (spec seed, call seed).
enum : std::uint64_t { kNoiseStream = 1, kComboStream = 2 };

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

std::string attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kIdentity:
      return "identity";
    case AttackKind::kNoising:
      return "noising";
    case AttackKind::kBlurring:
      return "blurring";
    case AttackKind::kJpeg:
      return "jpeg";
    case AttackKind::kCombo:
      return "combo";
  }
  return "?";
}

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "identity" || name == "none") return AttackKind::kIdentity;
  if (name == "noising" || name == "noise") return AttackKind::kNoising;
  if (name == "blurring" || name == "blur") return AttackKind::kBlurring;
  if (name == "jpeg") return AttackKind::kJpeg;
  if (name == "combo") return AttackKind::kCombo;
  throw std::invalid_argument("unknown attack kind '" + name + "'");
}

void validate(const PostprocessSpec& spec) {
  if (!(spec.noise_sigma >= 0) || !std::isfinite(spec.noise_sigma))
    throw std::invalid_argument("noise sigma must be a finite nonnegative number");
  if (spec.blur_kernel_size < 1) throw std::invalid_argument("blur kernel size must be >= 1");
  if (!(spec.blur_sigma > 0)) throw std::invalid_argument("blur sigma must be positive");
  if (spec.jpeg_quality < 1 || spec.jpeg_quality > 100)
    throw std::invalid_argument("JPEG quality must be in [1, 100]");
  if (!(spec.combo_include_prob > 0 && spec.combo_include_prob <= 1))
    throw std::invalid_argument("combo inclusion probability must be in (0, 1]");
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  if (size < 1 || !(sigma > 0)) throw std::invalid_argument("gaussian_kernel: bad parameters");
  // Odd sizes are centered; even sizes keep offsets -size/2 .. size/2 - 1,
  // i.e. the symmetric (size+1)-tap kernel with its rightmost tap dropped.
  const int left = size / 2;
  std::vector<double> k(size);
  double total = 0;
  for (int i = 0; i < size; ++i) {
    const double x = i - left;
    total += k[i] = std::exp(-0.5 * x * x / (sigma * sigma));
  }
  for (double& v : k) v /= total;
  return k;
}

ImageGrid gaussian_blur(const ImageGrid& img, int size, double sigma) {
  const std::vector<double> k = gaussian_kernel(size, sigma);
  const int left = size / 2;
  ImageGrid tmp = img, out = img;
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double acc = 0;
        for (int i = 0; i < size; ++i) acc += k[i] * img.at(c, y, reflect(x + i - left, img.width));
        tmp.at(c, y, x) = acc;
      }
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double acc = 0;
        for (int i = 0; i < size; ++i)
          acc += k[i] * tmp.at(c, reflect(y + i - left, img.height), x);
        out.at(c, y, x) = acc;
      }
  }
  out.provenance = ImageProvenance::kPostprocessed;
  return out;
}

ImageGrid add_gaussian_noise(const ImageGrid& img, double sigma, std::uint64_t seed) {
  ImageGrid out = img;
  out.provenance = ImageProvenance::kPostprocessed;
  if (sigma == 0) return out;
  Rng rng = make_rng(seed);
  out.pixels += sigma * standard_normal(rng, img.size());
  return out;
}

std::array<int, 64> jpeg_quant_table(int quality) {
  quality = std::clamp(quality, 1, 100);
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> table{};
  for (int i = 0; i < 64; ++i) table[i] = std::clamp((kLuminanceTable[i] * scale + 50) / 100, 1, 255);
  return table;
}

const Matrix& dct8_matrix() {
  static const Matrix m = [] {
    Matrix d(8, 8);
    for (int u = 0; u < 8; ++u)
      for (int x = 0; x < 8; ++x)
        d(u, x) = (u == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8)) *
                  std::cos((2 * x + 1) * u * M_PI / 16.0);
    return d;
  }();
  return m;
}

ImageGrid jpeg_compress(const ImageGrid& img, int quality, PixelRange range) {
  if (quality < 1 || quality > 100) throw std::invalid_argument("JPEG quality must be in [1, 100]");
  const std::array<int, 64> q = jpeg_quant_table(quality);
  const Matrix& d = dct8_matrix();
  const double to255 = 255.0 / range.width();
  ImageGrid out = img;
  out.provenance = ImageProvenance::kPostprocessed;
  Matrix block(8, 8);
  for (int c = 0; c < img.channels; ++c)
    for (int by = 0; by < img.height; by += 8)
      for (int bx = 0; bx < img.width; bx += 8) {
        // Edge replication for partial blocks.
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) {
            const int sy = std::min(by + y, img.height - 1), sx = std::min(bx + x, img.width - 1);
            block(y, x) = (img.at(c, sy, sx) - range.lo) * to255 - 128.0;
          }
        Matrix coef = d * block * d.transpose();
        for (int v = 0; v < 8; ++v)
          for (int u = 0; u < 8; ++u) {
            const double step = q[v * 8 + u];
            coef(v, u) = std::round(coef(v, u) / step) * step;
          }
        block = d.transpose() * coef * d;
        for (int y = 0; y < 8 && by + y < img.height; ++y)
          for (int x = 0; x < 8 && bx + x < img.width; ++x)
            out.at(c, by + y, bx + x) = (block(y, x) + 128.0) / to255 + range.lo;
      }
  return clamp_to_range(std::move(out), range);
}

ImageGrid clamp_to_range(ImageGrid img, PixelRange range) {
  img.pixels = img.pixels.cwiseMax(range.lo).cwiseMin(range.hi);
  return img;
}

ImageGrid apply(const PostprocessSpec& spec, const ImageGrid& img, std::uint64_t rng_seed,
                PixelRange range) {
  validate(spec);
  const std::uint64_t seed = derive_seed(spec.rng_seed, rng_seed);
  switch (spec.kind) {
    case AttackKind::kIdentity:
      return img;
    case AttackKind::kNoising:
      if (spec.noise_sigma == 0) return img;
      return clamp_to_range(
          add_gaussian_noise(img, spec.noise_sigma, derive_seed(seed, kNoiseStream)), range);
    case AttackKind::kBlurring:
      return clamp_to_range(gaussian_blur(img, spec.blur_kernel_size, spec.blur_sigma), range);
    case AttackKind::kJpeg:
      return jpeg_compress(img, spec.jpeg_quality, range);
    case AttackKind::kCombo: {
      bool blur = true, noise = true, jpeg = true;
      if (spec.combo_include_prob < 1) {
        Rng rng = make_rng(derive_seed(seed, kComboStream));
        do {
          blur = uniform01(rng) < spec.combo_include_prob;
          noise = uniform01(rng) < spec.combo_include_prob;
          jpeg = uniform01(rng) < spec.combo_include_prob;
        } while (!blur && !noise && !jpeg);
      }
      ImageGrid out = img;
      if (blur) out = clamp_to_range(gaussian_blur(out, spec.blur_kernel_size, spec.blur_sigma), range);
      if (noise && spec.noise_sigma > 0)
        out = clamp_to_range(
            add_gaussian_noise(out, spec.noise_sigma, derive_seed(seed, kNoiseStream)), range);
      if (jpeg) out = jpeg_compress(out, spec.jpeg_quality, range);
      out.provenance = ImageProvenance::kPostprocessed;
      return out;
    }
  }
  throw std::invalid_argument("apply: unknown attack kind");
}

PostprocessSpec sample_attack(AttackKind kind, std::uint64_t rng_seed) {
  Rng rng = make_rng(rng_seed);
  PostprocessSpec spec;
  spec.kind = kind;
  spec.rng_seed = rng_seed;
  spec.noise_sigma = kMaxNoiseSigma * uniform01(rng);
  spec.blur_kernel_size = kBlurKernelSizes[rng() % kBlurKernelSizes.size()];
  spec.blur_sigma = kBlurSigmas[rng() % kBlurSigmas.size()];
  spec.jpeg_quality = kJpegQualities[rng() % kJpegQualities.size()];
  spec.combo_include_prob = 0.5;
  return spec;
}

PostprocessSpec strongest(AttackKind kind) {
  PostprocessSpec spec;
  spec.kind = kind;
  spec.noise_sigma = kMaxNoiseSigma;
  spec.blur_kernel_size = 25;
  spec.blur_sigma = 2.0;
  spec.jpeg_quality = 50;
  spec.combo_include_prob = 1.0;
  return spec;
}

std::string describe(const PostprocessSpec& spec) {
  std::ostringstream os;
  os << attack_kind_name(spec.kind);
  switch (spec.kind) {
    case AttackKind::kIdentity:
      break;
    case AttackKind::kNoising:
      os << "[n" << spec.noise_sigma << "]";
      break;
    case AttackKind::kBlurring:
      os << "[b" << spec.blur_kernel_size << "x" << spec.blur_sigma << "]";
      break;
    case AttackKind::kJpeg:
      os << "[q" << spec.jpeg_quality << "]";
      break;
    case AttackKind::kCombo:
      os << "[b" << spec.blur_kernel_size << "x" << spec.blur_sigma << ";n" << spec.noise_sigma
         << ";q" << spec.jpeg_quality << ";p" << spec.combo_include_prob << "]";
      break;
  }
  return os.str();
}

}  // namespace latentfp
