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

// Image postprocessing attacks: additive Gaussian noise, Gaussian blur, a
// JPEG-like block-DCT quantizer and random/fixed combinations of the three.

#ifndef LATENTFP_POSTPROCESS_HPP_
#define LATENTFP_POSTPROCESS_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "latentfp/types.hpp"

namespace latentfp {

enum class AttackKind { kIdentity, kNoising, kBlurring, kJpeg, kCombo };

std::string attack_kind_name(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);

/// Blur kernel sizes, blur sigmas and JPEG qualities the random attacks
/// draw from; noise sigma is drawn from U[0, kMaxNoiseSigma].
inline constexpr std::array<int, 5> kBlurKernelSizes = {3, 7, 9, 16, 25};
inline constexpr std::array<double, 4> kBlurSigmas = {0.5, 1.0, 1.5, 2.0};
inline constexpr std::array<int, 4> kJpegQualities = {80, 70, 60, 50};
inline constexpr double kMaxNoiseSigma = 0.1;

struct PostprocessSpec {
  AttackKind kind = AttackKind::kIdentity;
  double noise_sigma = 0.0;
  int blur_kernel_size = 3;
  double blur_sigma = 1.0;
  int jpeg_quality = 75;
  /// Per-attack inclusion probability for kCombo; 1 applies all three.
  double combo_include_prob = 0.5;
  std::uint64_t rng_seed = 0;

  bool operator==(const PostprocessSpec&) const = default;
};

/// Throws std::invalid_argument on out-of-range parameters.
void validate(const PostprocessSpec& spec);

/// Applies the attack and clamps the result into `range`. Deterministic in
/// (spec, rng_seed). Combos run blur, then noise, then JPEG.
ImageGrid apply(const PostprocessSpec& spec, const ImageGrid& img, std::uint64_t rng_seed,
                PixelRange range = {});

/// Attack parameters drawn from the random-attack distributions.
PostprocessSpec sample_attack(AttackKind kind, std::uint64_t rng_seed);
/// Deterministic maximum-strength parameters of each attack.
PostprocessSpec strongest(AttackKind kind);

/// Short label, e.g. "combo[b25x2;n0.1;q50;p1]"; never contains commas; used in reports.
std::string describe(const PostprocessSpec& spec);

// Building blocks.
std::vector<double> gaussian_kernel(int size, double sigma);
ImageGrid gaussian_blur(const ImageGrid& img, int size, double sigma);
ImageGrid add_gaussian_noise(const ImageGrid& img, double sigma, std::uint64_t seed);
/// Quantization table (libjpeg luminance table, standard quality scaling).
std::array<int, 64> jpeg_quant_table(int quality);
ImageGrid jpeg_compress(const ImageGrid& img, int quality, PixelRange range);
ImageGrid clamp_to_range(ImageGrid img, PixelRange range);

/// Orthonormal 8x8 DCT-II basis matrix (rows are frequencies).
const Matrix& dct8_matrix();

}  // namespace latentfp

#endif  // LATENTFP_POSTPROCESS_HPP_
