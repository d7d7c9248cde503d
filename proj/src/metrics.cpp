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

#include "latentfp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "latentfp/rng.hpp"
#include "latentfp/spectral.hpp"

namespace latentfp {
namespace {

Matrix dct_matrix(int n) {
  Matrix d(n, n);
  for (int u = 0; u < n; ++u)
    for (int x = 0; x < n; ++x)
      d(u, x) = (u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n)) *
                std::cos((2 * x + 1) * u * M_PI / (2.0 * n));
  return d;
}

void check_blocks(const MetricHandle& metric, int height, int width) {
  if (metric.block_size < 1 || height % metric.block_size || width % metric.block_size)
    throw std::invalid_argument("block DCT metric: image size must be a multiple of the block size");
}

// Applies d (forward) or d^T (inverse) to every block of every column.
Matrix block_transform(const Matrix& in, int channels, int height, int width, int b, bool inverse) {
  const Matrix d = dct_matrix(b);
  const Matrix dt = d.transpose();
  const int bx_count = width / b, by_count = height / b;
  Matrix out(in.rows(), in.cols());
  Matrix block(b, b);
  for (Eigen::Index col = 0; col < in.cols(); ++col)
    for (int c = 0; c < channels; ++c) {
      const Eigen::Index plane = Eigen::Index(c) * height * width;
      for (int by = 0; by < by_count; ++by)
        for (int bx = 0; bx < bx_count; ++bx) {
          const Eigen::Index fbase = plane + Eigen::Index(by * bx_count + bx) * b * b;
          if (!inverse) {
            for (int y = 0; y < b; ++y)
              for (int x = 0; x < b; ++x)
                block(y, x) = in(plane + Eigen::Index(by * b + y) * width + bx * b + x, col);
            const Matrix coef = d * block * dt;
            for (int v = 0; v < b; ++v)
              for (int u = 0; u < b; ++u) out(fbase + v * b + u, col) = coef(v, u);
          } else {
            for (int v = 0; v < b; ++v)
              for (int u = 0; u < b; ++u) block(v, u) = in(fbase + v * b + u, col);
            const Matrix pix = dt * block * d;
            for (int y = 0; y < b; ++y)
              for (int x = 0; x < b; ++x)
                out(plane + Eigen::Index(by * b + y) * width + bx * b + x, col) = pix(y, x);
          }
        }
    }
  return out;
}

}  // namespace

MetricHandle MetricHandle::l2() { return MetricHandle{}; }

MetricHandle MetricHandle::weighted(FeatureTransform transform, Vector weights, int block_size) {
  if (weights.size() == 0 || (weights.array() < 0).any() || weights.maxCoeff() <= 0)
    throw std::invalid_argument("metric weights must be nonnegative and not all zero");
  if (transform == FeatureTransform::kBlockDct && weights.size() != block_size * block_size)
    throw std::invalid_argument("block DCT metric needs one weight per block frequency");
  MetricHandle m;
  m.kind = MetricKind::kWeightedFeature;
  m.transform = transform;
  m.block_size = block_size;
  m.weights = std::move(weights);
  return m;
}

Matrix feature_transform(const MetricHandle& metric, const Matrix& images, int channels,
                         int height, int width) {
  if (metric.transform == FeatureTransform::kIdentity) return images;
  check_blocks(metric, height, width);
  return block_transform(images, channels, height, width, metric.block_size, false);
}

Matrix inverse_feature_transform(const MetricHandle& metric, const Matrix& features, int channels,
                                 int height, int width) {
  if (metric.transform == FeatureTransform::kIdentity) return features;
  check_blocks(metric, height, width);
  return block_transform(features, channels, height, width, metric.block_size, true);
}

Vector expanded_weights(const MetricHandle& metric, int channels, int height, int width) {
  const Eigen::Index dx = Eigen::Index(channels) * height * width;
  if (metric.kind == MetricKind::kL2) return Vector::Ones(dx);
  if (metric.transform == FeatureTransform::kIdentity) {
    if (metric.weights.size() != dx)
      throw std::invalid_argument("identity-feature metric needs one weight per pixel");
    return metric.weights;
  }
  check_blocks(metric, height, width);
  const Eigen::Index per_block = Eigen::Index(metric.block_size) * metric.block_size;
  Vector w(dx);
  for (Eigen::Index i = 0; i < dx; ++i) w[i] = metric.weights[i % per_block];
  return w;
}

BatchDistance::BatchDistance(const MetricHandle& metric, const ImageGrid& target)
    : metric_(metric), channels_(target.channels), height_(target.height), width_(target.width) {
  target_features_ = feature_transform(metric_, target.pixels, channels_, height_, width_).col(0);
  feature_weights_ = expanded_weights(metric_, channels_, height_, width_);
  if (metric_.kind != MetricKind::kWeightedFeature || metric_.transform == FeatureTransform::kIdentity)
    return;
  const int b = metric_.block_size;
  const Matrix t = block_transform(Matrix::Identity(b * b, b * b), 1, b, b, b, false);
  block_form_ = 2.0 * t.transpose() * metric_.weights.asDiagonal() * t;
  block_pixels_.reserve(std::size_t(target.size()));
  for (int c = 0; c < channels_; ++c)
    for (int by = 0; by < height_ / b; ++by)
      for (int bx = 0; bx < width_ / b; ++bx)
        for (int y = 0; y < b; ++y)
          for (int x = 0; x < b; ++x)
            block_pixels_.push_back(Eigen::Index(c) * height_ * width_ +
                                    Eigen::Index(by * b + y) * width_ + bx * b + x);
  target_features_ = target.pixels;
}

Vector BatchDistance::evaluate(const Matrix& images, Matrix* grads) const {
  if (images.rows() != target_features_.size())
    throw std::invalid_argument("distance: image shape mismatch");
  if (block_form_.size()) {
    // Gather every block of every column into one 64 x (blocks * cols) matrix.
    const Eigen::Index bb = block_form_.rows();
    const Eigen::Index blocks = images.rows() / bb;
    Matrix diff(bb, blocks * images.cols());
    for (Eigen::Index col = 0; col < images.cols(); ++col)
      for (Eigen::Index k = 0; k < images.rows(); ++k) {
        const Eigen::Index p = block_pixels_[std::size_t(k)];
        diff(k % bb, col * blocks + k / bb) = images(p, col) - target_features_[p];
      }
    const Matrix g = block_form_ * diff;
    const Vector per_block = diff.cwiseProduct(g).colwise().sum().transpose();
    Vector value(images.cols());
    for (Eigen::Index col = 0; col < images.cols(); ++col)
      value[col] = 0.5 * per_block.segment(col * blocks, blocks).sum();
    if (grads) {
      grads->resize(images.rows(), images.cols());
      for (Eigen::Index col = 0; col < images.cols(); ++col)
        for (Eigen::Index k = 0; k < images.rows(); ++k)
          (*grads)(block_pixels_[std::size_t(k)], col) = g(k % bb, col * blocks + k / bb);
    }
    return value;
  }
  const Matrix diff =
      feature_transform(metric_, images, channels_, height_, width_).colwise() - target_features_;
  const Matrix weighted = feature_weights_.asDiagonal() * diff;
  if (grads)
    *grads = 2.0 * inverse_feature_transform(metric_, weighted, channels_, height_, width_);
  return diff.cwiseProduct(weighted).colwise().sum().transpose();
}

double distance(const MetricHandle& metric, const ImageGrid& a, const ImageGrid& b,
                Vector* grad_a) {
  require_same_shape(a, b, "distance");
  BatchDistance batch(metric, b);
  Matrix grads;
  const Vector value = batch.evaluate(a.pixels, grad_a ? &grads : nullptr);
  if (grad_a) *grad_a = grads.col(0);
  return value[0];
}

void save_metric(const MetricHandle& metric, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "kind=" << (metric.kind == MetricKind::kL2 ? "l2" : "weighted_feature") << '\n';
  os << "feature_transform="
     << (metric.transform == FeatureTransform::kIdentity ? "identity" : "block_dct") << '\n';
  os << "block_size=" << metric.block_size << '\n';
  os << "attack_set=" << metric.description << '\n';
  os << "weights=" << metric.weights.size() << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < metric.weights.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%a", metric.weights[i]);
    os << buf << '\n';
  }
}

MetricHandle load_metric(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  auto header = [&](const std::string& name) {
    if (!std::getline(is, line) || line.rfind(name + "=", 0) != 0)
      throw std::runtime_error("metric file: missing " + name);
    return line.substr(name.size() + 1);
  };
  const std::string kind = header("kind");
  const std::string transform = header("feature_transform");
  const int block = std::stoi(header("block_size"));
  const std::string description = header("attack_set");
  const int count = std::stoi(header("weights"));
  if (kind == "l2") {
    MetricHandle m = MetricHandle::l2();
    m.description = description;
    return m;
  }
  Vector w(count);
  for (int i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw std::runtime_error("metric file: truncated weights");
    w[i] = std::strtod(line.c_str(), nullptr);
  }
  MetricHandle m = MetricHandle::weighted(
      transform == "identity" ? FeatureTransform::kIdentity : FeatureTransform::kBlockDct, w, block);
  m.description = description;
  return m;
}

double ssim(const ImageGrid& a, const ImageGrid& b, double dynamic_range) {
  require_same_shape(a, b, "ssim");
  constexpr int kWindow = 11;
  constexpr double kSigma = 1.5;
  if (a.height < kWindow || a.width < kWindow)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  double window[kWindow][kWindow];
  double total = 0;
  for (int y = 0; y < kWindow; ++y)
    for (int x = 0; x < kWindow; ++x) {
      const double dy = y - kWindow / 2, dx = x - kWindow / 2;
      total += window[y][x] = std::exp(-(dx * dx + dy * dy) / (2 * kSigma * kSigma));
    }
  for (auto& row : window)
    for (double& v : row) v /= total;

  const double c1 = std::pow(0.01 * dynamic_range, 2), c2 = std::pow(0.03 * dynamic_range, 2);
  double sum = 0;
  int count = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int y0 = 0; y0 + kWindow <= a.height; ++y0)
      for (int x0 = 0; x0 + kWindow <= a.width; ++x0) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int y = 0; y < kWindow; ++y)
          for (int x = 0; x < kWindow; ++x) {
            const double w = window[y][x];
            const double va = a.at(c, y0 + y, x0 + x), vb = b.at(c, y0 + y, x0 + x);
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        ++count;
      }
  return sum / count;
}

double frechet_gaussian(const Matrix& samples_a, const Matrix& samples_b) {
  if (samples_a.rows() != samples_b.rows())
    throw std::invalid_argument("frechet_gaussian: feature dimensions differ");
  const Eigen::Index d = samples_a.rows();
  if (samples_a.cols() < d + 1 || samples_b.cols() < d + 1)
    throw std::invalid_argument("frechet_gaussian: each set needs at least dim + 1 samples");
  auto fit = [](const Matrix& s, Vector& mean, Matrix& cov) {
    mean = s.rowwise().mean();
    const Matrix c = s.colwise() - mean;
    cov = c * c.transpose() / double(s.cols() - 1);
  };
  Vector ma, mb;
  Matrix sa, sb;
  fit(samples_a, ma, sa);
  fit(samples_b, mb, sb);

  // tr (S_a S_b)^(1/2) = tr (S_a^(1/2) S_b S_a^(1/2))^(1/2), a symmetric PSD root.
  const SymmetricEigen ea = symmetric_eigen(sa);
  const Matrix root_a =
      ea.vectors * ea.values.cwiseMax(0.0).cwiseSqrt().asDiagonal() * ea.vectors.transpose();
  const SymmetricEigen em = symmetric_eigen(root_a * sb * root_a);
  const double trace_root = em.values.cwiseMax(0.0).cwiseSqrt().sum();
  const double fd = (ma - mb).squaredNorm() + sa.trace() + sb.trace() - 2.0 * trace_root;
  return std::max(0.0, fd);
}

FeatureMap::FeatureMap(int d_x, std::uint64_t seed) : d_x_(d_x) {
  if (d_x > 1024) {
    Rng rng = make_rng(seed);
    projection_ = Matrix(256, d_x);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(double(d_x)));
    for (Eigen::Index j = 0; j < projection_.cols(); ++j)
      for (Eigen::Index i = 0; i < projection_.rows(); ++i) projection_(i, j) = dist(rng);
  }
}

Matrix FeatureMap::apply(const Matrix& images) const {
  if (images.rows() != d_x_) throw std::invalid_argument("FeatureMap: dimension mismatch");
  return is_identity() ? images : Matrix(projection_ * images);
}

int FeatureMap::output_dim() const { return is_identity() ? d_x_ : int(projection_.rows()); }

QualityReport quality_report(const Matrix& fingerprinted, const Matrix& reference, int channels,
                             int height, int width, PixelRange range) {
  if (fingerprinted.rows() != reference.rows())
    throw std::invalid_argument("quality_report: image sizes differ");
  QualityReport q;
  const FeatureMap features(int(fingerprinted.rows()));
  q.frechet_distance = frechet_gaussian(features.apply(fingerprinted), features.apply(reference));
  const Eigen::Index n = std::min(fingerprinted.cols(), reference.cols());
  std::vector<double> values(n);
  for (Eigen::Index i = 0; i < n; ++i)
    values[i] = ssim(ImageGrid(channels, height, width, fingerprinted.col(i)),
                     ImageGrid(channels, height, width, reference.col(i)), range.width());
  q.sample_count = int(n);
  if (n > 0) {
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / double(n);
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    q.ssim_mean = mean;
    q.ssim_std = n > 1 ? std::sqrt(var / double(n - 1)) : 0.0;
  }
  return q;
}

TrainedMetric train_robust_metric(const Generator& gen, const FingerprintConfig& cfg,
                                  const std::vector<PostprocessSpec>& attack_set, int n_triplets,
                                  std::uint64_t rng_seed, const RobustMetricOptions& options) {
  if (attack_set.empty()) throw std::invalid_argument("train_robust_metric: empty attack set");
  if (n_triplets < 2) throw std::invalid_argument("train_robust_metric: need at least 2 triplets");
  for (const auto& a : attack_set) validate(a);
  const GeneratorSpec& spec = gen.spec();
  const int b = 8;
  if (spec.image_h % b || spec.image_w % b)
    throw std::invalid_argument("train_robust_metric: image size must be a multiple of 8");
  const int per_block = b * b;
  const int blocks = spec.channels * (spec.image_h / b) * (spec.image_w / b);
  MetricHandle shape = MetricHandle::weighted(FeatureTransform::kBlockDct, Vector::Ones(per_block), b);

  // Squared feature differences per triplet, one column per block patch.
  struct Triplet {
    Matrix d0, d1;  // per_block x blocks
  };
  std::vector<Triplet> triplets;
  TrainedMetric result;
  for (int t = 0; t < n_triplets; ++t) {
    const std::uint64_t ts = derive_seed(rng_seed, std::uint64_t(t));
    const Vector z = sample_seed(gen.d_z(), ts, 0);
    Rng key_rng = make_rng(derive_seed(ts, 1));
    Key key;
    key.bits.resize(cfg.d_phi());
    for (auto& bit : key.bits) bit = std::uint8_t(key_rng() >> 63);
    const ImageGrid x = gen.evaluate(gen.map_latent(z).w);
    const ImageGrid p0 = generate_fingerprinted(gen, cfg, z, key);
    const PostprocessSpec& attack = attack_set[std::size_t(t) % attack_set.size()];
    const ImageGrid p1 = apply(attack, x, derive_seed(ts, 2), spec.output_range);
    if (p0.pixels == p1.pixels) {
      ++result.triplets_skipped;
      continue;
    }
    Matrix imgs(x.size(), 3);
    imgs << x.pixels, p0.pixels, p1.pixels;
    const Matrix f = feature_transform(shape, imgs, spec.channels, spec.image_h, spec.image_w);
    const Vector e0 = (f.col(0) - f.col(1)).array().square();
    const Vector e1 = (f.col(0) - f.col(2)).array().square();
    Triplet tr;
    tr.d0 = Eigen::Map<const Matrix>(e0.data(), per_block, blocks);
    tr.d1 = Eigen::Map<const Matrix>(e1.data(), per_block, blocks);
    triplets.push_back(std::move(tr));
  }
  result.triplets_used = int(triplets.size());
  const int n_train =
      std::max(1, int(std::lround(double(triplets.size()) * (1.0 - options.holdout_fraction))));

  // Training patches.
  std::vector<std::pair<Vector, Vector>> patches;
  for (int t = 0; t < std::min<int>(n_train, int(triplets.size())); ++t)
    for (int k = 0; k < blocks; ++k) {
      if (triplets[t].d0.col(k) == triplets[t].d1.col(k)) continue;
      patches.emplace_back(triplets[t].d0.col(k), triplets[t].d1.col(k));
    }

  Vector w = Vector::Ones(per_block);
  Vector m = Vector::Zero(per_block), v = Vector::Zero(per_block);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Rng shuffle_rng = make_rng(derive_seed(rng_seed, 0xfeed));
  std::vector<std::size_t> order(patches.size());
  std::iota(order.begin(), order.end(), 0);
  int step = 0;
  for (int epoch = 0; epoch < options.epochs && !patches.empty(); ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(options.batch_size));
      Vector grad = Vector::Zero(per_block);
      for (std::size_t i = start; i < stop; ++i) {
        const auto& [d0, d1] = patches[order[i]];
        const double a0 = w.dot(d0), a1 = w.dot(d1), s = a0 + a1;
        if (s <= 0) continue;
        const double r = (a1 - a0) / s;
        if (options.margin + r <= 0) continue;
        grad += ((d1 - d0) * s - (a1 - a0) * (d0 + d1)) / (s * s);
      }
      grad /= double(stop - start);
      ++step;
      m = kBeta1 * m + (1 - kBeta1) * grad;
      v = kBeta2 * v + (1 - kBeta2) * grad.cwiseProduct(grad);
      const Vector mhat = m / (1 - std::pow(kBeta1, step));
      const Vector vhat = v / (1 - std::pow(kBeta2, step));
      w -= options.learning_rate * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + kEps).matrix());
      w = w.cwiseMax(0.0);
      const double mean = w.mean();
      w = mean > 0 ? Vector(w / mean) : Vector(Vector::Ones(per_block));
    }
  }

  auto ranking_accuracy = [&](int begin, int end) {
    if (end <= begin) return 0.0;
    int correct = 0;
    for (int t = begin; t < end; ++t)
      correct += (w.transpose() * triplets[t].d1).sum() < (w.transpose() * triplets[t].d0).sum();
    return double(correct) / double(end - begin);
  };
  const int total = int(triplets.size());
  result.train_ranking_accuracy = ranking_accuracy(0, std::min(n_train, total));
  result.heldout_ranking_accuracy =
      n_train < total ? ranking_accuracy(n_train, total) : result.train_ranking_accuracy;
  result.metric = MetricHandle::weighted(FeatureTransform::kBlockDct, w, b);
  std::ostringstream desc;
  for (std::size_t i = 0; i < attack_set.size(); ++i) desc << (i ? "|" : "") << describe(attack_set[i]);
  result.metric.description = desc.str();
  return result;
}

}  // namespace latentfp
