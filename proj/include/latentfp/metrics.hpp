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

// Image distances and quality metrics: squared l2, a weighted feature
// distance over blockwise DCT coefficients (trainable by triplet ranking to
// ignore a known family of postprocesses), SSIM and the Frechet distance
// between Gaussian fits of two feature populations.

#ifndef LATENTFP_METRICS_HPP_
#define LATENTFP_METRICS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "latentfp/fingerprint.hpp"
#include "latentfp/generator.hpp"
#include "latentfp/postprocess.hpp"
#include "latentfp/types.hpp"

namespace latentfp {

enum class MetricKind { kL2, kWeightedFeature };
enum class FeatureTransform { kIdentity, kBlockDct };

struct MetricHandle {
  MetricKind kind = MetricKind::kL2;
  FeatureTransform transform = FeatureTransform::kIdentity;
  int block_size = 8;
  /// One weight per feature class: per pixel for kIdentity, per (v, u)
  /// frequency of a block for kBlockDct (row-major, v * block + u).
  Vector weights;
  /// Free-form provenance, e.g. the attack set a metric was trained on.
  std::string description;

  static MetricHandle l2();
  static MetricHandle weighted(FeatureTransform transform, Vector weights, int block_size = 8);
};

/// Features of every column of `images` (each a (c, h, w) image).
Matrix feature_transform(const MetricHandle& metric, const Matrix& images, int channels,
                         int height, int width);
/// Inverse (= transpose) of feature_transform.
Matrix inverse_feature_transform(const MetricHandle& metric, const Matrix& features, int channels,
                                 int height, int width);
/// Weight of every feature of a (c, h, w) image.
Vector expanded_weights(const MetricHandle& metric, int channels, int height, int width);

/// distance(a, b); if grad_a is given it receives d distance / d a.
double distance(const MetricHandle& metric, const ImageGrid& a, const ImageGrid& b,
                Vector* grad_a = nullptr);

/// Columnwise distances of `images` to `target`, with gradients.
class BatchDistance {
 public:
  BatchDistance(const MetricHandle& metric, const ImageGrid& target);
  Vector evaluate(const Matrix& images, Matrix* grads) const;

 private:
  MetricHandle metric_;
  int channels_, height_, width_;
  Vector target_features_;
  Vector feature_weights_;
  // Block DCT metrics: pixel indices in block order and the per-block form
  // 2 T^T diag(w) T, shared by every block.
  std::vector<Eigen::Index> block_pixels_;
  Matrix block_form_;
};

void save_metric(const MetricHandle& metric, const std::filesystem::path& path);
MetricHandle load_metric(const std::filesystem::path& path);

/// Mean SSIM over all 11x11 Gaussian (sigma 1.5) windows that fit in the
/// image, averaged over channels. dynamic_range is L in C1 = (0.01 L)^2,
/// C2 = (0.03 L)^2.
double ssim(const ImageGrid& a, const ImageGrid& b, double dynamic_range = 1.0);

/// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)) between Gaussian
/// fits of the columns of a and b.
double frechet_gaussian(const Matrix& samples_a, const Matrix& samples_b);

/// Identity for d_x <= 1024, otherwise a seeded Gaussian projection to 256
/// dimensions.
class FeatureMap {
 public:
  FeatureMap(int d_x, std::uint64_t seed = 0x5eed);
  Matrix apply(const Matrix& images) const;
  bool is_identity() const { return projection_.size() == 0; }
  int output_dim() const;

 private:
  int d_x_;
  Matrix projection_;
};

struct QualityReport {
  double frechet_distance = 0.0;
  double ssim_mean = 0.0;
  double ssim_std = 0.0;
  int sample_count = 0;
};

/// Frechet distance between the two image sets and paired SSIM of
/// fingerprinted[:, i] against reference[:, i].
QualityReport quality_report(const Matrix& fingerprinted, const Matrix& reference, int channels,
                             int height, int width, PixelRange range);

struct RobustMetricOptions {
  int epochs = 60;
  int batch_size = 64;
  double learning_rate = 0.02;
  double margin = 0.1;
  double holdout_fraction = 0.2;
};

struct TrainedMetric {
  MetricHandle metric;
  double train_ranking_accuracy = 0.0;
  double heldout_ranking_accuracy = 0.0;
  int triplets_used = 0;
  int triplets_skipped = 0;
};

/// Learns nonnegative per-frequency block-DCT weights from triplets
/// (x, p0, p1): x = g(psi(z)), p0 its fingerprinted version under a random
/// key, p1 = T(x) for T drawn from attack_set. The margin ranking loss asks
/// for d(x, p1) < d(x, p0) on 8x8 block patches.
TrainedMetric train_robust_metric(const Generator& gen, const FingerprintConfig& cfg,
                                  const std::vector<PostprocessSpec>& attack_set, int n_triplets,
                                  std::uint64_t rng_seed, const RobustMetricOptions& options = {});

}  // namespace latentfp

#endif  // LATENTFP_METRICS_HPP_
