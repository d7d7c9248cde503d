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

#include <gtest/gtest.h>

#include <cmath>

#include "latentfp/fingerprint.hpp"
#include "latentfp/metrics.hpp"
#include "latentfp/postprocess.hpp"
#include "latentfp/rng.hpp"
#include "test_util.hpp"

namespace latentfp {
namespace {

using testing::default_generator;
using testing::default_stats;

ImageGrid random_image(std::uint64_t seed, int h = 16, int w = 16) {
  Rng rng = make_rng(seed);
  ImageGrid img(1, h, w);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.pixels[i] = uniform01(rng);
  return img;
}

MetricHandle random_weighted(std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Vector w(64);
  for (int i = 0; i < 64; ++i) w[i] = 0.1 + uniform01(rng);
  return MetricHandle::weighted(FeatureTransform::kBlockDct, w);
}

// Samples with mean exactly 0 and sample covariance exactly I.
Matrix whitened(int d, int n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Matrix x(d, n);
  for (int j = 0; j < n; ++j) x.col(j) = standard_normal(rng, d);
  x = x.colwise() - x.rowwise().mean();
  const Matrix cov = x * x.transpose() / double(n - 1);
  const Eigen::LLT<Matrix> llt(cov);
  return llt.matrixL().solve(x);
}

// Separable Gaussian filtering over the valid region, the usual way SSIM
// maps are computed; independent of the library's per-window loop.
double ssim_oracle(const ImageGrid& a, const ImageGrid& b, double L) {
  const int n = 11, H = a.height, W = a.width;
  std::vector<double> g(n);
  double s = 0;
  for (int i = 0; i < n; ++i) s += g[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2 * 1.5 * 1.5));
  for (double& v : g) v /= s;
  auto filt = [&](auto f) {
    Matrix rows(H, W - n + 1), out(H - n + 1, W - n + 1);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x + n <= W; ++x) {
        double acc = 0;
        for (int i = 0; i < n; ++i) acc += g[i] * f(y, x + i);
        rows(y, x) = acc;
      }
    for (int y = 0; y + n <= H; ++y)
      for (int x = 0; x + n <= W; ++x) {
        double acc = 0;
        for (int i = 0; i < n; ++i) acc += g[i] * rows(y + i, x);
        out(y, x) = acc;
      }
    return out;
  };
  const Matrix ma = filt([&](int y, int x) { return a.at(0, y, x); });
  const Matrix mb = filt([&](int y, int x) { return b.at(0, y, x); });
  const Matrix saa = filt([&](int y, int x) { return a.at(0, y, x) * a.at(0, y, x); });
  const Matrix sbb = filt([&](int y, int x) { return b.at(0, y, x) * b.at(0, y, x); });
  const Matrix sab = filt([&](int y, int x) { return a.at(0, y, x) * b.at(0, y, x); });
  const double c1 = std::pow(0.01 * L, 2), c2 = std::pow(0.03 * L, 2);
  double total = 0;
  for (Eigen::Index i = 0; i < ma.size(); ++i) {
    const double mu_a = ma.data()[i], mu_b = mb.data()[i];
    const double va = saa.data()[i] - mu_a * mu_a, vb = sbb.data()[i] - mu_b * mu_b;
    const double cov = sab.data()[i] - mu_a * mu_b;
    total += (2 * mu_a * mu_b + c1) * (2 * cov + c2) / ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
  }
  return total / double(ma.size());
}

TEST(Distance, L2Definition) {
  const ImageGrid a = random_image(1), b = random_image(2);
  EXPECT_NEAR(distance(MetricHandle::l2(), a, b), (a.pixels - b.pixels).squaredNorm(), 1e-12);
  EXPECT_EQ(distance(MetricHandle::l2(), a, a), 0.0);
  EXPECT_THROW(distance(MetricHandle::l2(), a, random_image(3, 8, 8)), std::invalid_argument);
}

TEST(Distance, UnitWeightsReduceToL2) {
  const ImageGrid a = random_image(1), b = random_image(2);
  const double l2 = distance(MetricHandle::l2(), a, b);
  const MetricHandle dct = MetricHandle::weighted(FeatureTransform::kBlockDct, Vector::Ones(64));
  const MetricHandle pix = MetricHandle::weighted(FeatureTransform::kIdentity, Vector::Ones(256));
  EXPECT_NEAR(distance(dct, a, b), l2, 1e-10);
  EXPECT_NEAR(distance(pix, a, b), l2, 1e-10);
}

TEST(Distance, WeightedMatchesFeatureSpaceSum) {
  const MetricHandle m = random_weighted(3);
  for (int c : {1, 3})
    for (int size : {16, 32}) {
      Rng rng = make_rng(40 + c + size);
      ImageGrid a(c, size, size), b(c, size, size);
      for (Eigen::Index i = 0; i < a.size(); ++i) a.pixels[i] = uniform01(rng), b.pixels[i] = uniform01(rng);
      const Vector fa = feature_transform(m, a.pixels, c, size, size).col(0);
      const Vector fb = feature_transform(m, b.pixels, c, size, size).col(0);
      double expect = 0;
      for (Eigen::Index k = 0; k < fa.size(); ++k) expect += m.weights[k % 64] * std::pow(fa[k] - fb[k], 2);
      EXPECT_NEAR(distance(m, a, b), expect, 1e-10 * expect) << c << " " << size;
    }
}

TEST(Distance, NonnegativeSymmetricZeroOnDiagonal) {
  const MetricHandle m = random_weighted(4);
  for (int i = 0; i < 5; ++i) {
    const ImageGrid a = random_image(10 + i), b = random_image(20 + i);
    EXPECT_GE(distance(m, a, b), 0.0);
    EXPECT_NEAR(distance(m, a, b), distance(m, b, a), 1e-12);
    EXPECT_LE(std::abs(distance(m, a, a)), 1e-12);
  }
}

TEST(Distance, GradientMatchesCentralDifferences) {
  for (const MetricHandle& m : {MetricHandle::l2(), random_weighted(5)}) {
    const ImageGrid a = random_image(6), b = random_image(7);
    Vector grad;
    distance(m, a, b, &grad);
    Rng rng = make_rng(8);
    for (int probe = 0; probe < 10; ++probe) {
      const Vector dir = standard_normal(rng, a.size());
      const double eps = 1e-5;
      ImageGrid ap = a, am = a;
      ap.pixels += eps * dir;
      am.pixels -= eps * dir;
      const double fd = (distance(m, ap, b) - distance(m, am, b)) / (2 * eps);
      EXPECT_NEAR(fd, grad.dot(dir), 1e-4 * std::abs(fd) + 1e-9);
    }
  }
}

TEST(Distance, BlockDctFeaturesMatchDirectTransform) {
  const ImageGrid a = random_image(9);
  const MetricHandle m = random_weighted(1);
  const Matrix f = feature_transform(m, a.pixels, 1, 16, 16);
  const Matrix& d = dct8_matrix();
  // Block (by=1, bx=0), frequency (v=2, u=5).
  Matrix block(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) block(y, x) = a.at(0, 8 + y, x);
  const Matrix coef = d * block * d.transpose();
  EXPECT_NEAR(f(2 * 64 + 2 * 8 + 5, 0), coef(2, 5), 1e-12);
  const Matrix back = inverse_feature_transform(m, f, 1, 16, 16);
  EXPECT_LE((back.col(0) - a.pixels).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Distance, RejectsBadWeights) {
  EXPECT_THROW(MetricHandle::weighted(FeatureTransform::kBlockDct, Vector::Zero(64)),
               std::invalid_argument);
  EXPECT_THROW(MetricHandle::weighted(FeatureTransform::kBlockDct, -Vector::Ones(64)),
               std::invalid_argument);
  EXPECT_THROW(MetricHandle::weighted(FeatureTransform::kBlockDct, Vector::Ones(10)),
               std::invalid_argument);
  const MetricHandle m = random_weighted(1);
  EXPECT_THROW(distance(m, random_image(1, 12, 12), random_image(2, 12, 12)), std::invalid_argument);
}

TEST(Distance, MetricFileRoundTrip) {
  const auto dir = testing::temp_dir("metric");
  MetricHandle m = random_weighted(3);
  m.description = "blurring[b25x2]";
  save_metric(m, dir / "m.txt");
  const MetricHandle back = load_metric(dir / "m.txt");
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.description, m.description);
  EXPECT_EQ(back.transform, FeatureTransform::kBlockDct);
  EXPECT_EQ(back.block_size, 8);
}

TEST(Ssim, IdentityAndConstants) {
  const ImageGrid a = random_image(1);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  ImageGrid c(1, 16, 16);
  c.pixels.setConstant(0.3);
  EXPECT_NEAR(ssim(c, c), 1.0, 1e-12);
}

TEST(Ssim, AntiCorrelatedIsNegative) {
  ImageGrid a(1, 16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) a.at(0, y, x) = (x + y) % 2;
  ImageGrid b = a;
  b.pixels = (1.0 - a.pixels.array()).matrix();
  EXPECT_LT(ssim(a, b), 0.0);
}

TEST(Ssim, MatchesSeparableOracle) {
  for (int i = 0; i < 4; ++i) {
    const ImageGrid a = random_image(30 + i, 16, 20), b = random_image(40 + i, 16, 20);
    ImageGrid mix = a;
    mix.pixels = 0.7 * a.pixels + 0.3 * b.pixels;
    EXPECT_NEAR(ssim(a, mix), ssim_oracle(a, mix, 1.0), 1e-12);
    EXPECT_NEAR(ssim(a, b, 2.0), ssim_oracle(a, b, 2.0), 1e-12);
  }
}

TEST(Ssim, AffineIntensityInvariance) {
  const ImageGrid a = random_image(1), b = random_image(2);
  ImageGrid a2 = a, b2 = b;
  a2.pixels = 3.0 * a.pixels;
  b2.pixels = 3.0 * b.pixels;
  // The range scales with the intensities. An offset is not invariant: it
  // moves the luminance term.
  EXPECT_NEAR(ssim(a2, b2, 3.0), ssim(a, b, 1.0), 1e-12);
  a2.pixels.array() += 0.5;
  b2.pixels.array() += 0.5;
  EXPECT_GT(std::abs(ssim(a2, b2, 3.0) - ssim(a, b, 1.0)), 1e-6);
}

TEST(Ssim, RangeAndErrors) {
  const double v = ssim(random_image(1), random_image(2));
  EXPECT_GE(v, -1.0);
  EXPECT_LE(v, 1.0);
  EXPECT_THROW(ssim(random_image(1, 8, 8), random_image(2, 8, 8)), std::invalid_argument);
}

TEST(Frechet, IdenticalSetsGiveZero) {
  const Matrix s = whitened(5, 40, 1) * 0.7;
  EXPECT_LE(frechet_gaussian(s, s), 1e-8);
}

TEST(Frechet, OneDimensionalMeanShift) {
  const Matrix s = whitened(1, 30, 2);
  const Matrix t = s.array() + 1.7;
  EXPECT_NEAR(frechet_gaussian(s, t), 1.7 * 1.7, 1e-10);
}

TEST(Frechet, IsotropicScaleClosedForm) {
  const int d = 6;
  const Matrix s = whitened(d, 50, 3);
  // N(0, I) vs N(0, 4I): tr I + tr 4I - 2 tr 2I = d.
  EXPECT_NEAR(frechet_gaussian(s, 2.0 * s), double(d), 1e-9);
}

TEST(Frechet, RotationInvariant) {
  Rng rng = make_rng(4);
  Matrix a(4, 30), b(4, 30);
  for (int j = 0; j < 30; ++j) {
    a.col(j) = standard_normal(rng, 4);
    b.col(j) = 1.5 * standard_normal(rng, 4) + Vector::Constant(4, 0.3);
  }
  Matrix r(4, 4);
  for (int j = 0; j < 4; ++j) r.col(j) = standard_normal(rng, 4);
  const Matrix q = Eigen::HouseholderQR<Matrix>(r).householderQ();
  EXPECT_NEAR(frechet_gaussian(q * a, q * b), frechet_gaussian(a, b), 1e-6);
  EXPECT_GE(frechet_gaussian(a, b), 0.0);
}

TEST(Frechet, TooFewSamplesRejected) {
  EXPECT_THROW(frechet_gaussian(Matrix::Zero(5, 5), Matrix::Zero(5, 10)), std::invalid_argument);
}

TEST(Frechet, FeatureMapIdentityUpTo1024) {
  EXPECT_TRUE(FeatureMap(1024).is_identity());
  const FeatureMap big(2048);
  EXPECT_FALSE(big.is_identity());
  EXPECT_EQ(big.output_dim(), 256);
  EXPECT_EQ(big.apply(Matrix::Ones(2048, 3)).rows(), 256);
}

FingerprintConfig minor_config() {
  return make_fingerprint_config(select_basis(default_stats(), 48, 64), 1.0);
}

TEST(RobustMetric, IdentityAttackKeepsUniformWeights) {
  const TrainedMetric tm = train_robust_metric(default_generator(), minor_config(),
                                               {PostprocessSpec{}}, 20, 1);
  EXPECT_LE((tm.metric.weights - Vector::Ones(64)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(tm.heldout_ranking_accuracy, 1.0);
}

double band_mean(const Vector& w, int lo, int hi) {
  double s = 0;
  int n = 0;
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u)
      if (u + v >= lo && u + v <= hi) s += w[v * 8 + u], ++n;
  return s / n;
}

TEST(RobustMetric, NoiseTrainingDownweightsHighFrequencies) {
  const TrainedMetric tm = train_robust_metric(default_generator(), minor_config(),
                                               {strongest(AttackKind::kNoising)}, 200, 2);
  EXPECT_LT(band_mean(tm.metric.weights, 11, 14), band_mean(tm.metric.weights, 0, 3));
  EXPECT_GE(tm.heldout_ranking_accuracy, 0.8);
  EXPECT_GE(tm.metric.weights.minCoeff(), 0.0);
  EXPECT_EQ(tm.metric.description, "noising[n0.1]");
}

TEST(RobustMetric, DeterministicGivenSeed) {
  const auto a = train_robust_metric(default_generator(), minor_config(),
                                     {strongest(AttackKind::kJpeg)}, 40, 3);
  const auto b = train_robust_metric(default_generator(), minor_config(),
                                     {strongest(AttackKind::kJpeg)}, 40, 3);
  EXPECT_EQ(a.metric.weights, b.metric.weights);
}

TEST(Quality, ReportOnIdenticalSets) {
  const Matrix s = whitened(4, 10, 1).array() * 0.1 + 0.5;
  // 2x2 images are too small for SSIM, so use 16x16 below for that part.
  EXPECT_THROW(quality_report(s, s, 1, 2, 2, {}), std::invalid_argument);
  Matrix imgs(256, 300);
  for (int j = 0; j < 300; ++j) imgs.col(j) = random_image(100 + j).pixels;
  const QualityReport q = quality_report(imgs, imgs, 1, 16, 16, {});
  EXPECT_LE(q.frechet_distance, 1e-6);
  EXPECT_NEAR(q.ssim_mean, 1.0, 1e-12);
  EXPECT_EQ(q.sample_count, 300);
}

}  // namespace
}  // namespace latentfp
