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

#include "latentfp/rng.hpp"
#include "latentfp/theory.hpp"
#include "test_util.hpp"

namespace latentfp {
namespace {

using testing::default_generator;
using testing::default_stats;

Vector unit_error(int n, double norm, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Vector e = standard_normal(rng, n);
  return e * (norm / e.norm());
}

struct Affine {
  Generator gen;
  LatentStats stats;
};

const Affine& affine() {
  static const Affine a = [] {
    Generator g = testing::random_affine(12, 12, 5, 5, 31);
    LatentStats s = estimate_stats(g, 4000, 32);
    return Affine{g, s};
  }();
  return a;
}

TEST(KeyError, AffineMatchesExactMinimizer) {
  const Affine& a = affine();
  const FingerprintBasis basis = select_basis(a.stats, 8, 12);
  const Matrix h = a.gen.affine_matrix().transpose() * a.gen.affine_matrix();
  const Vector e = unit_error(8, 0.3, 1);
  for (double sigma : {0.01, 0.1, 1.0, 10.0}) {
    Prop1Options opt;
    opt.n_alpha_samples = 20;
    opt.rng_seed = 5;
    const Prop1Report r = check_prop1(a.gen, basis, sigma, e, opt);
    const Vector oracle = -(sigma * basis.V.transpose() * h * basis.V)
                               .ldlt()
                               .solve(basis.V.transpose() * h * basis.U * e);
    EXPECT_LE((r.predicted_phi_error - oracle).norm(), 1e-9 * (1 + oracle.norm())) << sigma;
    EXPECT_LE(r.relative_gap, 1e-6) << sigma;
    EXPECT_NEAR((r.stated_phi_error * sigma - r.predicted_phi_error).norm(), 0.0,
                1e-12 * (1 + oracle.norm()));
  }
}

TEST(KeyError, ZeroContentErrorGivesZeroKeyError) {
  const Affine& a = affine();
  const FingerprintBasis basis = select_basis(a.stats, 8, 12);
  const Prop1Report r = check_prop1(a.gen, basis, 1.0, Vector::Zero(8));
  EXPECT_EQ(r.predicted_phi_error.norm(), 0.0);
  EXPECT_LE(r.measured_phi_error.norm(), 1e-12);
}

TEST(KeyError, HomogeneityInSigma) {
  const FingerprintBasis basis = select_basis(default_stats(), 48, 64);
  const Vector e = unit_error(48, 0.05, 2);
  Prop1Options opt;
  opt.n_alpha_samples = 40;
  opt.rng_seed = 3;
  opt.phi = Vector::Zero(16);
  // H is taken at the fingerprinted latents, so fix phi = 0 to keep it
  // independent of sigma.
  const Prop1Report r1 = check_prop1(default_generator(), basis, 0.5, e, opt);
  const Prop1Report r2 = check_prop1(default_generator(), basis, 1.0, e, opt);
  EXPECT_NEAR((r2.predicted_phi_error - r1.predicted_phi_error / 2).norm(), 0.0,
              1e-10 * r1.predicted_phi_error.norm());
  EXPECT_NEAR((r2.stated_phi_error - r1.stated_phi_error / 4).norm(), 0.0,
              1e-10 * r1.stated_phi_error.norm());
}

TEST(KeyError, MinorDirectionsAmplifyContentError) {
  // Pixels = latent scaled per axis, so the mean Gram matrix equals the
  // latent covariance. Cross terms come from estimating the eigenvectors.
  Vector scale(12);
  for (int i = 0; i < 12; ++i) scale[i] = std::pow(0.6, i);
  const Matrix D = scale.asDiagonal();
  const Generator g = Generator::from_affine(D, Vector::Zero(12), D, Vector::Zero(12), 3, 4);
  const LatentStats st = estimate_stats(g, 500, 15);
  const FingerprintBasis major = select_basis(st, 0, 4), minor = select_basis(st, 8, 12);
  for (int s = 0; s < 5; ++s) {
    Prop1Options opt;
    opt.n_alpha_samples = 10;
    opt.rng_seed = 4 + s;
    const Prop1ScalingReport r = check_prop1_scaling(g, major, minor, 1.0, unit_error(8, 0.1, 10 + s), opt);
    EXPECT_GE(r.minor_error_norm, r.major_error_norm) << s;
    EXPECT_GT(r.minor_error_norm, 10 * r.major_error_norm) << s;
  }
}

TEST(KeyError, NonlinearSmallErrorAgreesWithLinearization) {
  const FingerprintBasis basis = select_basis(default_stats(), 48, 64);
  Prop1Options opt;
  opt.n_alpha_samples = 50;
  opt.rng_seed = 6;
  for (double sigma : {0.5, 1.0}) {
    const Prop1Report r = check_prop1(default_generator(), basis, sigma, unit_error(48, 1e-3, 7), opt);
    EXPECT_LE(r.relative_gap, 0.2) << sigma;
    EXPECT_GT(r.measured_phi_error.norm(), 0.0);
  }
}

TEST(KeyError, RejectsBadArguments) {
  const Affine& a = affine();
  const FingerprintBasis basis = select_basis(a.stats, 8, 12);
  EXPECT_THROW(check_prop1(a.gen, basis, 0.0, Vector::Zero(8)), std::invalid_argument);
  EXPECT_THROW(check_prop1(a.gen, basis, 1.0, Vector::Zero(7)), std::invalid_argument);
}

TEST(KeyError, UnobservableSubspaceIsReported) {
  // Columns of A orthogonal to the fingerprint directions make V^T H V zero.
  const Affine& a = affine();
  const FingerprintBasis basis = select_basis(a.stats, 8, 12);
  Matrix A = a.gen.affine_matrix();
  A -= A * basis.V * basis.V.transpose();
  const Generator g = Generator::from_affine(A, Vector::Zero(25), Matrix::Identity(12, 12),
                                             Vector::Zero(12), 5, 5);
  EXPECT_THROW(check_prop1(g, basis, 1.0, Vector::Zero(8)), SingularSubspaceError);
}

TEST(QualityBounds, AffineClosedFormAgreesWithSampling) {
  const Affine& a = affine();
  const FingerprintBasis basis = select_basis(a.stats, 8, 12);
  Prop2Options opt;
  opt.rng_seed = 9;
  const double sigma = 0.7;
  const Prop2Report r = check_prop2(a.gen, basis, sigma, opt);
  ASSERT_TRUE(r.closed_form);
  EXPECT_EQ(r.tau_mean, 0.0);
  const Matrix& A = a.gen.affine_matrix();
  EXPECT_NEAR(r.mean_gap_lhs, sigma * sigma * (A * basis.V * r.phi).squaredNorm(), 1e-12);

  // Sampled trace gap of the two image distributions.
  const int n = 40000;
  Rng rng = make_rng(10);
  Matrix x0(25, n), x1(25, n);
  for (int i = 0; i < n; ++i) {
    const Vector al = basis.lambda_u.cwiseMax(0).cwiseSqrt().cwiseProduct(standard_normal(rng, 8));
    const Vector be = basis.lambda_v.cwiseMax(0).cwiseSqrt().cwiseProduct(standard_normal(rng, 4));
    const Vector wu = basis.center + basis.U * al;
    x0.col(i) = a.gen.evaluate(wu + basis.V * be).pixels;
    x1.col(i) = a.gen.evaluate(wu + sigma * basis.V * r.phi).pixels;
  }
  auto trace = [](const Matrix& x) {
    const Matrix c = x.colwise() - x.rowwise().mean();
    return c.squaredNorm() / double(x.cols() - 1);
  };
  EXPECT_NEAR(trace(x0) - trace(x1), r.trace_gap_lhs, 0.03 * r.trace_gap_lhs);
  EXPECT_NEAR(r.gamma_U_max, symmetric_eigen(A.transpose() * A).values.maxCoeff(), 1e-10);
}

TEST(QualityBounds, AffineBoundsHoldAcrossSigmaAndWidth) {
  const Affine& a = affine();
  for (int d_phi : {1, 2, 4, 8}) {
    const FingerprintBasis basis = select_basis(a.stats, 12 - d_phi, 12);
    for (double sigma : {0.0, 0.1, 1.0, 10.0}) {
      Prop2Options opt;
      opt.rng_seed = 11 + d_phi;
      const Prop2Report r = check_prop2(a.gen, basis, sigma, opt);
      EXPECT_TRUE(r.holds_mean) << d_phi << " " << sigma;
      EXPECT_TRUE(r.holds_trace) << d_phi << " " << sigma;
    }
  }
}

TEST(QualityBounds, NoFingerprintNoGap) {
  const Affine& a = affine();
  Prop2Options opt;
  opt.lambda_v_scale = 0;
  const Prop2Report r = check_prop2(a.gen, select_basis(a.stats, 8, 12), 0.0, opt);
  EXPECT_EQ(r.mean_gap_lhs, 0.0);
  EXPECT_EQ(r.trace_gap_lhs, 0.0);
}

TEST(QualityBounds, BoundGrowsWithWidth) {
  double prev = -1;
  for (int d_phi = 1; d_phi <= 32; d_phi *= 2) {
    Prop2Options opt;
    opt.n_mc = 200;
    opt.n_gram = 20;
    opt.rng_seed = 12;
    const Prop2Report r =
        check_prop2(default_generator(), select_basis(default_stats(), 64 - d_phi, 64), 0.5, opt);
    EXPECT_GT(r.mean_gap_bound - r.tau_mean, prev);
    prev = r.mean_gap_bound - r.tau_mean;
  }
}

TEST(QualityBounds, NonlinearHoldsWithSlack) {
  Prop2Options opt;
  opt.n_mc = 500;
  opt.n_gram = 50;
  opt.rng_seed = 13;
  opt.jobs = 2;
  const Prop2Repetitions r = check_prop2_repeated(
      default_generator(), select_basis(default_stats(), 48, 64), 1.0, 10, opt);
  EXPECT_EQ(r.both_hold, 10);
}

TEST(QualityBounds, RejectsBadArguments) {
  const Affine& a = affine();
  const FingerprintBasis basis = select_basis(a.stats, 8, 12);
  Prop2Options opt;
  opt.eta = 1.5;
  EXPECT_THROW(check_prop2(a.gen, basis, 1.0, opt), std::invalid_argument);
  opt.eta = 0.05;
  EXPECT_THROW(check_prop2(a.gen, basis, -1.0, opt), std::invalid_argument);
  opt.tau = -1;
  EXPECT_THROW(check_prop2(a.gen, basis, 1.0, opt), std::invalid_argument);
}

TEST(Alignment, RandomBaselineNearSubspaceFraction) {
  const GramAlignmentReport r = check_gram_alignment(default_generator(), default_stats(), 8, 30, 400, 14);
  EXPECT_NEAR(r.random_mean, 8.0 / 64.0, 0.01);
  EXPECT_GE(r.mean_squared_cosine, 0.0);
  EXPECT_LE(r.mean_squared_cosine, 1.0);
  EXPECT_THROW(check_gram_alignment(default_generator(), default_stats(), 0, 30, 10, 1),
               std::invalid_argument);
}

TEST(Reports, RenderAsJsonLines) {
  const Affine& a = affine();
  const FingerprintBasis basis = select_basis(a.stats, 8, 12);
  const std::string s1 = to_string(check_prop1(a.gen, basis, 1.0, Vector::Zero(8)));
  const std::string s2 = to_string(check_prop2(a.gen, basis, 1.0));
  EXPECT_EQ(s1.front(), '{');
  EXPECT_NE(s1.find("\"relative_gap\""), std::string::npos);
  EXPECT_NE(s2.find("\"holds\":[true,true]"), std::string::npos);
  EXPECT_EQ(s1.find('\n'), std::string::npos);
}

}  // namespace
}  // namespace latentfp
