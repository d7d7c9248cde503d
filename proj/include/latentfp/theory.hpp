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

// Numerical checks of the two error/quality results for latent
// fingerprints:
//
//  * key error under a fixed content error: with alpha_hat = alpha + e_a
//    held fixed, the least-squares key estimate is off by
//      e_phi = -(sigma V^T H V)^-1 V^T H U e_a,   H = E_alpha[J^T J];
//  * quality: mean and trace gaps between images of unfingerprinted and
//    fingerprinted latents are bounded through the largest eigenvalue of
//    the mean Gram matrix restricted to the content subspace.

#ifndef LATENTFP_THEORY_HPP_
#define LATENTFP_THEORY_HPP_

#include <cstdint>
#include <optional>
#include <string>

#include "latentfp/generator.hpp"
#include "latentfp/spectral.hpp"
#include "latentfp/types.hpp"

namespace latentfp {

/// Thrown when V^T H V is numerically singular.
class SingularSubspaceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Prop1Options {
  int n_alpha_samples = 200;
  std::uint64_t rng_seed = 0;
  /// Key used to build H; a random binary key when unset.
  std::optional<Vector> phi;
  int max_iterations = 100;
  int jobs = 1;
};

struct Prop1Report {
  double sigma = 0.0;
  Vector injected_alpha_error;
  Vector phi;
  /// -(sigma V^T H V)^-1 V^T H U e_a: the exact minimizer of the quadratic
  /// model of the objective.
  Vector predicted_phi_error;
  /// The same expression with sigma^2 in place of sigma, as the result is
  /// usually stated; equals predicted / sigma.
  Vector stated_phi_error;
  Vector measured_phi_error;
  double absolute_gap = 0.0;
  /// ||predicted - measured|| / ||measured|| (absolute gap if measured is 0).
  double relative_gap = 0.0;
  double stated_relative_gap = 0.0;
  /// Smallest eigenvalue of V^T H V.
  double min_curvature = 0.0;
  int iterations = 0;
  int n_alpha_samples = 0;
};

Prop1Report check_prop1(const Generator& gen, const FingerprintBasis& basis, double sigma,
                        const Vector& epsilon_alpha, const Prop1Options& options = {});

struct Prop1ScalingReport {
  Prop1Report major;
  Prop1Report minor;
  double major_error_norm = 0.0;  // ||predicted e_phi|| for V = major PCs
  double minor_error_norm = 0.0;
};

Prop1ScalingReport check_prop1_scaling(const Generator& gen, const FingerprintBasis& basis_major,
                                       const FingerprintBasis& basis_minor, double sigma,
                                       const Vector& epsilon_alpha,
                                       const Prop1Options& options = {});

struct Prop2Options {
  int n_mc = 1000;
  /// Jacobians used for the mean Gram matrix and nu.
  int n_gram = 100;
  double eta = 0.05;
  /// Slack added to both bounds. Unset: 3 Monte Carlo standard errors of
  /// the respective gap (0 in the affine case, which is evaluated exactly).
  std::optional<double> tau;
  double tau_standard_errors = 3.0;
  /// beta ~ N(0, lambda_v_scale * diag(lambda_V)).
  double lambda_v_scale = 1.0;
  std::uint64_t rng_seed = 0;
  std::optional<Vector> phi;
  int jobs = 1;
};

struct Prop2Report {
  double sigma = 0.0;
  double lambda_V_max = 0.0;
  int d_phi = 0;
  double gamma_U_max = 0.0;
  double mean_gap_lhs = 0.0;
  double mean_gap_bound = 0.0;
  double trace_gap_lhs = 0.0;
  double trace_gap_bound = 0.0;
  double nu = 0.0;
  double tau_mean = 0.0;
  double tau_trace = 0.0;
  double mean_gap_se = 0.0;
  double trace_gap_se = 0.0;
  bool holds_mean = false;
  bool holds_trace = false;
  bool closed_form = false;
  int n_mc = 0;
  Vector phi;
};

Prop2Report check_prop2(const Generator& gen, const FingerprintBasis& basis, double sigma,
                        const Prop2Options& options = {});

struct Prop2Repetitions {
  int repetitions = 0;
  int both_hold = 0;
  int mean_holds = 0;
  int trace_holds = 0;
};

/// check_prop2 with seeds derive_seed(options.rng_seed, r), r < repetitions.
Prop2Repetitions check_prop2_repeated(const Generator& gen, const FingerprintBasis& basis,
                                      double sigma, int repetitions, const Prop2Options& options);

struct GramAlignmentReport {
  int k = 0;
  double mean_squared_cosine = 0.0;
  /// Median over random pairs of k-dimensional subspaces.
  double random_median = 0.0;
  double random_mean = 0.0;
  AlignmentReport alignment;
};

/// Compares the top-k eigenvectors of the latent covariance with those of
/// the mean Gram matrix E[J^T J] over w = psi(z).
GramAlignmentReport check_gram_alignment(const Generator& gen, const LatentStats& stats, int k,
                                         int n_gram, int n_random, std::uint64_t rng_seed,
                                         int jobs = 1);

/// One-line key=value rendering of the reports.
std::string to_string(const Prop1Report& r);
std::string to_string(const Prop2Report& r);

}  // namespace latentfp

#endif  // LATENTFP_THEORY_HPP_
