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

// Latent statistics: sample mean and covariance of w = psi(z), their
// principal components, fingerprint bases PC[i:j], mean Gram matrices of
// the generator Jacobian and principal-angle subspace comparison.

#ifndef LATENTFP_SPECTRAL_HPP_
#define LATENTFP_SPECTRAL_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "latentfp/generator.hpp"
#include "latentfp/types.hpp"

namespace latentfp {

struct LatentStats {
  Vector mean;
  Matrix covariance;
  std::int64_t sample_count = 0;
  std::uint64_t seed = 0;
  /// Descending; tiny negative round-off is clamped to zero.
  Vector eigenvalues;
  /// Orthonormal columns aligned with `eigenvalues`, each with its
  /// largest-magnitude entry positive.
  Matrix eigenvectors;
  /// Per-component extremes of the centered samples' coordinates.
  Vector projection_min;
  Vector projection_max;

  int dim() const { return int(mean.size()); }
};

struct SymmetricEigen {
  Vector values;   // descending
  Matrix vectors;  // columns, sign-normalized
};

/// Eigendecomposition of (m + m^T)/2, sorted descending, with the
/// deterministic sign convention used throughout the library.
SymmetricEigen symmetric_eigen(const Matrix& m);

/// Unbiased mean/covariance and eigendecomposition of the columns of
/// `samples` (d_w x n). Requires n >= d_w + 1.
LatentStats stats_from_samples(const Matrix& samples, std::uint64_t seed = 0);

/// Draws n_samples seeds z ~ N(0, I) (sample i from substream i of
/// rng_seed), maps them through psi and summarizes.
LatentStats estimate_stats(const Generator& gen, int n_samples, std::uint64_t rng_seed,
                           int jobs = 1);

/// The latents estimate_stats would summarize, one per column.
Matrix sample_latents(const Generator& gen, int n_samples, std::uint64_t rng_seed, int jobs = 1);
Vector sample_seed(int d_z, std::uint64_t rng_seed, std::uint64_t index);

void save_stats(const LatentStats& stats, const std::filesystem::path& path);
LatentStats load_stats(const std::filesystem::path& path);

struct FingerprintBasis {
  Matrix U;  // d_w x (d_w - d_phi)
  Matrix V;  // d_w x d_phi
  int begin = 0;
  int end = 0;
  /// Latents are centered at this mean before projection.
  Vector center;
  Vector lambda_u;
  Vector lambda_v;
  /// Empirical extremes of the U-coordinates over the stats sample.
  Vector alpha_min;
  Vector alpha_max;

  int d_phi() const { return end - begin; }
  int d_w() const { return int(center.size()); }
};

/// V = PC[i:j], U = the remaining principal components in order.
FingerprintBasis select_basis(const LatentStats& stats, int i, int j);

/// max |[U V]^T [U V] - I|.
double basis_orthonormality_error(const FingerprintBasis& basis);
/// ||Sigma - [U V] diag(lambda) [U V]^T||_F / ||Sigma||_F.
double basis_reconstruction_error(const FingerprintBasis& basis, const Matrix& covariance);

struct FingerprintContext {
  FingerprintBasis basis;
  double sigma = 1.0;
  std::vector<std::uint8_t> key;
};

struct GramEstimate {
  Matrix mean_gram;
  int sample_count = 0;
  std::optional<FingerprintContext> context;
};

/// Average of J^T J over latents w = psi(z). With a context, each latent
/// is replaced by its fingerprinted version mu + U alpha + sigma V phi.
GramEstimate estimate_mean_gram(const Generator& gen, int n_samples, std::uint64_t rng_seed,
                                const std::optional<FingerprintContext>& context = std::nullopt,
                                int jobs = 1);

struct AlignmentReport {
  Vector principal_angles;  // ascending, radians
  double mean_squared_cosine = 0.0;
};

/// Principal angles between span(a) and span(b). Both must have
/// orthonormal columns (checked to 1e-6).
AlignmentReport subspace_alignment(const Matrix& a, const Matrix& b);

}  // namespace latentfp

#endif  // LATENTFP_SPECTRAL_HPP_
