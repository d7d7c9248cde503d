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

#include "latentfp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "latentfp/parallel.hpp"
#include "latentfp/rng.hpp"

namespace latentfp {
namespace {

constexpr double kEigenSlack = 1e-10;

// Pairwise (tree) sum of columns [begin, end) of m.
Vector pairwise_column_sum(const Matrix& m, Eigen::Index begin, Eigen::Index end) {
  if (end - begin <= 8) {
    Vector s = Vector::Zero(m.rows());
    for (Eigen::Index j = begin; j < end; ++j) s += m.col(j);
    return s;
  }
  const Eigen::Index mid = begin + (end - begin) / 2;
  return pairwise_column_sum(m, begin, mid) + pairwise_column_sum(m, mid, end);
}

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

void write_vector(std::ostream& os, const char* key, const Vector& v) {
  os << key << '=';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << hex(v[i]);
  os << '\n';
}

Vector parse_vector(const std::string& text, Eigen::Index n) {
  std::istringstream is(text);
  Vector v(n);
  std::string tok;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(is >> tok)) throw std::runtime_error("stats file: truncated vector");
    v[i] = std::strtod(tok.c_str(), nullptr);
  }
  return v;
}

}  // namespace

SymmetricEigen symmetric_eigen(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("symmetric_eigen: matrix not square");
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric_eigen: no convergence");
  const Eigen::Index n = m.rows();
  SymmetricEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index arg = 0;
    out.vectors.col(k).cwiseAbs().maxCoeff(&arg);
    if (out.vectors(arg, k) < 0) out.vectors.col(k) = -out.vectors.col(k);
  }
  return out;
}

LatentStats stats_from_samples(const Matrix& samples, std::uint64_t seed) {
  const Eigen::Index d = samples.rows(), n = samples.cols();
  if (n < d + 1)
    throw std::invalid_argument("latent stats need at least d_w + 1 samples, got " +
                                std::to_string(n));
  if (!samples.allFinite()) throw std::invalid_argument("latent stats: non-finite latents");

  LatentStats stats;
  stats.sample_count = n;
  stats.seed = seed;
  stats.mean = pairwise_column_sum(samples, 0, n) / double(n);
  const Matrix centered = samples.colwise() - stats.mean;
  stats.covariance = centered * centered.transpose() / double(n - 1);
  stats.covariance = 0.5 * (stats.covariance + stats.covariance.transpose()).eval();

  SymmetricEigen eig = symmetric_eigen(stats.covariance);
  const double slack = kEigenSlack * std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < d; ++k) {
    if (eig.values[k] < -slack)
      throw std::runtime_error("latent covariance has a negative eigenvalue");
    eig.values[k] = std::max(0.0, eig.values[k]);
  }
  stats.eigenvalues = std::move(eig.values);
  stats.eigenvectors = std::move(eig.vectors);

  const Matrix coords = stats.eigenvectors.transpose() * centered;
  stats.projection_min = coords.rowwise().minCoeff();
  stats.projection_max = coords.rowwise().maxCoeff();
  return stats;
}

Vector sample_seed(int d_z, std::uint64_t rng_seed, std::uint64_t index) {
  Rng rng = make_rng(derive_seed(rng_seed, index));
  return standard_normal(rng, d_z);
}

Matrix sample_latents(const Generator& gen, int n_samples, std::uint64_t rng_seed, int jobs) {
  if (n_samples < 0) throw std::invalid_argument("sample_latents: negative sample count");
  Matrix z(gen.d_z(), n_samples);
  parallel_for(std::size_t(n_samples), jobs,
               [&](std::size_t i) { z.col(i) = sample_seed(gen.d_z(), rng_seed, i); });
  // Chunked so every column goes through the same code path regardless of
  // the job count.
  constexpr int kChunk = 256;
  Matrix w(gen.d_w(), n_samples);
  const std::size_t chunks = (std::size_t(n_samples) + kChunk - 1) / kChunk;
  parallel_for(chunks, jobs, [&](std::size_t c) {
    const Eigen::Index begin = Eigen::Index(c) * kChunk;
    const Eigen::Index count = std::min<Eigen::Index>(kChunk, n_samples - begin);
    w.middleCols(begin, count) = gen.map_latent_batch(z.middleCols(begin, count));
  });
  return w;
}

LatentStats estimate_stats(const Generator& gen, int n_samples, std::uint64_t rng_seed,
                           int jobs) {
  if (n_samples < gen.d_w() + 1)
    throw std::invalid_argument("estimate_stats: n_samples must be at least d_w + 1");
  return stats_from_samples(sample_latents(gen, n_samples, rng_seed, jobs), rng_seed);
}

void save_stats(const LatentStats& stats, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  const Eigen::Index d = stats.dim();
  os << "# latent statistics; values are C99 hexadecimal floating literals\n";
  os << "format=latentfp-stats-v1\n";
  os << "byte_order=none (text, hexfloat)\n";
  os << "seed=" << stats.seed << '\n';
  os << "sample_count=" << stats.sample_count << '\n';
  os << "d_w=" << d << '\n';
  write_vector(os, "mean", stats.mean);
  write_vector(os, "eigenvalues", stats.eigenvalues);
  write_vector(os, "projection_min", stats.projection_min);
  write_vector(os, "projection_max", stats.projection_max);
  for (Eigen::Index k = 0; k < d; ++k)
    write_vector(os, ("pc." + std::to_string(k)).c_str(), stats.eigenvectors.col(k));
  for (Eigen::Index r = 0; r < d; ++r)
    write_vector(os, ("cov." + std::to_string(r)).c_str(), stats.covariance.row(r).transpose());
}

LatentStats load_stats(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::map<std::string, std::string> fields;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("stats file: malformed line");
    fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw std::runtime_error("stats file: missing " + key);
    return it->second;
  };
  if (get("format") != "latentfp-stats-v1") throw std::runtime_error("stats file: bad format");
  LatentStats stats;
  const Eigen::Index d = std::stol(get("d_w"));
  stats.seed = std::stoull(get("seed"));
  stats.sample_count = std::stoll(get("sample_count"));
  stats.mean = parse_vector(get("mean"), d);
  stats.eigenvalues = parse_vector(get("eigenvalues"), d);
  stats.projection_min = parse_vector(get("projection_min"), d);
  stats.projection_max = parse_vector(get("projection_max"), d);
  stats.eigenvectors.resize(d, d);
  stats.covariance.resize(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    stats.eigenvectors.col(k) = parse_vector(get("pc." + std::to_string(k)), d);
    stats.covariance.row(k) = parse_vector(get("cov." + std::to_string(k)), d).transpose();
  }
  return stats;
}

FingerprintBasis select_basis(const LatentStats& stats, int i, int j) {
  const int d = stats.dim();
  if (i < 0 || j > d || i >= j)
    throw std::invalid_argument("select_basis: need 0 <= i < j <= d_w, got [" +
                                std::to_string(i) + ", " + std::to_string(j) + ")");
  FingerprintBasis basis;
  basis.begin = i;
  basis.end = j;
  basis.center = stats.mean;
  basis.V = stats.eigenvectors.middleCols(i, j - i);
  basis.lambda_v = stats.eigenvalues.segment(i, j - i);
  const int du = d - (j - i);
  basis.U.resize(d, du);
  basis.lambda_u.resize(du);
  basis.alpha_min.resize(du);
  basis.alpha_max.resize(du);
  int col = 0;
  for (int k = 0; k < d; ++k) {
    if (k >= i && k < j) continue;
    basis.U.col(col) = stats.eigenvectors.col(k);
    basis.lambda_u[col] = stats.eigenvalues[k];
    basis.alpha_min[col] = stats.projection_min[k];
    basis.alpha_max[col] = stats.projection_max[k];
    ++col;
  }
  return basis;
}

double basis_orthonormality_error(const FingerprintBasis& basis) {
  Matrix full(basis.d_w(), basis.U.cols() + basis.V.cols());
  full << basis.U, basis.V;
  return (full.transpose() * full - Matrix::Identity(full.cols(), full.cols()))
      .cwiseAbs()
      .maxCoeff();
}

double basis_reconstruction_error(const FingerprintBasis& basis, const Matrix& covariance) {
  Matrix full(basis.d_w(), basis.U.cols() + basis.V.cols());
  full << basis.U, basis.V;
  Vector lambda(full.cols());
  lambda << basis.lambda_u, basis.lambda_v;
  const Matrix rebuilt = full * lambda.asDiagonal() * full.transpose();
  return (rebuilt - covariance).norm() / covariance.norm();
}

GramEstimate estimate_mean_gram(const Generator& gen, int n_samples, std::uint64_t rng_seed,
                                const std::optional<FingerprintContext>& context, int jobs) {
  if (n_samples < 1) throw std::invalid_argument("estimate_mean_gram: n_samples must be >= 1");
  Matrix w = sample_latents(gen, n_samples, rng_seed, jobs);
  if (context) {
    const FingerprintBasis& b = context->basis;
    if (int(context->key.size()) != b.d_phi())
      throw std::invalid_argument("estimate_mean_gram: key length does not match basis");
    Vector phi(b.d_phi());
    for (int k = 0; k < b.d_phi(); ++k) phi[k] = context->key[k];
    const Matrix alpha = b.U.transpose() * (w.colwise() - b.center);
    w = ((b.U * alpha).colwise() + b.center).colwise() + context->sigma * (b.V * phi);
  }
  std::vector<Matrix> grams(n_samples);
  parallel_for(std::size_t(n_samples), jobs, [&](std::size_t i) {
    const Matrix jac = gen.jacobian(w.col(i));
    grams[i] = jac.transpose() * jac;
  });
  // Fixed-order tree reduction.
  for (std::size_t stride = 1; stride < grams.size(); stride *= 2)
    for (std::size_t i = 0; i + stride < grams.size(); i += 2 * stride) grams[i] += grams[i + stride];
  GramEstimate est;
  est.mean_gram = grams.front() / double(n_samples);
  est.mean_gram = 0.5 * (est.mean_gram + est.mean_gram.transpose()).eval();
  est.sample_count = n_samples;
  est.context = context;
  return est;
}

AlignmentReport subspace_alignment(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw std::invalid_argument("subspace_alignment: ambient dimensions differ");
  auto check = [](const Matrix& m) {
    const double err =
        (m.transpose() * m - Matrix::Identity(m.cols(), m.cols())).cwiseAbs().maxCoeff();
    if (err > 1e-6) throw std::invalid_argument("subspace_alignment: columns not orthonormal");
  };
  check(a);
  check(b);
  Eigen::JacobiSVD<Matrix> svd(a.transpose() * b);
  const Vector s = svd.singularValues().cwiseMin(1.0).cwiseMax(0.0);
  AlignmentReport report;
  report.principal_angles = s.unaryExpr([](double c) { return std::acos(c); });
  report.mean_squared_cosine = s.size() ? s.squaredNorm() / double(s.size()) : 0.0;
  return report;
}

}  // namespace latentfp
