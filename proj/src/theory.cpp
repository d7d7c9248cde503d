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

#include "latentfp/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "latentfp/parallel.hpp"
#include "latentfp/rng.hpp"

namespace latentfp {
namespace {

Vector random_key(int d_phi, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Vector phi(d_phi);
  for (int k = 0; k < d_phi; ++k) phi[k] = double(rng() >> 63);
  return phi;
}

// Jacobians of every column of w.
std::vector<Matrix> jacobians(const Generator& gen, const Matrix& w, int jobs) {
  std::vector<Matrix> out(w.cols());
  parallel_for(out.size(), jobs, [&](std::size_t i) { out[i] = gen.jacobian(w.col(i)); });
  return out;
}

Matrix mean_gram(const std::vector<Matrix>& js) {
  Matrix h = Matrix::Zero(js.front().cols(), js.front().cols());
  for (const Matrix& j : js) h.noalias() += j.transpose() * j;
  return h / double(js.size());
}

double vec_norm(const Vector& v) { return v.size() ? v.norm() : 0.0; }

nlohmann::json to_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

Prop1Report check_prop1(const Generator& gen, const FingerprintBasis& basis, double sigma,
                        const Vector& epsilon_alpha, const Prop1Options& options) {
  if (!(sigma > 0) || !std::isfinite(sigma))
    throw std::invalid_argument("check_prop1: sigma must be positive");
  if (epsilon_alpha.size() != basis.U.cols() || !epsilon_alpha.allFinite())
    throw std::invalid_argument("check_prop1: epsilon_alpha must be finite with d_w - d_phi entries");
  if (options.n_alpha_samples < 1) throw std::invalid_argument("check_prop1: need alpha samples");
  if (basis.d_w() != gen.d_w()) throw std::invalid_argument("check_prop1: basis/generator mismatch");
  const int n = options.n_alpha_samples;
  const int dp = basis.d_phi();

  Prop1Report rep;
  rep.sigma = sigma;
  rep.injected_alpha_error = epsilon_alpha;
  rep.n_alpha_samples = n;
  rep.phi = options.phi ? *options.phi : random_key(dp, derive_seed(options.rng_seed, 7));
  if (rep.phi.size() != dp) throw std::invalid_argument("check_prop1: key length mismatch");

  Matrix z(gen.d_z(), n);
  for (int i = 0; i < n; ++i) z.col(i) = sample_seed(gen.d_z(), derive_seed(options.rng_seed, 1), i);
  const Matrix alpha = basis.U.transpose() * (gen.map_latent_batch(z).colwise() - basis.center);
  Matrix w = basis.U * alpha;
  w.colwise() += basis.center + sigma * (basis.V * rep.phi);

  // Mean Gram matrix at the fingerprinted latents and the predicted error.
  const Matrix h = mean_gram(jacobians(gen, w, options.jobs));
  const Matrix vhv = basis.V.transpose() * h * basis.V;
  const SymmetricEigen curv = symmetric_eigen(vhv);
  rep.min_curvature = curv.values.minCoeff();
  if (!(rep.min_curvature > 1e-12 * std::max(1.0, curv.values.maxCoeff())))
    throw SingularSubspaceError("V^T H V is singular: the fingerprint subspace is not observable");
  const Eigen::LDLT<Matrix> solver(vhv);
  const Vector cross = basis.V.transpose() * h * basis.U * epsilon_alpha;
  rep.predicted_phi_error = -solver.solve(cross) / sigma;
  rep.stated_phi_error = rep.predicted_phi_error / sigma;

  // Measured: least squares over phi_hat with alpha_hat = alpha + e_a fixed,
  // averaged over the same alpha draws.
  const Matrix targets = gen.evaluate_batch(w);
  Matrix base = basis.U * (alpha.colwise() + epsilon_alpha);
  base.colwise() += basis.center;
  const Matrix sv = sigma * basis.V;
  auto residuals = [&](const Vector& phi_hat) {
    Matrix wh = base;
    wh.colwise() += sv * phi_hat;
    return Matrix(gen.evaluate_batch(wh) - targets);
  };
  Vector phi_hat = rep.phi;
  Matrix r = residuals(phi_hat);
  double cost = r.squaredNorm();
  double damping = 1e-9;
  for (int it = 0; it < options.max_iterations && cost > 0; ++it) {
    Matrix wh = base;
    wh.colwise() += sv * phi_hat;
    const std::vector<Matrix> js = jacobians(gen, wh, options.jobs);
    Matrix a = Matrix::Zero(dp, dp);
    Vector g = Vector::Zero(dp);
    for (int i = 0; i < n; ++i) {
      const Matrix jp = js[i] * sv;
      a.noalias() += jp.transpose() * jp;
      g.noalias() += jp.transpose() * r.col(i);
    }
    rep.iterations = it + 1;
    bool moved = false;
    for (int tries = 0; tries < 30; ++tries) {
      Matrix damped = a;
      damped.diagonal() *= 1.0 + damping;
      const Vector step = -damped.ldlt().solve(g);
      const Vector trial = phi_hat + step;
      const Matrix r_trial = residuals(trial);
      const double c_trial = r_trial.squaredNorm();
      if (c_trial <= cost) {
        const bool tiny = step.norm() <= 1e-14 * (1.0 + phi_hat.norm());
        phi_hat = trial;
        r = r_trial;
        cost = c_trial;
        damping = std::max(damping / 10.0, 1e-12);
        moved = !tiny;
        break;
      }
      damping *= 10.0;
    }
    if (!moved) break;
  }
  rep.measured_phi_error = phi_hat - rep.phi;

  const double m = vec_norm(rep.measured_phi_error);
  rep.absolute_gap = vec_norm(rep.predicted_phi_error - rep.measured_phi_error);
  rep.relative_gap = m > 0 ? rep.absolute_gap / m : rep.absolute_gap;
  const double stated_gap = vec_norm(rep.stated_phi_error - rep.measured_phi_error);
  rep.stated_relative_gap = m > 0 ? stated_gap / m : stated_gap;
  return rep;
}

Prop1ScalingReport check_prop1_scaling(const Generator& gen, const FingerprintBasis& basis_major,
                                       const FingerprintBasis& basis_minor, double sigma,
                                       const Vector& epsilon_alpha, const Prop1Options& options) {
  if (basis_major.d_phi() != basis_minor.d_phi() || basis_major.d_w() != basis_minor.d_w())
    throw std::invalid_argument("check_prop1_scaling: bases must have the same shape");
  Prop1ScalingReport rep;
  Prop1Options opts = options;
  if (!opts.phi) opts.phi = random_key(basis_major.d_phi(), derive_seed(options.rng_seed, 7));
  rep.major = check_prop1(gen, basis_major, sigma, epsilon_alpha, opts);
  rep.minor = check_prop1(gen, basis_minor, sigma, epsilon_alpha, opts);
  rep.major_error_norm = vec_norm(rep.major.predicted_phi_error);
  rep.minor_error_norm = vec_norm(rep.minor.predicted_phi_error);
  return rep;
}

Prop2Report check_prop2(const Generator& gen, const FingerprintBasis& basis, double sigma,
                        const Prop2Options& options) {
  if (!(sigma >= 0) || !std::isfinite(sigma))
    throw std::invalid_argument("check_prop2: sigma must be finite and >= 0");
  if (!(options.eta > 0 && options.eta < 1))
    throw std::invalid_argument("check_prop2: eta must be in (0, 1)");
  if (options.tau && !(*options.tau >= 0)) throw std::invalid_argument("check_prop2: tau must be >= 0");
  if (!(options.lambda_v_scale >= 0))
    throw std::invalid_argument("check_prop2: lambda_v_scale must be >= 0");
  if (basis.d_w() != gen.d_w()) throw std::invalid_argument("check_prop2: basis/generator mismatch");
  const int dp = basis.d_phi();

  Prop2Report rep;
  rep.sigma = sigma;
  rep.d_phi = dp;
  rep.phi = options.phi ? *options.phi : random_key(dp, derive_seed(options.rng_seed, 7));
  if (rep.phi.size() != dp) throw std::invalid_argument("check_prop2: key length mismatch");
  const Vector lambda_u = basis.lambda_u.cwiseMax(0.0);
  const Vector lambda_v = options.lambda_v_scale * basis.lambda_v.cwiseMax(0.0);
  rep.lambda_V_max = dp ? lambda_v.maxCoeff() : 0.0;

  if (gen.is_affine()) {
    // Exact moments: mu_0 - mu_1 = -sigma A V phi, tr(S_0 - S_1) =
    // sum_i lambda_V,i ||A V e_i||^2, H_U = A^T A, nu = 0.
    const Matrix& a = gen.affine_matrix();
    const Matrix av = a * basis.V;
    rep.closed_form = true;
    rep.mean_gap_lhs = sigma * sigma * (av * rep.phi).squaredNorm();
    rep.trace_gap_lhs = std::abs((av.colwise().squaredNorm().transpose().array() * lambda_v.array()).sum());
    rep.gamma_U_max = symmetric_eigen(a.transpose() * a).values[0];
    rep.nu = 0.0;
    rep.tau_mean = rep.tau_trace = options.tau.value_or(0.0);
  } else {
    const int n = options.n_mc;
    if (n < 2) throw std::invalid_argument("check_prop2: n_mc must be >= 2");
    if (options.n_gram < 2 || options.n_gram > n)
      throw std::invalid_argument("check_prop2: n_gram must be in [2, n_mc]");
    const Eigen::Index da = basis.U.cols();
    Matrix alpha(da, n), beta(dp, n);
    for (int i = 0; i < n; ++i) {
      Rng rng = make_rng(derive_seed(options.rng_seed, std::uint64_t(i) + 100));
      alpha.col(i) = lambda_u.cwiseSqrt().cwiseProduct(standard_normal(rng, da));
      beta.col(i) = lambda_v.cwiseSqrt().cwiseProduct(standard_normal(rng, dp));
    }
    Matrix wu = basis.U * alpha;
    wu.colwise() += basis.center;
    const Matrix w0 = wu + basis.V * beta;
    Matrix w1 = wu;
    w1.colwise() += sigma * (basis.V * rep.phi);
    const Matrix x0 = gen.evaluate_batch(w0), x1 = gen.evaluate_batch(w1),
                 xu = gen.evaluate_batch(wu);

    // Mean gap with common alpha draws; delta-method standard error.
    const Matrix d = x0 - x1;
    const Vector dbar = d.rowwise().mean();
    const Matrix dc = d.colwise() - dbar;
    const Matrix sd = dc * dc.transpose() / double(n - 1);
    rep.mean_gap_lhs = dbar.squaredNorm();
    rep.mean_gap_se = std::sqrt(std::max(
        0.0, 4.0 * dbar.dot(sd * dbar) / n + 2.0 * sd.cwiseAbs2().sum() / (double(n) * n)));

    const Matrix c0 = x0.colwise() - x0.rowwise().mean();
    const Matrix c1 = x1.colwise() - x1.rowwise().mean();
    const Vector q = (c0.colwise().squaredNorm() - c1.colwise().squaredNorm()).transpose();
    rep.trace_gap_lhs = std::abs(q.sum() / double(n - 1));
    const double q_mean = q.mean();
    rep.trace_gap_se = std::sqrt((q.array() - q_mean).square().sum() / double(n - 1) / n);

    // Mean Gram over the content subspace, and nu.
    const std::vector<Matrix> js = jacobians(gen, wu.leftCols(options.n_gram), options.jobs);
    rep.gamma_U_max = symmetric_eigen(mean_gram(js)).values[0];
    const Vector xu_mean = xu.rowwise().mean();
    const Vector sigma_u =
        ((xu.colwise() - xu_mean).rowwise().squaredNorm() / double(n - 1)).cwiseSqrt();
    const Eigen::Index dx = xu.rows(), dw = gen.d_w();
    std::vector<double> row_sigma(dx);
    parallel_for(std::size_t(dx), options.jobs, [&](std::size_t i) {
      Matrix rows(dw, js.size());
      for (std::size_t s = 0; s < js.size(); ++s) rows.col(s) = js[s].row(Eigen::Index(i)).transpose();
      const Matrix cr = rows.colwise() - rows.rowwise().mean();
      const Matrix cov = cr * cr.transpose() / double(js.size() - 1);
      row_sigma[i] = std::sqrt(std::max(0.0, symmetric_eigen(cov).values[0]));
    });
    for (Eigen::Index i = 0; i < dx; ++i) rep.nu += sigma_u[i] * row_sigma[i];
    rep.n_mc = n;
    rep.tau_mean = options.tau.value_or(options.tau_standard_errors * rep.mean_gap_se);
    rep.tau_trace = options.tau.value_or(options.tau_standard_errors * rep.trace_gap_se);
  }

  rep.mean_gap_bound = sigma * sigma * rep.gamma_U_max * dp + rep.tau_mean;
  rep.trace_gap_bound = rep.lambda_V_max * rep.gamma_U_max * dp +
                        2.0 * rep.nu * sigma * std::sqrt(double(dp)) + rep.tau_trace;
  // Closed-form comparisons allow for rounding only.
  const double slack = rep.closed_form ? 1e-8 : 0.0;
  rep.holds_mean = rep.mean_gap_lhs <= rep.mean_gap_bound + slack * std::max(1.0, rep.mean_gap_bound);
  rep.holds_trace =
      rep.trace_gap_lhs <= rep.trace_gap_bound + slack * std::max(1.0, rep.trace_gap_bound);
  return rep;
}

Prop2Repetitions check_prop2_repeated(const Generator& gen, const FingerprintBasis& basis,
                                      double sigma, int repetitions, const Prop2Options& options) {
  if (repetitions < 1) throw std::invalid_argument("check_prop2_repeated: repetitions must be >= 1");
  std::vector<Prop2Report> reports(repetitions);
  Prop2Options inner = options;
  inner.jobs = 1;
  parallel_for(std::size_t(repetitions), options.jobs, [&](std::size_t r) {
    Prop2Options o = inner;
    o.rng_seed = derive_seed(options.rng_seed, r);
    reports[r] = check_prop2(gen, basis, sigma, o);
  });
  Prop2Repetitions out;
  out.repetitions = repetitions;
  for (const Prop2Report& r : reports) {
    out.mean_holds += r.holds_mean;
    out.trace_holds += r.holds_trace;
    out.both_hold += r.holds_mean && r.holds_trace;
  }
  return out;
}

GramAlignmentReport check_gram_alignment(const Generator& gen, const LatentStats& stats, int k,
                                         int n_gram, int n_random, std::uint64_t rng_seed,
                                         int jobs) {
  const int d = stats.dim();
  if (k < 1 || k > d) throw std::invalid_argument("check_gram_alignment: k out of range");
  if (n_random < 1) throw std::invalid_argument("check_gram_alignment: n_random must be >= 1");
  GramAlignmentReport rep;
  rep.k = k;
  const GramEstimate gram = estimate_mean_gram(gen, n_gram, derive_seed(rng_seed, 1), std::nullopt, jobs);
  const SymmetricEigen eg = symmetric_eigen(gram.mean_gram);
  rep.alignment = subspace_alignment(stats.eigenvectors.leftCols(k), eg.vectors.leftCols(k));
  rep.mean_squared_cosine = rep.alignment.mean_squared_cosine;

  std::vector<double> random(n_random);
  for (int r = 0; r < n_random; ++r) {
    Rng rng = make_rng(derive_seed(rng_seed, 1000 + std::uint64_t(r)));
    auto frame = [&] {
      Matrix g(d, k);
      for (int j = 0; j < k; ++j) g.col(j) = standard_normal(rng, d);
      return Matrix(Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(d, k));
    };
    const Matrix a = frame();
    const Matrix b = frame();
    random[r] = subspace_alignment(a, b).mean_squared_cosine;
  }
  double sum = 0;
  for (double v : random) sum += v;
  rep.random_mean = sum / n_random;
  std::sort(random.begin(), random.end());
  rep.random_median = n_random % 2 ? random[n_random / 2]
                                   : 0.5 * (random[n_random / 2 - 1] + random[n_random / 2]);
  return rep;
}

std::string to_string(const Prop1Report& r) {
  nlohmann::json j;
  j["sigma"] = r.sigma;
  j["injected_alpha_error"] = to_json(r.injected_alpha_error);
  j["phi"] = to_json(r.phi);
  j["predicted_phi_error"] = to_json(r.predicted_phi_error);
  j["stated_phi_error"] = to_json(r.stated_phi_error);
  j["measured_phi_error"] = to_json(r.measured_phi_error);
  j["absolute_gap"] = r.absolute_gap;
  j["relative_gap"] = r.relative_gap;
  j["stated_relative_gap"] = r.stated_relative_gap;
  j["min_curvature"] = r.min_curvature;
  j["iterations"] = r.iterations;
  j["n_alpha_samples"] = r.n_alpha_samples;
  return j.dump();
}

std::string to_string(const Prop2Report& r) {
  nlohmann::json j;
  j["sigma"] = r.sigma;
  j["lambda_V_max"] = r.lambda_V_max;
  j["d_phi"] = r.d_phi;
  j["gamma_U_max"] = r.gamma_U_max;
  j["mean_gap_lhs"] = r.mean_gap_lhs;
  j["mean_gap_bound"] = r.mean_gap_bound;
  j["trace_gap_lhs"] = r.trace_gap_lhs;
  j["trace_gap_bound"] = r.trace_gap_bound;
  j["nu"] = r.nu;
  j["tau_mean"] = r.tau_mean;
  j["tau_trace"] = r.tau_trace;
  j["mean_gap_se"] = r.mean_gap_se;
  j["trace_gap_se"] = r.trace_gap_se;
  j["holds"] = {r.holds_mean, r.holds_trace};
  j["closed_form"] = r.closed_form;
  j["n_mc"] = r.n_mc;
  j["phi"] = to_json(r.phi);
  return j.dump();
}

}  // namespace latentfp
