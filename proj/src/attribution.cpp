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

#include "latentfp/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "latentfp/parallel.hpp"
#include "latentfp/rng.hpp"
#include "latentfp/spectral.hpp"

namespace latentfp {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Columnwise box penalty sum_i max(0, a_i - hi_i)^2 + max(0, lo_i - a_i)^2
// and, optionally, its gradient.
Vector box_penalty(const Matrix& alpha, const Vector& lo, const Vector& hi, Matrix* grad) {
  const Matrix above = (alpha.colwise() - hi).cwiseMax(0.0);
  const Matrix below = (-(alpha.colwise() - lo)).cwiseMax(0.0);
  if (grad) *grad = 2.0 * (above - below);
  return (above.cwiseAbs2() + below.cwiseAbs2()).colwise().sum().transpose();
}

double box_violation(const Vector& alpha, const Vector& lo, const Vector& hi) {
  if (alpha.size() == 0) return 0.0;
  return std::max({0.0, (alpha - hi).maxCoeff(), (lo - alpha).maxCoeff()});
}

struct BatchObjective {
  const Generator& gen;
  const FingerprintConfig& cfg;
  BatchDistance dist;
  double lambda = 0.0;

  // Objective of every column; gradients w.r.t. alpha and phi if requested.
  Vector operator()(const Matrix& alpha, const Matrix& phi, Matrix* g_alpha, Matrix* g_phi) const {
    const FingerprintBasis& b = cfg.basis;
    Matrix w = b.U * alpha + cfg.sigma * (b.V * phi);
    w.colwise() += b.center;
    const ForwardPass pass = gen.forward(w);
    Matrix grad_x;
    Vector f = dist.evaluate(pass.output, g_alpha || g_phi ? &grad_x : nullptr);
    Matrix pen_grad;
    if (lambda > 0)
      f += lambda * box_penalty(alpha, cfg.alpha_lower, cfg.alpha_upper, g_alpha ? &pen_grad : nullptr);
    if (g_alpha || g_phi) {
      const Matrix grad_w = gen.backward(pass, grad_x);
      if (g_alpha) {
        *g_alpha = b.U.transpose() * grad_w;
        if (lambda > 0) *g_alpha += lambda * pen_grad;
      }
      if (g_phi) *g_phi = cfg.sigma * (b.V.transpose() * grad_w);
    }
    return f;
  }
};

void check_problem(const Generator& gen, const AttributionProblem& p) {
  if (p.restarts < 1) throw std::invalid_argument("decode: restarts must be >= 1");
  if (p.penalty_weight && !(*p.penalty_weight >= 0))
    throw std::invalid_argument("decode: penalty weight must be >= 0");
  const GeneratorSpec& s = gen.spec();
  if (p.target.channels != s.channels || p.target.height != s.image_h ||
      p.target.width != s.image_w)
    throw std::invalid_argument("decode: target shape does not match the generator");
  if (p.cfg.basis.d_w() != gen.d_w()) throw std::invalid_argument("decode: basis/generator mismatch");
  if (p.fixed_alpha && p.fixed_alpha->size() != p.cfg.d_alpha())
    throw std::invalid_argument("decode: fixed alpha has the wrong dimension");
  if (p.optimizer.max_iterations < 0 || !(p.optimizer.step_size > 0))
    throw std::invalid_argument("decode: bad optimizer settings");
}

}  // namespace

Matrix lhs_initial_guesses(const Vector& lower, const Vector& upper, int n, std::uint64_t rng_seed) {
  if (n < 1) throw std::invalid_argument("lhs_initial_guesses: n must be >= 1");
  if (lower.size() != upper.size())
    throw std::invalid_argument("lhs_initial_guesses: bound dimensions differ");
  if (!lower.allFinite() || !upper.allFinite() || (upper - lower).minCoeff() < 0)
    throw std::invalid_argument("lhs_initial_guesses: invalid bounds");
  Rng rng = make_rng(rng_seed);
  Matrix out(lower.size(), n);
  std::vector<int> strata(n);
  for (Eigen::Index d = 0; d < lower.size(); ++d) {
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    const double width = upper[d] - lower[d];
    for (int i = 0; i < n; ++i) {
      const double u = uniform01(rng);
      out(d, i) = width == 0 ? lower[d]
                             : std::min(upper[d], lower[d] + width * (strata[i] + u) / n);
    }
  }
  return out;
}

double attribution_objective(const Generator& gen, const AttributionProblem& problem,
                             double penalty_weight, const Vector& alpha, const Vector& phi) {
  BatchObjective obj{gen, problem.cfg, BatchDistance(problem.metric, problem.target), penalty_weight};
  return obj(alpha, phi, nullptr, nullptr)[0];
}

AttributionResult decode(const Generator& gen, const AttributionProblem& problem) {
  check_problem(gen, problem);
  const FingerprintConfig& cfg = problem.cfg;
  const OptimizerSettings& opt = problem.optimizer;
  const int R = problem.restarts;
  const int da = cfg.d_alpha(), dp = cfg.d_phi();
  const bool alpha_free = !problem.fixed_alpha.has_value();

  Matrix alpha = alpha_free
                     ? lhs_initial_guesses(cfg.alpha_lower, cfg.alpha_upper, R, problem.rng_seed)
                     : Matrix(problem.fixed_alpha->replicate(1, R));
  Matrix phi = Matrix::Constant(dp, R, 0.5);

  // Steps are taken in units of the box width per alpha coordinate.
  Vector alpha_scale = cfg.alpha_upper - cfg.alpha_lower;
  for (Eigen::Index i = 0; i < alpha_scale.size(); ++i)
    if (!(alpha_scale[i] > 0)) alpha_scale[i] = 1.0;

  BatchObjective obj{gen, cfg, BatchDistance(problem.metric, problem.target), 0.0};
  AttributionResult result;
  {
    const Vector f0 = obj(alpha, phi, nullptr, nullptr);
    double lambda = 0.0;
    if (problem.penalty_weight) {
      lambda = *problem.penalty_weight;
    } else if (da > 0) {
      double mean_f = 0;
      int finite = 0;
      for (Eigen::Index r = 0; r < f0.size(); ++r)
        if (std::isfinite(f0[r])) mean_f += f0[r], ++finite;
      mean_f = finite ? mean_f / finite : 1.0;
      const double width = (cfg.alpha_upper - cfg.alpha_lower).mean();
      lambda = 10.0 * std::max(mean_f, 1e-12) / std::max(width * width, 1e-12);
    }
    obj.lambda = lambda;
    result.penalty_weight = lambda;
  }

  Matrix ga, gp;
  Vector f = obj(alpha, phi, &ga, &gp);
  std::vector<bool> failed(R, false), active(R, true);
  for (int r = 0; r < R; ++r)
    if (!std::isfinite(f[r]) || !ga.col(r).allFinite() || !gp.col(r).allFinite())
      failed[r] = true, active[r] = false;

  Matrix ma = Matrix::Zero(da, R), va = Matrix::Zero(da, R);
  Matrix mp = Matrix::Zero(dp, R), vp = Matrix::Zero(dp, R);
  Matrix da_dir = Matrix::Zero(da, R), dp_dir = Matrix::Zero(dp, R);
  std::vector<int> steps(R, 0), iters(R, 0);
  std::vector<double> lr(R, opt.step_size);
  std::vector<std::vector<double>> history(R);
  constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-12;

  auto refresh_direction = [&](int r) {
    ++steps[r];
    const double c1 = 1 - std::pow(kB1, steps[r]), c2 = 1 - std::pow(kB2, steps[r]);
    if (alpha_free) {
      ma.col(r) = kB1 * ma.col(r) + (1 - kB1) * ga.col(r);
      va.col(r) = kB2 * va.col(r) + (1 - kB2) * ga.col(r).cwiseAbs2();
      da_dir.col(r) = alpha_scale.cwiseProduct(
          (ma.col(r) / c1).cwiseQuotient(((va.col(r) / c2).cwiseSqrt().array() + kEps).matrix()));
    }
    mp.col(r) = kB1 * mp.col(r) + (1 - kB1) * gp.col(r);
    vp.col(r) = kB2 * vp.col(r) + (1 - kB2) * gp.col(r).cwiseAbs2();
    dp_dir.col(r) = (mp.col(r) / c1).cwiseQuotient(((vp.col(r) / c2).cwiseSqrt().array() + kEps).matrix());
  };
  for (int r = 0; r < R; ++r) {
    if (active[r]) refresh_direction(r);
    history[r].push_back(f[r]);
    if (active[r] && f[r] == 0) active[r] = false;
  }

  for (int it = 0; it < opt.max_iterations; ++it) {
    if (std::none_of(active.begin(), active.end(), [](bool a) { return a; })) break;
    Matrix alpha_new = alpha, phi_new = phi;
    for (int r = 0; r < R; ++r) {
      if (!active[r]) continue;
      if (alpha_free) alpha_new.col(r) -= lr[r] * da_dir.col(r);
      phi_new.col(r) -= lr[r] * dp_dir.col(r);
    }
    Matrix ga_new, gp_new;
    const Vector f_new = obj(alpha_new, phi_new, &ga_new, &gp_new);
    for (int r = 0; r < R; ++r) {
      if (!active[r]) continue;
      ++iters[r];
      if (!std::isfinite(f_new[r]) || !ga_new.col(r).allFinite() || !gp_new.col(r).allFinite()) {
        failed[r] = true;
        active[r] = false;
        continue;
      }
      if (f_new[r] <= f[r]) {
        alpha.col(r) = alpha_new.col(r);
        phi.col(r) = phi_new.col(r);
        f[r] = f_new[r];
        ga.col(r) = ga_new.col(r);
        gp.col(r) = gp_new.col(r);
        refresh_direction(r);
        lr[r] = std::min(lr[r] * 1.1, opt.max_step_size);
      } else {
        // Stale momentum can point uphill; restart it from the current gradient.
        lr[r] *= 0.5;
        ma.col(r).setZero();
        va.col(r).setZero();
        mp.col(r).setZero();
        vp.col(r).setZero();
        steps[r] = 0;
        refresh_direction(r);
      }
      history[r].push_back(f[r]);
      const auto& h = history[r];
      const std::size_t k = h.size() - 1;
      if (f[r] == 0 || lr[r] < 1e-10 * opt.step_size) active[r] = false;
      if (k >= std::size_t(opt.patience) &&
          h[k - opt.patience] - h[k] <= opt.tolerance * std::abs(h[k - opt.patience]))
        active[r] = false;
    }
  }

  result.per_restart_residuals.assign(R, kNaN);
  result.per_restart_iterations = iters;
  int best = -1;
  for (int r = 0; r < R; ++r) {
    result.iterations_used = std::max(result.iterations_used, iters[r]);
    if (failed[r]) {
      ++result.restarts_failed;
      continue;
    }
    result.per_restart_residuals[r] = f[r];
    if (best < 0 || f[r] < f[best]) best = r;
  }
  if (best < 0) {
    result.ok = false;
    result.failure = "all restarts diverged";
    return result;
  }
  result.ok = true;
  result.best_restart = best;
  result.residual = f[best];
  result.alpha_hat = alpha.col(best);
  result.phi_relaxed = phi.col(best);
  result.phi_hat = threshold_bits(result.phi_relaxed);
  result.constraint_violation = box_violation(result.alpha_hat, cfg.alpha_lower, cfg.alpha_upper);
  return result;
}

Trial make_trial(const Generator& gen, const FingerprintConfig& cfg, const Key& key, int seed_index,
                 std::uint64_t rng_seed) {
  Trial t;
  t.key_id = key.id;
  t.seed_index = seed_index;
  t.seed = derive_seed(derive_seed(rng_seed, std::uint64_t(key.id)), std::uint64_t(seed_index));
  t.key = key;
  t.z = sample_seed(gen.d_z(), t.seed, 0);
  t.alpha = project_alpha(cfg, gen.map_latent(t.z).w);
  return t;
}

ImageGrid trial_image(const Generator& gen, const FingerprintConfig& cfg, const Trial& trial,
                      const std::optional<PostprocessSpec>& postprocess) {
  ImageGrid img = gen.evaluate(embed(cfg, trial.alpha, trial.key).w);
  if (postprocess) img = apply(*postprocess, img, derive_seed(trial.seed, 2), gen.spec().output_range);
  return img;
}

AccuracyReport evaluate_accuracy(const Generator& gen, const FingerprintConfig& cfg,
                                 const KeyRegistry& registry, int n_seeds, std::uint64_t rng_seed,
                                 const AccuracyOptions& options) {
  if (registry.size() == 0) throw std::invalid_argument("evaluate_accuracy: empty registry");
  if (n_seeds < 1) throw std::invalid_argument("evaluate_accuracy: n_seeds must be >= 1");
  if (registry.d_phi != cfg.d_phi())
    throw std::invalid_argument("evaluate_accuracy: registry key length does not match the basis");
  const int n_keys = registry.size();
  const std::size_t total = std::size_t(n_keys) * n_seeds;
  const std::string label = options.postprocess ? describe(*options.postprocess) : "identity";

  std::vector<DecodeLogRow> rows(total);
  parallel_for(total, options.jobs, [&](std::size_t i) {
    const Key& key = registry.keys[i / n_seeds];
    const Trial trial = make_trial(gen, cfg, key, int(i % n_seeds), rng_seed);
    const ImageGrid target = trial_image(gen, cfg, trial, options.postprocess);
    AttributionResult res;
    if (options.decoder) {
      res = options.decoder(target, trial);
    } else {
      AttributionProblem p;
      p.target = target;
      p.cfg = cfg;
      p.metric = options.metric;
      p.restarts = options.restarts;
      p.penalty_weight = options.penalty_weight;
      p.optimizer = options.optimizer;
      p.rng_seed = derive_seed(trial.seed, 3);
      res = decode(gen, p);
    }
    DecodeLogRow& row = rows[i];
    row.key_id = trial.key_id;
    row.seed_index = trial.seed_index;
    row.postprocess = label;
    row.restarts_failed = res.restarts_failed;
    if (!res.ok || res.phi_hat.size() != key.bits.size()) {
      row.residual = kNaN;
      row.alpha_err_norm = kNaN;
      return;
    }
    const int wrong = hamming_distance(res.phi_hat, key.bits);
    row.bit_accuracy = 1.0 - double(wrong) / double(key.size());
    row.exact_match = wrong == 0;
    row.residual = res.residual;
    row.alpha_err_norm =
        res.alpha_hat.size() == trial.alpha.size() ? (res.alpha_hat - trial.alpha).norm() : kNaN;
  });

  AccuracyReport rep;
  rep.trials = int(total);
  rep.per_key_accuracy.assign(n_keys, 0.0);
  double alpha_sum = 0;
  int alpha_count = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const DecodeLogRow& row = rows[i];
    rep.accuracy += row.exact_match;
    rep.bit_accuracy += row.bit_accuracy;
    rep.per_key_accuracy[i / n_seeds] += row.exact_match;
    if (std::isnan(row.residual)) ++rep.failed_decodes;
    if (std::isfinite(row.alpha_err_norm)) alpha_sum += row.alpha_err_norm, ++alpha_count;
  }
  rep.accuracy /= double(total);
  rep.bit_accuracy /= double(total);
  for (double& a : rep.per_key_accuracy) a /= n_seeds;
  rep.mean_alpha_error = alpha_count ? alpha_sum / alpha_count : kNaN;
  rep.rows = std::move(rows);
  return rep;
}

void write_decode_log(const AccuracyReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "key_id,seed_index,postprocess,bit_accuracy,exact_match,residual,alpha_err_norm,"
        "restarts_failed\n";
  os.precision(17);
  for (const DecodeLogRow& r : report.rows)
    os << r.key_id << ',' << r.seed_index << ',' << r.postprocess << ',' << r.bit_accuracy << ','
       << (r.exact_match ? 1 : 0) << ',' << r.residual << ',' << r.alpha_err_norm << ','
       << r.restarts_failed << '\n';
}

}  // namespace latentfp
