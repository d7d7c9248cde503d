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

// Key decoding. Given an image, search for (alpha, phi) minimizing
//
//   d(g(mu + U alpha + sigma V phi), target) + lambda * box_penalty(alpha)
//
// from several Latin-hypercube starting points, then threshold phi at 0.5.

#ifndef LATENTFP_ATTRIBUTION_HPP_
#define LATENTFP_ATTRIBUTION_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "latentfp/fingerprint.hpp"
#include "latentfp/generator.hpp"
#include "latentfp/metrics.hpp"
#include "latentfp/postprocess.hpp"
#include "latentfp/types.hpp"

namespace latentfp {

/// n points (columns) in the box [lower, upper]. Every coordinate puts
/// exactly one point in each of n equal-width strata, uniformly jittered.
/// Degenerate intervals pin the coordinate.
Matrix lhs_initial_guesses(const Vector& lower, const Vector& upper, int n, std::uint64_t rng_seed);

struct OptimizerSettings {
  /// Initial step, in units of the alpha box width (1 for phi).
  double step_size = 0.02;
  double max_step_size = 0.2;
  int max_iterations = 400;
  /// Stop when the objective improved by less than this fraction over the
  /// last `patience` iterations.
  double tolerance = 1e-8;
  int patience = 20;
};

struct AttributionProblem {
  ImageGrid target;
  FingerprintConfig cfg;
  MetricHandle metric;
  int restarts = 20;
  /// Box-penalty weight; unset picks 10 * initial objective / width^2.
  std::optional<double> penalty_weight;
  OptimizerSettings optimizer;
  std::uint64_t rng_seed = 0;
  /// Holds alpha at this value and optimizes phi only.
  std::optional<Vector> fixed_alpha;
};

struct AttributionResult {
  bool ok = false;
  std::string failure;
  Vector alpha_hat;
  Vector phi_relaxed;
  Bits phi_hat;
  double residual = 0.0;
  int best_restart = -1;
  /// NaN marks a failed restart.
  std::vector<double> per_restart_residuals;
  std::vector<int> per_restart_iterations;
  int iterations_used = 0;
  int restarts_failed = 0;
  double penalty_weight = 0.0;
  /// Largest distance of alpha_hat outside the box.
  double constraint_violation = 0.0;
  std::optional<double> alpha_error;
};

/// Throws std::invalid_argument on malformed problems; optimizer trouble is
/// reported through `ok`/`failure` instead.
AttributionResult decode(const Generator& gen, const AttributionProblem& problem);

/// Objective of a single point, as minimized by decode.
double attribution_objective(const Generator& gen, const AttributionProblem& problem,
                             double penalty_weight, const Vector& alpha, const Vector& phi);

/// What the harness knows about one attribution trial.
struct Trial {
  int key_id = 0;
  int seed_index = 0;
  std::uint64_t seed = 0;
  Key key;
  Vector z;
  Vector alpha;  // U^T (psi(z) - mu)
};

using Decoder = std::function<AttributionResult(const ImageGrid& target, const Trial& trial)>;

struct AccuracyOptions {
  MetricHandle metric;
  int restarts = 20;
  std::optional<double> penalty_weight;
  OptimizerSettings optimizer;
  std::optional<PostprocessSpec> postprocess;
  int jobs = 1;
  /// Replaces decode(); used for harness checks.
  Decoder decoder;
};

struct DecodeLogRow {
  int key_id = 0;
  int seed_index = 0;
  std::string postprocess;
  double bit_accuracy = 0.0;
  bool exact_match = false;
  double residual = 0.0;
  double alpha_err_norm = 0.0;
  int restarts_failed = 0;
};

struct AccuracyReport {
  double accuracy = 0.0;
  double bit_accuracy = 0.0;
  double mean_alpha_error = 0.0;
  std::vector<double> per_key_accuracy;
  int trials = 0;
  int failed_decodes = 0;
  /// Ordered by (key_id, seed_index).
  std::vector<DecodeLogRow> rows;
};

/// Trial (key k, seed s) of an evaluate_accuracy run; exposed so other
/// harnesses can regenerate exactly the same images.
Trial make_trial(const Generator& gen, const FingerprintConfig& cfg, const Key& key, int seed_index,
                 std::uint64_t rng_seed);
ImageGrid trial_image(const Generator& gen, const FingerprintConfig& cfg, const Trial& trial,
                      const std::optional<PostprocessSpec>& postprocess);

AccuracyReport evaluate_accuracy(const Generator& gen, const FingerprintConfig& cfg,
                                 const KeyRegistry& registry, int n_seeds, std::uint64_t rng_seed,
                                 const AccuracyOptions& options);

void write_decode_log(const AccuracyReport& report, const std::filesystem::path& path);

}  // namespace latentfp

#endif  // LATENTFP_ATTRIBUTION_HPP_
