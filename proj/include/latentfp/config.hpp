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

// Experiment configuration. The file format is flat `key = value` lines;
// list-valued axes repeat their key:
//
//   generator.image_h = 16
//   pc_range = major
//   pc_range = 48:64
//   sigma = 1
//   attack = strongest:combo
//   attack = jpeg,jpeg_quality=70
//
// `#` starts a comment. Unknown keys are errors.

#ifndef LATENTFP_CONFIG_HPP_
#define LATENTFP_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "latentfp/attribution.hpp"
#include "latentfp/generator.hpp"
#include "latentfp/postprocess.hpp"

namespace latentfp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pc_range axis entry: "major" (PC[0:d_phi]), "minor"
/// (PC[d_w - d_phi:d_w]) or an explicit "i:j".
struct PcRangeSpec {
  enum class Kind { kMajor, kMinor, kExplicit } kind = Kind::kMinor;
  int begin = 0;
  int end = 0;
  std::string text;

  /// [begin, end) for a given key length; nullopt if an explicit range does
  /// not have d_phi directions.
  std::optional<std::pair<int, int>> resolve(int d_phi, int d_w) const;
};

struct AttackEntry {
  std::string text;  // as written in the config
  PostprocessSpec spec;
};

enum class MetricChoice { kL2, kRobust };

struct ExperimentConfig {
  GeneratorSpec generator;
  int stats_samples = 10000;
  std::uint64_t stats_seed = 42;

  std::vector<PcRangeSpec> pc_ranges;
  std::vector<double> sigmas;
  std::vector<int> d_phis;
  std::vector<AttackEntry> attacks;
  std::vector<MetricChoice> metrics;

  int keys_per_cell = 20;
  int seeds_per_key = 25;
  int restarts = 20;
  OptimizerSettings optimizer;
  /// Images per cell for the Frechet distance / SSIM columns; 0 skips
  /// them, otherwise at least the feature dimension + 1.
  int quality_samples = 300;
  int robust_triplets = 300;

  /// Per-pixel RMS strengths of the shallow baseline; empty disables it.
  std::vector<double> baseline_deltas;

  std::filesystem::path output_dir = "latentfp_out";
  std::uint64_t master_seed = 1;
  int jobs = 1;
  bool resume = false;
  /// Stop after this many newly computed cells (< 0: no limit).
  int stop_after_cells = -1;
};

/// Parses config text. Axes left empty get defaults (minor PCs, sigma 1,
/// d_phi 16, identity attack, l2 metric). Throws ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Cross-field checks (ranges fit in d_w, every explicit range matches some
/// d_phi, positive counts, ...). Throws ConfigError.
void validate(const ExperimentConfig& config);

/// Parses one attack value: "identity", "strongest:KIND", "random:KIND" or
/// "KIND[,param=value...]" with params noise_sigma, blur=SIZExSIGMA,
/// jpeg_quality, include_prob, seed.
PostprocessSpec parse_attack(const std::string& text, std::uint64_t master_seed, int index);

std::string metric_name(MetricChoice m);

}  // namespace latentfp

#endif  // LATENTFP_CONFIG_HPP_
