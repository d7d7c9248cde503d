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

// Sweep runner. Cells are the product pc_range x d_phi x sigma x attack x
// metric, in that order, with explicit ranges skipped for d_phi values they
// do not match.
//
// Output layout under config.output_dir:
//   stats.txt               latent statistics
//   cells/<id>.done         finished cell, holds its CSV row
//   cells/<id>.decode.csv   per-trial decode log
//   report.csv, report.json

#ifndef LATENTFP_EXPERIMENT_HPP_
#define LATENTFP_EXPERIMENT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "latentfp/attribution.hpp"
#include "latentfp/config.hpp"
#include "latentfp/generator.hpp"
#include "latentfp/report.hpp"
#include "latentfp/spectral.hpp"

namespace latentfp {

struct Cell {
  PcRangeSpec pc;
  int begin = 0;
  int end = 0;
  int d_phi = 0;
  double sigma = 1.0;
  AttackEntry attack;
  MetricChoice metric = MetricChoice::kL2;

  /// Canonical coordinate string; hashed into the cell's seeds.
  std::string key() const;
  /// 16 hex digits, used for marker file names.
  std::string id(std::uint64_t master_seed) const;
  std::string pc_label() const;
};

std::vector<Cell> enumerate_cells(const ExperimentConfig& config);

/// Keys and trial seeds depend on (pc_range, d_phi, sigma) only, so rows
/// that differ in attack or metric decode the same images. The metric seed
/// covers every coordinate.
struct CellSeeds {
  std::uint64_t registry = 0;
  std::uint64_t trials = 0;
  std::uint64_t metric = 0;
};
CellSeeds cell_seeds(std::uint64_t master_seed, const Cell& cell);

/// Seeds of the quality images, shared by every cell.
std::uint64_t quality_seed(std::uint64_t master_seed);

/// The attack set a robust metric is trained against in this cell: the
/// cell's own attack, or the three strongest single attacks when the cell
/// attack is the identity.
std::vector<PostprocessSpec> robust_training_set(const Cell& cell);

struct CellResult {
  SweepRow row;
  AccuracyReport accuracy;
};

/// Runs one cell. Exceptions are turned into a row with a non-"ok" status.
CellResult run_cell(const ExperimentConfig& config, const Generator& gen,
                    const LatentStats& stats, const Cell& cell, int jobs = 1);

struct RunOutcome {
  SweepReport report;
  int cells_total = 0;
  int cells_computed = 0;
  int cells_resumed = 0;
  int cells_failed = 0;

  /// 0 on full success, 2 when a cell failed or the run stopped early.
  int exit_code() const;
};

/// Runs every cell (plus the shallow baseline rows when configured) and
/// writes the output layout above. Throws ConfigError on an invalid config
/// before any work.
RunOutcome run(const ExperimentConfig& config);

/// Shallow pixel-space baseline: key k adds
///   delta / sqrt(d_phi) * sum_b (2 phi_b - 1) P_b
/// to the image, with seeded +-1 patterns P_b, and is read back bit by bit
/// from the sign of <x - mean image, P_b>. One row per (delta, d_phi,
/// attack); pc_range is "pixel" and metric "correlation".
std::vector<SweepRow> run_baseline_shallow(const ExperimentConfig& config, const Generator& gen);

}  // namespace latentfp

#endif  // LATENTFP_EXPERIMENT_HPP_
