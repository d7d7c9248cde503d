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

// Sweep reports: one row per (pc_range, sigma, d_phi, attack, metric) cell,
// with CSV/JSON serialization, an aligned text table and an SVG scatter of
// accuracy against Frechet distance.

#ifndef LATENTFP_REPORT_HPP_
#define LATENTFP_REPORT_HPP_

#include <filesystem>
#include <string>
#include <vector>

namespace latentfp {

struct SweepRow {
  std::string pc_range;  // "i:j", or "pixel" for the shallow baseline
  double sigma = 0.0;    // baseline rows: per-pixel strength delta
  int d_phi = 0;
  std::string attack;
  std::string metric;
  double accuracy = 0.0;
  double bit_accuracy = 0.0;
  double frechet_distance = 0.0;
  double ssim_mean = 0.0;
  double ssim_std = 0.0;
  double mean_alpha_error = 0.0;
  int trials = 0;
  int failed_decodes = 0;
  std::string status = "ok";
  double wall_time_s = 0.0;

  bool operator==(const SweepRow&) const = default;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  /// False when the run stopped before every cell finished.
  bool complete = true;
};

/// CSV header, shared by every writer.
std::string report_csv_header();
std::string to_csv_line(const SweepRow& row);
SweepRow parse_csv_line(const std::string& line);

/// Doubles are written with 17 significant digits so parse-back is exact.
std::string to_csv(const SweepReport& report);
SweepReport parse_csv(const std::string& text);
void write_csv(const SweepReport& report, const std::filesystem::path& path);
SweepReport read_csv(const std::filesystem::path& path);

std::string to_json(const SweepReport& report);

/// Aligned text table, one line per row.
std::string render_table(const SweepReport& report);
/// Accuracy (y) against Frechet distance (x), one labelled point per row.
std::string render_scatter_svg(const SweepReport& report);
/// Writes report.txt and report.svg into `dir`.
void render_report(const SweepReport& report, const std::filesystem::path& dir);

}  // namespace latentfp

#endif  // LATENTFP_REPORT_HPP_
