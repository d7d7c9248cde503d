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

#include <fstream>
#include <set>
#include <sstream>

#include "latentfp/experiment.hpp"
#include "latentfp/rng.hpp"
#include "test_util.hpp"

namespace latentfp {
namespace {

std::string small_config(const std::string& extra) {
  return "stats.n_samples = 1000\n"
         "keys_per_cell = 2\n"
         "seeds_per_key = 2\n"
         "restarts = 3\n"
         "optimizer.max_iterations = 60\n"
         "quality_samples = 0\n"
         "robust_triplets = 20\n" +
         extra;
}

// Every column except the wall time.
std::vector<std::string> stable_columns(const SweepReport& rep) {
  std::vector<std::string> out;
  for (SweepRow r : rep.rows) {
    r.wall_time_s = 0;
    out.push_back(to_csv_line(r));
  }
  return out;
}

TEST(Cells, EnumerationOrderAndSkipping) {
  const ExperimentConfig c = parse_config(
      "pc_range = major\npc_range = 0:8\nd_phi = 8\nd_phi = 16\nsigma = 1\nsigma = 2\n"
      "attack = identity\nattack = strongest:jpeg\nmetric = l2\nmetric = robust");
  const std::vector<Cell> cells = enumerate_cells(c);
  // major: 2 d_phi x 2 sigma x 2 attacks x 2 metrics; 0:8 only with d_phi 8.
  ASSERT_EQ(cells.size(), 16u + 8u);
  EXPECT_EQ(cells[0].pc_label(), "0:8");
  EXPECT_EQ(cells[0].metric, MetricChoice::kL2);
  EXPECT_EQ(cells[1].metric, MetricChoice::kRobust);
  EXPECT_EQ(cells[2].attack.text, "strongest:jpeg");
  EXPECT_EQ(cells[4].sigma, 2.0);
  EXPECT_EQ(cells[8].d_phi, 16);
  EXPECT_EQ(cells[8].pc_label(), "0:16");
  for (std::size_t i = 16; i < cells.size(); ++i) EXPECT_EQ(cells[i].d_phi, 8);
  std::set<std::string> ids;
  for (const Cell& cell : cells) ids.insert(cell.id(1));
  EXPECT_EQ(ids.size(), cells.size());
  EXPECT_EQ(cells[0].id(1).size(), 16u);
  EXPECT_NE(cells[0].id(1), cells[0].id(2));
}

TEST(Cells, SeedsSharedAcrossAttackAndMetric) {
  const ExperimentConfig c = parse_config(
      "sigma = 1\nsigma = 2\nattack = identity\nattack = strongest:jpeg\nmetric = l2\nmetric = robust");
  const std::vector<Cell> cells = enumerate_cells(c);
  ASSERT_EQ(cells.size(), 8u);
  const CellSeeds a = cell_seeds(1, cells[0]), b = cell_seeds(1, cells[3]), s2 = cell_seeds(1, cells[4]);
  EXPECT_EQ(a.registry, b.registry);
  EXPECT_EQ(a.trials, b.trials);
  EXPECT_NE(a.metric, b.metric);
  EXPECT_NE(a.registry, s2.registry);
  EXPECT_NE(a.trials, s2.trials);
}

TEST(Cells, RobustTrainingSet) {
  const ExperimentConfig c = parse_config("attack = identity\nattack = strongest:blurring");
  const std::vector<Cell> cells = enumerate_cells(c);
  EXPECT_EQ(robust_training_set(cells[0]).size(), 3u);
  ASSERT_EQ(robust_training_set(cells[1]).size(), 1u);
  EXPECT_EQ(robust_training_set(cells[1])[0], strongest(AttackKind::kBlurring));
}

TEST(Cells, SingleCellMatchesStandaloneEvaluation) {
  const ExperimentConfig c = parse_config(small_config("attack = strongest:noising"));
  const Generator gen = Generator::build(c.generator);
  const LatentStats stats = estimate_stats(gen, c.stats_samples, c.stats_seed);
  const Cell cell = enumerate_cells(c).at(0);
  const CellResult res = run_cell(c, gen, stats, cell);
  ASSERT_EQ(res.row.status, "ok");

  const CellSeeds seeds = cell_seeds(c.master_seed, cell);
  AccuracyOptions opt;
  opt.restarts = 3;
  opt.optimizer.max_iterations = 60;
  opt.postprocess = strongest(AttackKind::kNoising);
  const AccuracyReport ref = evaluate_accuracy(
      gen, make_fingerprint_config(select_basis(stats, 48, 64), 1.0),
      sample_keys(16, 2, seeds.registry), 2, seeds.trials, opt);
  EXPECT_EQ(res.row.accuracy, ref.accuracy);
  EXPECT_EQ(res.row.bit_accuracy, ref.bit_accuracy);
  EXPECT_EQ(res.row.mean_alpha_error, ref.mean_alpha_error);
  EXPECT_EQ(res.row.trials, 4);
  EXPECT_EQ(res.row.pc_range, "48:64");
  EXPECT_TRUE(std::isnan(res.row.frechet_distance));
}

TEST(Cells, FailureBecomesStatus) {
  const ExperimentConfig c = parse_config(small_config(""));
  const Generator gen = Generator::build(c.generator);
  // Statistics of a different latent size make the basis selection fail.
  const LatentStats wrong = estimate_stats(testing::random_affine(8, 8, 4, 4, 1), 100, 1);
  const CellResult res = run_cell(c, gen, wrong, enumerate_cells(c).at(0));
  EXPECT_EQ(res.row.status.rfind("error: ", 0), 0u) << res.row.status;
  EXPECT_TRUE(std::isnan(res.row.accuracy));
}

TEST(Run, DeterministicAndWritesLayout) {
  const auto dir = testing::temp_dir("run_det");
  const std::string cfg = small_config("sigma = 0.5\nsigma = 1\njobs = 2\n");
  ExperimentConfig a = parse_config(cfg + "output_dir = " + (dir / "a").string());
  ExperimentConfig b = parse_config(cfg + "output_dir = " + (dir / "b").string());
  b.jobs = 1;
  const RunOutcome ra = run(a), rb = run(b);
  EXPECT_EQ(ra.exit_code(), 0);
  EXPECT_EQ(ra.cells_computed, 2);
  EXPECT_EQ(stable_columns(ra.report), stable_columns(rb.report));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "report.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "stats.txt"));
  const Cell cell = enumerate_cells(a).at(0);
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "cells" / (cell.id(1) + ".done")));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "cells" / (cell.id(1) + ".decode.csv")));
  EXPECT_EQ(stable_columns(read_csv(dir / "a" / "report.csv")), stable_columns(ra.report));
}

TEST(Run, ResumeAfterInterruption) {
  const auto dir = testing::temp_dir("run_resume");
  const std::string cfg =
      small_config("sigma = 0.5\nsigma = 1\nattack = identity\nattack = strongest:jpeg\n");
  ExperimentConfig full = parse_config(cfg + "output_dir = " + (dir / "full").string());
  const RunOutcome ref = run(full);
  ASSERT_EQ(ref.cells_total, 4);

  ExperimentConfig part = parse_config(cfg + "output_dir = " + (dir / "part").string());
  part.stop_after_cells = 2;
  const RunOutcome first = run(part);
  EXPECT_EQ(first.exit_code(), 2);
  EXPECT_FALSE(first.report.complete);
  EXPECT_EQ(first.report.rows.size(), 2u);

  part.stop_after_cells = -1;
  part.resume = true;
  const RunOutcome second = run(part);
  EXPECT_EQ(second.exit_code(), 0);
  EXPECT_EQ(second.cells_resumed, 2);
  EXPECT_EQ(second.cells_computed, 2);
  EXPECT_EQ(stable_columns(second.report), stable_columns(ref.report));

  // Deleting one marker recomputes only that cell.
  std::filesystem::remove(dir / "part" / "cells" / (enumerate_cells(part).at(1).id(1) + ".done"));
  const RunOutcome third = run(part);
  EXPECT_EQ(third.cells_computed, 1);
  EXPECT_EQ(third.cells_resumed, 3);
  EXPECT_EQ(stable_columns(third.report), stable_columns(ref.report));
}

TEST(Run, CorruptMarkerIsRecomputed) {
  const auto dir = testing::temp_dir("run_corrupt");
  ExperimentConfig c = parse_config(small_config("output_dir = " + dir.string()));
  const RunOutcome ref = run(c);
  std::ofstream(dir / "cells" / (enumerate_cells(c).at(0).id(1) + ".done")) << "garbage";
  c.resume = true;
  const RunOutcome again = run(c);
  EXPECT_EQ(again.cells_computed, 1);
  EXPECT_EQ(stable_columns(again.report), stable_columns(ref.report));
}

TEST(Baseline, StrongPatternIsReadBackAndZeroIsChance) {
  ExperimentConfig c = parse_config(small_config(
      "keys_per_cell = 10\nseeds_per_key = 20\nbaseline_delta = 0\nbaseline_delta = 0.5\nd_phi = 8"));
  const Generator gen = Generator::build(c.generator);
  const std::vector<SweepRow> rows = run_baseline_shallow(c, gen);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].pc_range, "pixel");
  EXPECT_EQ(rows[0].metric, "correlation");
  EXPECT_NEAR(rows[0].bit_accuracy, 0.5, 0.1);
  EXPECT_LE(rows[0].accuracy, 0.05);
  EXPECT_EQ(rows[1].accuracy, 1.0);
  EXPECT_EQ(rows[1].trials, 200);
  EXPECT_TRUE(std::isnan(rows[1].mean_alpha_error));
}

TEST(Baseline, RowsAppendedToCompleteRuns) {
  const auto dir = testing::temp_dir("run_baseline");
  ExperimentConfig c =
      parse_config(small_config("baseline_delta = 0.5\noutput_dir = " + dir.string()));
  const RunOutcome out = run(c);
  ASSERT_EQ(out.report.rows.size(), 2u);
  EXPECT_EQ(out.report.rows[1].pc_range, "pixel");
}

}  // namespace
}  // namespace latentfp
