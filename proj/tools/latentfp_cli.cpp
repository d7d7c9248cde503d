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

// latentfp: command-line front end.
//   latentfp stats        --config C [--out DIR]
//   latentfp sweep        --config C [--seed N] [--out DIR] [--resume] [--jobs N]
//   latentfp prop1        --config C [--sigma S] [--pc i:j] [--eps E]
//   latentfp prop2        --config C [--sigma S] [--pc i:j] [--reps R]
//   latentfp train-metric --config C --attack A [--pc i:j] [--triplets N] [--out DIR]
//   latentfp report       --out DIR
// Exit codes: 0 success, 2 partial failure, 1 config or usage error.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "latentfp/config.hpp"
#include "latentfp/experiment.hpp"
#include "latentfp/metrics.hpp"
#include "latentfp/report.hpp"
#include "latentfp/rng.hpp"
#include "latentfp/spectral.hpp"
#include "latentfp/theory.hpp"

namespace fs = std::filesystem;
using namespace latentfp;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  bool resume = false;
};

// Flag overrides are appended as config lines so presets that depend on
// master_seed see the final value.
ExperimentConfig load(const Common& c) {
  std::string text;
  if (!c.config.empty()) {
    std::ifstream is(c.config);
    if (!is) throw ConfigError("cannot read config " + c.config);
    std::stringstream ss;
    ss << is.rdbuf();
    text = ss.str();
  }
  text += "\n";
  if (c.seed_set) text += "master_seed = " + std::to_string(c.seed) + "\n";
  if (!c.out.empty()) text += "output_dir = " + c.out + "\n";
  if (c.jobs > 0) text += "jobs = " + std::to_string(c.jobs) + "\n";
  ExperimentConfig cfg = parse_config(text);
  cfg.resume = c.resume;
  return cfg;
}

// Basis for the theory verbs: explicit "i:j" or the config's first
// pc_range at its first d_phi.
FingerprintBasis pick_basis(const ExperimentConfig& cfg, const LatentStats& stats,
                            const std::string& pc) {
  PcRangeSpec spec = cfg.pc_ranges.front();
  int d_phi = cfg.d_phis.front();
  if (!pc.empty()) {
    const auto colon = pc.find(':');
    if (colon == std::string::npos) throw ConfigError("--pc: expected i:j");
    spec.kind = PcRangeSpec::Kind::kExplicit;
    spec.begin = std::stoi(pc.substr(0, colon));
    spec.end = std::stoi(pc.substr(colon + 1));
    d_phi = spec.end - spec.begin;
  }
  const auto r = spec.resolve(d_phi, cfg.generator.d_w);
  if (!r || r->first < 0 || r->second > cfg.generator.d_w || r->first >= r->second)
    throw ConfigError("pc range does not fit the latent space");
  return select_basis(stats, r->first, r->second);
}

int cmd_stats(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const Generator gen = Generator::build(cfg.generator);
  const LatentStats stats = estimate_stats(gen, cfg.stats_samples, cfg.stats_seed, cfg.jobs);
  fs::create_directories(cfg.output_dir);
  save_stats(stats, cfg.output_dir / "stats.txt");
  std::cout << "samples " << stats.sample_count << "\neigenvalues";
  for (Eigen::Index i = 0; i < stats.eigenvalues.size(); ++i) std::cout << ' ' << stats.eigenvalues[i];
  std::cout << "\nwrote " << (cfg.output_dir / "stats.txt").string() << '\n';
  return 0;
}

int cmd_sweep(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const RunOutcome out = run(cfg);
  render_report(out.report, cfg.output_dir);
  std::cout << render_table(out.report);
  std::cout << "cells: " << out.cells_total << " total, " << out.cells_computed << " computed, "
            << out.cells_resumed << " resumed, " << out.cells_failed << " failed\n";
  return out.exit_code();
}

int cmd_prop1(const Common& c, double sigma, const std::string& pc, double eps) {
  const ExperimentConfig cfg = load(c);
  const Generator gen = Generator::build(cfg.generator);
  const LatentStats stats = estimate_stats(gen, cfg.stats_samples, cfg.stats_seed, cfg.jobs);
  const FingerprintBasis basis = pick_basis(cfg, stats, pc);
  Rng rng = make_rng(derive_seed(cfg.master_seed, 11));
  Vector e = standard_normal(rng, basis.U.cols());
  e *= eps / e.norm();
  Prop1Options opt;
  opt.rng_seed = derive_seed(cfg.master_seed, 12);
  opt.jobs = cfg.jobs;
  std::cout << to_string(check_prop1(gen, basis, sigma, e, opt)) << '\n';
  return 0;
}

int cmd_prop2(const Common& c, double sigma, const std::string& pc, int reps) {
  const ExperimentConfig cfg = load(c);
  const Generator gen = Generator::build(cfg.generator);
  const LatentStats stats = estimate_stats(gen, cfg.stats_samples, cfg.stats_seed, cfg.jobs);
  const FingerprintBasis basis = pick_basis(cfg, stats, pc);
  Prop2Options opt;
  opt.rng_seed = derive_seed(cfg.master_seed, 13);
  opt.jobs = cfg.jobs;
  if (reps <= 1) {
    const Prop2Report r = check_prop2(gen, basis, sigma, opt);
    std::cout << to_string(r) << '\n';
    return r.holds_mean && r.holds_trace ? 0 : 2;
  }
  const Prop2Repetitions r = check_prop2_repeated(gen, basis, sigma, reps, opt);
  std::cout << "repetitions " << r.repetitions << ": both hold " << r.both_hold << ", mean gap "
            << r.mean_holds << ", trace gap " << r.trace_holds << '\n';
  return 0;
}

int cmd_train_metric(const Common& c, const std::string& attack, const std::string& pc,
                     int triplets) {
  const ExperimentConfig cfg = load(c);
  const Generator gen = Generator::build(cfg.generator);
  const LatentStats stats = estimate_stats(gen, cfg.stats_samples, cfg.stats_seed, cfg.jobs);
  const FingerprintConfig fc = make_fingerprint_config(pick_basis(cfg, stats, pc), cfg.sigmas.front());
  const PostprocessSpec spec = parse_attack(attack, cfg.master_seed, 0);
  const TrainedMetric tm = train_robust_metric(gen, fc, {spec}, triplets > 0 ? triplets : cfg.robust_triplets,
                                               derive_seed(cfg.master_seed, 14));
  fs::create_directories(cfg.output_dir);
  const fs::path path = cfg.output_dir / "metric.txt";
  save_metric(tm.metric, path);
  std::cout << "trained on " << describe(spec) << ": " << tm.triplets_used << " triplets ("
            << tm.triplets_skipped << " skipped), ranking accuracy train "
            << tm.train_ranking_accuracy << ", held-out " << tm.heldout_ranking_accuracy
            << "\nwrote " << path.string() << '\n';
  return 0;
}

int cmd_report(const Common& c) {
  if (c.out.empty()) throw ConfigError("report: --out DIR is required");
  const SweepReport rep = read_csv(fs::path(c.out) / "report.csv");
  render_report(rep, c.out);
  std::cout << render_table(rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space fingerprinting experiments"};
  app.require_subcommand(1);
  Common c;
  double sigma = 1.0, eps = 0.1;
  std::string pc, attack;
  int reps = 1, triplets = 0;

  auto common = [&](CLI::App* sub, bool sweep_flags) {
    sub->add_option("--config", c.config, "config file (key = value lines)");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
    auto* s = sub->add_option("--seed", c.seed, "master seed");
    s->each([&](const std::string&) { c.seed_set = true; });
    if (sweep_flags) sub->add_flag("--resume", c.resume, "skip cells with completion markers");
  };
  auto* stats = app.add_subcommand("stats", "estimate latent statistics");
  common(stats, false);
  auto* sweep = app.add_subcommand("sweep", "run the configured sweep");
  common(sweep, true);
  auto* p1 = app.add_subcommand("prop1", "key estimation error against its linearization");
  common(p1, false);
  p1->add_option("--sigma", sigma, "fingerprint strength");
  p1->add_option("--pc", pc, "fingerprint directions i:j");
  p1->add_option("--eps", eps, "norm of the injected alpha error");
  auto* p2 = app.add_subcommand("prop2", "quality bounds");
  common(p2, false);
  p2->add_option("--sigma", sigma, "fingerprint strength");
  p2->add_option("--pc", pc, "fingerprint directions i:j");
  p2->add_option("--reps", reps, "seeded repetitions");
  auto* tm = app.add_subcommand("train-metric", "train a robust metric against an attack");
  common(tm, false);
  tm->add_option("--attack", attack, "attack, e.g. strongest:blurring")->required();
  tm->add_option("--pc", pc, "fingerprint directions i:j");
  tm->add_option("--triplets", triplets, "training triplets");
  auto* rep = app.add_subcommand("report", "render report.csv in --out");
  common(rep, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*stats) return cmd_stats(c);
    if (*sweep) return cmd_sweep(c);
    if (*p1) return cmd_prop1(c, sigma, pc, eps);
    if (*p2) return cmd_prop2(c, sigma, pc, reps);
    if (*tm) return cmd_train_metric(c, attack, pc, triplets);
    if (*rep) return cmd_report(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
