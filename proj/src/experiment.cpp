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

#include "latentfp/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "latentfp/fingerprint.hpp"
#include "latentfp/metrics.hpp"
#include "latentfp/parallel.hpp"
#include "latentfp/postprocess.hpp"
#include "latentfp/rng.hpp"

namespace latentfp {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
namespace fs = std::filesystem;

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Unfingerprinted images of the shared quality seeds, one per column.
Matrix reference_images(const Generator& gen, int n, std::uint64_t seed) {
  Matrix w(gen.d_w(), n);
  for (int i = 0; i < n; ++i) w.col(i) = gen.map_latent(sample_seed(gen.d_z(), seed, i)).w;
  return gen.evaluate_batch(w);
}

std::optional<SweepRow> read_marker(const fs::path& path) {
  std::ifstream is(path);
  if (!is) return std::nullopt;
  std::string line;
  if (!std::getline(is, line)) return std::nullopt;
  try {
    return parse_csv_line(line);
  } catch (const std::exception&) {
    return std::nullopt;  // torn write; recompute
  }
}

void write_marker(const fs::path& path, const SweepRow& row) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << to_csv_line(row) << '\n';
  }
  fs::rename(tmp, path);
}

SweepRow failed_row(SweepRow row, const std::string& what) {
  row.status = "error: " + what;
  row.accuracy = row.bit_accuracy = kNaN;
  row.frechet_distance = row.ssim_mean = row.ssim_std = kNaN;
  row.mean_alpha_error = kNaN;
  return row;
}

}  // namespace

std::string Cell::pc_label() const { return std::to_string(begin) + ":" + std::to_string(end); }

std::string Cell::key() const {
  return pc.text + "|" + pc_label() + "|d_phi=" + std::to_string(d_phi) + "|sigma=" +
         hexfloat(sigma) + "|attack=" + attack.text + "|metric=" + metric_name(metric);
}

std::string Cell::id(std::uint64_t master_seed) const {
  return hex64(stable_hash(master_seed, key()));
}

std::vector<Cell> enumerate_cells(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  const int dw = config.generator.d_w;
  for (const PcRangeSpec& pc : config.pc_ranges)
    for (int d : config.d_phis) {
      const auto range = pc.resolve(d, dw);
      if (!range) continue;
      for (double s : config.sigmas)
        for (const AttackEntry& a : config.attacks)
          for (MetricChoice m : config.metrics) {
            Cell c;
            c.pc = pc;
            c.begin = range->first;
            c.end = range->second;
            c.d_phi = d;
            c.sigma = s;
            c.attack = a;
            c.metric = m;
            cells.push_back(std::move(c));
          }
    }
  return cells;
}

CellSeeds cell_seeds(std::uint64_t master_seed, const Cell& cell) {
  const std::string shared =
      cell.pc_label() + "|d_phi=" + std::to_string(cell.d_phi) + "|sigma=" + hexfloat(cell.sigma);
  const std::uint64_t base = stable_hash(master_seed, shared);
  CellSeeds s;
  s.registry = derive_seed(base, 1);
  s.trials = derive_seed(base, 3);
  s.metric = derive_seed(stable_hash(master_seed, cell.key()), 2);
  return s;
}

std::uint64_t quality_seed(std::uint64_t master_seed) { return stable_hash(master_seed, "quality"); }

std::vector<PostprocessSpec> robust_training_set(const Cell& cell) {
  if (cell.attack.spec.kind != AttackKind::kIdentity) return {cell.attack.spec};
  return {strongest(AttackKind::kNoising), strongest(AttackKind::kBlurring),
          strongest(AttackKind::kJpeg)};
}

CellResult run_cell(const ExperimentConfig& config, const Generator& gen, const LatentStats& stats,
                    const Cell& cell, int jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  CellResult out;
  SweepRow& row = out.row;
  row.pc_range = cell.pc_label();
  row.sigma = cell.sigma;
  row.d_phi = cell.d_phi;
  row.attack = describe(cell.attack.spec);
  row.metric = metric_name(cell.metric);
  try {
    const CellSeeds seeds = cell_seeds(config.master_seed, cell);
    const FingerprintConfig cfg =
        make_fingerprint_config(select_basis(stats, cell.begin, cell.end), cell.sigma);
    const KeyRegistry registry = sample_keys(cell.d_phi, config.keys_per_cell, seeds.registry);

    AccuracyOptions opt;
    opt.metric = MetricHandle::l2();
    if (cell.metric == MetricChoice::kRobust)
      opt.metric = train_robust_metric(gen, cfg, robust_training_set(cell), config.robust_triplets,
                                       seeds.metric)
                       .metric;
    opt.restarts = config.restarts;
    opt.optimizer = config.optimizer;
    if (cell.attack.spec.kind != AttackKind::kIdentity) opt.postprocess = cell.attack.spec;
    opt.jobs = jobs;
    out.accuracy = evaluate_accuracy(gen, cfg, registry, config.seeds_per_key, seeds.trials, opt);
    row.accuracy = out.accuracy.accuracy;
    row.bit_accuracy = out.accuracy.bit_accuracy;
    row.mean_alpha_error = out.accuracy.mean_alpha_error;
    row.trials = out.accuracy.trials;
    row.failed_decodes = out.accuracy.failed_decodes;

    row.frechet_distance = row.ssim_mean = row.ssim_std = kNaN;
    if (config.quality_samples > 0) {
      const std::uint64_t qs = quality_seed(config.master_seed);
      const int n = config.quality_samples;
      Matrix fp(gen.d_x(), n);
      for (int i = 0; i < n; ++i)
        fp.col(i) = generate_fingerprinted(gen, cfg, sample_seed(gen.d_z(), qs, i),
                                           registry.keys[i % registry.size()])
                        .pixels;
      const GeneratorSpec& gs = gen.spec();
      const QualityReport q = quality_report(fp, reference_images(gen, n, qs), gs.channels,
                                             gs.image_h, gs.image_w, gs.output_range);
      row.frechet_distance = q.frechet_distance;
      row.ssim_mean = q.ssim_mean;
      row.ssim_std = q.ssim_std;
    }
  } catch (const std::exception& e) {
    row = failed_row(row, e.what());
  }
  row.wall_time_s = seconds_since(t0);
  return out;
}

int RunOutcome::exit_code() const {
  return cells_failed > 0 || !report.complete ? 2 : 0;
}

RunOutcome run(const ExperimentConfig& config) {
  validate(config);
  const Generator gen = Generator::build(config.generator);
  const fs::path dir = config.output_dir;
  const fs::path cells_dir = dir / "cells";
  fs::create_directories(cells_dir);

  const LatentStats stats = estimate_stats(gen, config.stats_samples, config.stats_seed, config.jobs);
  save_stats(stats, dir / "stats.txt");

  const std::vector<Cell> cells = enumerate_cells(config);
  RunOutcome out;
  out.cells_total = int(cells.size());
  std::vector<std::optional<SweepRow>> rows(cells.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const fs::path marker = cells_dir / (cells[i].id(config.master_seed) + ".done");
    if (config.resume) rows[i] = read_marker(marker);
    if (rows[i])
      ++out.cells_resumed;
    else
      pending.push_back(i);
  }
  if (config.stop_after_cells >= 0 && pending.size() > std::size_t(config.stop_after_cells))
    pending.resize(config.stop_after_cells);

  // Parallelize across cells when there are enough of them, else inside.
  const int outer = pending.size() >= std::size_t(config.jobs) ? config.jobs : 1;
  const int inner = outer == 1 ? config.jobs : 1;
  parallel_for(pending.size(), outer, [&](std::size_t k) {
    const std::size_t i = pending[k];
    const std::string id = cells[i].id(config.master_seed);
    CellResult res = run_cell(config, gen, stats, cells[i], inner);
    if (res.row.status == "ok") {
      write_decode_log(res.accuracy, cells_dir / (id + ".decode.csv"));
      write_marker(cells_dir / (id + ".done"), res.row);
    }
    rows[i] = std::move(res.row);
  });
  out.cells_computed = int(pending.size());

  for (const auto& r : rows) {
    if (!r) {
      out.report.complete = false;
      continue;
    }
    if (r->status != "ok") ++out.cells_failed;
    out.report.rows.push_back(*r);
  }
  if (out.report.complete && !config.baseline_deltas.empty()) {
    for (SweepRow& r : run_baseline_shallow(config, gen)) {
      if (r.status != "ok") ++out.cells_failed;
      out.report.rows.push_back(std::move(r));
    }
  }
  write_csv(out.report, dir / "report.csv");
  std::ofstream(dir / "report.json") << to_json(out.report) << '\n';
  return out;
}

std::vector<SweepRow> run_baseline_shallow(const ExperimentConfig& config, const Generator& gen) {
  std::vector<SweepRow> rows;
  const GeneratorSpec& gs = gen.spec();
  const int dx = gen.d_x();
  const std::uint64_t qs = quality_seed(config.master_seed);
  const int n_mean = std::max(config.quality_samples, 64);
  const Matrix refs = reference_images(gen, n_mean, qs);
  const Vector mean_image = refs.rowwise().mean();

  for (double delta : config.baseline_deltas)
    for (int d_phi : config.d_phis)
      for (const AttackEntry& attack : config.attacks) {
        const auto t0 = std::chrono::steady_clock::now();
        SweepRow row;
        row.pc_range = "pixel";
        row.sigma = delta;
        row.d_phi = d_phi;
        row.attack = describe(attack.spec);
        row.metric = "correlation";
        row.mean_alpha_error = kNaN;
        try {
          const std::string coord =
              "baseline|delta=" + hexfloat(delta) + "|d_phi=" + std::to_string(d_phi);
          const std::uint64_t base = stable_hash(config.master_seed, coord);
          Matrix patterns(dx, d_phi);
          Rng prng = make_rng(derive_seed(base, 0));
          for (int b = 0; b < d_phi; ++b)
            for (int p = 0; p < dx; ++p) patterns(p, b) = uniform01(prng) < 0.5 ? -1.0 : 1.0;
          const KeyRegistry registry = sample_keys(d_phi, config.keys_per_cell, derive_seed(base, 1));
          const double scale = delta / std::sqrt(double(d_phi));
          auto mark = [&](const Vector& pixels, const Key& key) {
            Vector signs = 2.0 * key.as_vector().array() - 1.0;
            ImageGrid img(gs.channels, gs.image_h, gs.image_w, pixels + scale * (patterns * signs));
            return clamp_to_range(std::move(img), gs.output_range);
          };

          const int n_seeds = config.seeds_per_key;
          const std::size_t total = std::size_t(registry.size()) * n_seeds;
          std::vector<double> bit_acc(total), exact(total);
          const std::uint64_t trial_seed = derive_seed(base, 3);
          parallel_for(total, config.jobs, [&](std::size_t i) {
            const Key& key = registry.keys[i / n_seeds];
            const std::uint64_t s = derive_seed(derive_seed(trial_seed, key.id), i % n_seeds);
            const Vector z = sample_seed(gen.d_z(), s, 0);
            ImageGrid img = mark(gen.evaluate(gen.map_latent(z).w).pixels, key);
            if (attack.spec.kind != AttackKind::kIdentity)
              img = apply(attack.spec, img, derive_seed(s, 2), gs.output_range);
            const Vector corr = patterns.transpose() * (img.pixels - mean_image);
            Bits bits(d_phi);
            for (int b = 0; b < d_phi; ++b) bits[b] = corr[b] >= 0 ? 1 : 0;
            const int wrong = hamming_distance(bits, key.bits);
            bit_acc[i] = 1.0 - double(wrong) / d_phi;
            exact[i] = wrong == 0;
          });
          double acc = 0, bacc = 0;
          for (std::size_t i = 0; i < total; ++i) acc += exact[i], bacc += bit_acc[i];
          row.accuracy = acc / double(total);
          row.bit_accuracy = bacc / double(total);
          row.trials = int(total);

          row.frechet_distance = row.ssim_mean = row.ssim_std = kNaN;
          if (config.quality_samples > 0) {
            const int n = config.quality_samples;
            Matrix fp(dx, n);
            for (int i = 0; i < n; ++i)
              fp.col(i) = mark(refs.col(i), registry.keys[i % registry.size()]).pixels;
            const QualityReport q = quality_report(fp, refs.leftCols(n), gs.channels, gs.image_h,
                                                   gs.image_w, gs.output_range);
            row.frechet_distance = q.frechet_distance;
            row.ssim_mean = q.ssim_mean;
            row.ssim_std = q.ssim_std;
          }
        } catch (const std::exception& e) {
          row = failed_row(row, e.what());
        }
        row.wall_time_s = seconds_since(t0);
        rows.push_back(std::move(row));
      }
  return rows;
}

}  // namespace latentfp
