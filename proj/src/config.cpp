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

#include "latentfp/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "latentfp/metrics.hpp"
#include "latentfp/rng.hpp"

namespace latentfp {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(d))
    throw ConfigError(key + ": '" + v + "' is not a number");
  return d;
}

long long to_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(key + ": '" + v + "' is not an integer");
  return i;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long i = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || *end != '\0' || errno == ERANGE)
    throw ConfigError(key + ": '" + v + "' is not an unsigned integer");
  return i;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  for (const std::string& item : split(v, ',')) out.push_back(int(to_int(key, item)));
  return out;
}

PcRangeSpec parse_pc_range(const std::string& v) {
  PcRangeSpec pc;
  pc.text = v;
  if (v == "major") {
    pc.kind = PcRangeSpec::Kind::kMajor;
  } else if (v == "minor") {
    pc.kind = PcRangeSpec::Kind::kMinor;
  } else {
    const auto parts = split(v, ':');
    if (parts.size() != 2) throw ConfigError("pc_range: expected major, minor or i:j, got '" + v + "'");
    pc.kind = PcRangeSpec::Kind::kExplicit;
    pc.begin = int(to_int("pc_range", parts[0]));
    pc.end = int(to_int("pc_range", parts[1]));
    if (pc.begin < 0 || pc.end <= pc.begin) throw ConfigError("pc_range: need 0 <= i < j in '" + v + "'");
  }
  return pc;
}

}  // namespace

std::optional<std::pair<int, int>> PcRangeSpec::resolve(int d_phi, int d_w) const {
  switch (kind) {
    case Kind::kMajor:
      return std::make_pair(0, d_phi);
    case Kind::kMinor:
      return std::make_pair(d_w - d_phi, d_w);
    case Kind::kExplicit:
      if (end - begin != d_phi) return std::nullopt;
      return std::make_pair(begin, end);
  }
  return std::nullopt;
}

std::string metric_name(MetricChoice m) { return m == MetricChoice::kL2 ? "l2" : "robust"; }

PostprocessSpec parse_attack(const std::string& text, std::uint64_t master_seed, int index) {
  try {
    const auto colon = text.find(':');
    if (colon != std::string::npos) {
      const std::string mode = text.substr(0, colon);
      const AttackKind kind = parse_attack_kind(text.substr(colon + 1));
      if (mode == "strongest") return strongest(kind);
      if (mode == "random")
        return sample_attack(kind, stable_hash(master_seed, "attack/" + std::to_string(index)));
      throw ConfigError("attack: unknown preset '" + mode + "'");
    }
    const auto parts = split(text, ',');
    PostprocessSpec spec;
    spec.kind = parse_attack_kind(parts.at(0));
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const auto eq = parts[i].find('=');
      if (eq == std::string::npos) throw ConfigError("attack: expected param=value in '" + text + "'");
      const std::string k = trim(parts[i].substr(0, eq)), v = trim(parts[i].substr(eq + 1));
      if (k == "noise_sigma") {
        spec.noise_sigma = to_double("attack.noise_sigma", v);
      } else if (k == "blur") {
        const auto x = v.find('x');
        if (x == std::string::npos) throw ConfigError("attack.blur: expected SIZExSIGMA");
        spec.blur_kernel_size = int(to_int("attack.blur", v.substr(0, x)));
        spec.blur_sigma = to_double("attack.blur", v.substr(x + 1));
      } else if (k == "jpeg_quality") {
        spec.jpeg_quality = int(to_int("attack.jpeg_quality", v));
      } else if (k == "include_prob") {
        spec.combo_include_prob = to_double("attack.include_prob", v);
      } else if (k == "seed") {
        spec.rng_seed = to_u64("attack.seed", v);
      } else {
        throw ConfigError("attack: unknown parameter '" + k + "'");
      }
    }
    validate(spec);
    return spec;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("attack '" + text + "': " + e.what());
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::vector<std::string> attack_texts;
  std::vector<std::string> pc_texts;
  GeneratorSpec& g = c.generator;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"generator.d_z", [&](auto& k, auto& v) { g.d_z = int(to_int(k, v)); }},
      {"generator.d_w", [&](auto& k, auto& v) { g.d_w = int(to_int(k, v)); }},
      {"generator.image_h", [&](auto& k, auto& v) { g.image_h = int(to_int(k, v)); }},
      {"generator.image_w", [&](auto& k, auto& v) { g.image_w = int(to_int(k, v)); }},
      {"generator.channels", [&](auto& k, auto& v) { g.channels = int(to_int(k, v)); }},
      {"generator.layer_widths", [&](auto& k, auto& v) { g.layer_widths = to_int_list(k, v); }},
      {"generator.psi_layer_widths",
       [&](auto& k, auto& v) { g.psi_layer_widths = to_int_list(k, v); }},
      {"generator.activation", [&](auto&, auto& v) { g.activation = v; }},
      {"generator.seed", [&](auto& k, auto& v) { g.seed = to_u64(k, v); }},
      {"generator.spectrum_decay", [&](auto& k, auto& v) { g.spectrum_decay = to_double(k, v); }},
      {"generator.sensitivity_decay",
       [&](auto& k, auto& v) { g.sensitivity_decay = to_double(k, v); }},
      {"generator.output_smoothing",
       [&](auto& k, auto& v) { g.output_smoothing = to_double(k, v); }},
      {"generator.coarse_path", [&](auto& k, auto& v) { g.coarse_path = to_double(k, v); }},
      {"generator.coarse_smoothing",
       [&](auto& k, auto& v) { g.coarse_smoothing = to_double(k, v); }},
      {"generator.fine_smoothing", [&](auto& k, auto& v) { g.fine_smoothing = to_double(k, v); }},
      {"generator.affine", [&](auto& k, auto& v) { g.affine = to_bool(k, v); }},
      {"stats.n_samples", [&](auto& k, auto& v) { c.stats_samples = int(to_int(k, v)); }},
      {"stats.seed", [&](auto& k, auto& v) { c.stats_seed = to_u64(k, v); }},
      {"pc_range", [&](auto&, auto& v) { pc_texts.push_back(v); }},
      {"sigma", [&](auto& k, auto& v) { c.sigmas.push_back(to_double(k, v)); }},
      {"d_phi", [&](auto& k, auto& v) { c.d_phis.push_back(int(to_int(k, v))); }},
      {"attack", [&](auto&, auto& v) { attack_texts.push_back(v); }},
      {"metric",
       [&](auto& k, auto& v) {
         if (v == "l2")
           c.metrics.push_back(MetricChoice::kL2);
         else if (v == "robust")
           c.metrics.push_back(MetricChoice::kRobust);
         else
           throw ConfigError(k + ": expected l2 or robust, got '" + v + "'");
       }},
      {"keys_per_cell", [&](auto& k, auto& v) { c.keys_per_cell = int(to_int(k, v)); }},
      {"seeds_per_key", [&](auto& k, auto& v) { c.seeds_per_key = int(to_int(k, v)); }},
      {"restarts", [&](auto& k, auto& v) { c.restarts = int(to_int(k, v)); }},
      {"quality_samples", [&](auto& k, auto& v) { c.quality_samples = int(to_int(k, v)); }},
      {"robust_triplets", [&](auto& k, auto& v) { c.robust_triplets = int(to_int(k, v)); }},
      {"optimizer.step_size", [&](auto& k, auto& v) { c.optimizer.step_size = to_double(k, v); }},
      {"optimizer.max_step_size",
       [&](auto& k, auto& v) { c.optimizer.max_step_size = to_double(k, v); }},
      {"optimizer.max_iterations",
       [&](auto& k, auto& v) { c.optimizer.max_iterations = int(to_int(k, v)); }},
      {"optimizer.tolerance", [&](auto& k, auto& v) { c.optimizer.tolerance = to_double(k, v); }},
      {"optimizer.patience", [&](auto& k, auto& v) { c.optimizer.patience = int(to_int(k, v)); }},
      {"baseline_delta", [&](auto& k, auto& v) { c.baseline_deltas.push_back(to_double(k, v)); }},
      {"output_dir", [&](auto&, auto& v) { c.output_dir = v; }},
      {"master_seed", [&](auto& k, auto& v) { c.master_seed = to_u64(k, v); }},
      {"jobs", [&](auto& k, auto& v) { c.jobs = int(to_int(k, v)); }},
      {"stop_after_cells", [&](auto& k, auto& v) { c.stop_after_cells = int(to_int(k, v)); }},
  };

  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    try {
      it->second(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  for (const std::string& t : pc_texts) c.pc_ranges.push_back(parse_pc_range(t));
  for (std::size_t i = 0; i < attack_texts.size(); ++i)
    c.attacks.push_back({attack_texts[i], parse_attack(attack_texts[i], c.master_seed, int(i))});
  if (c.pc_ranges.empty()) c.pc_ranges.push_back(parse_pc_range("minor"));
  if (c.sigmas.empty()) c.sigmas.push_back(1.0);
  if (c.d_phis.empty()) c.d_phis.push_back(16);
  if (c.attacks.empty()) c.attacks.push_back({"identity", PostprocessSpec{}});
  if (c.metrics.empty()) c.metrics.push_back(MetricChoice::kL2);
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

void validate(const ExperimentConfig& c) {
  try {
    Generator::build(GeneratorSpec(c.generator));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("generator: ") + e.what());
  }
  const int dw = c.generator.d_w;
  if (c.stats_samples < dw + 1)
    throw ConfigError("stats.n_samples must be at least d_w + 1 = " + std::to_string(dw + 1));
  if (c.pc_ranges.empty() || c.sigmas.empty() || c.d_phis.empty() || c.attacks.empty() ||
      c.metrics.empty())
    throw ConfigError("every sweep axis needs at least one value");
  for (double s : c.sigmas)
    if (!(s > 0)) throw ConfigError("sigma values must be positive");
  for (int d : c.d_phis)
    if (d < 1 || d >= dw) throw ConfigError("d_phi values must be in [1, d_w)");
  for (const PcRangeSpec& pc : c.pc_ranges) {
    if (pc.kind != PcRangeSpec::Kind::kExplicit) continue;
    if (pc.end > dw) throw ConfigError("pc_range " + pc.text + " exceeds d_w");
    bool matched = false;
    for (int d : c.d_phis) matched |= pc.resolve(d, dw).has_value();
    if (!matched)
      throw ConfigError("pc_range " + pc.text + " has " + std::to_string(pc.end - pc.begin) +
                        " directions but no matching d_phi is configured");
  }
  if (c.keys_per_cell < 1 || c.seeds_per_key < 1 || c.restarts < 1)
    throw ConfigError("keys_per_cell, seeds_per_key and restarts must be >= 1");
  for (int d : c.d_phis)
    if (d < 63 && (std::uint64_t(c.keys_per_cell) > (std::uint64_t(1) << d)))
      throw ConfigError("keys_per_cell exceeds the key capacity 2^" + std::to_string(d));
  if (c.quality_samples < 0 || c.robust_triplets < 2)
    throw ConfigError("quality_samples must be >= 0 and robust_triplets >= 2");
  if (c.quality_samples > 0) {
    const int dim = FeatureMap(c.generator.d_x()).output_dim();
    if (c.quality_samples < dim + 1)
      throw ConfigError("quality_samples must be 0 or at least feature dimension + 1 = " +
                        std::to_string(dim + 1));
  }
  if (!(c.optimizer.step_size > 0) || !(c.optimizer.max_step_size >= c.optimizer.step_size) ||
      c.optimizer.max_iterations < 0 || c.optimizer.patience < 1)
    throw ConfigError("invalid optimizer settings");
  for (double d : c.baseline_deltas)
    if (!(d >= 0)) throw ConfigError("baseline_delta must be >= 0");
  if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
  if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

}  // namespace latentfp
