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

#include "latentfp/fingerprint.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "latentfp/rng.hpp"

namespace latentfp {

Vector Key::as_vector() const {
  Vector v(bits.size());
  for (std::size_t k = 0; k < bits.size(); ++k) v[Eigen::Index(k)] = bits[k];
  return v;
}

std::string bits_to_hex(const Bits& bits) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (std::size_t k = 0; k < bits.size(); k += 4) {
    int nibble = 0;
    for (std::size_t b = 0; b < 4; ++b)
      nibble = (nibble << 1) | (k + b < bits.size() ? bits[k + b] : 0);
    out.push_back(kDigits[nibble]);
  }
  return out;
}

Bits hex_to_bits(const std::string& hex, int d_phi) {
  if (std::size_t(d_phi + 3) / 4 != hex.size())
    throw std::invalid_argument("hex key '" + hex + "' does not hold " + std::to_string(d_phi) +
                                " bits");
  Bits bits(d_phi);
  for (int k = 0; k < d_phi; ++k) {
    const char c = hex[k / 4];
    int nibble;
    if (c >= '0' && c <= '9')
      nibble = c - '0';
    else if (c >= 'a' && c <= 'f')
      nibble = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F')
      nibble = c - 'A' + 10;
    else
      throw std::invalid_argument("invalid hex digit in key");
    bits[k] = std::uint8_t((nibble >> (3 - k % 4)) & 1);
  }
  return bits;
}

int hamming_distance(const Bits& a, const Bits& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
  int d = 0;
  for (std::size_t k = 0; k < a.size(); ++k) d += a[k] != b[k];
  return d;
}

Bits threshold_bits(const Vector& relaxed) {
  Bits bits(relaxed.size());
  for (Eigen::Index k = 0; k < relaxed.size(); ++k) bits[k] = relaxed[k] >= 0.5 ? 1 : 0;
  return bits;
}

int KeyRegistry::nearest(const Bits& bits, int* distance) const {
  int best = -1, best_d = 0;
  for (int i = 0; i < size(); ++i) {
    const int d = hamming_distance(keys[i].bits, bits);
    if (best < 0 || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  if (distance) *distance = best_d;
  return best;
}

KeyRegistry sample_keys(int d_phi, int count, std::uint64_t rng_seed) {
  if (d_phi <= 0) throw std::invalid_argument("sample_keys: d_phi must be positive");
  if (count < 0) throw std::invalid_argument("sample_keys: negative count");
  if (d_phi < 63 && std::uint64_t(count) > (std::uint64_t(1) << d_phi))
    throw std::invalid_argument("sample_keys: count exceeds capacity 2^" + std::to_string(d_phi));
  KeyRegistry reg;
  reg.d_phi = d_phi;
  reg.seed = rng_seed;
  Rng rng = make_rng(rng_seed);
  std::set<Bits> seen;
  while (reg.size() < count) {
    Bits bits(d_phi);
    for (auto& b : bits) b = std::uint8_t(rng() >> 63);
    if (!seen.insert(bits).second) continue;
    reg.keys.push_back(Key{std::move(bits), reg.size()});
  }
  return reg;
}

void save_registry(const KeyRegistry& registry, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "d_phi=" << registry.d_phi << '\n';
  os << "count=" << registry.size() << '\n';
  os << "seed=" << registry.seed << '\n';
  for (const Key& key : registry.keys) os << bits_to_hex(key.bits) << '\n';
}

KeyRegistry load_registry(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  KeyRegistry reg;
  int count = -1;
  std::string line;
  auto header = [&](const char* name) {
    if (!std::getline(is, line) || line.rfind(std::string(name) + "=", 0) != 0)
      throw std::runtime_error(std::string("registry file: missing header ") + name);
    return line.substr(std::char_traits<char>::length(name) + 1);
  };
  reg.d_phi = std::stoi(header("d_phi"));
  count = std::stoi(header("count"));
  reg.seed = std::stoull(header("seed"));
  std::set<Bits> seen;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Bits bits = hex_to_bits(line, reg.d_phi);
    if (!seen.insert(bits).second) throw std::runtime_error("registry file: duplicate key");
    reg.keys.push_back(Key{std::move(bits), reg.size()});
  }
  if (reg.size() != count) throw std::runtime_error("registry file: count mismatch");
  return reg;
}

FingerprintConfig make_fingerprint_config(const FingerprintBasis& basis, double sigma,
                                          double widen) {
  if (!(sigma > 0)) throw std::invalid_argument("fingerprint strength must be positive");
  FingerprintConfig cfg;
  cfg.basis = basis;
  cfg.sigma = sigma;
  const Vector range = basis.alpha_max - basis.alpha_min;
  cfg.alpha_lower = basis.alpha_min - widen * range;
  cfg.alpha_upper = basis.alpha_max + widen * range;
  return cfg;
}

Vector project_alpha(const FingerprintConfig& cfg, const Vector& w) {
  if (w.size() != cfg.basis.d_w()) throw std::invalid_argument("project_alpha: dimension mismatch");
  if (!w.allFinite()) throw std::invalid_argument("project_alpha: non-finite latent");
  return cfg.basis.U.transpose() * (w - cfg.basis.center);
}

Vector read_key(const FingerprintConfig& cfg, const Vector& w) {
  if (w.size() != cfg.basis.d_w()) throw std::invalid_argument("read_key: dimension mismatch");
  return cfg.basis.V.transpose() * (w - cfg.basis.center) / cfg.sigma;
}

LatentSample embed(const FingerprintConfig& cfg, const Vector& alpha, const Vector& phi) {
  if (alpha.size() != cfg.d_alpha()) throw std::invalid_argument("embed: alpha dimension mismatch");
  if (phi.size() != cfg.d_phi()) throw std::invalid_argument("embed: key dimension mismatch");
  if (!alpha.allFinite()) throw std::invalid_argument("embed: non-finite alpha");
  return {cfg.basis.center + cfg.basis.U * alpha + cfg.sigma * (cfg.basis.V * phi),
          LatentSource::kFingerprinted};
}

LatentSample embed(const FingerprintConfig& cfg, const Vector& alpha, const Key& key) {
  return embed(cfg, alpha, key.as_vector());
}

ImageGrid generate_fingerprinted(const Generator& gen, const FingerprintConfig& cfg,
                                 const Vector& z, const Key& key) {
  const LatentSample w = gen.map_latent(z);
  return gen.evaluate(embed(cfg, project_alpha(cfg, w.w), key).w);
}

}  // namespace latentfp
