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

// User keys and latent embedding. A fingerprinted latent is
//
//   w = mu + U alpha + sigma V phi,
//
// where alpha = U^T (psi(z) - mu) keeps the seed's content outside the
// fingerprint subspace and phi in {0,1}^d_phi is the user's key.

#ifndef LATENTFP_FINGERPRINT_HPP_
#define LATENTFP_FINGERPRINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "latentfp/generator.hpp"
#include "latentfp/spectral.hpp"
#include "latentfp/types.hpp"

namespace latentfp {

using Bits = std::vector<std::uint8_t>;

struct Key {
  Bits bits;
  int id = 0;

  int size() const { return int(bits.size()); }
  Vector as_vector() const;
};

/// Hex with bit 0 as the most significant bit of the first digit; the
/// last digit is zero-padded on the right.
std::string bits_to_hex(const Bits& bits);
Bits hex_to_bits(const std::string& hex, int d_phi);
int hamming_distance(const Bits& a, const Bits& b);
/// phi_k = 1 iff relaxed_k >= 0.5.
Bits threshold_bits(const Vector& relaxed);

struct KeyRegistry {
  int d_phi = 0;
  std::uint64_t seed = 0;
  std::vector<Key> keys;

  int size() const { return int(keys.size()); }
  /// Index of the registered key closest in Hamming distance (first on ties).
  int nearest(const Bits& bits, int* distance = nullptr) const;
};

/// `count` distinct keys with i.i.d. Bernoulli(1/2) bits; duplicates are
/// redrawn. Throws if count exceeds the capacity 2^d_phi.
KeyRegistry sample_keys(int d_phi, int count, std::uint64_t rng_seed);

void save_registry(const KeyRegistry& registry, const std::filesystem::path& path);
KeyRegistry load_registry(const std::filesystem::path& path);

struct FingerprintConfig {
  FingerprintBasis basis;
  double sigma = 1.0;
  Vector alpha_lower;
  Vector alpha_upper;

  int d_phi() const { return basis.d_phi(); }
  int d_alpha() const { return int(basis.U.cols()); }
};

/// alpha bounds are the basis' empirical extremes pushed outward by
/// `widen` times the observed range on each side.
FingerprintConfig make_fingerprint_config(const FingerprintBasis& basis, double sigma,
                                          double widen = 0.05);

Vector project_alpha(const FingerprintConfig& cfg, const Vector& w);
/// V^T (w - mu) / sigma: the (relaxed) key carried by w.
Vector read_key(const FingerprintConfig& cfg, const Vector& w);

LatentSample embed(const FingerprintConfig& cfg, const Vector& alpha, const Vector& phi);
LatentSample embed(const FingerprintConfig& cfg, const Vector& alpha, const Key& key);

ImageGrid generate_fingerprinted(const Generator& gen, const FingerprintConfig& cfg,
                                 const Vector& z, const Key& key);

}  // namespace latentfp

#endif  // LATENTFP_FINGERPRINT_HPP_
