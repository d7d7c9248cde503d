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

// Seed derivation and random streams. Every stochastic operation in the
// library takes an explicit 64-bit seed and derives independent substreams
// from it by index, so results never depend on scheduling.

#ifndef LATENTFP_RNG_HPP_
#define LATENTFP_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

#include "latentfp/types.hpp"

namespace latentfp {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed of substream `index` of `base`. Distinct (base, index) pairs give
/// statistically independent streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// FNV-1a over the bytes of `text`, mixed with `base`. Stable across runs
/// and platforms; used for naming-based seed derivation (sweep cells).
std::uint64_t stable_hash(std::uint64_t base, std::string_view text);

inline Rng make_rng(std::uint64_t seed) { return Rng(mix64(seed)); }

Vector standard_normal(Rng& rng, Eigen::Index n);
double uniform01(Rng& rng);

}  // namespace latentfp

#endif  // LATENTFP_RNG_HPP_
