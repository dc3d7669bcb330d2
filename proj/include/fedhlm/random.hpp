// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedhlm {

/// Random stream used throughout the library. The engine's output sequence
/// is fixed by the standard, so a seed fully determines every draw.
using Rng = std::mt19937_64;

/// Mixes a base seed with a list of tags (client id, round, timestep, ...)
/// into an independent stream seed. Used so that per-client work never
/// depends on execution order.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> tags);

inline Rng make_rng(std::uint64_t base,
                    std::initializer_list<std::uint64_t> tags) {
  return Rng(derive_seed(base, tags));
}

/// Uniform real in [0, 1).
inline double uniform01(Rng &rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace fedhlm
