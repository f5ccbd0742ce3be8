// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace ramp {

inline constexpr std::uint64_t kDefaultMasterSeed = 42;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive combination of a base seed with task indices.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

/// Balancedness levels enter seeds at micro-unit resolution.
inline std::uint64_t beta_key(double beta) {
  return static_cast<std::uint64_t>(std::llround(beta * 1e6));
}

/// RAMP_MASTER_SEED if set, else 42. Throws ValidationError on garbage.
std::uint64_t master_seed_from_env();

}  // namespace ramp
