#pragma once

// Counter-based Philox4x32-10 generator. A draw is a pure function of
// (key, counter), so any particle/step can be generated independently and in
// any order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mvb::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter philox4x32(Counter ctr, Key key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

inline Key key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

// Uniform on the open interval (0, 1): midpoints of a 2^-52 lattice, all
// exactly representable, so neither endpoint can occur.
inline double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

// Two independent standard normals for (stream, index, step, block).
// `stream` separates unrelated uses of the same seed.
inline std::array<double, 2> normal_pair(std::uint64_t seed, std::uint32_t stream,
                                         std::uint64_t index, std::uint32_t step,
                                         std::uint32_t block) {
  const Counter out = philox4x32(
      {step, static_cast<std::uint32_t>(index),
       static_cast<std::uint32_t>(index >> 32) ^ (stream << 16), block},
      key_from_seed(seed));
  const double u1 = to_unit_open(out[0], out[1]);
  const double u2 = to_unit_open(out[2], out[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(a), r * std::sin(a)};
}

inline double uniform(std::uint64_t seed, std::uint32_t stream, std::uint64_t index,
                      std::uint32_t slot) {
  const Counter out = philox4x32(
      {slot, static_cast<std::uint32_t>(index),
       static_cast<std::uint32_t>(index >> 32) ^ (stream << 16), 0xFFFFFFFFu},
      key_from_seed(seed));
  return to_unit_open(out[0], out[1]);
}

}  // namespace mvb::rng
