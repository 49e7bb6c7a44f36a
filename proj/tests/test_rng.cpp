#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mvb/parallel.hpp"
#include "mvb/rng.hpp"

using namespace mvb;
using namespace mvb::rng;

TEST_CASE("philox4x32-10 known answers") {
  // Reference vectors distributed with the Random123 library.
  auto a = philox4x32({0, 0, 0, 0}, {0, 0});
  CHECK(a == Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  auto b = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  CHECK(b == Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  auto c = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  CHECK(c == Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("uniforms stay in the open unit interval") {
  CHECK(to_unit_open(0, 0) > 0.0);
  CHECK(to_unit_open(0xffffffffu, 0xffffffffu) < 1.0);
}

TEST_CASE("normal pairs are reproducible and standard") {
  CHECK(normal_pair(5, 0, 17, 3, 0) == normal_pair(5, 0, 17, 3, 0));
  CHECK(normal_pair(5, 0, 17, 3, 0) != normal_pair(6, 0, 17, 3, 0));
  CHECK(normal_pair(5, 0, 17, 3, 0) != normal_pair(5, 1, 17, 3, 0));
  const int n = 200000;
  double s = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n / 2; ++i) {
    for (double z : normal_pair(11, 0, static_cast<std::uint64_t>(i), 0, 0)) {
      s += z;
      s2 += z * z;
      s4 += z * z * z * z;
    }
  }
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 4.0 * std::sqrt(96.0 / n));
}

TEST_CASE("pairwise sum is exact on small integers and order fixed") {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  CHECK(pairwise_sum(v) == 999.0 * 1000.0 / 2.0);
  CHECK(pairwise_sum(std::span<const double>()) == 0.0);
}

TEST_CASE("parallel_for result does not depend on thread count") {
  std::vector<double> a(1001), b(1001);
  parallel_for(a.size(), 1, [&](std::size_t i) { a[i] = std::sin(static_cast<double>(i)); });
  parallel_for(b.size(), 4, [&](std::size_t i) { b[i] = std::sin(static_cast<double>(i)); });
  CHECK(a == b);
  CHECK_THROWS(parallel_for(10, 3, [](std::size_t i) {
    if (i == 7) throw std::runtime_error("boom");
  }));
}
