#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "mvb/error.hpp"
#include "mvb/measure.hpp"
#include "mvb/scenarios.hpp"

using namespace mvb;

namespace {

// min over all permutations of (1/N) sum |a_i - b_perm(i)|^k
double brute_force_cost(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double k) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      double r2 = 0.0;
      for (std::size_t j = 0; j < a.dim(); ++j) {
        const double diff = a.point(i)[j] - b.point(perm[i])[j];
        r2 += diff * diff;
      }
      c += std::pow(std::sqrt(r2), k);
    }
    best = std::min(best, c / static_cast<double>(perm.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

EmpiricalMeasure random_cloud(std::mt19937_64& gen, std::size_t n, std::size_t d) {
  std::normal_distribution<double> normal;
  std::vector<double> pts(n * d);
  for (double& v : pts) v = normal(gen);
  return EmpiricalMeasure(d, pts);
}

}  // namespace

TEST_CASE("empirical measure construction") {
  CHECK_THROWS_AS(EmpiricalMeasure(1, {}), Error);
  CHECK_THROWS_AS(EmpiricalMeasure(2, {1.0, 2.0, 3.0}), Error);
  CHECK_THROWS_AS(EmpiricalMeasure(1, {NAN}), Error);
  const auto mu = EmpiricalMeasure::from_rows({{1, 2}, {3, 4}});
  CHECK(mu.size() == 2);
  CHECK(mu.point(1)[0] == 3.0);
}

TEST_CASE("wasserstein small cases") {
  SUBCASE("identical measures") {
    const auto a = EmpiricalMeasure::from_rows({{0, 1}, {2, 2}, {-1, 5}});
    const auto r = wasserstein(a, a, 2.0);
    CHECK(r.distance == 0.0);
    CHECK(r.plan.pairing == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("rigid shift in 1-d") {
    const auto r = wasserstein(EmpiricalMeasure(1, {0, 2}), EmpiricalMeasure(1, {1, 3}), 1.0);
    CHECK(r.distance == 1.0);
    CHECK(r.plan.pairing == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("two-point k = 2") {
    const auto r = wasserstein(EmpiricalMeasure(1, {0, 1}), EmpiricalMeasure(1, {0, 3}), 2.0);
    CHECK(r.distance == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(r.plan.pairing == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("unequal support and size cap") {
    try {
      wasserstein(EmpiricalMeasure(1, {0, 1}), EmpiricalMeasure(1, {0}), 2.0);
      FAIL("expected UnequalSupport");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnequalSupport);
    }
    std::mt19937_64 gen(1);
    const auto a = random_cloud(gen, 10, 2), b = random_cloud(gen, 10, 2);
    try {
      wasserstein(a, b, 2.0, 5);
      FAIL("expected SizeCap");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SizeCap);
    }
  }
}

TEST_CASE("assignment matches brute force for N <= 6") {
  std::mt19937_64 gen(99);
  for (std::size_t n = 1; n <= 6; ++n)
    for (std::size_t d : {1u, 2u, 3u})
      for (double k : {1.0, 2.0, 3.5}) {
        const auto a = random_cloud(gen, n, d), b = random_cloud(gen, n, d);
        const auto r = wasserstein_assignment(a, b, k);
        CHECK(r.plan.cost == doctest::Approx(brute_force_cost(a, b, k)).epsilon(1e-14));
        std::vector<std::size_t> sorted = r.plan.pairing;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == i);
      }
}

TEST_CASE("1-d sorted pairing agrees with the assignment solver") {
  std::mt19937_64 gen(7);
  for (int rep = 0; rep < 20; ++rep)
    for (double k : {1.0, 2.0, 3.0}) {
      const auto a = random_cloud(gen, 60, 1), b = random_cloud(gen, 60, 1);
      const double s = wasserstein_sorted(a, b, k).distance;
      const double h = wasserstein_assignment(a, b, k).distance;
      CHECK(std::abs(s - h) <= 1e-10);
    }
}

TEST_CASE("pushforward") {
  const EmpiricalMeasure mu(1, {1.0, 2.0});
  CHECK(pushforward(mu, make_perturbation("sin", 1), 0.0) == mu);
  const auto nu = pushforward(mu, make_perturbation("id", 1), 0.5);
  CHECK(nu == EmpiricalMeasure(1, {1.5, 3.0}));
}

TEST_CASE("lk norm") {
  const EmpiricalMeasure mu(1, {0.0, 3.0});
  const PerturbationField zero{"zero", [](ConstSpan, MutSpan v) { std::fill(v.begin(), v.end(), 0.0); }};
  CHECK(lk_norm(zero, mu, Exponent::finite(2.0)) == 0.0);
  for (double k : {1.0, 2.0, 5.0})
    CHECK(lk_norm(make_perturbation("const:-1.5", 1), mu, Exponent::finite(k)) ==
          doctest::Approx(1.5).epsilon(1e-15));
  CHECK(lk_norm(make_perturbation("id", 1), mu, Exponent::finite(2.0)) ==
        doctest::Approx(std::sqrt(4.5)).epsilon(1e-15));
  CHECK(lk_norm(make_perturbation("id", 1), mu, Exponent::sup_norm()) == 3.0);
}

TEST_CASE("moments") {
  const std::vector<std::function<double(ConstSpan)>> one = {[](ConstSpan) { return 1.0; }};
  CHECK(moments(EmpiricalMeasure(1, {4.0, -2.0, 9.0}), one)[0] == 1.0);
  const std::vector<std::function<double(ConstSpan)>> lin = {[](ConstSpan y) { return y[0]; }};
  CHECK(moments(EmpiricalMeasure(1, {-1.0, 1.0}), lin)[0] == 0.0);
  const std::vector<std::function<double(ConstSpan)>> sq = {[](ConstSpan y) { return y[0] * y[0]; }};
  CHECK(moments(EmpiricalMeasure(1, {1.0, 2.0, 3.0}), sq)[0] == doctest::Approx(14.0 / 3.0).epsilon(1e-15));
  CHECK(absolute_moment(EmpiricalMeasure(1, {1.0, -2.0, 3.0}), 2.0) == doctest::Approx(14.0 / 3.0));
}

TEST_CASE("initial sampling") {
  SUBCASE("point mass") {
    const auto mu = sample_initial(PointMass{{1.5, -2.0}}, 5, 3);
    CHECK(mu.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(mu.point(i)[0] == 1.5);
      CHECK(mu.point(i)[1] == -2.0);
    }
  }
  SUBCASE("gaussian mean") {
    const std::size_t n = 100000;
    const auto mu = sample_initial(Gaussian{{0.0, 0.0}, {1.0, 1.0}}, n, 42);
    for (std::size_t c = 0; c < 2; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += mu.point(i)[c];
      CHECK(std::abs(s / n) < 4.0 / std::sqrt(static_cast<double>(n)));
    }
  }
  SUBCASE("determinism") {
    const InitialLaw law = parse_initial_law("mixture:0.3*point:1 + 0.7*gaussian:mean=0;std=2", 1);
    CHECK(sample_initial(law, 1000, 5) == sample_initial(law, 1000, 5));
    CHECK_FALSE(sample_initial(law, 1000, 5) == sample_initial(law, 1000, 6));
  }
  SUBCASE("uniform box and point list") {
    const auto mu = sample_initial(UniformBox{{-1.0, 2.0}, {1.0, 3.0}}, 2000, 1);
    for (std::size_t i = 0; i < mu.size(); ++i) {
      CHECK(std::abs(mu.point(i)[0]) <= 1.0);
      CHECK(mu.point(i)[1] >= 2.0);
      CHECK(mu.point(i)[1] <= 3.0);
    }
    const auto pl = sample_initial(PointList{{{1.0}, {2.0}}}, 3, 1);
    CHECK(pl == EmpiricalMeasure(1, {1.0, 2.0, 1.0}));
  }
  SUBCASE("dimension mismatch in a mixture") {
    auto mix = std::make_shared<Mixture>();
    mix->weights = {1.0, 1.0};
    mix->components = {PointMass{{0.0}}, PointMass{{0.0, 1.0}}};
    CHECK_THROWS_AS(sample_initial(std::shared_ptr<const Mixture>(mix), 4, 1), Error);
  }
}

TEST_CASE("csv round trip is bit exact") {
  std::mt19937_64 gen(3);
  const auto mu = random_cloud(gen, 200, 3);
  CHECK(points_from_csv(points_to_csv(mu)) == mu);
  const EmpiricalMeasure odd(2, {0.1, 1e-300, -std::numeric_limits<double>::denorm_min(), 1.0 / 3.0});
  CHECK(points_from_csv(points_to_csv(odd)) == odd);
  const auto path = std::filesystem::temp_directory_path() / "mvb_points_roundtrip.csv";
  write_points_csv(path, mu);
  CHECK(read_points_csv(path) == mu);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(points_from_csv("1,2\n3\n"), Error);
}
