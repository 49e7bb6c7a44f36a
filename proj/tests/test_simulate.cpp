#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "helpers.hpp"
#include "mvb/error.hpp"
#include "mvb/simulate.hpp"

using namespace mvb;
using testing_helpers::linear_model;
using testing_helpers::meanfield_ou;
using testing_helpers::zero_noise;

namespace {

SimulationOptions deterministic() {
  SimulationOptions o;
  o.check_ellipticity = false;
  return o;
}

}  // namespace

TEST_CASE("zero drift and zero noise keep particles fixed") {
  const ModelSpec model = zero_noise(linear_model(2, 0.0, 1.0));
  const auto mu = EmpiricalMeasure::from_rows({{1.0, 2.0}, {-3.0, 0.5}});
  const auto p = simulate_particles(model, mu, {1.0, 50}, 1, deterministic());
  for (std::size_t s = 0; s <= 50; ++s)
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::ranges::equal(p.state(s, i), mu.point(i)));
}

TEST_CASE("deterministic linear decay follows the Euler recursion") {
  const ModelSpec model = zero_noise(linear_model(1, 1.0, 1.0));
  const auto p = simulate_particles(model, EmpiricalMeasure(1, {1.0}), {1.0, 1000}, 1, deterministic());
  const double x = p.state(1000, 0)[0];
  CHECK(x == doctest::Approx(std::pow(1.0 - 1e-3, 1000)).epsilon(1e-12));
  CHECK(std::abs(x - std::exp(-1.0)) < 1e-3);
}

TEST_CASE("degenerate noise is rejected unless opted out") {
  const ModelSpec model = zero_noise(linear_model(1, 1.0, 1.0));
  try {
    simulate_particles(model, EmpiricalMeasure(1, {1.0}), {1.0, 10}, 1);
    FAIL("expected SingularDiffusion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularDiffusion);
  }
}

TEST_CASE("brownian variance at t") {
  const ModelSpec model = linear_model(1, 0.0, 1.0);
  const std::size_t N = 100000;
  const auto p = simulate_particles(model, sample_initial(PointMass{{0.0}}, N, 1), {0.5, 20}, 9);
  double s = 0, s2 = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const double x = p.state(20, i)[0];
    s += x;
    s2 += x * x;
  }
  const double var = s2 / N - (s / N) * (s / N);
  // Var of the sample variance of N(0, t) is about 2 t^2 / N.
  CHECK(std::abs(var - 0.5) < 3.0 * std::sqrt(2.0 * 0.25 / N));
}

TEST_CASE("decoupled SDE") {
  const auto mu = sample_initial(Gaussian{{0.0}, {1.0}}, 300, 2);
  const TimeGrid grid{1.0, 100};
  SUBCASE("no coupling reproduces the particle system") {
    const ModelSpec model = linear_model(1, 0.5, 1.0);
    const auto p = simulate_particles(model, mu, grid, 4);
    const auto q = simulate_decoupled(model, FrozenFlow::from(p), mu, grid, 4);
    CHECK(p.states == q.states);
    CHECK(p.noise == q.noise);
  }
  SUBCASE("frozen flow of a coupled run reproduces it on the same initials") {
    const ModelSpec model = meanfield_ou(1, 1.0, 1.0);
    const auto p = simulate_particles(model, mu, grid, 4);
    const auto q = simulate_decoupled(model, FrozenFlow::from(p), mu, grid, 4);
    CHECK(p.states == q.states);
  }
  SUBCASE("brownian started at one point") {
    const ModelSpec model = linear_model(1, 0.0, 1.0);
    const auto x0 = sample_initial(PointMass{{0.25}}, 50, 1);
    const auto p = simulate_particles(model, x0, grid, 3);
    const auto q = simulate_decoupled(model, FrozenFlow::from(p), x0, grid, 3);
    for (std::size_t i = 0; i < 50; ++i) {
      double w = 0.0;
      for (std::size_t s = 0; s < grid.n_steps; ++s) w += q.increment(s, i)[0];
      CHECK(q.state(grid.n_steps, i)[0] == doctest::Approx(0.25 + w).epsilon(1e-13));
    }
  }
  SUBCASE("grid mismatch") {
    const ModelSpec model = meanfield_ou(1, 1.0, 1.0);
    const auto p = simulate_particles(model, mu, grid, 4);
    try {
      simulate_decoupled(model, FrozenFlow::from(p), mu, TimeGrid{1.0, 50}, 4);
      FAIL("expected GridMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::GridMismatch);
    }
  }
}

TEST_CASE("brownian increments") {
  const TimeGrid grid{1.0, 200};
  const auto a = brownian_increments(grid, 40, 2, 77);
  CHECK(a == brownian_increments(grid, 40, 2, 77));
  CHECK(a == brownian_increments(grid, 40, 2, 77, 4));
  CHECK(a.size() == 200 * 40 * 2);
  double s = 0, s2 = 0;
  for (double v : a) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(a.size());
  CHECK(std::abs(s / n) < 4.0 * std::sqrt(grid.dt() / n));
  CHECK(std::abs(s2 / n / grid.dt() - 1.0) < 4.0 * std::sqrt(2.0 / n));
  // particles 0 and 1, coordinate 0, across steps
  double cross = 0.0;
  for (std::size_t s = 0; s < 200; ++s) cross += a[(s * 40 + 0) * 2] * a[(s * 40 + 1) * 2];
  CHECK(std::abs(cross / 200.0 / grid.dt()) < 4.0 / std::sqrt(200.0));
  // prefix property: the same particle sees the same stream for any N
  const auto b = brownian_increments(grid, 10, 2, 77);
  CHECK(b[(5 * 10 + 3) * 2 + 1] == a[(5 * 40 + 3) * 2 + 1]);
}

TEST_CASE("results do not depend on the thread count") {
  const ModelSpec model = meanfield_ou(2, 1.0, 0.5);
  const auto mu = sample_initial(Gaussian{{1.0, -1.0}, {1.0, 2.0}}, 513, 3);
  SimulationOptions one, four;
  four.threads = 4;
  const auto a = simulate_particles(model, mu, {1.0, 64}, 5, one);
  const auto b = simulate_particles(model, mu, {1.0, 64}, 5, four);
  CHECK(a.states == b.states);
  CHECK(a.moment_flow == b.moment_flow);
}

TEST_CASE("blow-up guard") {
  const ModelSpec model = linear_model(1, -50.0, 1.0);
  try {
    simulate_particles(model, EmpiricalMeasure(1, {1.0}), {1.0, 1000}, 1);
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
}

TEST_CASE("memory budget") {
  SimulationOptions opts;
  opts.memory_budget_bytes = 1024;
  try {
    simulate_particles(linear_model(1, 0.0, 1.0), sample_initial(PointMass{{0.0}}, 100, 1), {1.0, 100}, 1, opts);
    FAIL("expected MemoryBudget");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MemoryBudget);
  }
}

TEST_CASE("path dump round trip") {
  const ModelSpec model = meanfield_ou(2, 1.0, 1.0);
  const auto p = simulate_particles(model, sample_initial(Gaussian{{0.0, 0.0}, {1.0, 1.0}}, 7, 1), {0.5, 10}, 2);
  const auto path = std::filesystem::temp_directory_path() / "mvb_paths.bin";
  write_paths_binary(path, p.d, p.m, p.N, p.grid, p.states);
  CHECK(std::filesystem::file_size(path) == 5 * 8 + p.states.size() * 8);
  const PathDump dump = read_paths_binary(path);
  CHECK(dump.d == 2);
  CHECK(dump.m == 2);
  CHECK(dump.N == 7);
  CHECK(dump.n_steps == 10);
  CHECK(dump.dt == p.grid.dt());
  CHECK(dump.values == p.states);
  std::filesystem::remove(path);

  const std::string csv = moment_flow_csv(p.grid, p.n_moments, p.moment_flow);
  CHECK(csv.rfind("t,z0,z1\n0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);
}

TEST_CASE("time grid") {
  CHECK(TimeGrid::with_step(0.4, 1e-3).n_steps == 400);
  CHECK(TimeGrid::with_step(1.0, 1e-3).dt() == 1e-3);
  CHECK_THROWS_AS((TimeGrid{0.0, 10}.validate()), Error);
  CHECK_THROWS_AS((TimeGrid{1.0, 0}.validate()), Error);
}
