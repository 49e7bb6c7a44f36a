#pragma once

// Euler-Maruyama for the interacting particle system and for the decoupled
// SDE driven by a frozen moment flow.
//
//   X[s+1,i] = X[s,i] + b(t_s, X[s,i], mu_s) dt + sigma(t_s, X[s,i]) dW[s,i]
//
// Brownian increments come from counter-based streams keyed by
// (seed, particle, step) and are stored with the paths: every stochastic
// integral downstream is assembled from exactly these increments.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvb/measure.hpp"
#include "mvb/model.hpp"

namespace mvb {

struct TimeGrid {
  double t_end = 1.0;
  std::size_t n_steps = 1;

  double dt() const { return t_end / static_cast<double>(n_steps); }
  double time(std::size_t s) const { return t_end * static_cast<double>(s) / static_cast<double>(n_steps); }
  void validate() const;

  // Uniform grid on [0, t_end] with step as close to dt as possible.
  static TimeGrid with_step(double t_end, double dt);

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

struct SimulationOptions {
  int threads = 1;
  double blowup_threshold = 1e8;
  // 0 means: read MVB_MEMORY_BUDGET_MB from the environment, else 4096 MiB.
  std::size_t memory_budget_bytes = 0;
  // Probes taken from the initial cloud for the ellipticity precondition.
  std::size_t ellipticity_probes = 64;
  // Off only for deterministic test runs (sigma = 0); the Bismut weights
  // still reject a degenerate sigma through zeta.
  bool check_ellipticity = true;
};

std::size_t effective_memory_budget(const SimulationOptions& opts);

struct ParticlePaths {
  std::size_t N = 0;
  std::size_t d = 0;
  std::size_t m = 0;
  std::size_t n_moments = 0;
  TimeGrid grid;
  std::uint64_t seed = 0;
  std::vector<double> states;       // (n_steps+1) x N x d
  std::vector<double> noise;        // n_steps x N x m
  std::vector<double> moment_flow;  // (n_steps+1) x n_moments

  std::span<const double> state(std::size_t s, std::size_t i) const {
    return {states.data() + (s * N + i) * d, d};
  }
  std::span<const double> increment(std::size_t s, std::size_t i) const {
    return {noise.data() + (s * N + i) * m, m};
  }
  std::span<const double> moments(std::size_t s) const {
    return {moment_flow.data() + s * n_moments, n_moments};
  }
  EmpiricalMeasure cloud(std::size_t s) const;
};

// The measure flow (mu_s) of a coupled run, as seen by the cylindrical drift.
struct FrozenFlow {
  TimeGrid grid;
  std::size_t n_moments = 0;
  std::vector<double> moment_flow;

  static FrozenFlow from(const ParticlePaths& paths);
};

ParticlePaths simulate_particles(const ModelSpec& model, const EmpiricalMeasure& mu0,
                                 const TimeGrid& grid, std::uint64_t seed,
                                 const SimulationOptions& opts = {});

// Same recursion, but the drift reads flow.moment_flow[s] instead of the live
// empirical moments. Particle i uses the same noise stream as particle i of
// a coupled run with the same seed.
ParticlePaths simulate_decoupled(const ModelSpec& model, const FrozenFlow& flow,
                                 const EmpiricalMeasure& x0s, const TimeGrid& grid,
                                 std::uint64_t seed, const SimulationOptions& opts = {});

// n_steps x N x m increments ~ Normal(0, dt I).
std::vector<double> brownian_increments(const TimeGrid& grid, std::size_t N, std::size_t m,
                                        std::uint64_t seed, int threads = 1);

// Binary dump: d, m, N, n_steps as little-endian uint64, dt as a
// little-endian IEEE-754 double, then the (n_steps+1) x N x d state array in
// row-major order.
void write_paths_binary(const std::filesystem::path& path, std::size_t d, std::size_t m,
                        std::size_t N, const TimeGrid& grid, std::span<const double> values);

struct PathDump {
  std::size_t d = 0, m = 0, N = 0, n_steps = 0;
  double dt = 0.0;
  std::vector<double> values;
};
PathDump read_paths_binary(const std::filesystem::path& path);

// Header "t,z0,z1,..." then one row per grid node.
std::string moment_flow_csv(const TimeGrid& grid, std::size_t n_moments,
                            std::span<const double> flow);

}  // namespace mvb
