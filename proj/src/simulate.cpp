#include "mvb/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "mvb/error.hpp"
#include "mvb/parallel.hpp"
#include "mvb/rng.hpp"

namespace mvb {

namespace {

constexpr std::uint32_t kBrownianStream = 0;

void check_memory(std::size_t doubles, const SimulationOptions& opts) {
  const std::size_t bytes = doubles * sizeof(double);
  const std::size_t budget = effective_memory_budget(opts);
  if (bytes > budget)
    fail(ErrorCode::MemoryBudget, "path storage needs " + std::to_string(bytes >> 20) +
                                      " MiB, budget is " + std::to_string(budget >> 20) + " MiB");
}

void fill_increments(std::vector<double>& noise, const TimeGrid& grid, std::size_t N,
                     std::size_t m, std::uint64_t seed, int threads) {
  const double scale = std::sqrt(grid.dt());
  noise.assign(grid.n_steps * N * m, 0.0);
  parallel_for(N, threads, [&](std::size_t i) {
    for (std::size_t s = 0; s < grid.n_steps; ++s) {
      double* out = noise.data() + (s * N + i) * m;
      for (std::size_t c = 0; c < m; c += 2) {
        const auto z = rng::normal_pair(seed, kBrownianStream, i, static_cast<std::uint32_t>(s),
                                        static_cast<std::uint32_t>(c / 2));
        out[c] = scale * z[0];
        if (c + 1 < m) out[c + 1] = scale * z[1];
      }
    }
  });
}

void reduce_moments(const CylindricalDrift& drift, std::span<const double> states,
                    std::size_t N, std::size_t d, std::vector<double>& scratch, int threads,
                    MutSpan out) {
  scratch.resize(N);
  for (std::size_t l = 0; l < drift.n; ++l) {
    parallel_for(N, threads, [&](std::size_t i) {
      scratch[i] = drift.h[l](ConstSpan(states.data() + i * d, d));
    });
    out[l] = pairwise_sum(scratch) / static_cast<double>(N);
  }
}

// Shared Euler loop; a null `flow` means the drift reads the live moments.
ParticlePaths integrate(const ModelSpec& model, const EmpiricalMeasure& x0,
                        const TimeGrid& grid, std::uint64_t seed,
                        const SimulationOptions& opts, const FrozenFlow* flow) {
  model.validate();
  grid.validate();
  if (x0.dim() != model.d)
    fail(ErrorCode::InvalidArgument, "initial measure dimension does not match model");

  const std::size_t N = x0.size(), d = model.d, m = model.m, n = model.meanfield_drift.n;
  check_memory((grid.n_steps + 1) * N * d + grid.n_steps * N * m, opts);

  if (opts.check_ellipticity) {
    std::vector<std::vector<double>> probes;
    const std::size_t count = std::min(N, std::max<std::size_t>(opts.ellipticity_probes, 1));
    for (std::size_t i = 0; i < count; ++i) {
      const auto p = x0.point(i * N / count);
      probes.emplace_back(p.begin(), p.end());
    }
    validate_ellipticity(model.diffusion, probes,
                         EllipticityBounds{1e-12, model.condition_cap});
  }

  ParticlePaths paths;
  paths.N = N;
  paths.d = d;
  paths.m = m;
  paths.n_moments = n;
  paths.grid = grid;
  paths.seed = seed;
  paths.states.resize((grid.n_steps + 1) * N * d);
  std::copy(x0.data().begin(), x0.data().end(), paths.states.begin());
  fill_increments(paths.noise, grid, N, m, seed, opts.threads);
  paths.moment_flow.resize((grid.n_steps + 1) * n);

  const double dt = grid.dt();
  std::vector<double> scratch;
  std::atomic<bool> blew_up{false};

  for (std::size_t s = 0; s <= grid.n_steps; ++s) {
    const ConstSpan row(paths.states.data() + s * N * d, N * d);
    MutSpan z(paths.moment_flow.data() + s * n, n);
    if (flow) {
      std::copy_n(flow->moment_flow.data() + s * n, n, z.begin());
    } else {
      reduce_moments(model.meanfield_drift, row, N, d, scratch, opts.threads, z);
    }
    if (s == grid.n_steps) break;

    const double t = grid.time(s);
    double* next = paths.states.data() + (s + 1) * N * d;
    const bool const_sigma = model.diffusion.state_independent;
    double sigma_shared[kMaxDim * kMaxDim];
    if (const_sigma) model.diffusion.sigma(t, row.subspan(0, d), MutSpan(sigma_shared, d * m));

    parallel_for(N, opts.threads, [&](std::size_t i) {
      const ConstSpan x = row.subspan(i * d, d);
      const ConstSpan dw(paths.noise.data() + (s * N + i) * m, m);
      double b[kMaxDim];
      double sig_local[kMaxDim * kMaxDim];
      const double* sig = sigma_shared;
      if (!const_sigma) {
        model.diffusion.sigma(t, x, MutSpan(sig_local, d * m));
        sig = sig_local;
      }
      drift_with_moments(model, t, x, z, MutSpan(b, d));
      double* out = next + i * d;
      for (std::size_t r = 0; r < d; ++r) {
        double noise_term = 0.0;
        for (std::size_t c = 0; c < m; ++c) noise_term += sig[r * m + c] * dw[c];
        out[r] = x[r] + b[r] * dt + noise_term;
        if (!std::isfinite(out[r]) || std::abs(out[r]) > opts.blowup_threshold)
          blew_up.store(true, std::memory_order_relaxed);
      }
    });
    if (blew_up.load())
      fail(ErrorCode::NonFinite, "particle blow-up at step " + std::to_string(s + 1) +
                                     " (|X| > " + format_double(opts.blowup_threshold) +
                                     " or non-finite)");
  }
  return paths;
}

}  // namespace

void TimeGrid::validate() const {
  if (n_steps < 1) fail(ErrorCode::InvalidArgument, "time grid needs n_steps >= 1");
  if (!(t_end > 0.0) || !std::isfinite(t_end))
    fail(ErrorCode::InvalidArgument, "time grid needs t_end > 0");
}

TimeGrid TimeGrid::with_step(double t_end, double dt) {
  if (!(dt > 0.0)) fail(ErrorCode::InvalidArgument, "time step must be positive");
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(t_end / dt)));
  return {t_end, n};
}

std::size_t effective_memory_budget(const SimulationOptions& opts) {
  if (opts.memory_budget_bytes) return opts.memory_budget_bytes;
  if (const char* env = std::getenv("MVB_MEMORY_BUDGET_MB")) {
    char* end = nullptr;
    const unsigned long long mb = std::strtoull(env, &end, 10);
    if (end != env && mb > 0) return static_cast<std::size_t>(mb) << 20;
  }
  return std::size_t{4096} << 20;
}

EmpiricalMeasure ParticlePaths::cloud(std::size_t s) const {
  const auto first = states.begin() + static_cast<std::ptrdiff_t>(s * N * d);
  return {d, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(N * d))};
}

FrozenFlow FrozenFlow::from(const ParticlePaths& paths) {
  return {paths.grid, paths.n_moments, paths.moment_flow};
}

ParticlePaths simulate_particles(const ModelSpec& model, const EmpiricalMeasure& mu0,
                                 const TimeGrid& grid, std::uint64_t seed,
                                 const SimulationOptions& opts) {
  return integrate(model, mu0, grid, seed, opts, nullptr);
}

ParticlePaths simulate_decoupled(const ModelSpec& model, const FrozenFlow& flow,
                                 const EmpiricalMeasure& x0s, const TimeGrid& grid,
                                 std::uint64_t seed, const SimulationOptions& opts) {
  if (!(flow.grid == grid))
    fail(ErrorCode::GridMismatch, "frozen flow grid does not match the simulation grid");
  if (flow.n_moments != model.meanfield_drift.n ||
      flow.moment_flow.size() != (grid.n_steps + 1) * flow.n_moments)
    fail(ErrorCode::GridMismatch, "frozen flow shape does not match the model");
  return integrate(model, x0s, grid, seed, opts, &flow);
}

std::vector<double> brownian_increments(const TimeGrid& grid, std::size_t N, std::size_t m,
                                        std::uint64_t seed, int threads) {
  grid.validate();
  std::vector<double> noise;
  fill_increments(noise, grid, N, m, seed, threads);
  return noise;
}

namespace {

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) fail(ErrorCode::Io, "truncated path dump");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_paths_binary(const std::filesystem::path& path, std::size_t d, std::size_t m,
                        std::size_t N, const TimeGrid& grid, std::span<const double> values) {
  if (values.size() != (grid.n_steps + 1) * N * d)
    fail(ErrorCode::InvalidArgument, "path array does not match the declared shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  put_u64(out, d);
  put_u64(out, m);
  put_u64(out, N);
  put_u64(out, grid.n_steps);
  put_u64(out, std::bit_cast<std::uint64_t>(grid.dt()));
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

PathDump read_paths_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  PathDump dump;
  dump.d = get_u64(in);
  dump.m = get_u64(in);
  dump.N = get_u64(in);
  dump.n_steps = get_u64(in);
  dump.dt = std::bit_cast<double>(get_u64(in));
  dump.values.resize((dump.n_steps + 1) * dump.N * dump.d);
  for (double& v : dump.values) v = std::bit_cast<double>(get_u64(in));
  return dump;
}

std::string moment_flow_csv(const TimeGrid& grid, std::size_t n_moments,
                            std::span<const double> flow) {
  std::string out = "t";
  for (std::size_t l = 0; l < n_moments; ++l) out += ",z" + std::to_string(l);
  out += '\n';
  for (std::size_t s = 0; s <= grid.n_steps; ++s) {
    out += format_double(grid.time(s));
    for (std::size_t l = 0; l < n_moments; ++l) out += "," + format_double(flow[s * n_moments + l]);
    out += '\n';
  }
  return out;
}

}  // namespace mvb
