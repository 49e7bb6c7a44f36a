#include "mvb/bismut.hpp"

#include <algorithm>
#include <cmath>

#include "mvb/error.hpp"
#include "mvb/parallel.hpp"

namespace mvb {

const char* mode_name(EstimateMode mode) {
  return mode == EstimateMode::Certified ? "certified" : "heuristic";
}

nlohmann::json to_json(const Estimate& e) {
  nlohmann::json j;
  j["value"] = e.value;
  j["stderr"] = e.std_error;
  j["N"] = e.N;
  j["n_steps"] = e.n_steps;
  j["dt"] = e.dt;
  j["seed"] = e.seed;
  j["mode"] = mode_name(e.mode);
  j["scenario"] = e.scenario;
  j["term1"] = e.term1;
  j["term2"] = e.term2;
  if (!e.notes.empty()) j["notes"] = e.notes;
  return j;
}

SampleStats sample_stats(std::span<const double> values) {
  SampleStats out;
  const auto n = static_cast<double>(values.size());
  if (values.empty()) return out;
  out.mean = pairwise_sum(values) / n;
  if (values.size() < 2) return out;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double c = values[i] - out.mean;
    sq[i] = c * c;
  }
  out.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  return out;
}

namespace {

void check_tangent(const ParticlePaths& paths, const TangentPaths& tangent, TangentKind kind) {
  if (tangent.kind != kind)
    fail(ErrorCode::InvalidArgument, kind == TangentKind::Frozen
                                         ? "weight_frozen needs a frozen tangent"
                                         : "weight_meanfield needs a mean-field tangent");
  if (tangent.N != paths.N || tangent.d != paths.d || !(tangent.grid == paths.grid))
    fail(ErrorCode::GridMismatch, "tangent paths do not belong to these particle paths");
}

// Accumulates w_i += coef_s * <zeta(t_s, X[s,i]) u_i, dW[s,i]> over all i for
// one step, where u is read from `dirs` (N x d).
void accumulate_step(const ParticlePaths& paths, const ModelSpec& model, std::size_t s,
                     double coef, std::span<const double> dirs, std::vector<double>& w,
                     int threads) {
  const std::size_t d = paths.d, m = paths.m;
  const double t = paths.grid.time(s);
  SmallMat shared;
  if (model.diffusion.state_independent)
    shared = zeta(model.diffusion, t, paths.state(s, 0), model.condition_cap);
  parallel_for(paths.N, threads, [&](std::size_t i) {
    const SmallMat z = model.diffusion.state_independent
                           ? shared
                           : zeta(model.diffusion, t, paths.state(s, i), model.condition_cap);
    const ConstSpan u = dirs.subspan(i * d, d);
    const ConstSpan dw = paths.increment(s, i);
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double zu = 0.0;
      for (std::size_t r = 0; r < d; ++r)
        zu += z(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) * u[r];
      acc += zu * dw[c];
    }
    w[i] += coef * acc;
  });
}

}  // namespace

WeightVector weight_frozen(const ParticlePaths& paths, const TangentPaths& tangent,
                           const ModelSpec& model, const BismutSchedule& schedule,
                           int threads) {
  check_tangent(paths, tangent, TangentKind::Frozen);
  if (std::abs(schedule.t - paths.grid.t_end) > 1e-12 * std::max(1.0, paths.grid.t_end))
    fail(ErrorCode::ScheduleMismatch, "schedule horizon " + format_double(schedule.t) +
                                          " does not match grid end " +
                                          format_double(paths.grid.t_end));
  WeightVector out;
  out.w.assign(paths.N, 0.0);
  const std::size_t block = paths.N * paths.d;
  for (std::size_t s = 0; s < paths.grid.n_steps; ++s) {
    const double coef = schedule.beta_prime(paths.grid.time(s));
    accumulate_step(paths, model, s, coef,
                    std::span<const double>(tangent.values).subspan(s * block, block), out.w,
                    threads);
  }
  return out;
}

WeightVector weight_meanfield(const ParticlePaths& paths, const TangentPaths& tangent,
                              const ModelSpec& model, int threads) {
  check_tangent(paths, tangent, TangentKind::MeanField);
  WeightVector out;
  out.w.assign(paths.N, 0.0);
  std::vector<double> psi(paths.N * paths.d);
  for (std::size_t s = 0; s < paths.grid.n_steps; ++s) {
    lions_contraction(paths, tangent, model, s, psi, threads);
    accumulate_step(paths, model, s, 1.0, psi, out.w, threads);
  }
  return out;
}

bool has_measure_dependence(const ModelSpec& model, const ParticlePaths& paths,
                            std::size_t probes) {
  const auto& drift = model.meanfield_drift;
  if (drift.n == 0) return false;
  const std::size_t d = model.d, n = drift.n;
  std::vector<double> gz(d * n);
  const std::size_t steps[] = {0, paths.grid.n_steps / 2, paths.grid.n_steps};
  for (std::size_t s : steps) {
    for (std::size_t q = 0; q < std::min(probes, paths.N); ++q) {
      const std::size_t i = q * paths.N / std::min(probes, paths.N);
      drift.grad_z_F(paths.grid.time(s), paths.state(s, i), paths.moments(s), gz);
      for (double g : gz)
        if (g != 0.0) return true;
    }
  }
  return false;
}

IntrinsicEstimator::IntrinsicEstimator(ModelSpec model, const EmpiricalMeasure& mu0,
                                       TimeGrid grid, std::uint64_t seed, EstimatorOptions opts)
    : model_(std::move(model)), grid_(grid), opts_(opts) {
  if (model_.singular_drift && !opts_.allow_heuristic)
    fail(ErrorCode::InvalidArgument, "model has a singular drift and heuristic mode is off");
  if (grid_.t_end > model_.horizon * (1.0 + 1e-12))
    fail(ErrorCode::InvalidArgument, "estimation time exceeds the model horizon");
  SimulationOptions sim = opts_.simulation;
  sim.threads = opts_.threads;
  paths_ = simulate_particles(model_, mu0, grid_, seed, sim);
  measure_dependent_ = has_measure_dependence(model_, paths_);
}

Estimate IntrinsicEstimator::estimate(const PerturbationField& phi, const Observable& f,
                                      const BismutSchedule& schedule) const {
  schedule.validate();
  const TangentOptions topts{opts_.threads, true, 1e-6};
  const std::size_t N = paths_.N;

  const std::vector<double> v0 = initial_directions(paths_, phi);
  const TangentPaths frozen = frozen_tangent(paths_, model_, v0, topts);
  const WeightVector w1 = weight_frozen(paths_, frozen, model_, schedule, opts_.threads);

  WeightVector w2;
  if (measure_dependent_) {
    const TangentPaths mf = meanfield_tangent(paths_, model_, phi, topts);
    w2 = weight_meanfield(paths_, mf, model_, opts_.threads);
  } else {
    w2.w.assign(N, 0.0);
  }

  std::vector<double> p1(N), p2(N), total(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double fx = f(paths_.state(grid_.n_steps, i));
    p1[i] = fx * w1.w[i];
    p2[i] = fx * w2.w[i];
    total[i] = fx * (w1.w[i] + w2.w[i]);
  }
  for (double v : total)
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "Bismut weight product is not finite");

  Estimate e;
  e.term1 = pairwise_sum(p1) / static_cast<double>(N);
  e.term2 = pairwise_sum(p2) / static_cast<double>(N);
  e.value = e.term1 + e.term2;
  e.std_error = sample_stats(total).std_error;
  e.N = N;
  e.n_steps = grid_.n_steps;
  e.dt = grid_.dt();
  e.seed = paths_.seed;
  e.scenario = model_.name;
  e.mode = model_.heuristic() ? EstimateMode::Heuristic : EstimateMode::Certified;
  e.notes = frozen.notes;
  if (!f.bounded) e.notes.emplace_back("observable '" + f.name + "' is unbounded");
  return e;
}

Estimate estimate_intrinsic(const ModelSpec& model, const EmpiricalMeasure& mu0,
                            const PerturbationField& phi, const Observable& f,
                            const TimeGrid& grid, const BismutSchedule& schedule,
                            std::uint64_t seed, const EstimatorOptions& opts) {
  return IntrinsicEstimator(model, mu0, grid, seed, opts).estimate(phi, f, schedule);
}

Estimate estimate_classical(const ModelSpec& model, std::span<const double> x,
                            std::span<const double> v, const Observable& f,
                            const TimeGrid& grid, const BismutSchedule& schedule,
                            std::size_t N, std::uint64_t seed, const EstimatorOptions& opts) {
  if (x.size() != model.d || v.size() != model.d)
    fail(ErrorCode::InvalidArgument, "start point and direction must have model dimension");
  if (N < 1) fail(ErrorCode::InvalidArgument, "estimate_classical needs N >= 1");
  std::vector<double> pts;
  pts.reserve(N * model.d);
  for (std::size_t i = 0; i < N; ++i) pts.insert(pts.end(), x.begin(), x.end());
  const EmpiricalMeasure mu0(model.d, std::move(pts));

  SimulationOptions sim = opts.simulation;
  sim.threads = opts.threads;
  const ParticlePaths paths = simulate_particles(model, mu0, grid, seed, sim);
  if (has_measure_dependence(model, paths))
    fail(ErrorCode::MeasureDependence,
         "estimate_classical requires a drift without measure dependence");

  std::vector<double> v0;
  v0.reserve(N * model.d);
  for (std::size_t i = 0; i < N; ++i) v0.insert(v0.end(), v.begin(), v.end());
  const TangentPaths tang = frozen_tangent(paths, model, v0, {opts.threads, opts.allow_heuristic, 1e-6});
  const WeightVector w = weight_frozen(paths, tang, model, schedule, opts.threads);

  std::vector<double> prod(N);
  for (std::size_t i = 0; i < N; ++i) prod[i] = f(paths.state(grid.n_steps, i)) * w.w[i];
  const SampleStats st = sample_stats(prod);
  Estimate e;
  e.value = st.mean;
  e.term1 = st.mean;
  e.std_error = st.std_error;
  e.N = N;
  e.n_steps = grid.n_steps;
  e.dt = grid.dt();
  e.seed = seed;
  e.scenario = model.name;
  e.mode = model.heuristic() ? EstimateMode::Heuristic : EstimateMode::Certified;
  e.notes = tang.notes;
  return e;
}

DualNormResult dual_norm_lower_bound(const ModelSpec& model, const EmpiricalMeasure& mu0,
                                     const Observable& f, const TimeGrid& grid,
                                     const BismutSchedule& schedule,
                                     const std::vector<PerturbationField>& dictionary,
                                     std::uint64_t seed, const EstimatorOptions& opts) {
  if (dictionary.empty()) fail(ErrorCode::InvalidArgument, "dual norm needs a nonempty dictionary");
  const IntrinsicEstimator est(model, mu0, grid, seed, opts);
  DualNormResult out;
  bool have = false;
  for (std::size_t q = 0; q < dictionary.size(); ++q) {
    const double norm = lk_norm(dictionary[q], mu0, Exponent::finite(model.k));
    if (!(norm > 0.0)) {
      out.skipped.push_back(dictionary[q].name);
      out.per_field.emplace_back();
      continue;
    }
    Estimate e = est.estimate(dictionary[q].scaled(1.0 / norm), f, schedule);
    if (!have || e.value > out.best.value) {
      out.best = e;
      out.argmax = q;
      have = true;
    }
    out.per_field.push_back(std::move(e));
  }
  if (!have) fail(ErrorCode::InvalidArgument, "every dictionary field has zero norm");
  out.best.notes.emplace_back("lower bound on the dual norm over " +
                              std::to_string(dictionary.size()) + " fields");
  return out;
}

BetaInvarianceReport beta_invariance_check(const ModelSpec& model, const EmpiricalMeasure& mu0,
                                           const PerturbationField& phi, const Observable& f,
                                           const TimeGrid& grid,
                                           const std::vector<std::uint64_t>& seeds,
                                           const std::vector<BismutSchedule>& schedules,
                                           const EstimatorOptions& opts, double sigmas) {
  if (schedules.size() < 2) fail(ErrorCode::InvalidArgument, "beta check needs >= 2 schedules");
  if (seeds.empty()) fail(ErrorCode::InvalidArgument, "beta check needs at least one seed");
  BetaInvarianceReport rep;
  rep.sigmas = sigmas;
  for (std::size_t a = 0; a < schedules.size(); ++a) {
    rep.schedules.push_back(schedules[a].name);
    rep.estimates.push_back(
        estimate_intrinsic(model, mu0, phi, f, grid, schedules[a], seeds[a % seeds.size()], opts));
  }
  rep.passed = true;
  for (std::size_t a = 0; a < schedules.size(); ++a)
    for (std::size_t b = a + 1; b < schedules.size(); ++b) {
      BetaPairCheck pc{a, b};
      pc.difference = std::abs(rep.estimates[a].value - rep.estimates[b].value);
      pc.combined_stderr = std::hypot(rep.estimates[a].std_error, rep.estimates[b].std_error);
      pc.passed = pc.difference <= sigmas * pc.combined_stderr;
      rep.passed = rep.passed && pc.passed;
      rep.pairs.push_back(pc);
    }
  return rep;
}

}  // namespace mvb
