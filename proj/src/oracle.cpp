#include "mvb/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvb/error.hpp"
#include "mvb/parallel.hpp"

namespace mvb {

namespace {

std::vector<double> terminal_values(const ParticlePaths& paths, const Observable& f) {
  std::vector<double> out(paths.N);
  for (std::size_t i = 0; i < paths.N; ++i) out[i] = f(paths.state(paths.grid.n_steps, i));
  return out;
}

// Per-particle difference quotients for one eps.
std::vector<double> fd_quotients(const ModelSpec& model, const EmpiricalMeasure& mu0,
                                 const std::vector<double>& base, const PerturbationField& phi,
                                 const Observable& f, const TimeGrid& grid, double eps,
                                 std::uint64_t seed, const SimulationOptions& opts) {
  const ParticlePaths bumped = simulate_particles(model, pushforward(mu0, phi, eps), grid, seed, opts);
  std::vector<double> q = terminal_values(bumped, f);
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = (q[i] - base[i]) / eps;
  return q;
}

Estimate make_fd_estimate(const ModelSpec& model, const TimeGrid& grid, std::uint64_t seed,
                          std::span<const double> per_particle) {
  const SampleStats st = sample_stats(per_particle);
  Estimate e;
  e.value = st.mean;
  e.term1 = st.mean;
  e.std_error = st.std_error;
  e.N = per_particle.size();
  e.n_steps = grid.n_steps;
  e.dt = grid.dt();
  e.seed = seed;
  e.scenario = model.name;
  e.mode = model.heuristic() ? EstimateMode::Heuristic : EstimateMode::Certified;
  return e;
}

}  // namespace

Estimate finite_difference_intrinsic(const ModelSpec& model, const EmpiricalMeasure& mu0,
                                     const PerturbationField& phi, const Observable& f,
                                     const TimeGrid& grid, double eps, std::uint64_t seed,
                                     const SimulationOptions& opts) {
  if (!(eps > 0.0)) fail(ErrorCode::InvalidArgument, "finite difference needs eps > 0");
  const std::vector<double> base = terminal_values(simulate_particles(model, mu0, grid, seed, opts), f);
  const auto q = fd_quotients(model, mu0, base, phi, f, grid, eps, seed, opts);
  return make_fd_estimate(model, grid, seed, q);
}

Estimate richardson_intrinsic(const ModelSpec& model, const EmpiricalMeasure& mu0,
                              const PerturbationField& phi, const Observable& f,
                              const TimeGrid& grid, double eps, std::uint64_t seed,
                              const SimulationOptions& opts) {
  if (!(eps > 0.0)) fail(ErrorCode::InvalidArgument, "finite difference needs eps > 0");
  const std::vector<double> base = terminal_values(simulate_particles(model, mu0, grid, seed, opts), f);
  const auto coarse = fd_quotients(model, mu0, base, phi, f, grid, eps, seed, opts);
  const auto fine = fd_quotients(model, mu0, base, phi, f, grid, eps / 2.0, seed, opts);
  std::vector<double> comb(coarse.size());
  for (std::size_t i = 0; i < comb.size(); ++i) comb[i] = 2.0 * fine[i] - coarse[i];
  Estimate e = make_fd_estimate(model, grid, seed, comb);
  e.notes.emplace_back("richardson on eps=" + format_double(eps) + ", " + format_double(eps / 2.0));
  return e;
}

QuadratureRule gauss_hermite(std::size_t n) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "quadrature needs n >= 1");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 1; i < n; ++i) {
    const double off = std::sqrt(static_cast<double>(i));
    jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = off;
    jac(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(i)) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    rule.nodes[i] = eig.eigenvalues()(c);
    const double v = eig.eigenvectors()(0, c);
    rule.weights[i] = v * v;
  }
  return rule;
}

namespace {

// Calls body(point, weight) over the tensor rule in `dims` dimensions.
template <class Body>
void tensor_quadrature(const QuadratureRule& rule, std::size_t dims, Body&& body) {
  const std::size_t n = rule.nodes.size();
  std::vector<std::size_t> idx(dims, 0);
  std::vector<double> pt(dims);
  if (dims == 0) {
    body(std::span<const double>(pt), 1.0);
    return;
  }
  while (true) {
    double w = 1.0;
    for (std::size_t c = 0; c < dims; ++c) {
      pt[c] = rule.nodes[idx[c]];
      w *= rule.weights[idx[c]];
    }
    body(std::span<const double>(pt), w);
    std::size_t c = 0;
    while (c < dims && ++idx[c] == n) idx[c++] = 0;
    if (c == dims) break;
  }
}

}  // namespace

double gaussian_quadrature_reference(const LinearGaussianModel& model, const GaussianLaw& initial,
                                     const Observable& f, double t, const PerturbationField& phi,
                                     std::size_t nodes) {
  const std::size_t d = model.d;
  if (d < 1 || d > 2)
    fail(ErrorCode::UnsupportedScenario, "quadrature reference supports d = 1 or 2");
  if (initial.mean.size() != d || initial.stddev.size() != d)
    fail(ErrorCode::InvalidArgument, "initial law dimension mismatch");
  if (!(model.sigma > 0.0) || !(t > 0.0))
    fail(ErrorCode::UnsupportedScenario, "quadrature reference needs sigma > 0 and t > 0");

  const double rate = model.a + model.kappa;
  const double alpha = std::exp(-rate * t);
  const double mean_decay = std::exp(-model.a * t);
  const double var = rate == 0.0 ? model.sigma * model.sigma * t
                                 : model.sigma * model.sigma * -std::expm1(-2.0 * rate * t) / (2.0 * rate);
  const double s = std::sqrt(var);

  const QuadratureRule rule = gauss_hermite(nodes);
  bool point = true;
  for (double sd : initial.stddev) point = point && sd == 0.0;
  const std::size_t init_dims = point ? 0 : d;

  auto x0_at = [&](std::span<const double> z, std::vector<double>& x0) {
    for (std::size_t c = 0; c < d; ++c)
      x0[c] = initial.mean[c] + (point ? 0.0 : initial.stddev[c] * z[c]);
  };

  // E phi(X0), needed for the shift of the mean flow.
  std::vector<double> phi_bar(d, 0.0), x0(d), v(d);
  tensor_quadrature(rule, init_dims, [&](std::span<const double> z, double w) {
    x0_at(z, x0);
    phi(x0, v);
    for (std::size_t c = 0; c < d; ++c) phi_bar[c] += w * v[c];
  });

  // dX_t/d eps = alpha (phi(X0) - phi_bar) + mean_decay phi_bar, and
  // E grad f(c + s G) = E[f(c + s G) G] / s.
  double total = 0.0;
  std::vector<double> centre(d), y(d);
  tensor_quadrature(rule, init_dims, [&](std::span<const double> z0, double w0) {
    x0_at(z0, x0);
    phi(x0, v);
    for (std::size_t c = 0; c < d; ++c) {
      centre[c] = alpha * (x0[c] - initial.mean[c]) + mean_decay * initial.mean[c];
      v[c] = alpha * (v[c] - phi_bar[c]) + mean_decay * phi_bar[c];
    }
    double inner = 0.0;
    tensor_quadrature(rule, d, [&](std::span<const double> g, double w) {
      for (std::size_t c = 0; c < d; ++c) y[c] = centre[c] + s * g[c];
      const double fy = f(y);
      double proj = 0.0;
      for (std::size_t c = 0; c < d; ++c) proj += g[c] * v[c];
      inner += w * fy * proj;
    });
    total += w0 * inner / s;
  });
  return total;
}

double brownian_sign_expectation(double x, double threshold, double sigma, double t) {
  return std::erf((x - threshold) / (sigma * std::sqrt(2.0 * t)));
}

double brownian_point_pair_tv(double x1, double x2, double sigma, double t) {
  return 2.0 * std::erf(std::abs(x1 - x2) / (2.0 * sigma * std::sqrt(2.0 * t)));
}

double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    fail(ErrorCode::InvalidArgument, "slope fit needs >= 2 matched points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      fail(ErrorCode::NonFinite, "log-log slope needs positive values");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

StabilityRow stability_report(const ModelSpec& model, const EmpiricalMeasure& mu0,
                              const EmpiricalMeasure& nu0, const TimeGrid& grid,
                              std::uint64_t seed, const SimulationOptions& opts) {
  const double k = model.k;
  const WassersteinResult w0 = wasserstein(mu0, nu0, k);
  StabilityRow row;
  row.initial_distance = w0.distance;
  if (w0.distance == 0.0) {
    row.degenerate = true;
    return row;
  }
  std::vector<double> paired;
  paired.reserve(nu0.size() * nu0.dim());
  for (std::size_t i = 0; i < mu0.size(); ++i) {
    const auto p = nu0.point(w0.plan.pairing[i]);
    paired.insert(paired.end(), p.begin(), p.end());
  }
  const EmpiricalMeasure nu_aligned(nu0.dim(), std::move(paired));

  const ParticlePaths a = simulate_particles(model, mu0, grid, seed, opts);
  const ParticlePaths b = simulate_particles(model, nu_aligned, grid, seed, opts);
  std::vector<double> sups(a.N, 0.0);
  for (std::size_t i = 0; i < a.N; ++i)
    for (std::size_t s = 0; s <= grid.n_steps; ++s) {
      double r2 = 0.0;
      const auto x = a.state(s, i), y = b.state(s, i);
      for (std::size_t c = 0; c < a.d; ++c) r2 += (x[c] - y[c]) * (x[c] - y[c]);
      sups[i] = std::max(sups[i], std::pow(std::sqrt(r2), k));
    }
  row.sup_distance = std::pow(pairwise_sum(sups) / static_cast<double>(a.N), 1.0 / k);
  row.terminal_distance = wasserstein(a.cloud(grid.n_steps), b.cloud(grid.n_steps), k).distance;
  row.sup_ratio = row.sup_distance / row.initial_distance;
  row.wasserstein_ratio = row.terminal_distance / row.initial_distance;
  return row;
}

MomentReport moment_report(const ModelSpec& model, const std::vector<EmpiricalMeasure>& ladder,
                           const TimeGrid& grid, std::uint64_t seed, double cap,
                           const SimulationOptions& opts) {
  MomentReport rep;
  rep.cap = cap;
  const double k = model.k;
  for (const auto& mu0 : ladder) {
    const ParticlePaths p = simulate_particles(model, mu0, grid, seed, opts);
    MomentRow row;
    std::vector<double> sup_path(p.N, 0.0), cur(p.N);
    for (std::size_t s = 0; s <= grid.n_steps; ++s) {
      for (std::size_t i = 0; i < p.N; ++i) {
        const double r = std::sqrt(norm2(p.state(s, i)));
        cur[i] = k == 2.0 ? r * r : std::pow(r, k);
        sup_path[i] = std::max(sup_path[i], cur[i]);
      }
      const double m = pairwise_sum(cur) / static_cast<double>(p.N);
      if (s == 0) row.initial_moment = m;
      row.sup_moment = std::max(row.sup_moment, m);
    }
    row.sup_path_moment = pairwise_sum(sup_path) / static_cast<double>(p.N);
    row.ratio = row.sup_moment / (1.0 + row.initial_moment);
    rep.max_ratio = std::max(rep.max_ratio, row.ratio);
    rep.rows.push_back(row);
  }
  rep.passed = rep.max_ratio <= cap;
  return rep;
}

TvReport tv_gradient_scaling(const ModelSpec& model, const EmpiricalMeasure& mu0,
                             const EmpiricalMeasure& nu0, const std::vector<double>& t_grid,
                             double dt, const std::vector<Observable>& dictionary,
                             std::uint64_t seed, const SimulationOptions& opts) {
  if (dictionary.empty()) fail(ErrorCode::InvalidArgument, "tv scaling needs a dictionary");
  for (const auto& f : dictionary)
    if (!f.bounded || f.bound > 1.0)
      fail(ErrorCode::InvalidArgument, "tv dictionary functions must satisfy |f| <= 1");
  TvReport rep;
  std::vector<double> ts, ds;
  for (double t : t_grid) {
    const TimeGrid grid = TimeGrid::with_step(t, dt);
    const ParticlePaths a = simulate_particles(model, mu0, grid, seed, opts);
    const ParticlePaths b = simulate_particles(model, nu0, grid, seed, opts);
    TvRow row;
    row.t = t;
    bool first = true;
    for (std::size_t q = 0; q < dictionary.size(); ++q) {
      const auto fa = terminal_values(a, dictionary[q]);
      const auto fb = terminal_values(b, dictionary[q]);
      SampleStats st;
      if (fa.size() == fb.size()) {
        std::vector<double> diff(fa.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = fa[i] - fb[i];
        st = sample_stats(diff);
      } else {
        const SampleStats sa = sample_stats(fa), sb = sample_stats(fb);
        st = {sa.mean - sb.mean, std::hypot(sa.std_error, sb.std_error)};
      }
      if (first || std::abs(st.mean) > row.lower_bound) {
        row.lower_bound = std::abs(st.mean);
        row.std_error = st.std_error;
        row.best = q;
        first = false;
      }
    }
    rep.rows.push_back(row);
    ts.push_back(t);
    ds.push_back(row.lower_bound);
  }
  bool positive = ts.size() >= 2;
  for (double v : ds) positive = positive && v > 0.0;
  rep.slope = positive ? fit_loglog_slope(ts, ds) : 0.0;
  return rep;
}

TangentFdReport tangent_fd_consistency(const ModelSpec& model, const EmpiricalMeasure& mu0,
                                       const PerturbationField& phi, const TimeGrid& grid,
                                       std::uint64_t seed, const std::vector<double>& eps_ladder,
                                       TangentKind kind, const SimulationOptions& opts) {
  const ParticlePaths base = simulate_particles(model, mu0, grid, seed, opts);
  const TangentOptions topts{opts.threads, true, 1e-6};
  const TangentPaths tang = kind == TangentKind::Frozen
                                ? frozen_tangent(base, model, initial_directions(base, phi), topts)
                                : meanfield_tangent(base, model, phi, topts);
  const FrozenFlow flow = FrozenFlow::from(base);

  TangentFdReport rep;
  rep.kind = kind;
  std::vector<double> es, errs;
  for (double eps : eps_ladder) {
    const EmpiricalMeasure bumped0 = pushforward(mu0, phi, eps);
    const ParticlePaths bumped = kind == TangentKind::Frozen
                                     ? simulate_decoupled(model, flow, bumped0, grid, seed, opts)
                                     : simulate_particles(model, bumped0, grid, seed, opts);
    double worst = 0.0;
    std::vector<double> dev(base.N);
    for (std::size_t s = 0; s <= grid.n_steps; ++s) {
      for (std::size_t i = 0; i < base.N; ++i) {
        const auto x = base.state(s, i), y = bumped.state(s, i), v = tang.value(s, i);
        double r2 = 0.0;
        for (std::size_t c = 0; c < base.d; ++c) {
          const double e = v[c] - (y[c] - x[c]) / eps;
          r2 += e * e;
        }
        dev[i] = std::sqrt(r2);
      }
      worst = std::max(worst, pairwise_sum(dev) / static_cast<double>(base.N));
    }
    rep.rows.push_back({eps, worst});
    es.push_back(eps);
    errs.push_back(worst);
  }
  rep.monotone = true;
  for (std::size_t q = 1; q < rep.rows.size(); ++q)
    rep.monotone = rep.monotone && rep.rows[q].error < rep.rows[q - 1].error;
  bool positive = es.size() >= 2;
  for (double v : errs) positive = positive && v > 0.0;
  rep.observed_order = positive ? fit_loglog_slope(es, errs) : 0.0;
  return rep;
}

nlohmann::json to_json(const StabilityRow& r) {
  return {{"initial_distance", r.initial_distance},
          {"sup_distance", r.sup_distance},
          {"terminal_distance", r.terminal_distance},
          {"sup_ratio", r.sup_ratio},
          {"wasserstein_ratio", r.wasserstein_ratio},
          {"degenerate", r.degenerate}};
}

nlohmann::json to_json(const MomentReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"initial_moment", row.initial_moment},
                    {"sup_moment", row.sup_moment},
                    {"sup_path_moment", row.sup_path_moment},
                    {"ratio", row.ratio}});
  return {{"rows", rows}, {"max_ratio", r.max_ratio}, {"cap", r.cap}, {"passed", r.passed}};
}

nlohmann::json to_json(const TvReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"t", row.t},
                    {"lower_bound", row.lower_bound},
                    {"stderr", row.std_error},
                    {"best", row.best}});
  return {{"rows", rows}, {"slope", r.slope}, {"predicted_slope", r.predicted_slope}};
}

nlohmann::json to_json(const TangentFdReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) rows.push_back({{"eps", row.eps}, {"error", row.error}});
  return {{"kind", r.kind == TangentKind::Frozen ? "frozen" : "meanfield"},
          {"rows", rows},
          {"observed_order", r.observed_order},
          {"monotone", r.monotone}};
}

}  // namespace mvb
