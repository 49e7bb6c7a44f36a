#include "mvb/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"
#include "mvb/bismut.hpp"
#include "mvb/oracle.hpp"

namespace mvb {

namespace pt = boost::property_tree;
using nlohmann::json;

namespace {

const std::set<std::string> kQuantities = {"intrinsic_estimate", "fd_oracle", "quadrature",
                                           "dual_norm",          "stability", "moment",
                                           "tv_slope",           "beta_check"};

const std::map<std::string, std::set<std::string>> kKeys = {
    {"experiment",
     {"scenario", "d", "N", "n_steps", "t", "k", "seed", "seeds_for_ci", "quantities", "threads"}},
    {"initial", {"law", "nu"}},
    {"estimator", {"schedule", "schedules", "phi", "f", "classical"}},
    {"oracle", {"eps", "richardson", "t_grid", "dt", "shifts", "moment_ladder", "tv_dictionary"}},
    {"checks",
     {"sigmas", "intrinsic_vs_fd", "intrinsic_vs_quadrature", "beta_invariance", "dual_norm_slope",
      "tv_slope", "tv_slope_tolerance", "stability_spread", "moment_cap"}},
    {"output", {"dir", "csv", "manifest"}},
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    fail(ErrorCode::ConfigError, "'" + key + "' expects a number, got '" + text + "'");
  return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    fail(ErrorCode::ConfigError, "'" + key + "' expects a non-negative integer, got '" + text + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail(ErrorCode::ConfigError, "'" + key + "' expects true or false, got '" + text + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(to_double(key, item));
  return out;
}

std::pair<double, double> to_range(const std::string& key, const std::string& text) {
  const auto v = to_doubles(key, text);
  if (v.size() != 2 || !(v[0] <= v[1]))
    fail(ErrorCode::ConfigError, "'" + key + "' expects 'lo, hi' with lo <= hi");
  return {v[0], v[1]};
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string join(const std::vector<double>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + format_double(items[i]);
  return out;
}

std::string join(const std::vector<std::uint64_t>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + std::to_string(items[i]);
  return out;
}

std::string normalized_text(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "[experiment]\n"
    << "scenario = " << c.scenario << "\n"
    << "d = " << c.d << "\n"
    << "N = " << c.N << "\n"
    << "n_steps = " << c.n_steps << "\n"
    << "t = " << format_double(c.t) << "\n"
    << "k = " << format_double(c.k) << "\n"
    << "seed = " << c.seed << "\n";
  if (!c.seeds_for_ci.empty()) o << "seeds_for_ci = " << join(c.seeds_for_ci) << "\n";
  o << "quantities = " << join(c.quantities) << "\n"
    << "threads = " << c.threads << "\n";
  if (!c.params.values.empty()) {
    o << "\n[model]\n";
    for (const auto& [key, v] : c.params.values) o << key << " = " << format_double(v) << "\n";
  }
  o << "\n[initial]\nlaw = " << c.law << "\n";
  if (!c.nu.empty()) o << "nu = " << c.nu << "\n";
  o << "\n[estimator]\n"
    << "schedule = " << c.schedule << "\n";
  if (!c.schedules.empty()) o << "schedules = " << join(c.schedules) << "\n";
  o << "phi = " << join(c.phi) << "\n"
    << "f = " << join(c.f) << "\n"
    << "classical = " << (c.classical ? "true" : "false") << "\n";
  o << "\n[oracle]\n"
    << "eps = " << join(c.eps) << "\n"
    << "richardson = " << (c.richardson ? "true" : "false") << "\n";
  if (!c.t_grid.empty()) o << "t_grid = " << join(c.t_grid) << "\n";
  if (c.dt > 0.0) o << "dt = " << format_double(c.dt) << "\n";
  if (!c.shifts.empty()) o << "shifts = " << join(c.shifts) << "\n";
  if (!c.moment_ladder.empty()) o << "moment_ladder = " << join(c.moment_ladder) << "\n";
  if (!c.tv_dictionary.empty()) o << "tv_dictionary = " << join(c.tv_dictionary) << "\n";
  o << "\n[checks]\n"
    << "sigmas = " << format_double(c.sigmas) << "\n"
    << "intrinsic_vs_fd = " << (c.check_intrinsic_vs_fd ? "true" : "false") << "\n"
    << "intrinsic_vs_quadrature = " << (c.check_intrinsic_vs_quadrature ? "true" : "false") << "\n"
    << "beta_invariance = " << (c.check_beta_invariance ? "true" : "false") << "\n";
  if (c.dual_norm_slope)
    o << "dual_norm_slope = " << format_double(c.dual_norm_slope->first) << ","
      << format_double(c.dual_norm_slope->second) << "\n";
  if (c.tv_slope)
    o << "tv_slope = " << format_double(c.tv_slope->first) << "," << format_double(c.tv_slope->second)
      << "\n";
  if (c.tv_slope_tolerance) o << "tv_slope_tolerance = " << format_double(*c.tv_slope_tolerance) << "\n";
  if (c.stability_spread) o << "stability_spread = " << format_double(*c.stability_spread) << "\n";
  if (c.moment_cap) o << "moment_cap = " << format_double(*c.moment_cap) << "\n";
  o << "\n[output]\n"
    << "dir = " << c.out_dir << "\n"
    << "csv = " << c.csv_name << "\n"
    << "manifest = " << c.manifest_name << "\n";
  return o.str();
}

ExperimentConfig from_tree(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      fail(ErrorCode::ConfigError, "key '" + section + "' must belong to a section");
    if (section == "model") continue;
    const auto it = kKeys.find(section);
    if (it == kKeys.end()) fail(ErrorCode::ConfigError, "unknown config section [" + section + "]");
    for (const auto& [key, _] : body)
      if (!it->second.count(key))
        fail(ErrorCode::ConfigError, "unknown key '" + key + "' in [" + section + "]");
  }
  auto opt = [&](const std::string& path) { return tree.get_optional<std::string>(pt::ptree::path_type(path, '/')); };

  ExperimentConfig c;
  const auto scenario = opt("experiment/scenario");
  if (!scenario || trim(*scenario).empty())
    fail(ErrorCode::ConfigError, "[experiment] scenario is required");
  c.scenario = trim(*scenario);
  if (auto v = opt("experiment/d")) c.d = to_uint("d", *v);
  if (auto v = opt("experiment/N")) c.N = to_uint("N", *v);
  if (auto v = opt("experiment/n_steps")) c.n_steps = to_uint("n_steps", *v);
  if (auto v = opt("experiment/t")) c.t = to_double("t", *v);
  if (auto v = opt("experiment/k")) c.k = to_double("k", *v);
  if (auto v = opt("experiment/seed")) c.seed = to_uint("seed", *v);
  if (auto v = opt("experiment/seeds_for_ci"))
    for (const auto& s : split_list(*v)) c.seeds_for_ci.push_back(to_uint("seeds_for_ci", s));
  if (auto v = opt("experiment/quantities")) c.quantities = split_list(*v);
  if (c.quantities.empty()) c.quantities = {"intrinsic_estimate"};
  if (auto v = opt("experiment/threads")) {
    const auto th = to_uint("threads", *v);
    if (th < 1 || th > 1024) fail(ErrorCode::ConfigError, "threads must be in [1, 1024]");
    c.threads = static_cast<int>(th);
  }

  if (auto model = tree.get_child_optional("model"))
    for (const auto& [key, node] : *model) c.params.values[key] = to_double(key, node.data());

  if (auto v = opt("initial/law")) c.law = trim(*v);
  if (auto v = opt("initial/nu")) c.nu = trim(*v);

  if (auto v = opt("estimator/schedule")) c.schedule = trim(*v);
  if (auto v = opt("estimator/schedules")) c.schedules = split_list(*v);
  if (auto v = opt("estimator/phi")) c.phi = split_list(*v);
  if (auto v = opt("estimator/f")) c.f = split_list(*v);
  if (auto v = opt("estimator/classical")) c.classical = to_bool("classical", *v);

  if (auto v = opt("oracle/eps")) c.eps = to_doubles("eps", *v);
  if (auto v = opt("oracle/richardson")) c.richardson = to_bool("richardson", *v);
  if (auto v = opt("oracle/t_grid")) c.t_grid = to_doubles("t_grid", *v);
  if (auto v = opt("oracle/dt")) c.dt = to_double("dt", *v);
  if (auto v = opt("oracle/shifts")) c.shifts = to_doubles("shifts", *v);
  if (auto v = opt("oracle/moment_ladder")) c.moment_ladder = to_doubles("moment_ladder", *v);
  if (auto v = opt("oracle/tv_dictionary")) c.tv_dictionary = split_list(*v);

  if (auto v = opt("checks/sigmas")) c.sigmas = to_double("sigmas", *v);
  if (auto v = opt("checks/intrinsic_vs_fd")) c.check_intrinsic_vs_fd = to_bool("intrinsic_vs_fd", *v);
  if (auto v = opt("checks/intrinsic_vs_quadrature"))
    c.check_intrinsic_vs_quadrature = to_bool("intrinsic_vs_quadrature", *v);
  if (auto v = opt("checks/beta_invariance")) c.check_beta_invariance = to_bool("beta_invariance", *v);
  if (auto v = opt("checks/dual_norm_slope")) c.dual_norm_slope = to_range("dual_norm_slope", *v);
  if (auto v = opt("checks/tv_slope")) c.tv_slope = to_range("tv_slope", *v);
  if (auto v = opt("checks/tv_slope_tolerance")) c.tv_slope_tolerance = to_double("tv_slope_tolerance", *v);
  if (auto v = opt("checks/stability_spread")) c.stability_spread = to_double("stability_spread", *v);
  if (auto v = opt("checks/moment_cap")) c.moment_cap = to_double("moment_cap", *v);

  if (auto v = opt("output/dir")) c.out_dir = trim(*v);
  if (auto v = opt("output/csv")) c.csv_name = trim(*v);
  if (auto v = opt("output/manifest")) c.manifest_name = trim(*v);
  c.text = normalized_text(c);
  return c;
}

bool wants(const ExperimentConfig& c, const std::string& q) {
  return std::find(c.quantities.begin(), c.quantities.end(), q) != c.quantities.end();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

// Output of one independent unit of work. `stats` carries values the
// checks need, keyed by a stable string.
struct TaskOut {
  std::vector<ResultRow> rows;
  std::map<std::string, Estimate> stats;
  std::map<std::string, double> values;
  std::optional<Error> failure;
};

struct Context {
  const ExperimentConfig& cfg;
  ModelSpec model;
  EmpiricalMeasure mu0;
  TimeGrid grid;
  EstimatorOptions eopts;
  std::string base_params;
};

ResultRow make_row(const Context& ctx, const std::string& quantity, double value, double se,
                   std::uint64_t seed, const std::string& params) {
  return {ctx.cfg.scenario, quantity, value, se, seed, "ok", "", params};
}

std::string key(const std::string& a, const std::string& b) { return a + "|" + b; }

void run_intrinsic(const Context& ctx, TaskOut& out) {
  const auto& c = ctx.cfg;
  const BismutSchedule sched = make_schedule(c.schedule, c.t);
  const std::string mode = c.classical ? "classical" : "intrinsic";
  std::optional<IntrinsicEstimator> est;
  if (!c.classical) est.emplace(ctx.model, ctx.mu0, ctx.grid, c.seed, ctx.eopts);
  for (const auto& phi_name : c.phi)
    for (const auto& f_name : c.f) {
      const PerturbationField phi = make_perturbation(phi_name, c.d);
      const Observable f = make_observable(f_name, c.d);
      Estimate e;
      if (c.classical) {
        const auto x = ctx.mu0.point(0);
        std::vector<double> v(c.d);
        phi(x, v);
        e = estimate_classical(ctx.model, x, v, f, ctx.grid, sched, c.N, c.seed, ctx.eopts);
      } else {
        e = est->estimate(phi, f, sched);
      }
      out.rows.push_back(make_row(ctx, "intrinsic_estimate", e.value, e.std_error, c.seed,
                                  "estimator=" + mode + ";mode=" + mode_name(e.mode) + ";phi=" +
                                      phi_name + ";f=" + f_name + ";schedule=" + c.schedule +
                                      ";term1=" + format_double(e.term1) + ";term2=" +
                                      format_double(e.term2) + ";" + ctx.base_params));
      out.stats[key(phi_name, f_name)] = e;
    }
}

void run_fd(const Context& ctx, TaskOut& out) {
  const auto& c = ctx.cfg;
  for (const auto& phi_name : c.phi)
    for (const auto& f_name : c.f) {
      const PerturbationField phi = make_perturbation(phi_name, c.d);
      const Observable f = make_observable(f_name, c.d);
      Estimate reference;
      for (double eps : c.eps) {
        const Estimate e = finite_difference_intrinsic(ctx.model, ctx.mu0, phi, f, ctx.grid, eps,
                                                       c.seed, ctx.eopts.simulation);
        out.rows.push_back(make_row(ctx, "fd_oracle", e.value, e.std_error, c.seed,
                                    "method=fd;eps=" + format_double(eps) + ";phi=" + phi_name +
                                        ";f=" + f_name + ";" + ctx.base_params));
        reference = e;
      }
      if (c.richardson) {
        const double eps = c.eps.front();
        reference = richardson_intrinsic(ctx.model, ctx.mu0, phi, f, ctx.grid, eps, c.seed,
                                         ctx.eopts.simulation);
        out.rows.push_back(make_row(ctx, "fd_oracle", reference.value, reference.std_error, c.seed,
                                    "method=richardson;eps=" + format_double(eps) + ";phi=" +
                                        phi_name + ";f=" + f_name + ";" + ctx.base_params));
      }
      out.stats[key(phi_name, f_name)] = reference;
    }
}

void run_quadrature(const Context& ctx, TaskOut& out) {
  const auto& c = ctx.cfg;
  const InitialLaw law = parse_initial_law(c.law, c.d);
  for (const auto& phi_name : c.phi)
    for (const auto& f_name : c.f) {
      const double v = gaussian_quadrature_reference(c.scenario, c.d, c.params, law,
                                                     make_observable(f_name, c.d), c.t,
                                                     make_perturbation(phi_name, c.d));
      out.rows.push_back(make_row(ctx, "quadrature", v, 0.0, c.seed,
                                  "phi=" + phi_name + ";f=" + f_name + ";t=" + format_double(c.t)));
      out.values[key(phi_name, f_name)] = v;
    }
}

std::vector<double> t_list(const ExperimentConfig& c) {
  return c.t_grid.empty() ? std::vector<double>{c.t} : c.t_grid;
}

void run_dual_norm(const Context& ctx, TaskOut& out) {
  const auto& c = ctx.cfg;
  std::vector<PerturbationField> dict;
  for (const auto& name : c.phi) dict.push_back(make_perturbation(name, c.d));
  for (const auto& f_name : c.f) {
    const Observable f = make_observable(f_name, c.d);
    std::vector<double> ts, vals;
    for (double t : t_list(c)) {
      const TimeGrid grid = TimeGrid::with_step(t, c.step());
      const DualNormResult r = dual_norm_lower_bound(ctx.model, ctx.mu0, f, grid,
                                                     make_schedule(c.schedule, t), dict, c.seed,
                                                     ctx.eopts);
      std::string params = "f=" + f_name + ";t=" + format_double(t) + ";argmax=" +
                           (r.per_field.empty() ? std::string("none") : c.phi[r.argmax]);
      for (const auto& s : r.skipped) params += ";skipped=" + s;
      out.rows.push_back(make_row(ctx, "dual_norm", r.best.value, r.best.std_error, c.seed, params));
      ts.push_back(t);
      vals.push_back(std::abs(r.best.value));
    }
    if (ts.size() >= 2) {
      const double slope = fit_loglog_slope(ts, vals);
      out.rows.push_back(make_row(ctx, "dual_norm", slope, 0.0, c.seed, "f=" + f_name + ";fit=slope"));
      out.values[key("slope", f_name)] = slope;
    }
  }
}

void run_stability(const Context& ctx, TaskOut& out) {
  const auto& c = ctx.cfg;
  std::vector<double> ratios;
  for (double shift : c.shifts) {
    const EmpiricalMeasure nu0 = pushforward(ctx.mu0, make_perturbation("const:1", c.d), shift);
    const StabilityRow r = stability_report(ctx.model, ctx.mu0, nu0, ctx.grid, c.seed,
                                            ctx.eopts.simulation);
    const std::string p = "shift=" + format_double(shift) + ";initial=" +
                          format_double(r.initial_distance) + ";";
    out.rows.push_back(make_row(ctx, "stability", r.wasserstein_ratio, 0.0, c.seed,
                                p + "ratio=wasserstein;" + ctx.base_params));
    out.rows.push_back(make_row(ctx, "stability", r.sup_ratio, 0.0, c.seed,
                                p + "ratio=sup;" + ctx.base_params));
    ratios.push_back(r.wasserstein_ratio);
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  out.values["spread"] = *lo > 0.0 ? *hi / *lo - 1.0 : INFINITY;
}

void run_moment(const Context& ctx, TaskOut& out) {
  const auto& c = ctx.cfg;
  std::vector<EmpiricalMeasure> ladder;
  for (double m2 : c.moment_ladder) {
    const double sd = std::sqrt(m2 / static_cast<double>(c.d));
    ladder.push_back(sample_initial(Gaussian{std::vector<double>(c.d, 0.0), std::vector<double>(c.d, sd)},
                                    c.N, c.seed));
  }
  const MomentReport rep = moment_report(ctx.model, ladder, ctx.grid, c.seed,
                                         c.moment_cap.value_or(INFINITY), ctx.eopts.simulation);
  for (std::size_t q = 0; q < rep.rows.size(); ++q) {
    const auto& r = rep.rows[q];
    out.rows.push_back(make_row(ctx, "moment", r.ratio, 0.0, c.seed,
                                "target=" + format_double(c.moment_ladder[q]) + ";initial=" +
                                    format_double(r.initial_moment) + ";sup=" +
                                    format_double(r.sup_moment) + ";sup_path=" +
                                    format_double(r.sup_path_moment) + ";" + ctx.base_params));
  }
  out.rows.push_back(make_row(ctx, "moment", rep.max_ratio, 0.0, c.seed, "fit=max_ratio"));
  out.values["max_ratio"] = rep.max_ratio;
}

// Exact D(t) when both laws are point masses under 1-d Brownian motion and
// the dictionary consists of sign functions.
std::optional<std::vector<double>> exact_tv(const ExperimentConfig& c, const std::vector<double>& ts) {
  if (c.scenario != "brownian" || c.d != 1) return std::nullopt;
  const InitialLaw a = parse_initial_law(c.law, 1), b = parse_initial_law(c.nu, 1);
  const auto* pa = std::get_if<PointMass>(&a);
  const auto* pb = std::get_if<PointMass>(&b);
  if (!pa || !pb) return std::nullopt;
  std::vector<double> thresholds;
  for (const auto& name : c.tv_dictionary) {
    if (name.rfind("sign", 0) != 0) return std::nullopt;
    const auto colon = name.find(':');
    thresholds.push_back(colon == std::string::npos ? 0.0 : to_double("tv_dictionary", name.substr(colon + 1)));
  }
  const double sigma = c.params.get("sigma", 1.0);
  std::vector<double> out;
  for (double t : ts) {
    double best = 0.0;
    for (double th : thresholds)
      best = std::max(best, std::abs(brownian_sign_expectation(pa->x0[0], th, sigma, t) -
                                     brownian_sign_expectation(pb->x0[0], th, sigma, t)));
    out.push_back(best);
  }
  return out;
}

void run_tv(const Context& ctx, TaskOut& out) {
  const auto& c = ctx.cfg;
  std::vector<Observable> dict;
  for (const auto& name : c.tv_dictionary) dict.push_back(make_observable(name, c.d));
  const EmpiricalMeasure nu0 = sample_initial(parse_initial_law(c.nu, c.d), c.N, c.seed);
  const TvReport rep = tv_gradient_scaling(ctx.model, ctx.mu0, nu0, c.t_grid, c.step(), dict,
                                           c.seed, ctx.eopts.simulation);
  for (const auto& r : rep.rows)
    out.rows.push_back(make_row(ctx, "tv_slope", r.lower_bound, r.std_error, c.seed,
                                "t=" + format_double(r.t) + ";best=" + c.tv_dictionary[r.best] +
                                    ";" + ctx.base_params));
  out.rows.push_back(make_row(ctx, "tv_slope", rep.slope, 0.0, c.seed, "fit=slope"));
  out.values["slope"] = rep.slope;
  if (const auto exact = exact_tv(c, c.t_grid)) {
    const double slope = fit_loglog_slope(c.t_grid, *exact);
    out.rows.push_back(make_row(ctx, "tv_slope", slope, 0.0, c.seed, "fit=exact_slope"));
    out.values["exact_slope"] = slope;
  }
}

void run_beta(const Context& ctx, TaskOut& out) {
  const auto& c = ctx.cfg;
  std::vector<BismutSchedule> schedules;
  for (const auto& s : c.schedules) schedules.push_back(make_schedule(s, c.t));
  const std::vector<std::uint64_t> seeds =
      c.seeds_for_ci.empty() ? std::vector<std::uint64_t>{c.seed} : c.seeds_for_ci;
  const BetaInvarianceReport rep =
      beta_invariance_check(ctx.model, ctx.mu0, make_perturbation(c.phi.front(), c.d),
                            make_observable(c.f.front(), c.d), ctx.grid, seeds, schedules, ctx.eopts,
                            c.sigmas);
  for (std::size_t q = 0; q < rep.estimates.size(); ++q)
    out.rows.push_back(make_row(ctx, "beta_check", rep.estimates[q].value,
                                rep.estimates[q].std_error, rep.estimates[q].seed,
                                "schedule=" + rep.schedules[q] + ";phi=" + c.phi.front() + ";f=" +
                                    c.f.front() + ";" + ctx.base_params));
  double worst = 0.0;
  for (const auto& p : rep.pairs)
    worst = std::max(worst, p.combined_stderr > 0.0 ? p.difference / p.combined_stderr
                                                    : (p.difference > 0.0 ? INFINITY : 0.0));
  out.values["worst"] = worst;
  out.values["passed"] = rep.passed ? 1.0 : 0.0;
}

using TaskFn = void (*)(const Context&, TaskOut&);

const std::vector<std::pair<std::string, TaskFn>> kTaskOrder = {
    {"intrinsic_estimate", run_intrinsic}, {"fd_oracle", run_fd}, {"quadrature", run_quadrature},
    {"dual_norm", run_dual_norm},          {"stability", run_stability}, {"moment", run_moment},
    {"tv_slope", run_tv},                  {"beta_check", run_beta},
};

ResultRow check_row(const ExperimentConfig& c, const std::string& name, const std::string& quantity,
                    double value, double se, bool passed, const std::string& params) {
  return {c.scenario, quantity, value, se, c.seed, passed ? "pass" : "fail", name, params};
}

ResultRow error_row(const ExperimentConfig& c, const std::string& name, const std::string& quantity,
                    const std::string& reason) {
  return {c.scenario, quantity, NAN, NAN, c.seed, "error", name, "reason=" + reason};
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json manifest;
    try {
      manifest = json::parse(text);
    } catch (const json::exception& e) {
      fail(ErrorCode::ConfigError, std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!manifest.contains("config") || !manifest["config"].is_string())
      fail(ErrorCode::ConfigError, "manifest has no config field");
    return parse_config(manifest["config"].get<std::string>());
  }
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::ConfigError, std::string("config parse error: ") + e.what());
  }
  return from_tree(tree);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void set_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.text = normalized_text(cfg);
}

void set_out_dir(ExperimentConfig& cfg, const std::string& dir) {
  cfg.out_dir = dir;
  cfg.text = normalized_text(cfg);
}

void validate_config(const ExperimentConfig& c) {
  auto bad = [](const std::string& msg) { fail(ErrorCode::ConfigError, msg); };
  if (c.N < 1) bad("N must be positive");
  if (c.n_steps < 1) bad("n_steps must be positive");
  if (!(c.t > 0.0)) bad("t must be positive");
  if (!(c.k >= 1.0)) bad("k must be >= 1");
  if (!(c.sigmas > 0.0)) bad("sigmas must be positive");
  if (c.dt < 0.0) bad("dt must be positive");
  ModelSpec model = make_scenario(c.scenario, c.d, c.params);
  if (c.t > model.horizon) bad("t exceeds the model horizon " + format_double(model.horizon));
  for (double t : c.t_grid)
    if (!(t > 0.0) || t > model.horizon) bad("t_grid entries must lie in (0, horizon]");
  for (const auto& q : c.quantities)
    if (!kQuantities.count(q)) bad("unknown quantity '" + q + "'");
  if (c.phi.empty() || c.f.empty()) bad("estimator needs at least one phi and one f");
  for (const auto& p : c.phi) make_perturbation(p, c.d);
  for (const auto& f : c.f) make_observable(f, c.d);
  make_schedule(c.schedule, c.t);
  for (const auto& s : c.schedules) make_schedule(s, c.t);
  const InitialLaw law = parse_initial_law(c.law, c.d);
  if (law_dimension(law) != c.d) bad("initial law dimension does not match d");
  if (c.out_dir.empty() || c.csv_name.empty() || c.manifest_name.empty())
    bad("output paths must be non-empty");

  if (c.classical) {
    if (!std::holds_alternative<PointMass>(law)) bad("classical estimator needs a point initial law");
    if (model.meanfield_drift.n != 0) bad("classical estimator needs a scenario without measure dependence");
  }
  if (wants(c, "fd_oracle")) {
    if (c.eps.empty()) bad("fd_oracle needs an eps ladder");
    for (double e : c.eps)
      if (!(e > 0.0)) bad("eps entries must be positive");
  }
  if (wants(c, "quadrature")) {
    if (!linear_gaussian_form(c.scenario, c.d, c.params) || c.d > 2)
      bad("quadrature needs a linear-Gaussian scenario with d <= 2");
    if (!std::holds_alternative<PointMass>(law) && !std::holds_alternative<Gaussian>(law))
      bad("quadrature needs a point or Gaussian initial law");
  }
  if (wants(c, "stability")) {
    if (c.shifts.empty()) bad("stability needs a shifts ladder");
    for (double s : c.shifts)
      if (!(s > 0.0)) bad("shifts must be positive");
    if (c.d > 1 && c.N > kDefaultAssignmentCap) bad("stability with d > 1 needs N <= 4096");
  }
  if (wants(c, "moment")) {
    if (c.moment_ladder.empty()) bad("moment needs a moment_ladder");
    for (double m : c.moment_ladder)
      if (!(m > 0.0)) bad("moment_ladder entries must be positive");
  }
  if (wants(c, "tv_slope")) {
    if (c.nu.empty()) bad("tv_slope needs [initial] nu");
    if (law_dimension(parse_initial_law(c.nu, c.d)) != c.d) bad("nu dimension does not match d");
    if (c.t_grid.size() < 2) bad("tv_slope needs at least two t_grid entries");
    if (c.tv_dictionary.empty()) bad("tv_slope needs a tv_dictionary");
    for (const auto& name : c.tv_dictionary) {
      const Observable f = make_observable(name, c.d);
      if (!f.bounded || f.bound > 1.0) bad("tv_dictionary entries must satisfy |f| <= 1");
    }
  }
  if (wants(c, "beta_check") && c.schedules.size() < 2) bad("beta_check needs >= 2 schedules");
  if (c.check_intrinsic_vs_fd && !(wants(c, "intrinsic_estimate") && wants(c, "fd_oracle")))
    bad("intrinsic_vs_fd needs intrinsic_estimate and fd_oracle");
  if (c.check_intrinsic_vs_quadrature && !(wants(c, "intrinsic_estimate") && wants(c, "quadrature")))
    bad("intrinsic_vs_quadrature needs intrinsic_estimate and quadrature");
  if (c.check_beta_invariance && !wants(c, "beta_check")) bad("beta_invariance needs beta_check");
  if (c.dual_norm_slope && (!wants(c, "dual_norm") || c.t_grid.size() < 2))
    bad("dual_norm_slope needs dual_norm and >= 2 t_grid entries");
  if ((c.tv_slope || c.tv_slope_tolerance) && !wants(c, "tv_slope"))
    bad("tv slope checks need tv_slope");
  if (c.stability_spread && !wants(c, "stability")) bad("stability_spread needs stability");
  if (c.moment_cap && !wants(c, "moment")) bad("moment_cap needs moment");
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::string out = "scenario,quantity,value,stderr,seed,status,check,params\n";
  for (const auto& r : rows) {
    out += csv_field(r.scenario) + ',' + csv_field(r.quantity) + ',' + format_double(r.value) +
           ',' + format_double(r.std_error) + ',' + std::to_string(r.seed) + ',' + r.status + ',' +
           csv_field(r.check) + ',' + csv_field(r.params) + '\n';
  }
  return out;
}

std::string error_record(ErrorCode code, int exit_code, const std::string& message) {
  return json{{"error", error_code_name(code)},
              {"code", static_cast<int>(code)},
              {"exit_code", exit_code},
              {"message", message}}
      .dump();
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto started = std::chrono::steady_clock::now();
  RunResult result;
  std::optional<Context> ctx;
  try {
    validate_config(cfg);
    EstimatorOptions eopts;
    eopts.threads = cfg.threads;
    eopts.simulation.threads = cfg.threads;
    ModelSpec model = make_scenario(cfg.scenario, cfg.d, cfg.params);
    model.k = cfg.k;
    ctx.emplace(Context{cfg, std::move(model),
                        sample_initial(parse_initial_law(cfg.law, cfg.d), cfg.N, cfg.seed),
                        TimeGrid{cfg.t, cfg.n_steps}, eopts,
                        "N=" + std::to_string(cfg.N) + ";t=" + format_double(cfg.t) +
                            ";dt=" + format_double(cfg.t / static_cast<double>(cfg.n_steps))});
  } catch (const Error& e) {
    result.exit_code = 2;
    result.error_json = error_record(e.code(), 2, e.what());
    return result;
  }

  std::vector<std::pair<std::string, TaskFn>> tasks;
  for (const auto& entry : kTaskOrder)
    if (wants(cfg, entry.first)) tasks.push_back(entry);
  std::vector<TaskOut> outs(tasks.size());
  auto run_one = [&](std::size_t q) {
    try {
      tasks[q].second(*ctx, outs[q]);
    } catch (const Error& e) {
      outs[q].rows.clear();
      outs[q].failure = e;
    } catch (const std::exception& e) {
      outs[q].rows.clear();
      outs[q].failure = Error(ErrorCode::Internal, e.what());
    }
  };
  const int workers = std::clamp(opts.parallel, 1, static_cast<int>(std::max<std::size_t>(tasks.size(), 1)));
  if (workers == 1) {
    for (std::size_t q = 0; q < tasks.size(); ++q) run_one(q);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t q; (q = next.fetch_add(1)) < tasks.size();) run_one(q);
      });
  }

  // Merge in declaration order, then evaluate checks.
  std::map<std::string, const TaskOut*> by_name;
  std::vector<std::string> errors;
  bool numeric_failure = false, other_failure = false;
  for (std::size_t q = 0; q < tasks.size(); ++q) {
    const TaskOut& o = outs[q];
    if (o.failure) {
      const bool numeric = is_numerical_failure(o.failure->code());
      numeric_failure = numeric_failure || numeric;
      other_failure = other_failure || !numeric;
      result.rows.push_back({cfg.scenario, tasks[q].first, NAN, NAN, cfg.seed, "failed", "",
                             std::string("error=") + error_code_name(o.failure->code())});
      errors.push_back(error_record(o.failure->code(), numeric ? 3 : 2, o.failure->what()));
      continue;
    }
    by_name[tasks[q].first] = &o;
    result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
  }
  if (other_failure) {
    result.exit_code = 2;
    result.rows.clear();
    result.error_json = errors.front();
    return result;
  }

  bool all_pass = true;
  auto add_check = [&](ResultRow row) {
    all_pass = all_pass && row.status == "pass";
    result.rows.push_back(std::move(row));
  };
  auto get = [&](const std::string& q) -> const TaskOut* {
    const auto it = by_name.find(q);
    return it == by_name.end() ? nullptr : it->second;
  };
  const double dt = cfg.t / static_cast<double>(cfg.n_steps);

  if (cfg.check_intrinsic_vs_fd) {
    const TaskOut *a = get("intrinsic_estimate"), *b = get("fd_oracle");
    for (const auto& phi : cfg.phi)
      for (const auto& f : cfg.f) {
        const std::string p = "phi=" + phi + ";f=" + f;
        if (!a || !b) {
          add_check(error_row(cfg, "intrinsic_vs_fd", "intrinsic_estimate", "missing input"));
          continue;
        }
        const Estimate &x = a->stats.at(key(phi, f)), &y = b->stats.at(key(phi, f));
        const double diff = std::abs(x.value - y.value), se = std::hypot(x.std_error, y.std_error);
        add_check(check_row(cfg, "intrinsic_vs_fd", "intrinsic_estimate", diff, se,
                            diff <= cfg.sigmas * se, p + ";sigmas=" + format_double(cfg.sigmas)));
      }
  }
  if (cfg.check_intrinsic_vs_quadrature) {
    const TaskOut *a = get("intrinsic_estimate"), *b = get("quadrature");
    for (const auto& phi : cfg.phi)
      for (const auto& f : cfg.f) {
        if (!a || !b) {
          add_check(error_row(cfg, "intrinsic_vs_quadrature", "intrinsic_estimate", "missing input"));
          continue;
        }
        const Estimate& x = a->stats.at(key(phi, f));
        const double diff = std::abs(x.value - b->values.at(key(phi, f)));
        add_check(check_row(cfg, "intrinsic_vs_quadrature", "intrinsic_estimate", diff, x.std_error,
                            diff <= cfg.sigmas * x.std_error + 2.0 * dt,
                            "phi=" + phi + ";f=" + f + ";sigmas=" + format_double(cfg.sigmas) +
                                ";bias_allowance=" + format_double(2.0 * dt)));
      }
  }
  if (cfg.check_beta_invariance) {
    if (const TaskOut* o = get("beta_check"))
      add_check(check_row(cfg, "beta_invariance", "beta_check", o->values.at("worst"), 0.0,
                          o->values.at("passed") == 1.0, "sigmas=" + format_double(cfg.sigmas)));
    else
      add_check(error_row(cfg, "beta_invariance", "beta_check", "missing input"));
  }
  if (cfg.dual_norm_slope) {
    const TaskOut* o = get("dual_norm");
    const auto [lo, hi] = *cfg.dual_norm_slope;
    for (const auto& f : cfg.f) {
      if (!o || !o->values.count(key("slope", f))) {
        add_check(error_row(cfg, "dual_norm_slope", "dual_norm", "missing input"));
        continue;
      }
      const double s = o->values.at(key("slope", f));
      add_check(check_row(cfg, "dual_norm_slope", "dual_norm", s, 0.0, s >= lo && s <= hi,
                          "f=" + f + ";range=" + format_double(lo) + ":" + format_double(hi)));
    }
  }
  if (cfg.tv_slope || cfg.tv_slope_tolerance) {
    const TaskOut* o = get("tv_slope");
    if (!o) {
      add_check(error_row(cfg, "tv_slope", "tv_slope", "missing input"));
    } else {
      const double s = o->values.at("slope");
      if (cfg.tv_slope) {
        const auto [lo, hi] = *cfg.tv_slope;
        add_check(check_row(cfg, "tv_slope_range", "tv_slope", s, 0.0, s >= lo && s <= hi,
                            "range=" + format_double(lo) + ":" + format_double(hi)));
      }
      if (cfg.tv_slope_tolerance) {
        if (!o->values.count("exact_slope")) {
          add_check(error_row(cfg, "tv_slope_exact", "tv_slope", "no exact reference for this setup"));
        } else {
          const double diff = std::abs(s - o->values.at("exact_slope"));
          add_check(check_row(cfg, "tv_slope_exact", "tv_slope", diff, 0.0,
                              diff <= *cfg.tv_slope_tolerance,
                              "tolerance=" + format_double(*cfg.tv_slope_tolerance)));
        }
      }
    }
  }
  if (cfg.stability_spread) {
    if (const TaskOut* o = get("stability")) {
      const double s = o->values.at("spread");
      add_check(check_row(cfg, "stability_spread", "stability", s, 0.0, s < *cfg.stability_spread,
                          "limit=" + format_double(*cfg.stability_spread)));
    } else {
      add_check(error_row(cfg, "stability_spread", "stability", "missing input"));
    }
  }
  if (cfg.moment_cap) {
    if (const TaskOut* o = get("moment")) {
      const double r = o->values.at("max_ratio");
      add_check(check_row(cfg, "moment_cap", "moment", r, 0.0, r <= *cfg.moment_cap,
                          "cap=" + format_double(*cfg.moment_cap)));
    } else {
      add_check(error_row(cfg, "moment_cap", "moment", "missing input"));
    }
  }

  result.exit_code = numeric_failure ? 3 : (all_pass ? 0 : 1);
  if (!errors.empty()) result.error_json = errors.front();
  else if (result.exit_code == 1)
    result.error_json = error_record(ErrorCode::Ok, 1, "one or more checks failed");
  result.csv = rows_to_csv(result.rows);

  std::size_t passed = 0, failed = 0, errored = 0;
  for (const auto& r : result.rows) {
    passed += r.status == "pass";
    failed += r.status == "fail";
    errored += r.status == "error";
  }
  json err_list = json::array();
  for (const auto& e : errors) err_list.push_back(json::parse(e));
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.manifest = json{{"version", kLibraryVersion},
                         {"scenario", cfg.scenario},
                         {"seed", cfg.seed},
                         {"config", cfg.text},
                         {"csv", cfg.csv_name},
                         {"rows", result.rows.size()},
                         {"checks", {{"pass", passed}, {"fail", failed}, {"error", errored}}},
                         {"exit_code", result.exit_code},
                         {"errors", err_list},
                         {"wall_clock_seconds", wall}}
                        .dump(2) +
                    "\n";

  if (opts.write_files) {
    try {
      const std::filesystem::path dir(cfg.out_dir);
      std::filesystem::create_directories(dir);
      std::ofstream(dir / cfg.csv_name, std::ios::binary) << result.csv;
      std::ofstream(dir / cfg.manifest_name, std::ios::binary) << result.manifest;
      if (!std::filesystem::exists(dir / cfg.csv_name))
        fail(ErrorCode::Io, "cannot write results to '" + dir.string() + "'");
    } catch (const std::exception& e) {
      result.exit_code = 2;
      result.error_json = error_record(ErrorCode::Io, 2, e.what());
    }
  }
  return result;
}

std::string scenario_table() {
  std::ostringstream o;
  o << "scenario        parameters                               properties\n";
  for (const auto& info : scenario_registry()) {
    std::string params;
    for (const auto& [k, v] : info.parameters) params += (params.empty() ? "" : " ") + k + "=" + format_double(v);
    std::string props;
    for (const auto& p : info.properties) props += (props.empty() ? "" : ",") + p;
    std::string name = info.name;
    name.resize(std::max<std::size_t>(name.size(), 16), ' ');
    params.resize(std::max<std::size_t>(params.size() + 2, 41), ' ');
    o << name << params << props << "\n";
    o << "                " << info.description << "\n";
  }
  return o.str();
}

}  // namespace mvb
