#include "mvb/scenarios.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>

#include "mvb/error.hpp"

namespace mvb {

double ScenarioParams::get(const std::string& key, double fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

namespace {

// One coefficient family covers every built-in scenario:
//   b(x, mu) = gamma x / (|x|^{1/2} + delta) - a x + c + kappa g(E X - x)
//   sigma(x) = s diag(1 + amp sin x_r)
// with g(u) = u (linear interaction) or sin u.
struct Family {
  double a = 0.0;
  double kappa = 0.0;
  bool sin_interaction = false;
  double drift_const = 0.0;
  double sigma = 1.0;
  double sigma_amp = 0.0;
  double gamma = 0.0;
  double delta = 1e-3;
};

const std::vector<ScenarioInfo>& registry_storage() {
  static const std::vector<ScenarioInfo> reg = {
      {"brownian",
       "dX = sigma dW",
       {{"sigma", 1.0}},
       {"classical-bismut-gradient", "intrinsic-bismut", "tv-gradient", "dual-norm-bound"}},
      {"ou",
       "dX = -a X dt + sigma dW",
       {{"a", 1.0}, {"sigma", 1.0}},
       {"classical-bismut-gradient", "moment-bound"}},
      {"meanfield_ou",
       "dX = (-a X + kappa (E X - X)) dt + sigma dW",
       {{"a", 1.0}, {"kappa", 1.0}, {"sigma", 1.0}},
       {"intrinsic-bismut", "beta-invariance", "wasserstein-lipschitz", "moment-bound"}},
      {"meanfield_trig",
       "dX = (-a X + kappa sin(E X - X)) dt + sigma (1 + amp sin X) dW",
       {{"a", 1.0}, {"kappa", 1.0}, {"sigma", 1.0}, {"sigma_amp", 0.5}},
       {"tangent-estimates", "intrinsic-bismut"}},
      {"singular_demo",
       "dX = (gamma X / (|X|^{1/2} + delta) - a X + kappa (E X - X)) dt + sigma dW, heuristic",
       {{"gamma", 1.0}, {"delta", 1e-3}, {"a", 1.0}, {"kappa", 1.0}, {"sigma", 1.0}},
       {"intrinsic-bismut"}},
      {"custom",
       "dX = (gamma X / (|X|^{1/2} + delta) - a X + c + kappa g(E X - X)) dt + sigma (1 + amp sin X) dW, "
       "g = id or sin (interaction = 0 or 1)",
       {{"a", 0.0},
        {"kappa", 0.0},
        {"interaction", 0.0},
        {"drift_const", 0.0},
        {"sigma", 1.0},
        {"sigma_amp", 0.0},
        {"gamma", 0.0},
        {"delta", 1e-3}},
       {"intrinsic-bismut", "moment-bound"}},
  };
  return reg;
}

Family resolve_family(const ScenarioInfo& info, const ScenarioParams& params) {
  std::set<std::string> known;
  for (const auto& [key, _] : info.parameters) known.insert(key);
  for (const auto& [key, _] : params.values)
    if (!known.count(key))
      fail(ErrorCode::ConfigError, "scenario '" + info.name + "' has no parameter '" + key + "'");
  auto get = [&](const std::string& key) {
    for (const auto& [name, def] : info.parameters)
      if (name == key) return params.get(key, def);
    return 0.0;
  };
  Family fam;
  fam.a = get("a");
  fam.kappa = get("kappa");
  fam.sigma = get("sigma");
  fam.sigma_amp = get("sigma_amp");
  fam.drift_const = get("drift_const");
  fam.gamma = get("gamma");
  fam.delta = info.name == "singular_demo" || info.name == "custom" ? get("delta") : 1e-3;
  fam.sin_interaction = info.name == "meanfield_trig" || get("interaction") != 0.0;
  if (!(fam.sigma > 0.0)) fail(ErrorCode::ConfigError, "sigma must be positive");
  if (!(std::abs(fam.sigma_amp) < 1.0))
    fail(ErrorCode::ConfigError, "sigma_amp must satisfy |amp| < 1 for ellipticity");
  if (fam.gamma != 0.0 && !(fam.delta > 0.0))
    fail(ErrorCode::ConfigError, "delta must be positive");
  for (double v : {fam.a, fam.kappa, fam.drift_const, fam.gamma})
    if (!std::isfinite(v)) fail(ErrorCode::ConfigError, "scenario parameter is not finite");
  return fam;
}

ModelSpec build(const std::string& name, std::size_t d, const Family& fam) {
  ModelSpec model;
  model.name = name;
  model.d = d;
  model.m = d;
  model.horizon = 10.0;

  const double a = fam.a, kappa = fam.kappa, c = fam.drift_const;
  const bool sin_g = fam.sin_interaction;
  auto& drift = model.meanfield_drift;
  drift.n = kappa != 0.0 ? d : 0;
  drift.F = [=](double, ConstSpan x, ConstSpan z, MutSpan out) {
    for (std::size_t r = 0; r < d; ++r) {
      double v = -a * x[r] + c;
      if (kappa != 0.0) v += kappa * (sin_g ? std::sin(z[r] - x[r]) : z[r] - x[r]);
      out[r] = v;
    }
  };
  drift.grad_x_F = [=](double, ConstSpan x, ConstSpan z, MutSpan out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t r = 0; r < d; ++r) {
      double v = -a;
      if (kappa != 0.0) v -= kappa * (sin_g ? std::cos(z[r] - x[r]) : 1.0);
      out[r * d + r] = v;
    }
  };
  drift.grad_z_F = [=](double, ConstSpan x, ConstSpan z, MutSpan out) {
    std::fill(out.begin(), out.end(), 0.0);
    if (kappa == 0.0) return;
    for (std::size_t r = 0; r < d; ++r) out[r * d + r] = kappa * (sin_g ? std::cos(z[r] - x[r]) : 1.0);
  };
  for (std::size_t l = 0; l < drift.n; ++l) {
    drift.h.emplace_back([l](ConstSpan y) { return y[l]; });
    drift.grad_h.emplace_back([l](ConstSpan, MutSpan g) {
      std::fill(g.begin(), g.end(), 0.0);
      g[l] = 1.0;
    });
  }

  const double s = fam.sigma, amp = fam.sigma_amp;
  model.diffusion.d = d;
  model.diffusion.m = d;
  model.diffusion.state_independent = amp == 0.0;
  model.diffusion.sigma = [=](double, ConstSpan x, MutSpan out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t r = 0; r < d; ++r) out[r * d + r] = s * (1.0 + amp * std::sin(x[r]));
  };
  if (amp != 0.0) {
    model.diffusion.grad_sigma = [=](double, ConstSpan x, MutSpan out) {
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t r = 0; r < d; ++r) out[(r * d + r) * d + r] = s * amp * std::cos(x[r]);
    };
  }

  if (fam.gamma != 0.0) {
    const double gamma = fam.gamma, delta = fam.delta;
    SingularDrift sd;
    sd.regularization_scale = delta;
    // Locally bounded, so any finite (p0, q0) is admissible; the tag is informational.
    sd.p0 = 2.0 * static_cast<double>(d + 2);
    sd.q0 = 2.0 * static_cast<double>(d + 2);
    sd.eval = [=](double, ConstSpan x, MutSpan out) {
      const double scale = gamma / (std::sqrt(std::sqrt(norm2(x))) + delta);
      for (std::size_t r = 0; r < d; ++r) out[r] = scale * x[r];
    };
    model.singular_drift = std::move(sd);
  }
  model.validate();
  return model;
}

double parse_number(std::string_view text, const std::string& context) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    fail(ErrorCode::ConfigError, "cannot parse number '" + std::string(text) + "' in " + context);
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<double> parse_vector(std::string_view text, std::size_t d, const std::string& context) {
  std::vector<double> v;
  for (auto part : split(text, ',')) v.push_back(parse_number(part, context));
  if (v.size() == 1 && d > 1) v.assign(d, v[0]);
  if (v.size() != d)
    fail(ErrorCode::ConfigError, context + " needs " + std::to_string(d) + " values");
  return v;
}

// "key=v1,v2;key2=..." -> map
std::map<std::string, std::string_view> parse_fields(std::string_view text, const std::string& context) {
  std::map<std::string, std::string_view> out;
  for (auto item : split(text, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::ConfigError, context + ": expected key=value");
    out[std::string(trim(item.substr(0, eq)))] = trim(item.substr(eq + 1));
  }
  return out;
}

std::pair<std::string, std::string_view> head_and_arg(std::string_view spec) {
  spec = trim(spec);
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) return {std::string(spec), {}};
  return {std::string(trim(spec.substr(0, colon))), trim(spec.substr(colon + 1))};
}

std::size_t parse_index(std::string_view arg, std::size_t d, const std::string& context) {
  const double v = parse_number(arg, context);
  if (v < 0 || v != std::floor(v) || v >= static_cast<double>(d))
    fail(ErrorCode::ConfigError, context + ": coordinate index out of range");
  return static_cast<std::size_t>(v);
}

double sum_coords(ConstSpan x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

}  // namespace

const std::vector<ScenarioInfo>& scenario_registry() { return registry_storage(); }

const ScenarioInfo& scenario_info(const std::string& name) {
  for (const auto& info : registry_storage())
    if (info.name == name) return info;
  fail(ErrorCode::UnknownFamily, "unknown scenario '" + name + "'");
}

ModelSpec make_scenario(const std::string& name, std::size_t d, const ScenarioParams& params) {
  const ScenarioInfo& info = scenario_info(name);
  if (d < 1 || d > static_cast<std::size_t>(kMaxDim))
    fail(ErrorCode::ConfigError, "dimension must be between 1 and " + std::to_string(kMaxDim));
  return build(name, d, resolve_family(info, params));
}

std::optional<LinearGaussianModel> linear_gaussian_form(const std::string& name, std::size_t d,
                                                        const ScenarioParams& params) {
  const Family fam = resolve_family(scenario_info(name), params);
  if (fam.gamma != 0.0 || fam.sigma_amp != 0.0 || fam.drift_const != 0.0) return std::nullopt;
  if (fam.sin_interaction && fam.kappa != 0.0) return std::nullopt;
  return LinearGaussianModel{d, fam.a, fam.kappa, fam.sigma};
}

Observable make_observable(const std::string& spec, std::size_t d) {
  const auto [head, arg] = head_and_arg(spec);
  const std::string ctx = "observable '" + spec + "'";
  Observable f;
  f.name = std::string(trim(spec));
  if (head == "linear") {
    const std::size_t j = arg.empty() ? 0 : parse_index(arg, d, ctx);
    f.f = [j](ConstSpan x) { return x[j]; };
    f.grad_f = [j](ConstSpan, MutSpan g) {
      std::fill(g.begin(), g.end(), 0.0);
      g[j] = 1.0;
    };
  } else if (head == "sum") {
    f.f = sum_coords;
    f.grad_f = [](ConstSpan, MutSpan g) { std::fill(g.begin(), g.end(), 1.0); };
  } else if (head == "square") {
    f.f = [](ConstSpan x) { return norm2(x); };
    f.grad_f = [](ConstSpan x, MutSpan g) {
      for (std::size_t r = 0; r < x.size(); ++r) g[r] = 2.0 * x[r];
    };
  } else if (head == "sin" || head == "cos") {
    const bool s = head == "sin";
    f.bounded = true;
    f.bound = 1.0;
    f.f = [s](ConstSpan x) { return s ? std::sin(sum_coords(x)) : std::cos(sum_coords(x)); };
    f.grad_f = [s](ConstSpan x, MutSpan g) {
      const double u = sum_coords(x);
      std::fill(g.begin(), g.end(), s ? std::cos(u) : -std::sin(u));
    };
  } else if (head == "tanh") {
    f.bounded = true;
    f.bound = 1.0;
    f.f = [](ConstSpan x) { return std::tanh(x[0]); };
    f.grad_f = [](ConstSpan x, MutSpan g) {
      std::fill(g.begin(), g.end(), 0.0);
      const double th = std::tanh(x[0]);
      g[0] = 1.0 - th * th;
    };
  } else if (head == "sign") {
    const double c = arg.empty() ? 0.0 : parse_number(arg, ctx);
    f.bounded = true;
    f.bound = 1.0;
    f.f = [c](ConstSpan x) { return x[0] > c ? 1.0 : (x[0] < c ? -1.0 : 0.0); };
  } else if (head == "const") {
    const double c = arg.empty() ? 1.0 : parse_number(arg, ctx);
    f.bounded = true;
    f.bound = std::abs(c);
    f.f = [c](ConstSpan) { return c; };
    f.grad_f = [](ConstSpan, MutSpan g) { std::fill(g.begin(), g.end(), 0.0); };
  } else {
    fail(ErrorCode::UnknownFamily, "unknown " + ctx);
  }
  return f;
}

PerturbationField make_perturbation(const std::string& spec, std::size_t d) {
  const auto [head, arg] = head_and_arg(spec);
  const std::string ctx = "perturbation '" + spec + "'";
  PerturbationField phi;
  phi.name = std::string(trim(spec));
  if (head == "id") {
    phi.phi = [](ConstSpan x, MutSpan v) { std::copy(x.begin(), x.end(), v.begin()); };
  } else if (head == "const") {
    const double c = arg.empty() ? 1.0 : parse_number(arg, ctx);
    phi.phi = [c](ConstSpan, MutSpan v) { std::fill(v.begin(), v.end(), c); };
  } else if (head == "coord" || head == "neg_coord") {
    const std::size_t j = arg.empty() ? 0 : parse_index(arg, d, ctx);
    const double sgn = head == "coord" ? 1.0 : -1.0;
    phi.phi = [j, sgn](ConstSpan, MutSpan v) {
      std::fill(v.begin(), v.end(), 0.0);
      v[j] = sgn;
    };
  } else if (head == "sin") {
    phi.phi = [](ConstSpan x, MutSpan v) {
      for (std::size_t r = 0; r < x.size(); ++r) v[r] = std::sin(x[r]);
    };
  } else {
    fail(ErrorCode::UnknownFamily, "unknown " + ctx);
  }
  return phi;
}

BismutSchedule make_schedule(const std::string& name, double t) {
  if (name == "linear") return BismutSchedule::linear(t);
  if (name == "quadratic") return BismutSchedule::quadratic(t);
  if (name == "sine") return BismutSchedule::sine(t);
  fail(ErrorCode::UnknownFamily, "unknown schedule '" + name + "'");
}

InitialLaw parse_initial_law(const std::string& spec, std::size_t d) {
  const auto [head, arg] = head_and_arg(spec);
  const std::string ctx = "initial law '" + spec + "'";
  if (head == "point") return PointMass{parse_vector(arg, d, ctx)};
  if (head == "gaussian") {
    auto fields = parse_fields(arg, ctx);
    Gaussian g;
    g.mean = fields.count("mean") ? parse_vector(fields["mean"], d, ctx) : std::vector<double>(d, 0.0);
    g.stddev = fields.count("std") ? parse_vector(fields["std"], d, ctx) : std::vector<double>(d, 1.0);
    for (double s : g.stddev)
      if (!(s >= 0.0)) fail(ErrorCode::ConfigError, ctx + ": std must be >= 0");
    return g;
  }
  if (head == "uniform") {
    auto fields = parse_fields(arg, ctx);
    if (!fields.count("lower") || !fields.count("upper"))
      fail(ErrorCode::ConfigError, ctx + " needs lower and upper");
    UniformBox u{parse_vector(fields["lower"], d, ctx), parse_vector(fields["upper"], d, ctx)};
    for (std::size_t r = 0; r < d; ++r)
      if (!(u.lower[r] <= u.upper[r])) fail(ErrorCode::ConfigError, ctx + ": lower > upper");
    return u;
  }
  if (head == "list") {
    PointList pl;
    for (auto row : split(arg, '|')) pl.points.push_back(parse_vector(row, d, ctx));
    return pl;
  }
  if (head == "mixture") {
    auto mix = std::make_shared<Mixture>();
    const std::string text(arg);
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t pos = text.find(" + ", start);
      const std::string part = text.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
      const auto star = part.find('*');
      if (star == std::string::npos) fail(ErrorCode::ConfigError, ctx + ": component needs weight*law");
      const double w = parse_number(std::string_view(part).substr(0, star), ctx);
      if (!(w > 0.0)) fail(ErrorCode::ConfigError, ctx + ": weights must be positive");
      mix->weights.push_back(w);
      const std::string comp(trim(std::string_view(part).substr(star + 1)));
      if (head_and_arg(comp).first == "mixture")
        fail(ErrorCode::ConfigError, ctx + ": nested mixtures are not supported");
      mix->components.push_back(parse_initial_law(comp, d));
      if (pos == std::string::npos) break;
      start = pos + 3;
    }
    return std::shared_ptr<const Mixture>(std::move(mix));
  }
  fail(ErrorCode::UnknownFamily, "unknown " + ctx);
}

double gaussian_quadrature_reference(const std::string& scenario, std::size_t d,
                                     const ScenarioParams& params, const InitialLaw& law,
                                     const Observable& f, double t, const PerturbationField& phi) {
  const auto lg = linear_gaussian_form(scenario, d, params);
  if (!lg) fail(ErrorCode::UnsupportedScenario, "scenario '" + scenario + "' is not linear-Gaussian");
  GaussianLaw g;
  if (const auto* p = std::get_if<PointMass>(&law)) {
    g.mean = p->x0;
    g.stddev.assign(d, 0.0);
  } else if (const auto* n = std::get_if<Gaussian>(&law)) {
    g.mean = n->mean;
    g.stddev = n->stddev;
  } else {
    fail(ErrorCode::UnsupportedScenario, "quadrature reference needs a point or Gaussian initial law");
  }
  return gaussian_quadrature_reference(*lg, g, f, t, phi);
}

}  // namespace mvb
