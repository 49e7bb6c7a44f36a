#include "mvb/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mvb/error.hpp"
#include "mvb/measure.hpp"

namespace mvb {

void ModelSpec::validate() const {
  if (d < 1 || m < 1) fail(ErrorCode::InvalidArgument, "model dimensions must be positive");
  if (d > static_cast<std::size_t>(kMaxDim) || m > static_cast<std::size_t>(kMaxDim))
    fail(ErrorCode::InvalidArgument, "model dimension exceeds the supported maximum of " +
                                         std::to_string(kMaxDim));
  if (!(horizon > 0.0)) fail(ErrorCode::InvalidArgument, "horizon must be positive");
  if (!(k >= 1.0)) fail(ErrorCode::InvalidArgument, "exponent k must be >= 1");
  if (diffusion.d != d || diffusion.m != m)
    fail(ErrorCode::InvalidArgument, "diffusion shape does not match model dimensions");
  if (!diffusion.sigma) fail(ErrorCode::InvalidArgument, "diffusion has no sigma");
  const auto& drift = meanfield_drift;
  if (!drift.F || !drift.grad_x_F || !drift.grad_z_F)
    fail(ErrorCode::InvalidArgument, "cylindrical drift is missing F or its gradients");
  if (drift.h.size() != drift.n || drift.grad_h.size() != drift.n)
    fail(ErrorCode::InvalidArgument, "cylindrical drift needs exactly n moment functionals");
  if (singular_drift) {
    if (!singular_drift->eval) fail(ErrorCode::InvalidArgument, "singular drift has no eval");
    if (!(singular_drift->regularization_scale > 0.0))
      fail(ErrorCode::InvalidArgument, "singular drift regularization scale must be positive");
  }
}

PerturbationField PerturbationField::scaled(double alpha) const {
  PerturbationField out;
  out.name = name + "*" + format_double(alpha);
  out.phi = [inner = phi, alpha](ConstSpan x, MutSpan v) {
    inner(x, v);
    for (double& c : v) c *= alpha;
  };
  return out;
}

BismutSchedule BismutSchedule::linear(double t) {
  return {"linear", t, [t](double s) { return s / t; }, [t](double) { return 1.0 / t; }};
}

BismutSchedule BismutSchedule::quadratic(double t) {
  return {"quadratic", t, [t](double s) { return (s / t) * (s / t); },
          [t](double s) { return 2.0 * s / (t * t); }};
}

BismutSchedule BismutSchedule::sine(double t) {
  const double w = std::numbers::pi / (2.0 * t);
  return {"sine", t,
          [t, w](double s) { return s == t ? 1.0 : std::sin(w * s); },
          [w](double s) { return w * std::cos(w * s); }};
}

void BismutSchedule::validate() const {
  if (!(t > 0.0)) fail(ErrorCode::InvalidArgument, "schedule horizon must be positive");
  if (!beta || !beta_prime) fail(ErrorCode::InvalidArgument, "schedule callbacks missing");
  constexpr double tol = 1e-14;
  if (std::abs(beta(0.0)) > tol || std::abs(beta(t) - 1.0) > tol)
    fail(ErrorCode::InvalidArgument, "schedule '" + name + "' must satisfy beta(0)=0, beta(t)=1");
  const double h = 1e-5 * t;
  for (int i = 1; i < 10; ++i) {
    const double s = t * i / 10.0;
    const double fd = (beta(s + h) - beta(s - h)) / (2.0 * h);
    if (std::abs(fd - beta_prime(s)) > 1e-6 * (1.0 + std::abs(fd)) / t)
      fail(ErrorCode::InvalidArgument, "schedule '" + name + "' derivative is inconsistent");
  }
}

Exponent Exponent::dual() const {
  if (sup) return finite(1.0);
  if (value == 1.0) return sup_norm();
  return finite(value / (value - 1.0));
}

SmallMat zeta(const Diffusion& diffusion, double t, ConstSpan x, double condition_cap) {
  const auto d = static_cast<Eigen::Index>(diffusion.d);
  const auto m = static_cast<Eigen::Index>(diffusion.m);
  double buf[kMaxDim * kMaxDim];
  diffusion.sigma(t, x, MutSpan(buf, diffusion.d * diffusion.m));
  const SmallMat sigma = as_matrix(ConstSpan(buf, diffusion.d * diffusion.m), diffusion.d,
                                   diffusion.m);
  const SmallMat a = sigma * sigma.transpose();
  Eigen::SelfAdjointEigenSolver<SmallMat> eig(a, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(d - 1);
  if (!(lo > 0.0) || !(hi / lo <= condition_cap) || !std::isfinite(hi)) {
    std::ostringstream msg;
    msg << "sigma sigma^T is singular or ill-conditioned (eigenvalues " << lo << ", " << hi
        << ")";
    fail(ErrorCode::SingularDiffusion, msg.str());
  }
  // zeta^T = a^{-1} sigma since a is symmetric.
  const SmallMat zt = a.llt().solve(sigma);
  SmallMat out = zt.transpose();
  (void)m;
  return out;
}

std::vector<double> drift_moments(const CylindricalDrift& drift, const EmpiricalMeasure& mu) {
  return moments(mu, drift.h);
}

SmallMat lions_derivative(const CylindricalDrift& drift, double t, ConstSpan x,
                          const EmpiricalMeasure& mu, ConstSpan y) {
  const std::size_t d = x.size();
  const std::size_t n = drift.n;
  SmallMat out = SmallMat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  if (n == 0) return out;
  const std::vector<double> z = drift_moments(drift, mu);
  std::vector<double> gz(d * n);
  drift.grad_z_F(t, x, z, gz);
  std::vector<double> gh(d);
  for (std::size_t i = 0; i < n; ++i) {
    drift.grad_h[i](y, gh);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += gz[a * n + i] * gh[b];
  }
  return out;
}

void drift_with_moments(const ModelSpec& model, double t, ConstSpan x, ConstSpan moments,
                        MutSpan out) {
  model.meanfield_drift.F(t, x, moments, out);
  if (model.singular_drift) {
    double b0[kMaxDim];
    model.singular_drift->eval(t, x, MutSpan(b0, model.d));
    for (std::size_t i = 0; i < model.d; ++i) out[i] += b0[i];
  }
}

std::vector<double> drift_eval(const ModelSpec& model, double t, ConstSpan x,
                               const EmpiricalMeasure& mu) {
  const std::vector<double> z = drift_moments(model.meanfield_drift, mu);
  std::vector<double> out(model.d);
  drift_with_moments(model, t, x, z, out);
  for (double v : out)
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "drift evaluation is not finite");
  return out;
}

EllipticityReport probe_ellipticity(const Diffusion& diffusion,
                                    std::span<const std::vector<double>> probes,
                                    EllipticityBounds bounds, double t) {
  if (probes.empty()) fail(ErrorCode::InvalidArgument, "ellipticity check needs probe points");
  EllipticityReport report;
  report.min_eigenvalue = std::numeric_limits<double>::infinity();
  report.max_eigenvalue = -std::numeric_limits<double>::infinity();
  const auto d = static_cast<Eigen::Index>(diffusion.d);
  std::vector<double> buf(diffusion.d * diffusion.m);
  for (const auto& x : probes) {
    diffusion.sigma(t, x, buf);
    const SmallMat sigma = as_matrix(buf, diffusion.d, diffusion.m);
    const SmallMat a = sigma * sigma.transpose();
    Eigen::SelfAdjointEigenSolver<SmallMat> eig(a, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues()(0);
    const double hi = eig.eigenvalues()(d - 1);
    report.min_eigenvalue = std::min(report.min_eigenvalue, lo);
    report.max_eigenvalue = std::max(report.max_eigenvalue, hi);
    const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    report.max_condition = std::max(report.max_condition, cond);
  }
  report.probes = probes.size();
  report.passed = report.min_eigenvalue > bounds.min_eigenvalue &&
                  report.max_condition <= bounds.condition_cap;
  return report;
}

EllipticityReport validate_ellipticity(const Diffusion& diffusion,
                                       std::span<const std::vector<double>> probes,
                                       EllipticityBounds bounds, double t) {
  EllipticityReport report = probe_ellipticity(diffusion, probes, bounds, t);
  if (!report.passed) {
    std::ostringstream msg;
    msg << "ellipticity check failed: min eigenvalue " << report.min_eigenvalue
        << ", max condition " << report.max_condition;
    fail(ErrorCode::SingularDiffusion, msg.str());
  }
  return report;
}

std::vector<double> central_jacobian(const std::function<void(ConstSpan, MutSpan)>& map,
                                     ConstSpan x, std::size_t out_dim, double step) {
  const std::size_t p = x.size();
  std::vector<double> jac(out_dim * p);
  std::vector<double> xp(x.begin(), x.end());
  std::vector<double> fp(out_dim), fm(out_dim);
  for (std::size_t j = 0; j < p; ++j) {
    const double orig = xp[j];
    xp[j] = orig + step;
    map(xp, fp);
    xp[j] = orig - step;
    map(xp, fm);
    xp[j] = orig;
    for (std::size_t i = 0; i < out_dim; ++i) jac[i * p + j] = (fp[i] - fm[i]) / (2.0 * step);
  }
  return jac;
}

double growth_constant(const CylindricalDrift& drift, double k,
                       std::span<const std::vector<double>> probes) {
  double worst = 0.0;
  for (const auto& y : probes) {
    std::vector<double> g(y.size());
    const double denom = 1.0 + std::pow(std::sqrt(norm2(y)), k - 1.0);
    for (std::size_t i = 0; i < drift.n; ++i) {
      drift.grad_h[i](y, g);
      worst = std::max(worst, std::sqrt(norm2(g)) / denom);
    }
  }
  return worst;
}

}  // namespace mvb
