#pragma once

// Problem instances for distribution-dependent SDEs
//
//   dX_t = b_t(X_t, L_{X_t}) dt + sigma_t(X_t) dW_t,
//   b_t(x, mu) = b0_t(x) + F(t, x, mu(h_1), ..., mu(h_n)).
//
// The measure-dependent part is restricted to cylindrical form so the Lions
// derivative has the closed form sum_i dF/dz_i (x, mu(h)) (x) grad h_i(y).
// All coefficient callbacks are pure; a ModelSpec may be shared freely
// between threads once built.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvb/linalg.hpp"

namespace mvb {

class EmpiricalMeasure;

using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

// b1(t, x, mu) = F(t, x, mu(h_1..h_n)). Matrices are row-major:
// grad_x_F is d x d with entry (a, b) = dF_a/dx_b, grad_z_F is d x n.
struct CylindricalDrift {
  std::size_t n = 0;
  std::function<void(double, ConstSpan, ConstSpan, MutSpan)> F;
  std::function<void(double, ConstSpan, ConstSpan, MutSpan)> grad_x_F;
  std::function<void(double, ConstSpan, ConstSpan, MutSpan)> grad_z_F;
  std::vector<std::function<double(ConstSpan)>> h;
  std::vector<std::function<void(ConstSpan, MutSpan)>> grad_h;
};

// b0 after regularization at scale delta. (p0, q0) is carried as metadata.
struct SingularDrift {
  std::function<void(double, ConstSpan, MutSpan)> eval;
  double regularization_scale = 1e-3;
  double p0 = 0.0;
  double q0 = 0.0;
};

// sigma is d x m row-major. grad_sigma writes d slices of d x m:
// out[(j * d + r) * m + c] = d sigma_rc / d x_j.
struct Diffusion {
  std::size_t d = 1;
  std::size_t m = 1;
  std::function<void(double, ConstSpan, MutSpan)> sigma;
  std::function<void(double, ConstSpan, MutSpan)> grad_sigma;
  // sigma(t, x) does not depend on x; the gradient is identically zero.
  bool state_independent = false;
};

struct ModelSpec {
  std::string name;
  std::size_t d = 1;
  std::size_t m = 1;
  double k = 2.0;
  double horizon = 1.0;
  std::optional<SingularDrift> singular_drift;
  CylindricalDrift meanfield_drift;
  Diffusion diffusion;
  double condition_cap = 1e12;

  // Structural checks (dimensions, callbacks present). Throws InvalidArgument.
  void validate() const;
  bool heuristic() const { return singular_drift.has_value(); }
};

struct Observable {
  std::string name;
  std::function<double(ConstSpan)> f;
  bool bounded = false;
  double bound = 0.0;
  std::function<void(ConstSpan, MutSpan)> grad_f;

  double operator()(ConstSpan x) const { return f(x); }
};

// Element of the tangent space L^k(R^d -> R^d; mu).
struct PerturbationField {
  std::string name;
  std::function<void(ConstSpan, MutSpan)> phi;

  void operator()(ConstSpan x, MutSpan out) const { phi(x, out); }
  // alpha * phi, evaluated as alpha * phi(x) componentwise.
  PerturbationField scaled(double alpha) const;
};

struct BismutSchedule {
  std::string name;
  double t = 1.0;
  std::function<double(double)> beta;
  std::function<double(double)> beta_prime;

  static BismutSchedule linear(double t);
  static BismutSchedule quadratic(double t);
  static BismutSchedule sine(double t);
  // beta(0) = 0, beta(t) = 1, beta' consistent with differences of beta.
  void validate() const;
};

// Exponent k of L^k / W_k. `sup` selects the k = infinity mode.
struct Exponent {
  double value = 2.0;
  bool sup = false;

  static Exponent finite(double k) { return {k, false}; }
  static Exponent sup_norm() { return {0.0, true}; }
  // Dual exponent k* = k / (k - 1); k = 1 maps to the sup mode.
  Exponent dual() const;
};

// zeta = sigma^T (sigma sigma^T)^{-1}, an m x d matrix with sigma * zeta = I_d.
// Throws SingularDiffusion when sigma sigma^T has condition number above cap.
SmallMat zeta(const Diffusion& diffusion, double t, ConstSpan x,
              double condition_cap = 1e12);

// Evaluates the moments mu(h_1..h_n) needed by drift_eval / lions_derivative.
std::vector<double> drift_moments(const CylindricalDrift& drift,
                                  const EmpiricalMeasure& mu);

// D^L b1(t, x, mu)(y) as a d x d matrix.
SmallMat lions_derivative(const CylindricalDrift& drift, double t, ConstSpan x,
                          const EmpiricalMeasure& mu, ConstSpan y);

std::vector<double> drift_eval(const ModelSpec& model, double t, ConstSpan x,
                               const EmpiricalMeasure& mu);

// Hot-path variant with the moments already reduced. Writes d values and
// does not check finiteness.
void drift_with_moments(const ModelSpec& model, double t, ConstSpan x,
                        ConstSpan moments, MutSpan out);

struct EllipticityBounds {
  double min_eigenvalue = 1e-12;
  double condition_cap = 1e12;
};

struct EllipticityReport {
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double max_condition = 0.0;
  std::size_t probes = 0;
  bool passed = false;
};

// Scans sigma sigma^T over the probes (times `t`, default t = 0).
EllipticityReport probe_ellipticity(const Diffusion& diffusion,
                                    std::span<const std::vector<double>> probes,
                                    EllipticityBounds bounds = {}, double t = 0.0);

// As probe_ellipticity, but throws SingularDiffusion when the check fails.
EllipticityReport validate_ellipticity(const Diffusion& diffusion,
                                       std::span<const std::vector<double>> probes,
                                       EllipticityBounds bounds = {}, double t = 0.0);

// Central-difference Jacobian of a vector map R^p -> R^q at x (row-major q x p).
std::vector<double> central_jacobian(
    const std::function<void(ConstSpan, MutSpan)>& map, ConstSpan x,
    std::size_t out_dim, double step);

// max_i sup_y |grad h_i(y)| / (1 + |y|^{k-1}) over the probes.
double growth_constant(const CylindricalDrift& drift, double k,
                       std::span<const std::vector<double>> probes);

}  // namespace mvb
