#pragma once

// Ground truth that does not go through the Bismut weights: common-random-number
// finite differences, Gauss-Hermite quadrature on linear-Gaussian models, and
// empirical stability / moment / total-variation checks. Only the simulate
// and measure primitives are shared with the estimators.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "mvb/bismut.hpp"
#include "mvb/measure.hpp"
#include "mvb/model.hpp"
#include "mvb/simulate.hpp"
#include "mvb/tangent.hpp"

namespace mvb {

// [P_t f(pushforward(mu0, phi, eps)) - P_t f(mu0)] / eps with identical
// increments and particle indices in both runs.
Estimate finite_difference_intrinsic(const ModelSpec& model, const EmpiricalMeasure& mu0,
                                     const PerturbationField& phi, const Observable& f,
                                     const TimeGrid& grid, double eps, std::uint64_t seed,
                                     const SimulationOptions& opts = {});

// 2 FD(eps/2) - FD(eps), with the standard error of the per-particle
// combination.
Estimate richardson_intrinsic(const ModelSpec& model, const EmpiricalMeasure& mu0,
                              const PerturbationField& phi, const Observable& f,
                              const TimeGrid& grid, double eps, std::uint64_t seed,
                              const SimulationOptions& opts = {});

// Probabilists' Gauss-Hermite rule: sum_i w_i g(x_i) ~ E[g(Z)], Z ~ N(0,1).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadratureRule gauss_hermite(std::size_t n);

// dX = (-a X + kappa (E X - X)) dt + sigma dW in R^d (sigma scalar * I).
struct LinearGaussianModel {
  std::size_t d = 1;
  double a = 0.0;
  double kappa = 0.0;
  double sigma = 1.0;
};

// Independent coordinates; stddev = 0 everywhere is a point mass.
struct GaussianLaw {
  std::vector<double> mean;
  std::vector<double> stddev;
};

// D_phi P_t f(mu) for the linear-Gaussian model, computed from the Gaussian
// transition law with tensor Gauss-Hermite quadrature (d <= 2). With a point
// mass at x and constant phi = v this is grad_v P_t f(x).
double gaussian_quadrature_reference(const LinearGaussianModel& model,
                                     const GaussianLaw& initial, const Observable& f, double t,
                                     const PerturbationField& phi, std::size_t nodes = 48);

// E sign(x + sigma W_t - threshold) for Brownian motion in d = 1.
double brownian_sign_expectation(double x, double threshold, double sigma, double t);

// Total variation between the Brownian laws started at x1 and x2 (d = 1):
// sup_{|f| <= 1} |E f(x1 + sigma W_t) - E f(x2 + sigma W_t)|.
double brownian_point_pair_tv(double x1, double x2, double sigma, double t);

// Least-squares slope of log y against log x.
double fit_loglog_slope(std::span<const double> x, std::span<const double> y);

struct StabilityRow {
  double initial_distance = 0.0;   // W_k(mu, nu)
  double sup_distance = 0.0;       // (E sup_s |X1_s - X2_s|^k)^{1/k}
  double terminal_distance = 0.0;  // W_k(law_t(mu), law_t(nu))
  double sup_ratio = 0.0;
  double wasserstein_ratio = 0.0;
  bool degenerate = false;  // identical initial laws, ratios reported as 0
};

// Synchronous coupling: nu0 is re-indexed along the optimal initial plan and
// both systems are driven by the same increments.
StabilityRow stability_report(const ModelSpec& model, const EmpiricalMeasure& mu0,
                              const EmpiricalMeasure& nu0, const TimeGrid& grid,
                              std::uint64_t seed, const SimulationOptions& opts = {});

struct MomentRow {
  double initial_moment = 0.0;  // E|X_0|^k
  double sup_moment = 0.0;      // sup_s E|X_s|^k
  double sup_path_moment = 0.0; // E sup_s |X_s|^k
  double ratio = 0.0;           // sup_moment / (1 + initial_moment)
};

struct MomentReport {
  std::vector<MomentRow> rows;
  double max_ratio = 0.0;
  double cap = 0.0;
  bool passed = false;
};

MomentReport moment_report(const ModelSpec& model, const std::vector<EmpiricalMeasure>& ladder,
                           const TimeGrid& grid, std::uint64_t seed, double cap,
                           const SimulationOptions& opts = {});

struct TvRow {
  double t = 0.0;
  double lower_bound = 0.0;
  double std_error = 0.0;
  std::size_t best = 0;
};

struct TvReport {
  std::vector<TvRow> rows;
  double slope = 0.0;
  double predicted_slope = -0.5;
};

// D(t) = max over the dictionary of |P_t f(mu0) - P_t f(nu0)| on each
// t in t_grid (grid step dt), and the log-log slope of D against t.
TvReport tv_gradient_scaling(const ModelSpec& model, const EmpiricalMeasure& mu0,
                             const EmpiricalMeasure& nu0, const std::vector<double>& t_grid,
                             double dt, const std::vector<Observable>& dictionary,
                             std::uint64_t seed, const SimulationOptions& opts = {});

struct TangentFdRow {
  double eps = 0.0;
  double error = 0.0;  // sup_s mean_i |V - (X^eps - X)/eps|
};

struct TangentFdReport {
  TangentKind kind = TangentKind::Frozen;
  std::vector<TangentFdRow> rows;
  double observed_order = 0.0;
  bool monotone = false;
};

// Frozen: perturbed runs use the decoupled SDE on the base flow from
// pushforward(mu0, phi, eps). Mean-field: perturbed runs are full coupled
// systems from the pushforward.
TangentFdReport tangent_fd_consistency(const ModelSpec& model, const EmpiricalMeasure& mu0,
                                       const PerturbationField& phi, const TimeGrid& grid,
                                       std::uint64_t seed, const std::vector<double>& eps_ladder,
                                       TangentKind kind, const SimulationOptions& opts = {});

nlohmann::json to_json(const StabilityRow& r);
nlohmann::json to_json(const MomentReport& r);
nlohmann::json to_json(const TvReport& r);
nlohmann::json to_json(const TangentFdReport& r);

}  // namespace mvb
