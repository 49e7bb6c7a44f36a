#pragma once

// Monte Carlo estimators built from Bismut-type integration by parts.
//
// Intrinsic derivative along phi:
//
//   D_phi P_t f(mu) = E[ f(X_t^x) int_0^t beta'_s <zeta(X_s^x) V_s^x, dW_s> ]_{x~mu}
//                   + E[ f(X_t)   int_0^t <zeta(X_s) Psi_s, dW_s> ]
//
// where V^x is the frozen tangent started at phi(x), Psi_s the Lions coupling
// of the mean-field tangent, and zeta = sigma^T (sigma sigma^T)^{-1}. The
// second term carries no beta' factor. One particle system supplies the
// initial points, the driving noise and the measure flow for both terms.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvb/measure.hpp"
#include "mvb/model.hpp"
#include "mvb/simulate.hpp"
#include "mvb/tangent.hpp"

namespace mvb {

enum class EstimateMode { Certified, Heuristic };

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t N = 0;
  std::size_t n_steps = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  EstimateMode mode = EstimateMode::Certified;
  std::string scenario;
  double term1 = 0.0;
  double term2 = 0.0;
  std::vector<std::string> notes;
};

nlohmann::json to_json(const Estimate& e);
const char* mode_name(EstimateMode mode);

// Mean and standard error of per-sample values (i.i.d. approximation).
struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
};
SampleStats sample_stats(std::span<const double> values);

struct WeightVector {
  std::vector<double> w;
};

// w_i = sum_s beta'(t_s) <zeta(t_s, X[s,i]) V[s,i], dW[s,i]>
WeightVector weight_frozen(const ParticlePaths& paths, const TangentPaths& tangent,
                           const ModelSpec& model, const BismutSchedule& schedule,
                           int threads = 1);

// w_i = sum_s <zeta(t_s, X[s,i]) Psi_s(i), dW[s,i]>
WeightVector weight_meanfield(const ParticlePaths& paths, const TangentPaths& tangent,
                              const ModelSpec& model, int threads = 1);

struct EstimatorOptions {
  int threads = 1;
  bool allow_heuristic = true;
  SimulationOptions simulation;
};

// Simulates the particle system once and evaluates intrinsic derivatives for
// any number of perturbations, observables and schedules on those paths.
class IntrinsicEstimator {
 public:
  IntrinsicEstimator(ModelSpec model, const EmpiricalMeasure& mu0, TimeGrid grid,
                     std::uint64_t seed, EstimatorOptions opts = {});

  Estimate estimate(const PerturbationField& phi, const Observable& f,
                    const BismutSchedule& schedule) const;

  const ParticlePaths& paths() const { return paths_; }
  const ModelSpec& model() const { return model_; }
  // False when the drift has no measure dependence on the probed paths, in
  // which case the Lions term is skipped (it is identically zero).
  bool measure_dependent() const { return measure_dependent_; }

 private:
  ModelSpec model_;
  TimeGrid grid_;
  EstimatorOptions opts_;
  ParticlePaths paths_;
  bool measure_dependent_ = true;
};

Estimate estimate_intrinsic(const ModelSpec& model, const EmpiricalMeasure& mu0,
                            const PerturbationField& phi, const Observable& f,
                            const TimeGrid& grid, const BismutSchedule& schedule,
                            std::uint64_t seed, const EstimatorOptions& opts = {});

// grad_v P_t f(x) for a model without measure dependence: N independent
// copies started at x. Throws MeasureDependence otherwise.
Estimate estimate_classical(const ModelSpec& model, std::span<const double> x,
                            std::span<const double> v, const Observable& f,
                            const TimeGrid& grid, const BismutSchedule& schedule,
                            std::size_t N, std::uint64_t seed,
                            const EstimatorOptions& opts = {});

// True if dF/dz is nonzero at any of the given (x, mu) probes.
bool has_measure_dependence(const ModelSpec& model, const ParticlePaths& paths,
                            std::size_t probes = 16);

struct DualNormResult {
  Estimate best;
  std::size_t argmax = 0;
  std::vector<Estimate> per_field;  // each for phi / |phi|_{L^k(mu0)}
  std::vector<std::string> skipped;  // zero-norm fields
};

// max over the dictionary of D_{phi/|phi|} P_t f(mu0): a lower bound on the
// dual norm of the intrinsic derivative.
DualNormResult dual_norm_lower_bound(const ModelSpec& model, const EmpiricalMeasure& mu0,
                                     const Observable& f, const TimeGrid& grid,
                                     const BismutSchedule& schedule,
                                     const std::vector<PerturbationField>& dictionary,
                                     std::uint64_t seed, const EstimatorOptions& opts = {});

struct BetaPairCheck {
  std::size_t a = 0, b = 0;
  double difference = 0.0;
  double combined_stderr = 0.0;
  bool passed = false;
};

struct BetaInvarianceReport {
  std::vector<std::string> schedules;
  std::vector<Estimate> estimates;
  std::vector<BetaPairCheck> pairs;
  double sigmas = 3.0;
  bool passed = false;
};

// Schedule a is run with seeds[a % seeds.size()].
BetaInvarianceReport beta_invariance_check(const ModelSpec& model, const EmpiricalMeasure& mu0,
                                           const PerturbationField& phi, const Observable& f,
                                           const TimeGrid& grid,
                                           const std::vector<std::uint64_t>& seeds,
                                           const std::vector<BismutSchedule>& schedules,
                                           const EstimatorOptions& opts = {},
                                           double sigmas = 3.0);

}  // namespace mvb
