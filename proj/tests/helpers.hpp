#pragma once

#include <cmath>
#include <vector>

#include "mvb/model.hpp"
#include "mvb/scenarios.hpp"

namespace testing_helpers {

// dX = -a X dt + sigma dW in d dimensions.
inline mvb::ModelSpec linear_model(std::size_t d, double a, double sigma) {
  mvb::ScenarioParams p;
  p.values = {{"a", a}, {"sigma", sigma}};
  return mvb::make_scenario("custom", d, p);
}

inline mvb::ModelSpec zero_noise(mvb::ModelSpec model) {
  model.diffusion.sigma = [](double, mvb::ConstSpan, mvb::MutSpan out) {
    for (double& v : out) v = 0.0;
  };
  model.diffusion.state_independent = true;
  return model;
}

inline mvb::ModelSpec meanfield_ou(std::size_t d, double a, double kappa, double sigma = 1.0) {
  mvb::ScenarioParams p;
  p.values = {{"a", a}, {"kappa", kappa}, {"sigma", sigma}};
  return mvb::make_scenario("meanfield_ou", d, p);
}

// Composite Simpson rule on [lo, hi] with n (even) panels.
template <class G>
double simpson(G&& g, double lo, double hi, int n = 20000) {
  const double h = (hi - lo) / n;
  double s = g(lo) + g(hi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * g(lo + i * h);
  return s * h / 3.0;
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
inline double normal_pdf(double x, double mean, double sd) { return normal_pdf((x - mean) / sd) / sd; }

}  // namespace testing_helpers
