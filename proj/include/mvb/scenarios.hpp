#pragma once

// Built-in coefficient families and the name-based factories used by the
// experiment config: observables, perturbation fields, schedules, initial laws.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvb/measure.hpp"
#include "mvb/model.hpp"
#include "mvb/oracle.hpp"

namespace mvb {

// Named real parameters with defaults supplied at the lookup site.
struct ScenarioParams {
  std::map<std::string, double> values;

  double get(const std::string& key, double fallback) const;
};

struct ScenarioInfo {
  std::string name;
  std::string description;
  std::vector<std::pair<std::string, double>> parameters;  // name, default
  std::vector<std::string> properties;                     // checks it exercises
};

const std::vector<ScenarioInfo>& scenario_registry();
const ScenarioInfo& scenario_info(const std::string& name);  // throws UnknownFamily

// Unknown parameter names are a ConfigError.
ModelSpec make_scenario(const std::string& name, std::size_t d, const ScenarioParams& params);

// Closed-form description of linear-Gaussian scenarios, if the scenario is one.
std::optional<LinearGaussianModel> linear_gaussian_form(const std::string& name, std::size_t d,
                                                        const ScenarioParams& params);

// Observable names: linear[:j], sum, square, sin, cos, tanh, sign[:c], const:c.
Observable make_observable(const std::string& spec, std::size_t d);
// Perturbation names: id, const:c, coord:j, neg_coord:j, sin.
PerturbationField make_perturbation(const std::string& spec, std::size_t d);
// Schedule names: linear, quadratic, sine.
BismutSchedule make_schedule(const std::string& name, double t);

// Initial law specs:
//   point:x1,x2          gaussian:mean=m1,m2;std=s1,s2
//   uniform:lower=..;upper=..        list:x1,x2|y1,y2
//   mixture:0.3*point:0 + 0.7*gaussian:mean=1;std=2
// A single value is broadcast to all d coordinates.
InitialLaw parse_initial_law(const std::string& spec, std::size_t d);

// Quadrature reference by scenario id. Throws UnsupportedScenario unless the
// scenario is linear-Gaussian and the law is a point mass or Gaussian.
double gaussian_quadrature_reference(const std::string& scenario, std::size_t d,
                                     const ScenarioParams& params, const InitialLaw& law,
                                     const Observable& f, double t, const PerturbationField& phi);

}  // namespace mvb
