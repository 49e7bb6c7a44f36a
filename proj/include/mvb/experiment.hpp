#pragma once

// Config-driven experiment runner. A config is an INI file:
//
//   [experiment]  scenario, d, N, n_steps, t, k, seed, seeds_for_ci, quantities, threads
//   [model]       scenario parameters (see list-scenarios)
//   [initial]     law, nu
//   [estimator]   schedule, schedules, phi, f, classical
//   [oracle]      eps, richardson, t_grid, dt, shifts, moment_ladder, tv_dictionary
//   [checks]      sigmas, intrinsic_vs_fd, intrinsic_vs_quadrature, beta_invariance,
//                 dual_norm_slope, tv_slope, tv_slope_tolerance, stability_spread, moment_cap
//   [output]      dir, csv, manifest
//
// Lists are comma separated. Laws use the parse_initial_law syntax.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvb/error.hpp"
#include "mvb/scenarios.hpp"

namespace mvb {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct ExperimentConfig {
  std::string scenario;
  std::size_t d = 1;
  ScenarioParams params;
  std::size_t N = 5000;
  std::size_t n_steps = 1000;
  double t = 1.0;
  double k = 2.0;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds_for_ci;
  std::vector<std::string> quantities;
  int threads = 1;

  std::string law = "point:0";
  std::string nu;

  std::string schedule = "linear";
  std::vector<std::string> schedules;
  std::vector<std::string> phi = {"const:1"};
  std::vector<std::string> f = {"linear"};
  bool classical = false;

  std::vector<double> eps = {0.1};
  bool richardson = true;
  std::vector<double> t_grid;
  double dt = 0.0;  // 0: t / n_steps
  std::vector<double> shifts;
  std::vector<double> moment_ladder;
  std::vector<std::string> tv_dictionary;

  double sigmas = 3.0;
  bool check_intrinsic_vs_fd = false;
  bool check_intrinsic_vs_quadrature = false;
  bool check_beta_invariance = false;
  std::optional<std::pair<double, double>> dual_norm_slope;
  std::optional<std::pair<double, double>> tv_slope;
  std::optional<double> tv_slope_tolerance;
  std::optional<double> stability_spread;
  std::optional<double> moment_cap;

  std::string out_dir = ".";
  std::string csv_name = "results.csv";
  std::string manifest_name = "manifest.json";

  // Normalized INI text; parsing it gives back an identical config.
  std::string text;

  double step() const { return dt > 0.0 ? dt : t / static_cast<double>(n_steps); }
};

// Accepts INI text or a run manifest (JSON with a "config" field).
// Throws Error(ConfigError | UnknownFamily) on any problem.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Semantic checks beyond parsing (resolvable names, oracle requirements).
void validate_config(const ExperimentConfig& cfg);
void set_seed(ExperimentConfig& cfg, std::uint64_t seed);
void set_out_dir(ExperimentConfig& cfg, const std::string& dir);

struct ResultRow {
  std::string scenario;
  std::string quantity;
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t seed = 0;
  std::string status;  // ok | failed | pass | fail | error
  std::string check;   // empty for measurements
  std::string params;
};

std::string rows_to_csv(const std::vector<ResultRow>& rows);

struct RunResult {
  int exit_code = 0;  // 0 pass, 1 check failure, 2 config error, 3 numerical failure
  std::vector<ResultRow> rows;
  std::string csv;
  std::string manifest;
  std::string error_json;  // machine-readable record, empty on success
};

struct RunOptions {
  int parallel = 1;       // concurrent tasks; output order is fixed
  bool write_files = true;
};

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

// Text table of the scenario registry.
std::string scenario_table();

std::string error_record(ErrorCode code, int exit_code, const std::string& message);

}  // namespace mvb
