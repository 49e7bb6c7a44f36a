#include "mvb/mvbismut.h"

#include <new>
#include <string>

#include "mvb/experiment.hpp"
#include "mvb/measure.hpp"

struct mvb_config {
  mvb::ExperimentConfig cfg;
};

struct mvb_report {
  mvb::RunResult result;
};

struct mvb_measure {
  mvb::EmpiricalMeasure mu;
  std::string csv;
};

namespace {

thread_local std::string last_error;

mvb_status record(mvb::ErrorCode code, const char* what) {
  last_error = what;
  return static_cast<mvb_status>(code);
}

template <class Fn>
mvb_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return MVB_OK;
  } catch (const mvb::Error& e) {
    return record(e.code(), e.what());
  } catch (const std::bad_alloc&) {
    return record(mvb::ErrorCode::MemoryBudget, "out of memory");
  } catch (const std::exception& e) {
    return record(mvb::ErrorCode::Internal, e.what());
  }
}

mvb_status null_arg(const char* what) {
  return record(mvb::ErrorCode::InvalidArgument, what);
}

}  // namespace

extern "C" {

const char* mvb_version(void) { return mvb::kLibraryVersion; }

const char* mvb_last_error(void) { return last_error.c_str(); }

const char* mvb_status_name(mvb_status status) {
  return mvb::error_code_name(static_cast<mvb::ErrorCode>(status));
}

mvb_status mvb_config_load(const char* path, mvb_config** out) {
  if (!path || !out) return null_arg("null argument");
  return guarded([&] { *out = new mvb_config{mvb::load_config(path)}; });
}

mvb_status mvb_config_parse(const char* text, mvb_config** out) {
  if (!text || !out) return null_arg("null argument");
  return guarded([&] { *out = new mvb_config{mvb::parse_config(text)}; });
}

mvb_status mvb_config_set_seed(mvb_config* cfg, uint64_t seed) {
  if (!cfg) return null_arg("null config");
  return guarded([&] { mvb::set_seed(cfg->cfg, seed); });
}

mvb_status mvb_config_set_out_dir(mvb_config* cfg, const char* dir) {
  if (!cfg || !dir) return null_arg("null argument");
  return guarded([&] { mvb::set_out_dir(cfg->cfg, dir); });
}

mvb_status mvb_config_validate(const mvb_config* cfg) {
  if (!cfg) return null_arg("null config");
  return guarded([&] { mvb::validate_config(cfg->cfg); });
}

const char* mvb_config_text(const mvb_config* cfg) { return cfg ? cfg->cfg.text.c_str() : ""; }

void mvb_config_free(mvb_config* cfg) { delete cfg; }

mvb_status mvb_run(const mvb_config* cfg, int parallel, int write_files, mvb_report** out) {
  if (!cfg || !out) return null_arg("null argument");
  return guarded([&] {
    mvb::RunOptions opts;
    opts.parallel = parallel < 1 ? 1 : parallel;
    opts.write_files = write_files != 0;
    *out = new mvb_report{mvb::run_experiment(cfg->cfg, opts)};
  });
}

int mvb_report_exit_code(const mvb_report* report) { return report ? report->result.exit_code : 2; }

size_t mvb_report_row_count(const mvb_report* report) {
  return report ? report->result.rows.size() : 0;
}

const char* mvb_report_csv(const mvb_report* report) {
  return report ? report->result.csv.c_str() : "";
}

const char* mvb_report_manifest(const mvb_report* report) {
  return report ? report->result.manifest.c_str() : "";
}

const char* mvb_report_error(const mvb_report* report) {
  return report ? report->result.error_json.c_str() : "";
}

void mvb_report_free(mvb_report* report) { delete report; }

const char* mvb_scenario_table(void) {
  static const std::string table = mvb::scenario_table();
  return table.c_str();
}

mvb_status mvb_measure_create(size_t dim, size_t n, const double* data, mvb_measure** out) {
  if (!data || !out) return null_arg("null argument");
  return guarded([&] {
    *out = new mvb_measure{mvb::EmpiricalMeasure(dim, std::vector<double>(data, data + n * dim)), {}};
  });
}

mvb_status mvb_measure_from_csv(const char* text, mvb_measure** out) {
  if (!text || !out) return null_arg("null argument");
  return guarded([&] { *out = new mvb_measure{mvb::points_from_csv(text), {}}; });
}

size_t mvb_measure_size(const mvb_measure* mu) { return mu ? mu->mu.size() : 0; }

size_t mvb_measure_dim(const mvb_measure* mu) { return mu ? mu->mu.dim() : 0; }

const double* mvb_measure_data(const mvb_measure* mu) { return mu ? mu->mu.data().data() : nullptr; }

const char* mvb_measure_csv(mvb_measure* mu) {
  if (!mu) return "";
  if (mu->csv.empty()) mu->csv = mvb::points_to_csv(mu->mu);
  return mu->csv.c_str();
}

mvb_status mvb_wasserstein(const mvb_measure* a, const mvb_measure* b, double k, double* out) {
  if (!a || !b || !out) return null_arg("null argument");
  return guarded([&] { *out = mvb::wasserstein(a->mu, b->mu, k).distance; });
}

void mvb_measure_free(mvb_measure* mu) { delete mu; }

}  // extern "C"
