#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>

#include "mvb/mvbismut.h"

namespace {

const char* kConfig = R"([experiment]
scenario = ou
N = 300
n_steps = 40
seed = 11
quantities = intrinsic_estimate, quadrature

[initial]
law = point:0

[estimator]
phi = const:1
f = linear
classical = true

[checks]
intrinsic_vs_quadrature = true
)";

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(mvb_version()) == "0.1.0");
  CHECK(std::string(mvb_status_name(MVB_OK)) == "Ok");
  CHECK(std::string(mvb_status_name(MVB_ERR_SIZE_CAP)) == "SizeCap");
}

TEST_CASE("config handles") {
  mvb_config* cfg = nullptr;
  REQUIRE(mvb_config_parse(kConfig, &cfg) == MVB_OK);
  CHECK(mvb_config_validate(cfg) == MVB_OK);
  CHECK(mvb_config_set_seed(cfg, 12) == MVB_OK);
  CHECK(std::string(mvb_config_text(cfg)).find("seed = 12") != std::string::npos);
  mvb_config_free(cfg);

  // Parsing is syntactic; names are resolved by validation.
  mvb_config* heat = nullptr;
  REQUIRE(mvb_config_parse("[experiment]\nscenario = heat\n", &heat) == MVB_OK);
  CHECK(mvb_config_validate(heat) == MVB_ERR_UNKNOWN_FAMILY);
  CHECK(std::string(mvb_last_error()).find("heat") != std::string::npos);
  mvb_config_free(heat);

  mvb_config* bad = nullptr;
  CHECK(mvb_config_parse("[experiment]\nN = lots\n", &bad) == MVB_ERR_CONFIG);
  CHECK(bad == nullptr);
  CHECK(mvb_config_parse(nullptr, &bad) == MVB_ERR_INVALID_ARGUMENT);
  CHECK(mvb_config_load("/nonexistent/mvb.cfg", &bad) == MVB_ERR_IO);
  mvb_config_free(nullptr);
}

TEST_CASE("runs through the C interface") {
  mvb_config* cfg = nullptr;
  REQUIRE(mvb_config_parse(kConfig, &cfg) == MVB_OK);
  mvb_report* one = nullptr;
  mvb_report* three = nullptr;
  REQUIRE(mvb_run(cfg, 1, 0, &one) == MVB_OK);
  REQUIRE(mvb_run(cfg, 3, 0, &three) == MVB_OK);
  CHECK(mvb_report_exit_code(one) == 0);
  CHECK(mvb_report_row_count(one) == 3);
  CHECK(std::string(mvb_report_csv(one)) == mvb_report_csv(three));
  CHECK(std::string(mvb_report_error(one)).empty());
  CHECK(std::string(mvb_report_manifest(one)).find("\"exit_code\"") != std::string::npos);
  mvb_report_free(one);
  mvb_report_free(three);

  // Replaying the manifest reproduces the run.
  mvb_report* first = nullptr;
  REQUIRE(mvb_run(cfg, 1, 0, &first) == MVB_OK);
  mvb_config* replay = nullptr;
  REQUIRE(mvb_config_parse(mvb_report_manifest(first), &replay) == MVB_OK);
  mvb_report* second = nullptr;
  REQUIRE(mvb_run(replay, 1, 0, &second) == MVB_OK);
  CHECK(std::string(mvb_report_csv(first)) == mvb_report_csv(second));
  mvb_report_free(first);
  mvb_report_free(second);
  mvb_config_free(replay);
  mvb_config_free(cfg);
  CHECK(mvb_run(nullptr, 1, 0, &first) == MVB_ERR_INVALID_ARGUMENT);
}

TEST_CASE("measures and wasserstein") {
  const double a_data[] = {0.0, 2.0};
  const double b_data[] = {1.0, 3.0};
  mvb_measure* a = nullptr;
  mvb_measure* b = nullptr;
  REQUIRE(mvb_measure_create(1, 2, a_data, &a) == MVB_OK);
  REQUIRE(mvb_measure_from_csv("1\n3\n", &b) == MVB_OK);
  CHECK(mvb_measure_size(b) == 2);
  CHECK(mvb_measure_dim(b) == 1);
  CHECK(mvb_measure_data(b)[1] == b_data[1]);
  double w = -1.0;
  CHECK(mvb_wasserstein(a, b, 1.0, &w) == MVB_OK);
  CHECK(w == 1.0);
  mvb_measure* c = nullptr;
  REQUIRE(mvb_measure_create(1, 1, a_data, &c) == MVB_OK);
  CHECK(mvb_wasserstein(a, c, 1.0, &w) == MVB_ERR_UNEQUAL_SUPPORT);
  mvb_measure* round = nullptr;
  REQUIRE(mvb_measure_from_csv(mvb_measure_csv(a), &round) == MVB_OK);
  CHECK(mvb_measure_data(round)[1] == 2.0);
  const double nan_data[] = {0.0 / 0.0};
  mvb_measure* bad = nullptr;
  CHECK(mvb_measure_create(1, 1, nan_data, &bad) == MVB_ERR_NON_FINITE);
  mvb_measure_free(a);
  mvb_measure_free(b);
  mvb_measure_free(c);
  mvb_measure_free(round);
}

TEST_CASE("scenario table") {
  CHECK(std::string(mvb_scenario_table()).find("meanfield_trig") != std::string::npos);
}
