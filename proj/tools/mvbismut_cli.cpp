// Command-line front end; talks to the library only through the C API.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mvb/mvbismut.h"

namespace {

int config_error(const std::string& message, mvb_status status) {
  std::cerr << nlohmann::json{{"error", mvb_status_name(status)},
                              {"code", static_cast<int>(status)},
                              {"exit_code", 2},
                              {"message", message}}
                   .dump()
            << "\n";
  return 2;
}

mvb_config* load(const std::string& path, int& exit_code) {
  mvb_config* cfg = nullptr;
  const mvb_status st = mvb_config_load(path.c_str(), &cfg);
  if (st != MVB_OK) {
    exit_code = config_error(mvb_last_error(), st);
    return nullptr;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bismut-formula estimators for distribution-dependent SDEs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mvb_version());

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int parallel = 1;
  auto* run = app.add_subcommand("run", "Run the experiment suite declared in a config");
  run->add_option("--config", config_path, "INI config or run manifest")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--parallel", parallel, "Concurrent tasks (output order is fixed)")
      ->check(CLI::Range(1, 1024));

  auto* list = app.add_subcommand("list-scenarios", "Print the scenario registry");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Parse and validate a config");
  validate->add_option("--config", validate_path, "INI config or run manifest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  if (list->parsed()) {
    std::cout << mvb_scenario_table();
    return 0;
  }

  int exit_code = 0;
  if (validate->parsed()) {
    mvb_config* cfg = load(validate_path, exit_code);
    if (!cfg) return exit_code;
    const mvb_status st = mvb_config_validate(cfg);
    if (st != MVB_OK) exit_code = config_error(mvb_last_error(), st);
    else std::cout << "ok\n";
    mvb_config_free(cfg);
    return exit_code;
  }

  mvb_config* cfg = load(config_path, exit_code);
  if (!cfg) return exit_code;
  if (seed && mvb_config_set_seed(cfg, *seed) != MVB_OK) {
    exit_code = config_error(mvb_last_error(), MVB_ERR_CONFIG);
  } else if (out_dir && mvb_config_set_out_dir(cfg, out_dir->c_str()) != MVB_OK) {
    exit_code = config_error(mvb_last_error(), MVB_ERR_CONFIG);
  } else {
    mvb_report* report = nullptr;
    const mvb_status st = mvb_run(cfg, parallel, 1, &report);
    if (st != MVB_OK) {
      exit_code = config_error(mvb_last_error(), st);
    } else {
      exit_code = mvb_report_exit_code(report);
      const std::string err = mvb_report_error(report);
      if (!err.empty()) std::cerr << err << "\n";
      if (exit_code != 2)
        std::cout << mvb_report_row_count(report) << " rows, exit " << exit_code << "\n";
      mvb_report_free(report);
    }
  }
  mvb_config_free(cfg);
  return exit_code;
}
