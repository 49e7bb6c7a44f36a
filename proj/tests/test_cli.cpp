#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "mvb_cli_test";

int run(const std::string& args, const std::string& tag) {
  const std::string cmd = std::string(MVB_CLI_PATH) + " " + args + " > " + (kWork / (tag + ".out")).string() +
                          " 2> " + (kWork / (tag + ".err")).string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

const char* kConfig = R"([experiment]
scenario = meanfield_ou
N = 300
n_steps = 40
seed = 5
quantities = intrinsic_estimate, fd_oracle, stability

[initial]
law = gaussian:mean=0.5;std=1

[estimator]
phi = const:1
f = linear

[oracle]
eps = 0.1
shifts = 0.1, 1

[checks]
intrinsic_vs_fd = true
)";

struct Workdir {
  Workdir() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    write(kWork / "run.cfg", kConfig);
  }
  ~Workdir() { fs::remove_all(kWork); }
};

}  // namespace

TEST_CASE("list-scenarios") {
  Workdir w;
  CHECK(run("list-scenarios", "list") == 0);
  const std::string out = slurp(kWork / "list.out");
  for (const char* name : {"brownian", "ou", "meanfield_ou", "meanfield_trig", "singular_demo", "custom"})
    CHECK(out.find(name) != std::string::npos);
}

TEST_CASE("validate") {
  Workdir w;
  CHECK(run("validate --config " + (kWork / "run.cfg").string(), "ok") == 0);
  write(kWork / "bad.cfg", "[experiment]\nscenario = meanfield_ou\nN = 0\n");
  CHECK(run("validate --config " + (kWork / "bad.cfg").string(), "bad") == 2);
  CHECK(slurp(kWork / "bad.err").find("\"ConfigError\"") != std::string::npos);
}

TEST_CASE("run, replay and parallel determinism") {
  Workdir w;
  const fs::path a = kWork / "a", b = kWork / "b", c = kWork / "c";
  CHECK(run("run --config " + (kWork / "run.cfg").string() + " --out " + a.string(), "a") == 0);
  const std::string csv = slurp(a / "results.csv");
  CHECK(csv.rfind("scenario,quantity,value,stderr,seed,status,check,params\n", 0) == 0);
  CHECK(run("run --config " + (a / "manifest.json").string() + " --out " + b.string() + " --parallel 3", "b") == 0);
  CHECK(slurp(b / "results.csv") == csv);
  CHECK(run("run --config " + (kWork / "run.cfg").string() + " --out " + c.string() + " --seed 6", "c") == 0);
  CHECK(slurp(c / "results.csv") != csv);
  CHECK(slurp(c / "manifest.json").find("\"seed\": 6") != std::string::npos);
}

TEST_CASE("errors") {
  Workdir w;
  CHECK(run("frobnicate", "unknown") == 2);
  CHECK(run("run", "missing") == 2);
  CHECK(run("run --config " + (kWork / "absent.cfg").string(), "absent") == 2);
  write(kWork / "zero.cfg", std::string(kConfig).replace(std::string(kConfig).find("N = 300"), 7, "N = 0"));
  const fs::path out = kWork / "zero_out";
  CHECK(run("run --config " + (kWork / "zero.cfg").string() + " --out " + out.string(), "zero") == 2);
  CHECK_FALSE(fs::exists(out));
  CHECK(slurp(kWork / "zero.err").find("\"exit_code\"") != std::string::npos);
}
