#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pift/cli.hpp"
#include "pift/config.hpp"
#include "pift/parallel.hpp"
#include "pift/pipelines.hpp"

using namespace pift;
namespace fs = std::filesystem;

namespace {
const std::string kSrc = PIFT_SOURCE_DIR;

std::string read(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pift_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

const char* kMinimal = R"(schedule:
  T: 3
  alpha_min: 0.9
  alpha_max: 0.99
score:
  type: gaussian
  mean: [0.0]
  cov: [[1.0]]
reward:
  type: pseudo_huber
  center: [1.0]
  scale: 1.0
  gain: 1.0
pift:
  inner_iters: 5
  grid_points: 64
sampler:
  n_paths: 2000
)";
}  // namespace

TEST_CASE("config round trip") {
  const RunConfig a = load_config_file(kSrc + "/configs/lqg_default.yaml");
  CHECK(a.problem.steps() == 10);
  CHECK(a.beta.kind == BetaSetting::Kind::automatic);
  CHECK(a.l0_domain.kind == L0DomainSetting::Kind::automatic);
  CHECK(a.pift.inner_iters == std::vector<int>{50});
  const std::string d = dump_config(a);
  const RunConfig b = load_config_string(d);
  CHECK(dump_config(b) == d);
  const RunConfig m = load_config_string(kMinimal);
  CHECK(m.pift.grid_points == 64);
  CHECK(m.lambda == std::vector<double>{0.5});
}

TEST_CASE("config errors name the key and line") {
  std::string text = kMinimal;
  const auto pos = text.find("reward:");
  const std::string no_reward = text.substr(0, pos) + text.substr(text.find("pift:"));
  try {
    load_config_string(no_reward);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "reward");
    CHECK(std::string(e.what()).find("reward") != std::string::npos);
  }
  try {
    load_config_string(std::string(kMinimal) + "betta: 1.0\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "betta");
    CHECK(e.line() == 19);
  }
  CHECK_THROWS_AS(load_config_string(std::string(kMinimal) + "beta: -1\n"), ConfigError);
  CHECK_THROWS_AS(load_config_string(std::string(kMinimal) + "lambda: 1.5\n"), ConfigError);
  CHECK_THROWS_AS(load_config_string("schedule: [1, 2"), ConfigError);
}

TEST_CASE("cli exit codes") {
  const fs::path d = scratch("cli");
  {
    std::ofstream f(d / "bad.yaml");
    f << "schedule:\n  T: 3\n  alpha_min: 0.9\n  alpha_max: 0.99\nscore:\n  type: gaussian\n  mean: [0.0]\n  cov: [[1.0]]\n";
  }
  std::ostringstream out, err;
  CHECK(run_cli({"solve", "--config", (d / "bad.yaml").string(), "--out", (d / "o").string()}, out, err) == exit_config);
  CHECK(err.str().find("reward") != std::string::npos);
  CHECK(run_cli({}, out, err) == exit_config);
  CHECK(run_cli({"--help"}, out, err) == exit_ok);
  CHECK(run_cli({"solve", "--config", (d / "missing.yaml").string()}, out, err) == exit_config);

  {
    std::ofstream f(d / "diverge.yaml");
    f << read(kSrc + "/configs/pg_lqg.yaml") << "";
  }
  CHECK(run_cli({"pg", "--config", (d / "diverge.yaml").string(), "--out", (d / "pg").string()}, out, err) == exit_ok);
  std::string div = read(kSrc + "/configs/pg_lqg.yaml");
  div.replace(div.find("eta: 1.0"), 8, "eta: 1.0e7");
  {
    std::ofstream f(d / "diverge.yaml");
    f << div;
  }
  CHECK(run_cli({"pg", "--config", (d / "diverge.yaml").string(), "--out", (d / "pg2").string()}, out, err) ==
        exit_numeric);

  // quadratic reward with unbounded L0 and automatic beta
  std::string q = read(kSrc + "/configs/lqg_default.yaml");
  q.replace(q.find("l0_domain: auto"), 15, "l0_domain: none");
  {
    std::ofstream f(d / "unbounded.yaml");
    f << q;
  }
  std::ostringstream err2;
  CHECK(run_cli({"solve", "--config", (d / "unbounded.yaml").string(), "--out", (d / "u").string()}, out, err2) ==
        exit_config);
  CHECK(err2.str().find("unbounded") != std::string::npos);
}

TEST_CASE("solve writes a manifest that reproduces the run") {
  const fs::path d = scratch("solve");
  {
    std::ofstream f(d / "c.yaml");
    f << kMinimal;
  }
  std::ostringstream out, err;
  REQUIRE(run_cli({"solve", "--config", (d / "c.yaml").string(), "--out", (d / "a").string(), "--threads", "1"}, out,
                  err) == exit_ok);
  for (const char* name : {"manifest.yaml", "ledger.csv", "diagnostics.csv", "objective.csv", "residuals.svg"})
    CHECK_MESSAGE(fs::exists(d / "a" / name), name);
  CHECK(fs::exists(d / "a" / "fields" / "value_t3.csv"));
  const std::string manifest = read(d / "a" / "manifest.yaml");
  CHECK(manifest.find("tool_version") != std::string::npos);
  CHECK(manifest.find("seed: 20240601") != std::string::npos);
  REQUIRE(run_cli({"solve", "--config", (d / "a" / "manifest.yaml").string(), "--out", (d / "b").string(), "--threads",
                   "3"},
                  out, err) == exit_ok);
  for (const char* name : {"ledger.csv", "diagnostics.csv", "objective.csv", "fields/control_t0.csv"})
    CHECK_MESSAGE(read(d / "a" / name) == read(d / "b" / name), name);

  REQUIRE(run_cli({"solve", "--config", (d / "c.yaml").string(), "--out", (d / "s").string(), "--seed", "5"}, out,
                  err) == exit_ok);
  CHECK(read(d / "s" / "manifest.yaml").find("seed: 5\n") != std::string::npos);
  CHECK(read(d / "s" / "objective.csv") != read(d / "a" / "objective.csv"));
}

TEST_CASE("thread count precedence") {
  set_thread_count(3);
  CHECK(thread_count() == 3);
  ::setenv("PIFT_THREADS", "2", 1);
  set_thread_count(0);
  CHECK(thread_count() == 2);
  ::unsetenv("PIFT_THREADS");
  set_thread_count(0);
  CHECK(thread_count() >= 1);
}
