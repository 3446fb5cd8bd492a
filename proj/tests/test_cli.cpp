#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "kibam/cli.hpp"
#include "kibam/validator.hpp"

using namespace kibam;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "kibam");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("kibam_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("battery bank strings") {
  CHECK(cli::parse_batteries("2xB1").size() == 2);
  const auto mixed = cli::parse_batteries("1xB1,1xB2");
  REQUIRE(mixed.size() == 2);
  CHECK(mixed[1].capacity == BatteryParams::B2().capacity);
  const auto custom = cli::parse_batteries("2xcustom:3.04,0.166,0.02,1xB2");
  REQUIRE(custom.size() == 3);
  CHECK(custom[0].capacity == 3.04);
  CHECK(custom[1].k_prime == 0.02);
  CHECK_THROWS(cli::parse_batteries("two B1"));
  CHECK_THROWS(cli::parse_batteries("0xB1"));
}

TEST_CASE("settings and config files") {
  cli::RunConfig config;
  cli::apply_setting(config, "max-expansions", "1234");
  CHECK(config.max_expansions == 1234);
  cli::apply_setting(config, "durations", "0.01,0.5");
  CHECK(config.durations.resolution() == doctest::Approx(0.01));
  CHECK_THROWS(cli::apply_setting(config, "no_such_key", "1"));
  CHECK_THROWS(cli::apply_setting(config, "plans", "many"));
  cli::apply_setting(config, "one-hot", "true");
  CHECK(config.encoding == ActiveEncoding::OneHot);

  const auto dir = scratch_dir("config");
  std::ofstream(dir / "run.cfg") << "# bank\nbatteries = 2xB2\nhorizon = 42.5\n";
  cli::RunConfig from_file;
  cli::load_config_file(from_file, dir / "run.cfg");
  CHECK(from_file.batteries[0].capacity == BatteryParams::B2().capacity);
  CHECK(from_file.horizon == 42.5);
}

TEST_CASE("plan then validate a benchmark") {
  const auto dir = scratch_dir("plan");
  const auto plan = run_cli({"plan", "--benchmark", "CL_alt", "--out", dir.string()});
  CHECK(plan.code == 0);
  CHECK(plan.out.find("lifetime") != std::string::npos);
  REQUIRE(fs::exists(dir / "plan.txt"));

  const auto ok = run_cli({"validate", "--plan", (dir / "plan.txt").string(), "--benchmark", "CL_alt", "--trace-csv",
                           (dir / "trace.csv").string()});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("Plan valid") != std::string::npos);
  CHECK(read_file(dir / "trace.csv").rfind("time,battery,delta,gamma,event\n", 0) == 0);

  std::ofstream(dir / "bad.txt") << "0.00: (use b1) [30.00]\n";
  const auto bad = run_cli({"validate", "--plan", (dir / "bad.txt").string(), "--benchmark", "CL_alt"});
  CHECK(bad.code == 1);
}

TEST_CASE("plan with refinement on a custom bank") {
  const auto dir = scratch_dir("refine");
  const auto r = run_cli({"plan", "--benchmark", "CL_500", "--batteries", "2xcustom:5.5,0.166,0.7", "--durations",
                          "0.1,0.25,0.5,1.0", "--refine", "3", "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("refinements used: 1") != std::string::npos);
}

TEST_CASE("an idle profile file gives a wait-only plan") {
  const auto dir = scratch_dir("idle");
  std::ofstream(dir / "idle.csv") << "#repeat=false\n5.0,0\n";
  const auto r = run_cli({"plan", "--profile", (dir / "idle.csv").string(), "--goal", "finish", "--out", dir.string()});
  CHECK(r.code == 0);
  const auto plan = Plan::parse(read_file(dir / "plan.txt"));
  for (const auto& step : plan.steps) CHECK(step.is_wait());
}

TEST_CASE("sample matches the frozen seed-42 profile") {
  const auto dir = scratch_dir("sample");
  const auto r = run_cli({"sample", "--seed", "42", "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(read_file(dir / "profile_42.csv") == read_file(KIBAM_TEST_DATA "/golden_seed42_profile.csv"));
}

TEST_CASE("train and evaluate a small tree policy") {
  const auto dir = scratch_dir("train");
  const auto t = run_cli({"train", "--plans", "3", "--horizon", "30", "--folds", "3", "--out", dir.string()});
  CHECK(t.code == 0);
  REQUIRE(fs::exists(dir / "policy.tree"));
  CHECK(DecisionTree::parse(read_file(dir / "policy.tree")).batteries() == 2);

  const auto e = run_cli({"eval", "--policy", (dir / "policy.tree").string(), "--profiles", "3", "--horizon", "30",
                          "--baseline", "Vmax", "--csv-out", (dir / "eval.csv").string()});
  CHECK(e.code == 0);
  CHECK(e.out.rfind("profile,lifetime,switches\n", 0) == 0);
  CHECK(e.out.find("mean") != std::string::npos);
  CHECK(e.out.rfind(read_file(dir / "eval.csv"), 0) == 0);
  CHECK(e.out.find("# efficiency ratio") != std::string::npos);

  const auto hot = run_cli({"train", "--plans", "2", "--horizon", "20", "--folds", "2", "--one-hot", "true",
                            "--policy-out", (dir / "hot.tree").string()});
  CHECK(hot.code == 0);
  CHECK(DecisionTree::load(dir / "hot.tree").encoding() == ActiveEncoding::OneHot);
  CHECK(run_cli({"eval", "--policy", (dir / "hot.tree").string(), "--profiles", "2", "--horizon", "20"}).code == 0);

  const auto wrong = run_cli({"eval", "--policy", (dir / "policy.tree").string(), "--batteries", "3xB1",
                              "--profiles", "1", "--horizon", "10"});
  CHECK(wrong.code != 0);
}

TEST_CASE("state-of-charge command") {
  const auto r = run_cli({"soc", "--current", "0.208", "--noise", "0"});
  CHECK(r.code == 0);
  CHECK(r.out.find("rms error / cC") != std::string::npos);
}

TEST_CASE("bad invocations exit with code 2") {
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"fly"}).code == 2);
  CHECK(run_cli({"validate"}).code == 2);
  CHECK(run_cli({"plan"}).code == 2);
  CHECK(run_cli({"plan", "--benchmark", "CL_250", "--profile", "x.csv"}).code == 2);
  CHECK(run_cli({"plan", "--benchmark", "CL_250", "--stall", "-3"}).code == 2);
  CHECK(run_cli({"plan", "--benchmark", "CL_250", "--config", "/nonexistent/kibam.cfg"}).code == 2);
  CHECK(run_cli({"soc", "--current", "0"}).code == 2);
}

TEST_CASE("installed binary answers --help") {
  const std::string cmd = std::string("\"") + KIBAM_TOOL_PATH + "\" --help > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
}
