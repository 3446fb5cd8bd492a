#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kibam/battery_model.hpp"
#include "kibam/learner.hpp"
#include "kibam/load_profile.hpp"
#include "kibam/planner.hpp"
#include "kibam/policies.hpp"

namespace kibam::cli {

/// Settings shared by every command. Keys of the `key = value` config file
/// match the long flag names with dashes turned into underscores.
struct RunConfig {
  std::vector<BatteryParams> batteries{BatteryParams::B1(), BatteryParams::B1()};
  DurationSet durations;
  double delta = 0.01;           ///< policy decision period (min)
  double increment = 0.0;        ///< training sample spacing; 0 means delta
  double reference_delta = 0.005;  ///< decision period of the Vmax comparison run
  std::uint64_t seed = 1;        ///< first training-profile seed
  std::uint64_t eval_seed = 1001;
  std::size_t plans = 50;
  std::size_t profiles = 20;
  double horizon = 300.0;        ///< length of sampled profiles (min)
  StochasticLoadModel model;
  TreeConfig tree;
  ActiveEncoding encoding = ActiveEncoding::Index;
  std::size_t folds = 10;
  std::size_t stall = 20'000;
  std::size_t max_expansions = 5'000'000;
  double time_budget = 0.0;
  std::filesystem::path out = ".";
  std::size_t threads = 0;       ///< 0: KIBAM_THREADS or hardware concurrency

  double training_increment() const { return increment > 0.0 ? increment : delta; }
  SearchConfig search_config() const;
  std::size_t worker_threads() const;
  void validate() const;
};

/// Parses "<n>x<B1|B2|custom:C,c,kprime>", comma-separated groups allowed
/// (e.g. "1xB1,1xB2").
std::vector<BatteryParams> parse_batteries(const std::string& text);

/// Applies one setting; throws ParseError for unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Reads a `key = value` file (`#` starts a comment).
void load_config_file(RunConfig& config, const std::filesystem::path& path);

/// Where a command gets its load: a benchmark name or a profile file.
struct ProfileSource {
  std::string benchmark;
  std::filesystem::path file;

  LoadProfile load() const;  ///< throws InputError when neither or both are set
  std::string label() const;
};

struct PlanArgs {
  ProfileSource source;
  std::string goal;  ///< "lifetime", "finish" or "" for the profile's default
  int refine = -1;   ///< >= 0 runs discretise-and-validate with that many refinements
  std::filesystem::path plan_out;
};

struct ValidateArgs {
  ProfileSource source;
  std::filesystem::path plan;
  std::filesystem::path trace_csv;
};

struct SampleArgs {
  std::filesystem::path profile_out;
};

struct TrainArgs {
  std::filesystem::path policy_out;
  std::filesystem::path data_csv;
};

struct EvalArgs {
  std::string policy = "Vmax";  ///< builtin name or tree file
  std::vector<std::filesystem::path> profile_files;
  std::string baseline;         ///< optional builtin compared on the same profiles
  std::filesystem::path csv_out;
};

struct ReproduceArgs {
  std::string table;  ///< table1 | table2 | table4-desk
  bool long_running = false;
};

struct SocArgs {
  double current = 0.208;
  double noise = 0.02;
  double sample_period = 0.5;  ///< seconds
  std::filesystem::path trace_out;
  std::filesystem::path estimates_out;
};

/// Command bodies. Each returns the process exit code and writes results to
/// `out`; library errors propagate to run().
int cmd_plan(const RunConfig& config, const PlanArgs& args, std::ostream& out);
int cmd_validate(const RunConfig& config, const ValidateArgs& args, std::ostream& out);
int cmd_sample(const RunConfig& config, const SampleArgs& args, std::ostream& out);
int cmd_train(const RunConfig& config, const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& config, const EvalArgs& args, std::ostream& out);
int cmd_reproduce(const RunConfig& config, const ReproduceArgs& args, std::ostream& out);
int cmd_soc(const RunConfig& config, const SocArgs& args, std::ostream& out);

/// Pipeline pieces shared by train, eval and reproduce.
struct TrainingOutcome {
  DecisionTree tree;
  TrainingSet data;
  double cv_accuracy = -1.0;  ///< negative when skipped
  double mean_plan_efficiency = 0.0;
};
TrainingOutcome train_pipeline(const RunConfig& config, bool run_cv);
std::vector<LoadProfile> evaluation_profiles(const RunConfig& config);

struct EvalSummary {
  std::vector<double> lifetimes;
  std::vector<double> switches;
  double mean_lifetime = 0.0, sd_lifetime = 0.0, mean_switches = 0.0, sd_switches = 0.0;
};
EvalSummary evaluate(const Policy& policy, const std::vector<LoadProfile>& profiles,
                     const std::vector<BatteryParams>& batteries, double delta, std::size_t threads);

/// Full front end: parses argv and dispatches. Exit codes: 0 success,
/// 1 domain failure, 2 usage or parse error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kibam::cli
