#include "kibam/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "kibam/format.hpp"
#include "kibam/policies.hpp"
#include "kibam/soc_estimator.hpp"
#include "kibam/validator.hpp"

namespace kibam::cli {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string pct(double v) { return fixed(100.0 * v, 2) + "%"; }

template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next++;
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  const double v = parse_decimal(value);
  if (v < 0 || v != std::floor(v) || v > 1e15) throw ParseError(key + " must be a nonnegative integer");
  return static_cast<std::size_t>(v);
}

std::uint64_t parse_seed(const std::string& key, const std::string& value) {
  const auto text = trim(value);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
    throw ParseError(key + " must be an unsigned 64-bit integer");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ParseError(key + " must be true or false");
}

struct SettingInfo {
  const char* key;
  const char* help;
  std::function<void(RunConfig&, const std::string&, const std::string&)> apply;
};

const std::vector<SettingInfo>& settings() {
  static const std::vector<SettingInfo> table{
      {"batteries", "battery bank, e.g. 2xB1, 8xB2, 2xcustom:5.5,0.166,0.122",
       [](RunConfig& c, const std::string&, const std::string& v) { c.batteries = parse_batteries(v); }},
      {"durations", "planner action durations in minutes, comma separated",
       [](RunConfig& c, const std::string&, const std::string& v) { c.durations = DurationSet::parse(v); }},
      {"delta", "policy decision period (min)",
       [](RunConfig& c, const std::string&, const std::string& v) { c.delta = parse_decimal(v); }},
      {"increment", "training sample spacing (min); defaults to delta",
       [](RunConfig& c, const std::string&, const std::string& v) { c.increment = parse_decimal(v); }},
      {"reference_delta", "decision period of the Vmax comparison run (min)",
       [](RunConfig& c, const std::string&, const std::string& v) { c.reference_delta = parse_decimal(v); }},
      {"seed", "first training-profile seed",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_seed(k, v); }},
      {"eval_seed", "first evaluation-profile seed",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.eval_seed = parse_seed(k, v); }},
      {"plans", "number of training plans",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.plans = parse_count(k, v); }},
      {"profiles", "number of evaluation profiles",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.profiles = parse_count(k, v); }},
      {"horizon", "length of sampled profiles (min)",
       [](RunConfig& c, const std::string&, const std::string& v) { c.horizon = parse_decimal(v); }},
      {"amplitude_low", "lowest load amplitude (A)",
       [](RunConfig& c, const std::string&, const std::string& v) { c.model.amplitude.low = parse_decimal(v); }},
      {"amplitude_mode", "most likely load amplitude (A)",
       [](RunConfig& c, const std::string&, const std::string& v) { c.model.amplitude.mode = parse_decimal(v); }},
      {"amplitude_high", "highest load amplitude (A)",
       [](RunConfig& c, const std::string&, const std::string& v) { c.model.amplitude.high = parse_decimal(v); }},
      {"duration_low", "shortest period (min)",
       [](RunConfig& c, const std::string&, const std::string& v) { c.model.duration.low = parse_decimal(v); }},
      {"duration_mode", "most likely period (min)",
       [](RunConfig& c, const std::string&, const std::string& v) { c.model.duration.mode = parse_decimal(v); }},
      {"duration_high", "longest period (min)",
       [](RunConfig& c, const std::string&, const std::string& v) { c.model.duration.high = parse_decimal(v); }},
      {"load_prob", "probability that a period carries load",
       [](RunConfig& c, const std::string&, const std::string& v) { c.model.load_prob = parse_decimal(v); }},
      {"min_leaf", "minimum rows per tree leaf",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.tree.min_leaf = parse_count(k, v); }},
      {"max_depth", "maximum tree depth",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.tree.max_depth = parse_count(k, v); }},
      {"prune", "pessimistic pruning (true/false)",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.tree.prune = parse_bool(k, v); }},
      {"gain_ratio", "split on gain ratio rather than plain gain (true/false)",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.tree.use_gain_ratio = parse_bool(k, v); }},
      {"one_hot", "encode the previously chosen battery as one indicator column per battery (true/false)",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.encoding = parse_bool(k, v) ? ActiveEncoding::OneHot : ActiveEncoding::Index;
       }},
      {"folds", "cross-validation folds",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.folds = parse_count(k, v); }},
      {"stall", "stop lifetime search after this many expansions without improvement (0: never)",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.stall = parse_count(k, v); }},
      {"max_expansions", "search node budget (0: unlimited)",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.max_expansions = parse_count(k, v); }},
      {"time_budget", "search wall-clock budget in seconds (0: unlimited)",
       [](RunConfig& c, const std::string&, const std::string& v) { c.time_budget = parse_decimal(v); }},
      {"out", "output directory",
       [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; }},
      {"threads", "worker threads (0: KIBAM_THREADS or all cores)",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.threads = parse_count(k, v); }},
  };
  return table;
}

std::filesystem::path output_path(const RunConfig& config, const std::filesystem::path& given, const char* name) {
  if (!given.empty()) return given;
  std::filesystem::create_directories(config.out);
  return config.out / name;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

std::string bound_text(const LoadProfile& profile, const std::vector<BatteryParams>& batteries) {
  try {
    return fixed(single_equivalent_lifetime(batteries, profile), 4);
  } catch (const MixedKinetics&) {
    return "n/a (mixed kinetics)";
  }
}

}  // namespace

SearchConfig RunConfig::search_config() const {
  SearchConfig sc;
  sc.durations = durations;
  sc.stall_expansions = stall;
  sc.max_expansions = max_expansions;
  sc.time_budget_seconds = time_budget;
  return sc;
}

std::size_t RunConfig::worker_threads() const {
  std::size_t n = std::max(1U, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("KIBAM_THREADS")) {
    try {
      const auto cap = parse_count("KIBAM_THREADS", env);
      if (cap > 0) n = std::min(n, cap);
    } catch (const ParseError&) {
    }
  }
  if (threads > 0) n = threads;
  return n;
}

void RunConfig::validate() const {
  if (batteries.empty()) throw InvalidArgument("at least one battery is required");
  for (const auto& b : batteries) b.validate();
  if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
  if (increment < 0.0) throw InvalidArgument("increment must be >= 0");
  if (!(reference_delta > 0.0)) throw InvalidArgument("reference_delta must be positive");
  if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
  if (folds < 2) throw InvalidArgument("folds must be >= 2");
  model.validate();
}

std::vector<BatteryParams> parse_batteries(const std::string& text) {
  std::vector<BatteryParams> out;
  std::string_view rest(text);
  // Groups are separated by commas that are followed by "<n>x"; custom
  // parameter lists contain commas too, so split on the group pattern.
  while (!rest.empty()) {
    rest = trim(rest);
    const auto x = rest.find('x');
    if (x == std::string_view::npos || x == 0) throw ParseError("battery bank must look like <n>x<kind>");
    const std::size_t count = parse_count("battery count", std::string(rest.substr(0, x)));
    if (count == 0 || count > 64) throw ParseError("battery count must be between 1 and 64");
    rest.remove_prefix(x + 1);
    std::size_t end = rest.size();
    for (std::size_t i = 0; i < rest.size(); ++i) {
      if (rest[i] != ',') continue;
      std::size_t j = i + 1;
      while (j < rest.size() && std::isdigit(static_cast<unsigned char>(rest[j]))) ++j;
      if (j > i + 1 && j < rest.size() && rest[j] == 'x') {
        end = i;
        break;
      }
    }
    const auto kind = parse_battery_kind(std::string(trim(rest.substr(0, end))));
    out.insert(out.end(), count, kind);
    rest.remove_prefix(end == rest.size() ? end : end + 1);
  }
  if (out.empty()) throw ParseError("empty battery bank");
  return out;
}

void apply_setting(RunConfig& config, const std::string& key_in, const std::string& value) {
  std::string key = key_in;
  std::replace(key.begin(), key.end(), '-', '_');
  for (const auto& s : settings()) {
    if (key == s.key) {
      try {
        s.apply(config, key, std::string(trim(value)));
      } catch (const InvalidArgument& e) {
        throw ParseError(key + ": " + e.what());
      }
      return;
    }
  }
  throw ParseError("unknown setting '" + key_in + "'");
}

void load_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    auto hash = line.find('#');
    std::string_view body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(path.string() + ":" + std::to_string(no) + ": expected 'key = value'");
    try {
      apply_setting(config, std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(no) + ": " + e.what());
    }
  }
}

LoadProfile ProfileSource::load() const {
  if (benchmark.empty() == file.empty()) throw InputError("give exactly one of --benchmark or --profile");
  return benchmark.empty() ? LoadProfile::load(file) : make_benchmark(benchmark);
}

std::string ProfileSource::label() const { return benchmark.empty() ? file.string() : benchmark; }

int cmd_plan(const RunConfig& config, const PlanArgs& args, std::ostream& out) {
  const auto profile = args.source.load();
  SearchConfig sc = config.search_config();
  if (args.goal == "finish")
    sc.goal = Goal::FinishProfile;
  else if (args.goal.empty() || args.goal == "lifetime")
    sc.goal = Goal::MaximizeLifetime;
  else
    throw InputError("goal must be 'lifetime' or 'finish'");

  SearchResult result;
  int refinements = -1;
  if (args.refine >= 0) {
    sc.dynamics = Dynamics::Stepped;
    auto refined = plan_and_validate(profile, config.batteries, config.durations, args.refine, sc);
    result = std::move(refined.search);
    refinements = refined.refinements_used;
  } else {
    try {
      result = Planner(profile, config.batteries, sc).search();
    } catch (const BudgetExhausted& e) {
      out << "search budget exhausted; best partial plan reaches t=" << fixed(e.best().lifetime, 4) << "\n";
      throw;
    }
  }
  const auto path = output_path(config, args.plan_out, "plan.txt");
  result.plan.save(path);
  out << "profile: " << args.source.label() << "\n";
  out << "batteries: " << config.batteries.size() << "\n";
  out << "upper bound: " << bound_text(profile, config.batteries) << "\n";
  out << "lifetime: " << fixed(result.lifetime, 4) << "\n";
  out << "visited states: " << result.expansions << " (best found after " << result.expansions_at_best << ")\n";
  out << "stop: " << to_string(result.stop) << "\n";
  if (refinements >= 0) out << "refinements used: " << refinements << "\n";
  out << "wall time: " << fixed(result.wall_seconds, 3) << " s\n";
  out << "plan: " << path.string() << " (" << result.plan.steps.size() << " steps)\n";
  return 0;
}

int cmd_validate(const RunConfig& config, const ValidateArgs& args, std::ostream& out) {
  const auto profile = args.source.load();
  const auto plan = Plan::load(args.plan);
  const auto report = validate(plan, profile, config.batteries);
  out << report.to_text();
  if (!args.trace_csv.empty()) write_file(args.trace_csv, report.trace_csv());
  return report.valid ? 0 : 1;
}

int cmd_sample(const RunConfig& config, const SampleArgs& args, std::ostream& out) {
  const auto profile = sample_profile(config.model.with_seed(config.seed), config.horizon);
  const auto path = output_path(config, args.profile_out, ("profile_" + std::to_string(config.seed) + ".csv").c_str());
  profile.save(path);
  double loaded = 0.0;
  for (const auto& s : profile.segments())
    if (s.current > 0.0) loaded += s.duration;
  out << "profile: " << path.string() << " (" << profile.segments().size() << " segments, "
      << fixed(profile.period(), 2) << " min, load " << pct(loaded / profile.period()) << " of the time)\n";
  return 0;
}

std::vector<LoadProfile> evaluation_profiles(const RunConfig& config) {
  std::vector<LoadProfile> profiles;
  for (std::size_t i = 0; i < config.profiles; ++i)
    profiles.push_back(sample_profile(config.model.with_seed(config.eval_seed + i), config.horizon));
  return profiles;
}

TrainingOutcome train_pipeline(const RunConfig& config, bool run_cv) {
  std::vector<PlanInstance> instances(config.plans);
  std::vector<double> efficiency(config.plans, 0.0);
  const auto sc = config.search_config();
  parallel_for(config.plans, config.worker_threads(), [&](std::size_t i) {
    auto profile = sample_profile(config.model.with_seed(config.seed + i), config.horizon);
    auto result = Planner(profile, config.batteries, sc).search();
    efficiency[i] = result.horizon > 0.0 ? result.lifetime / result.horizon : 1.0;
    instances[i] = {std::move(result.plan), std::move(profile)};
  });
  TrainingOutcome outcome;
  outcome.data = extract_training(instances, config.batteries, config.training_increment(), config.encoding);
  outcome.tree = train(outcome.data, config.tree);
  if (run_cv && outcome.data.size() >= config.folds)
    outcome.cv_accuracy = cross_validate(outcome.data, config.folds, config.tree, config.seed);
  double sum = 0.0;
  for (double e : efficiency) sum += e;
  outcome.mean_plan_efficiency = config.plans ? sum / static_cast<double>(config.plans) : 0.0;
  return outcome;
}

int cmd_train(const RunConfig& config, const TrainArgs& args, std::ostream& out, std::ostream& err) {
  if (config.plans == 0) throw InputError("plans must be at least 1");
  const auto outcome = train_pipeline(config, true);
  if (outcome.data.size() < 1000)
    err << "warning: only " << outcome.data.size() << " training rows; the tree will be crude\n";
  if (outcome.cv_accuracy < 0.0)
    err << "warning: fewer rows than folds; cross-validation skipped\n";
  const auto path = output_path(config, args.policy_out, "policy.tree");
  outcome.tree.save(path);
  if (!args.data_csv.empty()) write_file(args.data_csv, outcome.data.to_csv());
  out << "plans: " << config.plans << " (mean efficiency vs bound " << pct(outcome.mean_plan_efficiency) << ")\n";
  out << "rows: " << outcome.data.size() << "\n";
  out << "depth: " << outcome.tree.depth() << "\n";
  out << "nodes: " << outcome.tree.node_count() << "\n";
  out << "cv accuracy: " << (outcome.cv_accuracy < 0.0 ? std::string("n/a") : pct(outcome.cv_accuracy)) << " ("
      << config.folds << "-fold)\n";
  out << "policy: " << path.string() << "\n";
  return 0;
}

EvalSummary evaluate(const Policy& policy, const std::vector<LoadProfile>& profiles,
                     const std::vector<BatteryParams>& batteries, double delta, std::size_t threads) {
  EvalSummary s;
  s.lifetimes.resize(profiles.size());
  s.switches.resize(profiles.size());
  RolloutOptions options;
  options.delta = delta;
  parallel_for(profiles.size(), threads, [&](std::size_t i) {
    const auto r = rollout(policy, profiles[i], batteries, options);
    s.lifetimes[i] = r.lifetime;
    s.switches[i] = static_cast<double>(r.switches);
  });
  auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = sd = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
  };
  stats(s.lifetimes, s.mean_lifetime, s.sd_lifetime);
  stats(s.switches, s.mean_switches, s.sd_switches);
  return s;
}

namespace {

std::unique_ptr<Policy> load_policy(const std::string& spec, const RunConfig& config) {
  try {
    return std::make_unique<BuiltinPolicy>(parse_builtin_kind(spec));
  } catch (const ParseError&) {
  }
  auto tree = DecisionTree::load(spec);
  if (tree.batteries() != config.batteries.size())
    throw ArityMismatch("policy was trained for " + std::to_string(tree.batteries()) + " batteries, config has " +
                        std::to_string(config.batteries.size()));
  return std::make_unique<PlanBasedPolicy>(std::move(tree), default_epsilon(config.batteries, config.delta));
}

}  // namespace

int cmd_eval(const RunConfig& config, const EvalArgs& args, std::ostream& out) {
  const auto policy = load_policy(args.policy, config);
  std::vector<LoadProfile> profiles;
  std::vector<std::string> names;
  if (!args.profile_files.empty()) {
    for (const auto& f : args.profile_files) {
      profiles.push_back(LoadProfile::load(f));
      names.push_back(f.filename().string());
    }
  } else {
    profiles = evaluation_profiles(config);
    for (std::size_t i = 0; i < profiles.size(); ++i) names.push_back("seed" + std::to_string(config.eval_seed + i));
  }
  const auto summary = evaluate(*policy, profiles, config.batteries, config.delta, config.worker_threads());
  std::string csv = "profile,lifetime,switches\n";
  for (std::size_t i = 0; i < profiles.size(); ++i)
    csv += names[i] + "," + fixed(summary.lifetimes[i], 4) + "," + fixed(summary.switches[i], 0) + "\n";
  if (!profiles.empty()) {
    csv += "mean," + fixed(summary.mean_lifetime, 4) + "," + fixed(summary.mean_switches, 2) + "\n";
    csv += "stddev," + fixed(summary.sd_lifetime, 4) + "," + fixed(summary.sd_switches, 2) + "\n";
  }
  out << csv;
  if (!args.csv_out.empty()) write_file(args.csv_out, csv);
  if (!args.baseline.empty() && !profiles.empty()) {
    BuiltinPolicy baseline(parse_builtin_kind(args.baseline));
    const auto base =
        evaluate(baseline, profiles, config.batteries, config.reference_delta, config.worker_threads());
    out << "# " << policy->name() << " (delta " << format_decimal(config.delta) << "): lifetime "
        << fixed(summary.mean_lifetime, 3) << " (" << fixed(summary.sd_lifetime, 3) << "), switches "
        << fixed(summary.mean_switches, 1) << " (" << fixed(summary.sd_switches, 1) << ")\n";
    out << "# " << baseline.name() << " (delta " << format_decimal(config.reference_delta) << "): lifetime "
        << fixed(base.mean_lifetime, 3) << " (" << fixed(base.sd_lifetime, 3) << "), switches "
        << fixed(base.mean_switches, 1) << " (" << fixed(base.sd_switches, 1) << ")\n";
    out << "# efficiency ratio: "
        << (base.mean_lifetime > 0 ? pct(summary.mean_lifetime / base.mean_lifetime) : std::string("n/a"))
        << ", switch ratio: "
        << (base.mean_switches > 0 ? pct(summary.mean_switches / base.mean_switches) : std::string("n/a")) << "\n";
  }
  return 0;
}

namespace {

struct Table1Row {
  const char* profile;
  double ub_b1, ub_b2, plan_b1, plan_b2;
  int states_b1, states_b2;
};

// Reference lifetimes (minutes) and visited-state counts for two-battery
// systems; IL entries assume 1-minute jobs.
constexpr Table1Row kTable1[] = {
    {"CL_250", 12.16, 46.92, 12.14, 46.91, 194, 691},   {"CL_500", 4.59, 12.16, 4.59, 12.14, 116, 194},
    {"CL_alt", 7.03, 21.26, 7.03, 21.2, 136, 350},      {"ILs_250", 44.79, 132.8, 44.76, 132.7, 552, 1068},
    {"ILs_500", 10.82, 44.79, 10.8, 44.76, 131, 552},   {"ILs_alt", 16.95, 72.75, 16.92, 72.55, 159, 599},
    {"ILl_250", 84.91, 216.9, 84.88, 216.8, 488, 1123}, {"ILl_500", 21.86, 84.91, 21.85, 84.88, 173, 488},
};

struct Table2Row {
  const char* profile;
  double ub;
  int ub_switches;
  double plan;
  int plan_switches;
};

// Eight B2 batteries.
constexpr Table2Row kTable2[] = {
    {"CL_250", 310.6, 31072, 307.6, 485},   {"CL_500", 134.7, 13472, 133.4, 266},
    {"CL_alt", 192.8, 19280, 190.8, 355},   {"ILs_250", 660.7, 33076, 654.1, 495},
    {"ILs_500", 308.7, 15476, 305.7, 293},  {"ILs_alt", 424.8, 21280, 420.6, 357},
    {"ILl_250", 1008.9, 33692, 998.8, 471}, {"ILl_500", 480.9, 16090, 476.1, 295},
};

std::string rel(double computed, double reference) { return pct((computed - reference) / reference); }

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

void reproduce_table1(const RunConfig& config, std::ostream& out) {
  out << "Two-battery lifetimes (min): reference vs computed\n";
  out << pad("profile", 9) << pad("bank", 6) << pad("bound ref", 11) << pad("bound", 11) << pad("err", 9)
      << pad("plan ref", 10) << pad("plan", 10) << pad("err", 9) << pad("eff", 9) << pad("states ref", 12)
      << pad("to best", 9) << "expanded\n";
  for (const auto& row : kTable1) {
    for (int kind = 0; kind < 2; ++kind) {
      const auto b = kind == 0 ? BatteryParams::B1() : BatteryParams::B2();
      const std::vector<BatteryParams> bank{b, b};
      const auto profile = make_benchmark(row.profile);
      const double ub = single_equivalent_lifetime(bank, profile);
      const auto r = Planner(profile, bank, config.search_config()).search();
      const double ub_ref = kind == 0 ? row.ub_b1 : row.ub_b2;
      const double plan_ref = kind == 0 ? row.plan_b1 : row.plan_b2;
      out << pad(row.profile, 9) << pad(kind == 0 ? "2xB1" : "2xB2", 6) << pad(fixed(ub_ref, 2), 11)
          << pad(fixed(ub, 3), 11) << pad(rel(ub, ub_ref), 9) << pad(fixed(plan_ref, 2), 10)
          << pad(fixed(r.lifetime, 2), 10) << pad(rel(r.lifetime, plan_ref), 9) << pad(pct(r.lifetime / ub), 9)
          << pad(std::to_string(kind == 0 ? row.states_b1 : row.states_b2), 12)
          << pad(std::to_string(r.expansions_at_best), 9) << r.expansions << "\n";
    }
  }
}

void reproduce_table2(const RunConfig& config, bool long_running, std::ostream& out) {
  const std::vector<BatteryParams> bank(8, BatteryParams::B2());
  out << "Eight-battery (B2) lifetimes (min): reference vs computed\n";
  out << pad("profile", 9) << pad("bound ref", 11) << pad("bound", 11) << pad("err", 9) << pad("Vmax@" +
      format_decimal(config.reference_delta), 12) << pad("switches", 10);
  if (long_running) out << pad("plan ref", 10) << pad("plan", 10) << pad("eff", 9) << "switches";
  out << "\n";
  for (const auto& row : kTable2) {
    const auto profile = make_benchmark(row.profile);
    const double ub = single_equivalent_lifetime(bank, profile);
    const auto vm = vmax_reference(profile, bank, config.reference_delta);
    out << pad(row.profile, 9) << pad(fixed(row.ub, 1), 11) << pad(fixed(ub, 3), 11) << pad(rel(ub, row.ub), 9)
        << pad(fixed(vm.lifetime, 2), 12) << pad(std::to_string(vm.switches), 10);
    if (long_running) {
      const auto r = Planner(profile, bank, config.search_config()).search();
      std::size_t switches = 0;
      int last = -1;
      for (const auto& s : r.plan.steps) {
        if (s.battery < 0) continue;
        if (last >= 0 && s.battery != last) ++switches;
        last = s.battery;
      }
      out << pad(fixed(row.plan, 1), 10) << pad(fixed(r.lifetime, 2), 10) << pad(pct(r.lifetime / ub), 9)
          << switches;
    }
    out << "\n";
  }
  if (!long_running) out << "(plans for eight batteries run with --long)\n";
}

void reproduce_table4(const RunConfig& base, bool long_running, std::ostream& out) {
  std::vector<std::size_t> sizes{base.batteries.size()};
  if (long_running && base.batteries.size() != 4) sizes.push_back(4);
  out << "Learned policy vs Vmax on held-out stochastic profiles (desk scale)\n";
  for (auto n : sizes) {
    RunConfig config = base;
    config.batteries.assign(n, base.batteries.front());
    const auto outcome = train_pipeline(config, true);
    PlanBasedPolicy policy(outcome.tree, default_epsilon(config.batteries, config.delta));
    const auto profiles = evaluation_profiles(config);
    const auto learned = evaluate(policy, profiles, config.batteries, config.delta, config.worker_threads());
    const auto vmax = evaluate(BuiltinPolicy(BuiltinKind::Vmax), profiles, config.batteries, config.reference_delta,
                               config.worker_threads());
    out << n << " batteries: " << config.plans << " training plans, " << outcome.data.size() << " rows, tree depth "
        << outcome.tree.depth() << ", " << outcome.tree.node_count() << " nodes, cv accuracy "
        << (outcome.cv_accuracy < 0 ? std::string("n/a") : pct(outcome.cv_accuracy)) << "\n";
    out << "  Vmax@" << format_decimal(config.reference_delta) << ": lifetime " << fixed(vmax.mean_lifetime, 3) << " ("
        << fixed(vmax.sd_lifetime, 3) << "), switches " << fixed(vmax.mean_switches, 1) << " ("
        << fixed(vmax.sd_switches, 1) << ")\n";
    out << "  learned@" << format_decimal(config.delta) << ": lifetime " << fixed(learned.mean_lifetime, 3) << " ("
        << fixed(learned.sd_lifetime, 3) << "), switches " << fixed(learned.mean_switches, 1) << " ("
        << fixed(learned.sd_switches, 1) << ")\n";
    out << "  lifetime ratio " << pct(learned.mean_lifetime / vmax.mean_lifetime) << ", switch ratio "
        << pct(vmax.mean_switches > 0 ? learned.mean_switches / vmax.mean_switches : 0.0) << "\n";
  }
  out << "Eight-battery reference (not recomputed): R100 786.2 vs bound 792.6, 1667 vs 71383 switches; R250 366.7 vs "
         "369.8, 1518 vs 28952; R500 224.6 vs 226.7, 987 vs 14671; R750 186.4 vs 188.3, 302 vs 11519\n";
}

}  // namespace

int cmd_reproduce(const RunConfig& config, const ReproduceArgs& args, std::ostream& out) {
  if (args.table == "table1")
    reproduce_table1(config, out);
  else if (args.table == "table2")
    reproduce_table2(config, args.long_running, out);
  else if (args.table == "table4-desk")
    reproduce_table4(config, args.long_running, out);
  else
    throw InputError("unknown table '" + args.table + "' (table1, table2, table4-desk)");
  return 0;
}

int cmd_soc(const RunConfig& config, const SocArgs& args, std::ostream& out) {
  using namespace kibam::soc;
  const auto cp = CapacityParams::lead_acid();
  const auto vp = VoltageParams::lead_acid();
  if (!(args.current > 0.0)) throw InputError("current must be positive");
  const double hours = 1.5 * drain_time(cp, args.current);
  const LoadProfile profile({{hours, args.current}}, false);
  const auto trace = simulate_sensor_trace(cp, vp, kLeadAcidInternalResistance, profile, args.noise,
                                           args.sample_period, config.seed);
  SocEstimator estimator(cp, vp);
  std::vector<SocEstimate> estimates;
  double worst_rel = 0.0, worst_fs = 0.0, sq = 0.0;
  std::size_t counted = 0, fallbacks = 0;
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    estimates.push_back(estimator.push(trace.samples[i]));
    const auto& e = estimates.back();
    const auto& truth = trace.truth[i];
    if (estimator.loaded_run() < 65 || truth.X >= 0.9) continue;
    fallbacks += e.fallback;
    const double err = std::abs(e.available - truth.available);
    worst_rel = std::max(worst_rel, err / truth.available);
    worst_fs = std::max(worst_fs, err / (cp.c * cp.C));
    sq += err * err;
    ++counted;
  }
  out << "samples: " << trace.samples.size() << " (" << fixed(trace.samples.empty() ? 0.0 : trace.samples.back().t, 3)
      << " h)\n";
  out << "evaluated (X < 0.9): " << counted << ", fallback " << fallbacks << "\n";
  out << "max relative error: " << pct(worst_rel) << "\n";
  out << "max error / cC: " << pct(worst_fs) << "\n";
  out << "rms error / cC: " << pct(counted ? std::sqrt(sq / static_cast<double>(counted)) / (cp.c * cp.C) : 0.0)
      << "\n";
  if (!args.trace_out.empty()) write_file(args.trace_out, trace.to_csv());
  if (!args.estimates_out.empty()) write_file(args.estimates_out, estimates_csv(estimates));
  return 0;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiple-battery load scheduling: planning, validation, policy learning and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  app.add_option("--config", config_path, "settings file with 'key = value' lines");
  for (const auto& s : settings()) {
    std::string flag = std::string("--") + s.key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const std::string key = s.key;
    app.add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); }, s.help);
  }

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "search a switching plan for a load profile");
  plan->add_option("--benchmark", plan_args.source.benchmark, "benchmark name (CL_250, ILs_alt, ...)");
  plan->add_option("--profile", plan_args.source.file, "profile file");
  plan->add_option("--goal", plan_args.goal, "lifetime (default) or finish");
  plan->add_option("--refine", plan_args.refine, "discretise-and-validate with up to N refinements");
  plan->add_option("--plan-out", plan_args.plan_out, "plan file (default <out>/plan.txt)");

  ValidateArgs validate_args;
  auto* val = app.add_subcommand("validate", "check a plan against the exact battery model");
  val->add_option("--plan", validate_args.plan, "plan file")->required();
  val->add_option("--benchmark", validate_args.source.benchmark, "benchmark name");
  val->add_option("--profile", validate_args.source.file, "profile file");
  val->add_option("--trace-csv", validate_args.trace_csv, "write the happening trace as CSV");

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "draw a stochastic load profile");
  sample->add_option("--profile-out", sample_args.profile_out, "profile file (default <out>/profile_<seed>.csv)");

  TrainArgs train_args;
  auto* trn = app.add_subcommand("train", "plan sampled profiles, extract rows and learn a tree policy");
  trn->add_option("--policy-out", train_args.policy_out, "tree file (default <out>/policy.tree)");
  trn->add_option("--data-csv", train_args.data_csv, "also write the training rows");

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "roll a policy out over profiles");
  ev->add_option("--policy", eval_args.policy, "Vmax, Vmin, Tmax, Tmin, Sequential or a tree file");
  ev->add_option("--profile-files", eval_args.profile_files, "profile files (default: sampled from the model)");
  ev->add_option("--baseline", eval_args.baseline, "builtin policy to compare against at reference_delta");
  ev->add_option("--csv-out", eval_args.csv_out, "also write the CSV to this file");

  ReproduceArgs repro_args;
  auto* rep = app.add_subcommand("reproduce", "recompute the reference tables");
  rep->add_option("table", repro_args.table, "table1, table2 or table4-desk")->required();
  rep->add_flag("--long", repro_args.long_running, "include the long-running parts");

  SocArgs soc_args;
  auto* socc = app.add_subcommand("soc", "closed-loop state-of-charge estimation on a simulated discharge");
  socc->add_option("--current", soc_args.current, "constant discharge current (A)");
  socc->add_option("--noise", soc_args.noise, "voltage noise sigma (V)");
  socc->add_option("--sample-period", soc_args.sample_period, "seconds between samples");
  socc->add_option("--trace-out", soc_args.trace_out, "sensor trace CSV");
  socc->add_option("--estimates-out", soc_args.estimates_out, "estimate log CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) load_config_file(config, config_path);
    for (const auto& [key, value] : overrides) apply_setting(config, key, value);
    config.validate();
    if (plan->parsed()) return cmd_plan(config, plan_args, out);
    if (val->parsed()) return cmd_validate(config, validate_args, out);
    if (sample->parsed()) return cmd_sample(config, sample_args, out);
    if (trn->parsed()) return cmd_train(config, train_args, out, err);
    if (ev->parsed()) return cmd_eval(config, eval_args, out);
    if (rep->parsed()) return cmd_reproduce(config, repro_args, out);
    if (socc->parsed()) return cmd_soc(config, soc_args, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace kibam::cli
