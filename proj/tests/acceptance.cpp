#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kibam/battery_model.hpp"
#include "kibam/cli.hpp"
#include "kibam/learner.hpp"
#include "kibam/planner.hpp"
#include "kibam/policies.hpp"
#include "kibam/soc_estimator.hpp"
#include "kibam/validator.hpp"
#include "oracles.hpp"

using namespace kibam;

namespace {

// Pinned tolerances.
constexpr double kTraceTol = 1e-5;          // absolute, printed trace values
constexpr double kBoundTol = 0.01;          // relative, upper bounds
constexpr double kBoundSeconds = 10.0;
constexpr double kConstantEff = 0.99;
constexpr double kIntermittentEff = 0.98;
constexpr double kPlanSeconds = 60.0;
constexpr std::size_t kCoarseStates = 10;
constexpr std::size_t kFineStates = 242;
constexpr double kDeathTimeTol = 1e-4;      // minutes
constexpr double kCvAccuracy = 0.95;
constexpr std::size_t kMinRows = 10'000;
constexpr double kTrainSeconds = 300.0;
constexpr double kLifetimeRatio = 0.97;
constexpr double kSwitchRatio = 0.20;
constexpr double kNoiselessSoc = 0.02;      // relative to true available charge
constexpr double kNoisySoc = 0.05;          // RMS relative to c C

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Verdict {
  bool pass = true;
  std::string summary;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string num(double v, int decimals = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string pct(double v) { return num(100.0 * v, 2) + "%"; }

Verdict criterion1() {
  Verdict v;
  Clock clock;
  const auto p = BatteryParams::B1();
  // The happening: b1 rests and b2 serves 0.3 A for 0.1 min.
  const double b1 = evolve({2.74431, 5.0}, p, 0.0, 0.1).delta;
  const auto b2 = evolve({0.259121, 5.44}, p, 0.3, 0.1);
  v.check(std::abs(b1 - 2.71104) < kTraceTol, "delta b1 2.74431 -> " + num(b1, 7) + " (printed 2.71104)");
  v.check(std::abs(b2.delta - 0.435604) < kTraceTol, "delta b2 0.259121 -> " + num(b2.delta, 7) + " (printed 0.435604)");
  v.check(std::abs(b2.gamma - 5.41) < kTraceTol, "gamma b2 5.44 -> " + num(b2.gamma, 7) + " (printed 5.41)");
  const double t = clock.seconds();
  v.check(t < 1.0, "runtime " + num(t, 3) + " s < 1 s");
  v.summary = "analytic trace values within 1e-5";
  return v;
}

struct BoundRef {
  const char* profile;
  double two_b1, two_b2, eight_b2;
};

constexpr BoundRef kBoundRefs[] = {
    {"CL_250", 12.16, 46.92, 310.6},   {"CL_500", 4.59, 12.16, 134.7},     {"CL_alt", 7.03, 21.26, 192.8},
    {"ILs_250", 44.79, 132.8, 660.7},  {"ILs_500", 10.82, 44.79, 308.7},   {"ILs_alt", 16.95, 72.75, 424.8},
    {"ILl_250", 84.91, 216.9, 1008.9}, {"ILl_500", 21.86, 84.91, 480.9},
};

Verdict criterion2() {
  Verdict v;
  Clock clock;
  const std::vector<std::pair<std::string, std::vector<BatteryParams>>> banks{
      {"2xB1", {BatteryParams::B1(), BatteryParams::B1()}},
      {"2xB2", {BatteryParams::B2(), BatteryParams::B2()}},
      {"8xB2", std::vector<BatteryParams>(8, BatteryParams::B2())}};
  for (const auto& row : kBoundRefs) {
    const auto profile = make_benchmark(row.profile);
    const double refs[3] = {row.two_b1, row.two_b2, row.eight_b2};
    for (std::size_t b = 0; b < banks.size(); ++b) {
      const double ub = single_equivalent_lifetime(banks[b].second, profile);
      const double err = (ub - refs[b]) / refs[b];
      v.check(std::abs(err) <= kBoundTol, std::string(row.profile) + " " + banks[b].first + ": " + num(ub) +
                                              " vs " + num(refs[b], 2) + " (" + pct(err) + ")");
    }
  }
  const double t = clock.seconds();
  v.check(t < kBoundSeconds, "runtime " + num(t, 3) + " s < 10 s");
  v.summary = "upper bounds within 1% for 2xB1, 2xB2 and 8xB2";
  return v;
}

Verdict criterion3() {
  Verdict v;
  const std::vector<BatteryParams> two{BatteryParams::B1(), BatteryParams::B1()};
  for (const auto& name : benchmark_names()) {
    const auto profile = make_benchmark(name);
    const double bound = single_equivalent_lifetime(two, profile);
    Clock clock;
    const auto r = plan_search(profile, two);
    const double t = clock.seconds();
    const bool constant = name.rfind("CL", 0) == 0;
    const double need = constant ? kConstantEff : kIntermittentEff;
    const double eff = r.lifetime / bound;
    v.check(eff >= need && t < kPlanSeconds, name + ": plan " + num(r.lifetime) + " / bound " + num(bound) + " = " +
                                                 pct(eff) + " (need " + pct(need) + "), " + num(t, 2) + " s");
  }
  v.summary = "two-B1 plan efficiency (CL >= 99%, IL >= 98%, < 60 s each)";
  return v;
}

Verdict criterion4() {
  Verdict v;
  const LoadProfile profile({{1.0, 0.0}, {1.0, 1.0}, {0.4, 0.0}, {0.02, 1.0}}, false);
  const std::vector<BatteryParams> batteries{{3.04, 0.166, 0.02}, {5.0, 0.166, 0.02}};
  auto solve = [&](std::vector<double> d) {
    SearchConfig sc;
    sc.durations = DurationSet(std::move(d));
    sc.goal = Goal::FinishProfile;
    return Planner(profile, batteries, sc).search();
  };
  const auto coarse = solve({0.01, 0.4, 0.5, 1.0});
  const auto fine = solve({0.01});
  v.check(coarse.expansions <= kCoarseStates, "D={0.01,0.4,0.5,1.0}: " + std::to_string(coarse.expansions) +
                                                  " states visited (<= 10)");
  v.check(fine.expansions >= kFineStates, "D={0.01}: " + std::to_string(fine.expansions) + " states visited (>= 242)");
  v.check(validate(coarse.plan, profile, batteries).valid && validate(fine.plan, profile, batteries).valid,
          "both plans validate, lifetimes " + num(coarse.lifetime, 2) + " and " + num(fine.lifetime, 2));
  v.summary = "variable durations solve the walk-through in few states";
  return v;
}

Verdict criterion5() {
  Verdict v;
  std::size_t plans = 0, valid = 0, corrupted = 0, rejected = 0;
  double worst = 0.0;
  for (const auto& kind : {BatteryParams::B1(), BatteryParams::B2()}) {
    const std::vector<BatteryParams> two{kind, kind};
    for (const auto& name : benchmark_names()) {
      const auto profile = make_benchmark(name);
      const auto r = plan_search(profile, two);
      ++plans;
      valid += validate(r.plan, profile, two).valid;
      for (std::size_t k = 0; k < r.plan.steps.size(); k += 3) {
        const auto& step = r.plan.steps[k];
        if (step.is_wait()) continue;
        const auto b = static_cast<std::size_t>(step.battery);
        const auto before = oracle::states_before(r.plan, k, profile, two);
        const double death = oracle::death_under_profile(before[b], two[b], profile, step.start);
        Plan bad;
        bad.steps.assign(r.plan.steps.begin(), r.plan.steps.begin() + static_cast<long>(k) + 1);
        bad.steps.back().duration += 2.0 * (death - step.start);
        ++corrupted;
        const auto report = validate(bad, profile, two);
        for (const auto& issue : report.violations) {
          if (issue.kind != IssueKind::BatteryDeadDuringUse) continue;
          const double err = std::abs(issue.time - death);
          worst = std::max(worst, err);
          rejected += !report.valid && err < kDeathTimeTol;
          break;
        }
      }
    }
  }
  v.check(valid == plans, std::to_string(valid) + "/" + std::to_string(plans) + " benchmark plans validate");
  v.check(corrupted > 0 && rejected == corrupted, std::to_string(rejected) + "/" + std::to_string(corrupted) +
                                                      " death-extended plans rejected, worst time error " +
                                                      sci(worst) + " min");
  v.summary = "validator accepts planner output and rejects death-extended plans";
  return v;
}

cli::RunConfig learner_config(std::size_t batteries) {
  cli::RunConfig config;
  config.batteries.assign(batteries, BatteryParams::B1());
  return config;
}

Verdict criterion6() {
  Verdict v;
  Clock clock;
  const auto config = learner_config(2);
  const auto outcome = cli::train_pipeline(config, true);
  const double t = clock.seconds();
  v.check(outcome.data.size() >= kMinRows, std::to_string(outcome.data.size()) + " rows from " +
                                               std::to_string(config.plans) + " plans (>= 10000)");
  v.check(outcome.cv_accuracy >= kCvAccuracy, std::to_string(config.folds) + "-fold accuracy " +
                                                  pct(outcome.cv_accuracy) + " (>= 95%)");
  v.check(t < kTrainSeconds, "runtime " + num(t, 1) + " s < 300 s");
  v.summary = "tree learner cross-validation accuracy";
  return v;
}

Verdict criterion7(bool long_running) {
  Verdict v;
  std::vector<std::size_t> sizes{2};
  if (long_running) sizes.push_back(4);
  for (auto n : sizes) {
    const auto config = learner_config(n);
    const auto outcome = cli::train_pipeline(config, false);
    const PlanBasedPolicy policy(outcome.tree, default_epsilon(config.batteries, config.delta));
    const auto profiles = cli::evaluation_profiles(config);
    const auto learned = cli::evaluate(policy, profiles, config.batteries, config.delta, config.worker_threads());
    const auto vmax = cli::evaluate(BuiltinPolicy(BuiltinKind::Vmax), profiles, config.batteries,
                                    config.reference_delta, config.worker_threads());
    const double life = learned.mean_lifetime / vmax.mean_lifetime;
    const double sw = learned.mean_switches / vmax.mean_switches;
    const std::string tag = std::to_string(n) + " batteries, " + std::to_string(profiles.size()) + " profiles: ";
    v.check(life >= kLifetimeRatio, tag + "lifetime " + num(learned.mean_lifetime, 3) + " vs Vmax " +
                                        num(vmax.mean_lifetime, 3) + " = " + pct(life) + " (>= 97%)");
    v.check(sw <= kSwitchRatio, tag + "switches " + num(learned.mean_switches, 1) + " vs Vmax " +
                                    num(vmax.mean_switches, 1) + " = " + pct(sw) + " (<= 20%)");
  }
  v.summary = long_running ? "learned policy vs fast Vmax (2 and 4 batteries)"
                           : "learned policy vs fast Vmax (2 batteries)";
  return v;
}

Verdict criterion8() {
  Verdict v;
  // Battery model over 10,000 random states.
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t bad_conservation = 0, bad_semigroup = 0, bad_euler = 0;
  const int cases = 10'000;
  for (int n = 0; n < cases; ++n) {
    const BatteryParams p{1.0 + 19.0 * u(g), 0.05 + 0.9 * u(g), 0.01 + 2.0 * u(g)};
    BatteryState s;
    do {
      s = {u(g) * p.capacity / (1.0 - p.c), (0.05 + 0.95 * u(g)) * p.capacity};
    } while (death_margin(s, p) <= 1e-3);
    const double i = 2.0 * u(g), a = 3.0 * u(g), b = 3.0 * u(g);
    const auto s1 = evolve(s, p, i, a);
    bad_conservation += !(std::abs(available_charge(s1, p) + bound_charge(s1, p) - s1.gamma) <=
                              1e-12 * std::max(1.0, s1.gamma) &&
                          s1.gamma == s.gamma - i * a);
    const auto s2 = evolve(s1, p, i, b);
    const auto s3 = evolve(s, p, i, a + b);
    bad_semigroup += !(std::abs(s2.delta - s3.delta) <= 1e-10 * std::max(1.0, std::abs(s3.delta)) &&
                       std::abs(s2.gamma - s3.gamma) <= 1e-10 * std::max(1.0, std::abs(s3.gamma)));
    const double span = std::min(a, 0.05);
    const int steps = std::max(1, static_cast<int>(std::ceil(span / 1e-5)));
    const double h = span / steps;
    BatteryState e = s;
    for (int k = 0; k < steps; ++k) {
      e.delta += h * (i / p.c - p.k_prime * e.delta);
      e.gamma -= h * i;
    }
    const auto x = evolve(s, p, i, span);
    bad_euler += !(std::abs(e.delta - x.delta) <= 1e-3 * std::max(1e-3, std::abs(x.delta)) &&
                   std::abs(e.gamma - x.gamma) <= 1e-9 * std::max(1.0, std::abs(x.gamma)));
  }
  v.check(bad_conservation == 0, "charge conservation and exact drain: " + std::to_string(bad_conservation) +
                                     " failures in " + std::to_string(cases));
  v.check(bad_semigroup == 0, "semigroup: " + std::to_string(bad_semigroup) + " failures in " + std::to_string(cases));
  v.check(bad_euler == 0, "explicit Euler at 1e-5: " + std::to_string(bad_euler) + " failures in " +
                              std::to_string(cases));

  using namespace kibam::soc;
  const auto cp = CapacityParams::lead_acid();
  const auto vp = VoltageParams::lead_acid();
  const double hi = std::abs(qmax(cp, 1e6) - cp.C), lo = std::abs(qmax(cp, 1e-6) - cp.c * cp.C);
  v.check(hi < 1e-3 && lo < 1e-3, "qmax limits: |qmax(1e6) - C| = " + sci(hi) + ", |qmax(1e-6) - cC| = " + sci(lo));

  double worst_x = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double X = k / 99.0;
    worst_x = std::max(worst_x, std::abs(invert_voltage(vp, voltage_of(vp, X) - vp.v_emf) - X));
  }
  v.check(worst_x < 1e-9, "voltage inversion on 100 points: worst " + sci(worst_x));

  double worst_t = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double T = 0.25 + (20.0 - 0.25) * k / 49.0;
    const double Q = 0.208 * T;
    worst_t = std::max(worst_t, std::abs(solve_t_nom(cp, Q / qmax(cp, T), Q) - T));
  }
  v.check(worst_t < 1e-6, "nominal time on 50 points in [0.25, 20] h: worst " + sci(worst_t) + " h");

  TrainingSet data(2);
  std::mt19937_64 tg(88);
  double row[6];
  for (int n = 0; n < 3000; ++n) {
    for (auto& f : row) f = std::round(u(tg) * 1000.0) / 1000.0;
    data.add(row, row[0] > row[2] ? 1 : 2);
  }
  const auto tree = train(data);
  const auto copy = DecisionTree::parse(tree.render());
  int mismatches = 0;
  for (int n = 0; n < 10'000; ++n) {
    for (auto& f : row) f = -0.1 + 1.2 * u(tg);
    mismatches += tree.predict(row) != copy.predict(row);
  }
  v.check(mismatches == 0, "tree text round trip: " + std::to_string(mismatches) + " mismatches on 10000 inputs");
  v.summary = "property suites";
  return v;
}

Verdict criterion9() {
  using namespace kibam::soc;
  Verdict v;
  const auto cp = CapacityParams::lead_acid();
  const auto vp = VoltageParams::lead_acid();
  const LoadProfile profile({{1.5 * drain_time(cp, 0.208), 0.208}}, false);
  auto run = [&](double noise, double& worst_rel, double& worst_fs, double& rms_fs) {
    const auto trace = simulate_sensor_trace(cp, vp, kLeadAcidInternalResistance, profile, noise, 0.5, 1);
    SocEstimator est(cp, vp);
    double sq = 0.0;
    std::size_t n = 0;
    worst_rel = worst_fs = 0.0;
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
      const auto e = est.push(trace.samples[i]);
      const auto& truth = trace.truth[i];
      if (est.loaded_run() < 65 || truth.X >= 0.9) continue;
      const double err = std::abs(e.available - truth.available);
      worst_rel = std::max(worst_rel, err / truth.available);
      worst_fs = std::max(worst_fs, err / (cp.c * cp.C));
      sq += err * err;
      ++n;
    }
    rms_fs = std::sqrt(sq / static_cast<double>(n)) / (cp.c * cp.C);
  };
  double rel = 0.0, fs = 0.0, rms = 0.0;
  run(0.0, rel, fs, rms);
  v.check(rel <= kNoiselessSoc, "noiseless 0.208 A, X < 0.9: worst relative error " + pct(rel) + " (<= 2%)");
  run(0.02, rel, fs, rms);
  v.check(rms <= kNoisySoc, "0.02 V noise, 65-sample window: RMS error " + pct(rms) + " of cC (<= 5%); worst " +
                                pct(fs) + " of cC");
  v.summary = "closed-loop state-of-charge estimation";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  bool long_running = false;
  app.add_option("--criterion", only, "run a single criterion (1-9)")->check(CLI::Range(1, 9));
  app.add_flag("--long", long_running, "include the 4-battery policy evaluation");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Verdict()>> criteria{
      criterion1, criterion2, criterion3, criterion4, criterion5, criterion6,
      [&] { return criterion7(long_running); }, criterion8, criterion9};
  bool all = true;
  for (std::size_t n = 1; n <= criteria.size(); ++n) {
    if (only != 0 && static_cast<std::size_t>(only) != n) continue;
    Verdict v;
    try {
      v = criteria[n - 1]();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    all &= v.pass;
    std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.summary << "\n";
    for (const auto& d : v.details) std::cout << "    " << d << "\n";
    std::cout.flush();
  }
  return all ? 0 : 1;
}
