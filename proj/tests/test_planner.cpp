#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "kibam/planner.hpp"
#include "kibam/validator.hpp"

using namespace kibam;

namespace {

// Walk-through instance: idle 1, load 1, idle 0.4, load 0.02 at 1 A. b1 can
// serve 0.5 min fresh but only a fraction of the last 0.02 min after resting.
LoadProfile walkthrough_profile() { return LoadProfile({{1.0, 0.0}, {1.0, 1.0}, {0.4, 0.0}, {0.02, 1.0}}, false); }
std::vector<BatteryParams> walkthrough_batteries() { return {{3.04, 0.166, 0.02}, {5.0, 0.166, 0.02}}; }

SearchConfig finish(std::vector<double> d, double horizon = 0.0) {
  SearchConfig sc;
  sc.goal = Goal::FinishProfile;
  sc.horizon = horizon;
  sc.durations = DurationSet(std::move(d));
  return sc;
}

const SearchState& state_of(const std::variant<SearchState, Violation>& v) {
  REQUIRE(std::holds_alternative<SearchState>(v));
  return std::get<SearchState>(v);
}

std::size_t index_of(const DurationSet& d, double minutes) {
  const auto& m = d.minutes();
  return static_cast<std::size_t>(std::find(m.begin(), m.end(), minutes) - m.begin());
}

}  // namespace

TEST_CASE("walk-through instance matches its stated assumptions") {
  const auto b = walkthrough_batteries();
  const auto b1_fresh = *time_to_death(BatteryState::fresh(b[0]), b[0], 1.0);
  CHECK(b1_fresh > 0.5);
  CHECK(b1_fresh < 1.0);
  const auto b2_fresh = *time_to_death(BatteryState::fresh(b[1]), b[1], 1.0);
  CHECK(b2_fresh > 0.51);
  CHECK(b2_fresh < 1.0);
  auto s = advance(BatteryState::fresh(b[0]), b[0], 1.0, 0.5);
  s = evolve(s, b[0], 0.0, 0.9);
  const auto rest = *time_to_death(s, b[0], 1.0);
  CHECK(rest >= 0.01);
  CHECK(rest < 0.02);
}

TEST_CASE("variable durations solve the walk-through in a handful of states") {
  const auto profile = walkthrough_profile();
  const auto batteries = walkthrough_batteries();
  const auto coarse = Planner(profile, batteries, finish({0.01, 0.4, 0.5, 1.0})).search();
  CHECK(coarse.expansions <= 10);
  CHECK(coarse.expansions == 6);
  CHECK(coarse.lifetime == doctest::Approx(2.42));
  CHECK(coarse.plan.to_text() ==
        "0.00: (wait) [1.00]\n1.00: (use b1) [0.50]\n1.50: (use b2) [0.50]\n2.00: (wait) [0.40]\n"
        "2.40: (use b1) [0.01]\n2.41: (use b2) [0.01]\n");
  CHECK(validate(coarse.plan, profile, batteries).valid);

  const auto fine = Planner(profile, batteries, finish({0.01})).search();
  CHECK(fine.expansions >= 242);
  CHECK(validate(fine.plan, profile, batteries).valid);
}

TEST_CASE("walk-through transitions") {
  const auto profile = walkthrough_profile();
  const auto batteries = walkthrough_batteries();
  const Planner planner(profile, batteries, finish({0.01, 0.4, 0.5, 1.0}));
  const auto& D = planner.config().durations;
  const auto s0 = planner.initial_state();

  // Step 1: rest for a minute.
  const auto s1 = state_of(planner.transition(s0, {kWait, index_of(D, 1.0)}));
  CHECK(s1.t() == 1.0);
  CHECK(s1.batteries[0] == BatteryState::fresh(batteries[0]));

  // Step 2: b1 cannot last the full minute.
  const auto dead = planner.transition(s1, {0, index_of(D, 1.0)});
  REQUIRE(std::holds_alternative<Violation>(dead));
  CHECK(std::get<Violation>(dead).kind == ViolationKind::BatteryDead);
  CHECK(std::get<Violation>(dead).time ==
        doctest::Approx(1.0 + *time_to_death(BatteryState::fresh(batteries[0]), batteries[0], 1.0)).epsilon(1e-9));
  const auto s2 = state_of(planner.transition(s1, {0, index_of(D, 0.5)}));

  // Step 3: b2 for a minute would serve a zero load.
  const auto idle = planner.transition(s2, {1, index_of(D, 1.0)});
  REQUIRE(std::holds_alternative<Violation>(idle));
  CHECK(std::get<Violation>(idle).kind == ViolationKind::NotOptimal);
  const auto s3 = state_of(planner.transition(s2, {1, index_of(D, 0.5)}));

  // Step 4: resting 0.5 runs into the next load.
  const auto disaster = planner.transition(s3, {kWait, index_of(D, 0.5)});
  REQUIRE(std::holds_alternative<Violation>(disaster));
  CHECK(std::get<Violation>(disaster).kind == ViolationKind::Disaster);
  CHECK(std::get<Violation>(disaster).time == doctest::Approx(2.4));
  const auto s4 = state_of(planner.transition(s3, {kWait, index_of(D, 0.4)}));
  CHECK(s4.t() == doctest::Approx(2.4));

  // Step 5: b1 can serve 0.01 but not 0.02.
  CHECK(std::holds_alternative<SearchState>(planner.transition(s4, {0, index_of(D, 0.01)})));
}

TEST_CASE("heuristic is elapsed time plus available charge") {
  const std::vector<BatteryParams> two{BatteryParams::B1(), BatteryParams::B1()};
  const Planner planner(make_benchmark("CL_250"), two);
  auto s = planner.initial_state();
  CHECK(planner.heuristic(s) == doctest::Approx(1.826));
  auto later = s;
  later.t_ticks += to_ticks(0.5);
  CHECK(planner.heuristic(later) > planner.heuristic(s));
  auto dead = s;
  for (auto& b : dead.batteries) b = {4.0, (1.0 - 0.166) * 4.0};
  dead.t_ticks = to_ticks(7.0);
  CHECK(planner.heuristic(dead) == doctest::Approx(7.0));
}

TEST_CASE("symmetry rule on enabled moves") {
  const std::vector<BatteryParams> two{BatteryParams::B2(), BatteryParams::B2()};
  const Planner planner(make_benchmark("CL_250"), two, finish({0.01, 0.4, 0.5, 1.0}, 20.0));
  const auto& D = planner.config().durations;

  const auto fresh = planner.enabled(planner.initial_state());
  CHECK(fresh.size() == 8);  // two batteries x four durations; no wait under load

  auto s = state_of(planner.transition(planner.initial_state(), {0, index_of(D, 0.5)}));
  const auto moves = planner.enabled(s);
  std::vector<double> same, other;
  for (const auto& m : moves) (m.action == 0 ? same : other).push_back(D.minutes()[m.duration]);
  std::sort(same.begin(), same.end());
  std::sort(other.begin(), other.end());
  CHECK(same == std::vector<double>{0.01, 0.4, 0.5});
  CHECK(other == std::vector<double>{0.01, 0.4, 0.5, 1.0});

  // A second 0.5 fills the run up to the next larger duration.
  s = state_of(planner.transition(s, {0, index_of(D, 0.5)}));
  bool repeat_half = false;
  for (const auto& m : planner.enabled(s)) repeat_half |= m.action == 0 && D.minutes()[m.duration] == 0.5;
  CHECK_FALSE(repeat_half);

  // The largest duration repeats freely.
  auto l = state_of(planner.transition(planner.initial_state(), {0, index_of(D, 1.0)}));
  for (int k = 0; k < 3; ++k) {
    bool again = false;
    for (const auto& m : planner.enabled(l)) again |= m.action == 0 && D.minutes()[m.duration] == 1.0;
    CHECK(again);
    l = state_of(planner.transition(l, {0, index_of(D, 1.0)}));
  }

  // Without load only waiting is enabled, at every duration.
  const Planner idle(LoadProfile({{5.0, 0.0}}, false), two, finish({0.01, 0.4, 0.5, 1.0}));
  const auto waits = idle.enabled(idle.initial_state());
  CHECK(waits.size() == 4);
  for (const auto& m : waits) CHECK(m.action == kWait);
}

TEST_CASE("zero-load profile yields a wait plan") {
  const std::vector<BatteryParams> two{BatteryParams::B1(), BatteryParams::B1()};
  const LoadProfile idle({{10.0, 0.0}}, false);
  for (auto goal : {Goal::FinishProfile, Goal::MaximizeLifetime}) {
    SearchConfig sc;
    sc.goal = goal;
    const auto r = Planner(idle, two, sc).search();
    CHECK(r.lifetime == doctest::Approx(10.0));
    for (const auto& step : r.plan.steps) CHECK(step.is_wait());
    CHECK(r.expansions >= 10);
    CHECK(r.expansions <= 12);
    CHECK(validate(r.plan, idle, two).valid);
  }
}

TEST_CASE("two B1 on CL_250 reaches near the bound") {
  const std::vector<BatteryParams> two{BatteryParams::B1(), BatteryParams::B1()};
  const auto profile = make_benchmark("CL_250");
  const auto r = plan_search(profile, two);
  CHECK(r.lifetime >= 12.04);
  CHECK(r.lifetime <= single_equivalent_lifetime(two, profile) + 1e-6);
  CHECK(validate(r.plan, profile, two).valid);
}

TEST_CASE("unsolvable finish goal") {
  const std::vector<BatteryParams> one{BatteryParams::B1()};
  SearchConfig sc;
  sc.goal = Goal::FinishProfile;
  CHECK_THROWS_AS(plan_search(LoadProfile({{30.0, 0.5}}, false), one, sc), Unsolvable);
}

TEST_CASE("benchmark plans are valid, dominated by the bound and contiguous") {
  for (const auto& kind : {BatteryParams::B1(), BatteryParams::B2()}) {
    const std::vector<BatteryParams> two{kind, kind};
    for (const auto& name : benchmark_names()) {
      CAPTURE(name);
      const auto profile = make_benchmark(name);
      const auto r = plan_search(profile, two);
      CHECK(validate(r.plan, profile, two).valid);
      CHECK(r.lifetime <= single_equivalent_lifetime(two, profile) + 1e-6);
      double t = 0.0;
      for (const auto& step : r.plan.steps) {
        CHECK(step.start == doctest::Approx(t).epsilon(1e-12));
        t = step.start + step.duration;
      }
      CHECK(r.plan.end() == doctest::Approx(r.lifetime));
    }
  }
}

TEST_CASE("states with equal keys have equal futures") {
  const std::vector<BatteryParams> two{BatteryParams::B1(), BatteryParams::B1()};
  const Planner planner(make_benchmark("ILs_alt"), two);
  const auto& D = planner.config().durations;
  std::mt19937_64 g(5);
  for (int trial = 0; trial < 50; ++trial) {
    // Same physical state reached through one long step or two halves.
    const int b = static_cast<int>(g() % 2);
    auto a = state_of(planner.transition(planner.initial_state(), {b, index_of(D, 0.25)}));
    a = state_of(planner.transition(a, {b, index_of(D, 0.25)}));
    auto c = state_of(planner.transition(planner.initial_state(), {b, index_of(D, 0.5)}));
    REQUIRE(planner.dedup_key(a) == planner.dedup_key(c));
    for (int step = 0; step < 20; ++step) {
      const auto moves = planner.enabled(c);
      if (moves.empty()) break;
      const auto m = moves[g() % moves.size()];
      const auto na = planner.transition(a, m);
      const auto nc = planner.transition(c, m);
      REQUIRE(na.index() == nc.index());
      if (std::holds_alternative<Violation>(nc)) continue;
      a = std::get<SearchState>(na);
      c = std::get<SearchState>(nc);
      CHECK(planner.dedup_key(a) == planner.dedup_key(c));
      CHECK(a.t_ticks == c.t_ticks);
    }
  }
}

TEST_CASE("duration sets") {
  const auto d = DurationSet::parse("1.0, 0.01,0.4,0.5");
  CHECK(d.minutes() == std::vector<double>{0.01, 0.4, 0.5, 1.0});
  CHECK(d.resolution() == 0.01);
  CHECK(d.with(0.001).resolution() == 0.001);
  CHECK(DurationSet().size() == 7);
  CHECK_THROWS(DurationSet::parse("0.1,-1"));
  CHECK_THROWS(DurationSet::parse(""));
}
