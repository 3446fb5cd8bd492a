#include "kibam/validator.hpp"

#include <cmath>
#include <cstdio>

#include "kibam/format.hpp"

namespace kibam {

std::string to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::BatteryDeadDuringUse: return "BatteryDeadDuringUse";
    case IssueKind::UnservicedLoad: return "UnservicedLoad";
    case IssueKind::ServiceWithoutLoad: return "ServiceWithoutLoad";
  }
  return "?";
}

namespace {

constexpr double kDeathTol = 1e-9;

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v == 0.0 ? 0.0 : v);
  return buf;
}

std::string battery_name(int b) { return "b" + std::to_string(b + 1); }

std::string action_name(int battery) { return battery < 0 ? "(wait)" : "(use " + battery_name(battery) + ")"; }

class Recorder {
 public:
  explicit Recorder(ValidationReport& report) : report_(report) {}

  void record(double time, const std::string& event, const std::vector<BatteryState>& states) {
    auto& trace = report_.trace;
    if (!trace.empty() && std::abs(trace.back().time - time) <= LoadProfile::kBoundaryEps) {
      if (!event.empty()) trace.back().event += (trace.back().event.empty() ? "" : "; ") + event;
      trace.back().batteries = states;
      return;
    }
    trace.push_back({time, event, states});
  }

 private:
  ValidationReport& report_;
};

}  // namespace

ValidationReport validate(const Plan& plan, const LoadProfile& profile, const std::vector<BatteryParams>& batteries,
                          std::span<const BatteryState> initial) {
  if (batteries.empty()) throw InvalidArgument("validate needs at least one battery");
  for (const auto& b : batteries) b.validate();
  plan.check_well_formed(batteries.size());
  if (!plan.steps.empty() && plan.end() > profile.end() + 1e-9)
    throw MalformedPlan("plan ends at " + format_decimal(plan.end()) + ", after the profile end " +
                        format_decimal(profile.end()));
  std::vector<BatteryState> states;
  if (initial.empty()) {
    for (const auto& b : batteries) states.push_back(BatteryState::fresh(b));
  } else {
    if (initial.size() != batteries.size()) throw InvalidArgument("initial states do not match the battery count");
    states.assign(initial.begin(), initial.end());
  }

  ValidationReport report;
  Recorder rec(report);
  rec.record(0.0, "initial state", states);
  auto violate = [&](double time, IssueKind kind, int battery, std::string detail) {
    report.valid = false;
    report.violations.push_back({time, kind, battery, std::move(detail)});
  };

  for (const auto& step : plan.steps) {
    rec.record(step.start, "start " + action_name(step.battery), states);
    const double end = step.end();
    double t = step.start;
    double last_current = -1.0;
    while (t < end - LoadProfile::kBoundaryEps) {
      const auto span = profile.span_at(t);
      const double piece_end = std::min(span.end, end);
      const double length = piece_end - t;
      if (last_current >= 0.0 && span.current != last_current)
        rec.record(t, "load " + short_num(last_current) + " -> " + short_num(span.current), states);
      last_current = span.current;
      const bool using_battery = step.battery >= 0;
      if (!using_battery && span.current > 0.0)
        violate(t, IssueKind::UnservicedLoad, -1, "load " + short_num(span.current) + " A with no active battery");
      if (using_battery && span.current == 0.0)
        violate(t, IssueKind::ServiceWithoutLoad, step.battery, battery_name(step.battery) + " active with zero load");
      if (using_battery && span.current > 0.0) {
        const auto b = static_cast<std::size_t>(step.battery);
        double death = -1.0;
        if (!is_alive(states[b], batteries[b])) {
          death = 0.0;
        } else {
          const auto ttd = time_to_death(states[b], batteries[b], span.current);
          if (ttd && *ttd < length - kDeathTol) death = *ttd;
        }
        if (death >= 0.0) {
          for (std::size_t k = 0; k < states.size(); ++k)
            states[k] = evolve(states[k], batteries[k], k == b ? span.current : 0.0, death);
          violate(t + death, IssueKind::BatteryDeadDuringUse, step.battery,
                  battery_name(step.battery) + " exhausted " + format_decimal(end - (t + death)) +
                      " min before the end of " + action_name(step.battery) + " at " + format_decimal(step.start));
          rec.record(t + death, "batteryDead " + battery_name(step.battery), states);
          return report;
        }
      }
      for (std::size_t k = 0; k < states.size(); ++k)
        states[k] = evolve(states[k], batteries[k], static_cast<int>(k) == step.battery ? span.current : 0.0, length);
      t = piece_end;
    }
    rec.record(end, "end " + action_name(step.battery), states);
  }
  return report;
}

std::string ValidationReport::to_text() const {
  std::string out;
  const std::vector<BatteryState>* prev = nullptr;
  std::size_t next_violation = 0;
  for (const auto& h : trace) {
    if (prev) {
      for (std::size_t b = 0; b < h.batteries.size(); ++b) {
        const auto& before = (*prev)[b];
        const auto& after = h.batteries[b];
        if (before.delta != after.delta)
          out += "Updating (delta " + battery_name(static_cast<int>(b)) + ") (" + short_num(before.delta) + ") by " +
                 short_num(after.delta) + " for continuous update.\n";
        if (before.gamma != after.gamma)
          out += "Updating (gamma " + battery_name(static_cast<int>(b)) + ") (" + short_num(before.gamma) + ") by " +
                 short_num(after.gamma) + " for continuous update.\n";
      }
    }
    bool failed = false;
    std::string failures;
    while (next_violation < violations.size() && violations[next_violation].time <= h.time + LoadProfile::kBoundaryEps) {
      failed = true;
      const auto& v = violations[next_violation++];
      failures += "  " + to_string(v.kind) + " at " + format_decimal(v.time) + ": " + v.detail + "\n";
    }
    out += format_decimal(h.time) + ": Checking Happening... " + (failed ? "...FAILED!" : "...OK!");
    if (!h.event.empty()) out += "  [" + h.event + "]";
    out += "\n" + failures;
    prev = &h.batteries;
  }
  for (; next_violation < violations.size(); ++next_violation) {
    const auto& v = violations[next_violation];
    out += "  " + to_string(v.kind) + " at " + format_decimal(v.time) + ": " + v.detail + "\n";
  }
  out += valid ? "Plan valid\n" : "Plan failed to execute (" + std::to_string(violations.size()) + " violation(s))\n";
  return out;
}

std::string ValidationReport::trace_csv() const {
  std::string out = "time,battery,delta,gamma,event\n";
  for (const auto& h : trace) {
    for (std::size_t b = 0; b < h.batteries.size(); ++b) {
      out += format_decimal(h.time) + "," + std::to_string(b + 1) + "," + format_decimal(h.batteries[b].delta) + "," +
             format_decimal(h.batteries[b].gamma) + ",";
      // Events may contain commas only through the load text, which uses none.
      out += h.event + "\n";
    }
  }
  return out;
}

SearchConfig refinement_config(const LoadProfile& profile) {
  SearchConfig config;
  config.dynamics = Dynamics::Stepped;
  config.goal = profile.repeats() ? Goal::MaximizeLifetime : Goal::FinishProfile;
  return config;
}

RefinedPlan plan_and_validate(const LoadProfile& profile, const std::vector<BatteryParams>& batteries,
                              const DurationSet& initial, int max_refinements, SearchConfig base) {
  if (max_refinements < 0) throw InvalidArgument("max_refinements must be >= 0");
  DurationSet durations = initial;
  std::string last_failure;
  for (int r = 0; r <= max_refinements; ++r) {
    base.durations = durations;
    try {
      auto result = Planner(profile, batteries, base).search();
      auto report = validate(result.plan, profile, batteries);
      if (report.valid) return {std::move(result), std::move(report), r, durations};
      const auto& v = report.violations.front();
      last_failure = to_string(v.kind) + " at " + format_decimal(v.time);
    } catch (const Unsolvable& e) {
      last_failure = e.what();
    } catch (const BudgetExhausted& e) {
      last_failure = e.what();
    }
    if (r < max_refinements) durations = durations.with(durations.resolution() / 10.0);
  }
  throw RefinementExhausted("no valid plan after " + std::to_string(max_refinements) +
                            " refinement(s); last failure: " + last_failure);
}

}  // namespace kibam
