#pragma once

#include <span>
#include <string>
#include <vector>

#include "kibam/battery_model.hpp"
#include "kibam/errors.hpp"
#include "kibam/load_profile.hpp"
#include "kibam/plan.hpp"
#include "kibam/planner.hpp"

namespace kibam {

KIBAM_DECLARE_ERROR(RefinementExhausted, Error);

enum class IssueKind { BatteryDeadDuringUse, UnservicedLoad, ServiceWithoutLoad };
std::string to_string(IssueKind kind);

struct PlanViolation {
  double time = 0.0;
  IssueKind kind = IssueKind::BatteryDeadDuringUse;
  int battery = -1;  ///< 0-based, -1 when not tied to a battery
  std::string detail;
};

/// Battery states right after everything scheduled at `time` took effect.
struct Happening {
  double time = 0.0;
  std::string event;
  std::vector<BatteryState> batteries;
};

struct ValidationReport {
  bool valid = true;
  std::vector<PlanViolation> violations;
  std::vector<Happening> trace;

  /// Human-readable happening-by-happening log.
  std::string to_text() const;
  /// `time,battery,delta,gamma,event`, one row per battery per happening.
  std::string trace_csv() const;
};

/// Replays `plan` with the closed-form dynamics. Stops at the first battery
/// death during use; other violations are recorded and replay continues.
/// `initial` overrides the fresh starting states. Throws MalformedPlan.
ValidationReport validate(const Plan& plan, const LoadProfile& profile, const std::vector<BatteryParams>& batteries,
                          std::span<const BatteryState> initial = {});

struct RefinedPlan {
  SearchResult search;
  ValidationReport report;
  int refinements_used = 0;
  DurationSet durations;  ///< the set that produced the valid plan
};

/// Search, validate, and on failure add a duration one tenth of the current
/// smallest and search again, up to `max_refinements` times. `base` supplies
/// the remaining search settings; its durations are replaced by `initial`.
/// Throws RefinementExhausted.
RefinedPlan plan_and_validate(const LoadProfile& profile, const std::vector<BatteryParams>& batteries,
                              const DurationSet& initial, int max_refinements, SearchConfig base);

/// Default search settings for refinement: the stepped (discretised) model,
/// finishing finite profiles and maximising lifetime on repeating ones.
SearchConfig refinement_config(const LoadProfile& profile);

}  // namespace kibam
