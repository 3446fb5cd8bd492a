#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "kibam/battery_model.hpp"
#include "kibam/errors.hpp"
#include "kibam/load_profile.hpp"
#include "kibam/plan.hpp"

namespace kibam {

/// Planner time unit: all search times are integer multiples of 1e-6 min.
inline constexpr double kTicksPerMinute = 1e6;
std::int64_t to_ticks(double minutes);
inline double from_ticks(std::int64_t ticks) { return static_cast<double>(ticks) / kTicksPerMinute; }

/// Sorted, distinct, positive action durations; the smallest is the time
/// resolution.
class DurationSet {
 public:
  DurationSet();  // {0.01, 0.02, 0.05, 0.1, 0.25, 0.5, 1.0}
  explicit DurationSet(std::vector<double> minutes);

  const std::vector<double>& minutes() const { return minutes_; }
  const std::vector<std::int64_t>& ticks() const { return ticks_; }
  std::size_t size() const { return ticks_.size(); }
  double resolution() const { return minutes_.front(); }
  /// Same set with `d` added (used by refinement).
  DurationSet with(double d) const;

  /// Comma-separated minutes, e.g. "0.01,0.4,0.5,1.0".
  static DurationSet parse(std::string_view text);
  std::string to_text() const;

 private:
  std::vector<double> minutes_;
  std::vector<std::int64_t> ticks_;
};

enum class Goal { FinishProfile, MaximizeLifetime };

/// How transitions evolve the batteries. Exact uses the closed form with
/// analytic death times. Stepped is a discretised model: explicit Euler at
/// the duration set's resolution with death tested only at step ends, so its
/// plans need checking against the exact model.
enum class Dynamics { Exact, Stepped };

struct SearchConfig {
  DurationSet durations;
  Goal goal = Goal::MaximizeLifetime;
  /// <= 0 picks the default: profile end for FinishProfile, the
  /// single-equivalent bound (capped by the profile end) otherwise.
  double horizon = 0.0;
  Dynamics dynamics = Dynamics::Exact;
  bool symmetry_breaking = true;
  bool deduplicate = true;
  /// Weight of the available-charge term in h.
  double charge_weight = 1.0;
  /// Limits; 0 disables. The stall limit counts expansions since the best
  /// lifetime last improved (lifetime goal only).
  std::size_t max_expansions = 5'000'000;
  std::size_t stall_expansions = 20'000;
  double time_budget_seconds = 0.0;
};

inline constexpr int kWait = -1;
inline constexpr int kNoAction = -2;

/// FSTS node.
struct SearchState {
  std::vector<BatteryState> batteries;
  int active = -1;  ///< battery in use, -1 when none
  std::int64_t t_ticks = 0;
  int last_action = kNoAction;  ///< symmetry bookkeeping, reset by load changes
  int last_duration = -1;       ///< index into the duration set
  std::int64_t run_ticks = 0;   ///< accumulated length of the current identical-step run

  double t() const { return from_ticks(t_ticks); }
};

enum class ViolationKind { BatteryDead, Disaster, NotOptimal, BeyondHorizon };
std::string to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind = ViolationKind::BatteryDead;
  double time = 0.0;
  int battery = -1;
};

struct Move {
  int action = kWait;  ///< battery index or kWait
  std::size_t duration = 0;  ///< index into the duration set
  friend bool operator==(const Move&, const Move&) = default;
};

enum class StopReason { Goal, HorizonReached, OpenListEmpty, Stalled, NodeBudget, TimeBudget };
std::string to_string(StopReason reason);

struct SearchResult {
  Plan plan;
  double lifetime = 0.0;  ///< end time of the returned plan
  StopReason stop = StopReason::OpenListEmpty;
  std::size_t expansions = 0;  ///< visited (expanded) states
  std::size_t generated = 0;
  std::size_t expansions_at_best = 0;
  double horizon = 0.0;
  double wall_seconds = 0.0;
  std::vector<BatteryState> final_batteries;
};

KIBAM_DECLARE_ERROR(Unsolvable, Error);

class BudgetExhausted : public Error {
 public:
  BudgetExhausted(const std::string& what, SearchResult best) : Error(what), best_(std::move(best)) {}
  const SearchResult& best() const { return best_; }

 private:
  SearchResult best_;
};

/// Best-first search over the discretised battery-switching system.
class Planner {
 public:
  Planner(LoadProfile profile, std::vector<BatteryParams> batteries, SearchConfig config = {});

  const LoadProfile& profile() const { return profile_; }
  const std::vector<BatteryParams>& batteries() const { return batteries_; }
  const SearchConfig& config() const { return config_; }
  double horizon() const { return from_ticks(horizon_ticks_); }

  SearchState initial_state() const;

  /// Moves that pass the symmetry rule, the horizon and the cheap
  /// prefilters (no wait under load, no use without load or of a dead
  /// battery), in generation order.
  std::vector<Move> enabled(const SearchState& s) const;

  /// Applies `move` across every load change inside it.
  std::variant<SearchState, Violation> transition(const SearchState& s, const Move& move) const;

  /// t + w * total available charge.
  double heuristic(const SearchState& s) const;

  /// Rounded charges (1e-5), active battery and profile phase.
  std::vector<std::int64_t> dedup_key(const SearchState& s) const;

  /// Throws Unsolvable (finish goal, no plan) or BudgetExhausted.
  SearchResult search() const;

 private:
  bool is_goal(const SearchState& s) const;

  LoadProfile profile_;
  std::vector<BatteryParams> batteries_;
  SearchConfig config_;
  std::int64_t horizon_ticks_ = 0;
  std::int64_t resolution_ticks_ = 0;
};

/// Convenience wrapper: Planner(profile, batteries, config).search().
SearchResult plan_search(const LoadProfile& profile, const std::vector<BatteryParams>& batteries,
                         const SearchConfig& config = {});

}  // namespace kibam
