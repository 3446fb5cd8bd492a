#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kibam/battery_model.hpp"
#include "kibam/errors.hpp"
#include "kibam/load_profile.hpp"

namespace kibam {

KIBAM_DECLARE_ERROR(AllDead, Error);

/// What a policy sees at a decision point. Indices are 0-based.
struct Observation {
  std::vector<double> sigma;  ///< available charge per battery
  std::vector<double> gamma;  ///< total charge per battery
  std::vector<double> rest;   ///< minutes since each battery was last used
  int active = -1;            ///< most recently chosen battery, -1 before the first choice
  double load = 0.0;
  double time = 0.0;

  std::size_t size() const { return sigma.size(); }
};

struct Decision {
  int battery = 0;
  bool fallback = false;  ///< the default rule overrode the policy's own choice
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Decision decide(const Observation& obs) const = 0;
  virtual std::string name() const = 0;
};

enum class BuiltinKind { Vmax, Vmin, Tmax, Tmin, Sequential };
BuiltinKind parse_builtin_kind(std::string_view name);
std::string to_string(BuiltinKind kind);

/// Picks among batteries with positive available charge, lowest index on
/// ties. Sequential keeps the active battery while it has charge, then moves
/// to the lowest such index above it and never wraps around. Throws AllDead.
int decide_builtin(BuiltinKind kind, const Observation& obs);

class BuiltinPolicy final : public Policy {
 public:
  explicit BuiltinPolicy(BuiltinKind kind) : kind_(kind) {}
  Decision decide(const Observation& obs) const override { return {decide_builtin(kind_, obs), false}; }
  std::string name() const override { return to_string(kind_); }
  BuiltinKind kind() const { return kind_; }

 private:
  BuiltinKind kind_;
};

struct RolloutOptions {
  double delta = 0.01;       ///< decision period (minutes)
  double max_time = 1e6;     ///< cap for endless profiles
  bool record_trace = false;
};

struct RolloutStep {
  double time = 0.0;
  int battery = -1;
  double load = 0.0;
  bool fallback = false;
  std::vector<double> sigma;
  std::vector<double> gamma;
};

struct RolloutResult {
  double lifetime = 0.0;
  std::size_t switches = 0;
  std::size_t decisions = 0;
  std::size_t fallbacks = 0;
  std::vector<RolloutStep> trace;

  /// `time,active_battery,load,sigma_1..sigma_n,gamma_1..gamma_n`.
  std::string trace_csv(std::size_t batteries) const;
};

/// Runs `policy` against `profile`. Decisions happen on the grid k * delta,
/// at load changes and when the active battery dies; no battery is active
/// during zero load. The run ends when a positive load meets no battery with
/// available charge (or the policy picks such a battery), at the end of a
/// one-shot profile, or at max_time.
RolloutResult rollout(const Policy& policy, const LoadProfile& profile, const std::vector<BatteryParams>& batteries,
                      const RolloutOptions& options = {});

/// Single-equivalent-battery bound; throws MixedKinetics.
double upper_bound(const LoadProfile& profile, const std::vector<BatteryParams>& batteries);

/// Finite-frequency best-of-n comparison run (Vmax at `delta`).
RolloutResult vmax_reference(const LoadProfile& profile, const std::vector<BatteryParams>& batteries,
                             double delta = 0.005);

}  // namespace kibam
