#pragma once

#include <optional>
#include <span>
#include <string>

#include "kibam/errors.hpp"
#include "kibam/load_profile.hpp"

namespace kibam {

KIBAM_DECLARE_ERROR(DiesWithinInterval, Error);
KIBAM_DECLARE_ERROR(NegativeDuration, InvalidArgument);
KIBAM_DECLARE_ERROR(AlreadyDead, Error);
KIBAM_DECLARE_ERROR(MixedKinetics, InvalidArgument);

/// KiBaM constants in minutes / amperes / ampere-minutes.
struct BatteryParams {
  double capacity = 5.5;  ///< C
  double c = 0.166;       ///< available-well fraction
  double k_prime = 0.122; ///< k' (per minute)

  /// Valve conductance k = k' c (1 - c).
  double k() const { return k_prime * c * (1.0 - c); }
  void validate() const;

  static BatteryParams B1() { return {5.5, 0.166, 0.122}; }
  static BatteryParams B2() { return {11.0, 0.166, 0.122}; }

  friend bool operator==(const BatteryParams&, const BatteryParams&) = default;
};

/// Dynamic state: delta is the well-height difference, gamma the total charge.
struct BatteryState {
  double delta = 0.0;
  double gamma = 0.0;

  static BatteryState fresh(const BatteryParams& p) { return {0.0, p.capacity}; }

  friend bool operator==(const BatteryState&, const BatteryState&) = default;
};

/// Closed-form state after dt minutes at constant current, no death check.
BatteryState evolve(const BatteryState& s, const BatteryParams& p, double current, double dt);

/// Checked evolve: throws DiesWithinInterval if the battery dies before dt
/// (beyond a 1e-9 min tolerance), NegativeDuration for dt < 0.
BatteryState advance(const BatteryState& s, const BatteryParams& p, double current, double dt);

/// y1 = c (gamma - (1 - c) delta).
inline double available_charge(const BatteryState& s, const BatteryParams& p) {
  return p.c * (s.gamma - (1.0 - p.c) * s.delta);
}
inline double bound_charge(const BatteryState& s, const BatteryParams& p) {
  return s.gamma - available_charge(s, p);
}
/// gamma - (1 - c) delta; the battery is alive while this is positive.
inline double death_margin(const BatteryState& s, const BatteryParams& p) {
  return s.gamma - (1.0 - p.c) * s.delta;
}
inline bool is_alive(const BatteryState& s, const BatteryParams& p) { return death_margin(s, p) > 0.0; }

/// First t > 0 with gamma(t) = (1 - c) delta(t) under constant current, to
/// 1e-9 min; nullopt when current is 0. Throws AlreadyDead.
///
/// The margin m(t) = gamma0 - i t - (1 - c) delta(t) has m'' of fixed sign,
/// so for i > 0 it is either decreasing or concave with m(0) > 0 and has
/// exactly one positive root: a doubling bracket plus bisection finds it.
std::optional<double> time_to_death(const BatteryState& s, const BatteryParams& p, double current);

/// Death time of one battery holding the summed capacity of `batteries`,
/// driven by `profile` with segment-exact stepping. Returns the profile end
/// (or `max_horizon` for endless profiles) when it never dies. Throws
/// MixedKinetics when c or k' differ.
double single_equivalent_lifetime(std::span<const BatteryParams> batteries, const LoadProfile& profile,
                                  double max_horizon = 1e6);

/// Parses "B1", "B2" or "custom:C,c,kprime".
BatteryParams parse_battery_kind(const std::string& text);

}  // namespace kibam
