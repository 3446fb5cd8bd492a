#include "kibam/battery_model.hpp"

#include <cmath>
#include <limits>

#include "kibam/format.hpp"

namespace kibam {

namespace {
constexpr double kTimeTol = 1e-9;
}

void BatteryParams::validate() const {
  if (!(capacity > 0.0) || !std::isfinite(capacity)) throw InvalidArgument("battery capacity must be positive");
  if (!(c > 0.0 && c < 1.0)) throw InvalidArgument("battery fraction c must lie in (0, 1)");
  if (!(k_prime > 0.0) || !std::isfinite(k_prime)) throw InvalidArgument("battery rate k' must be positive");
}

BatteryState evolve(const BatteryState& s, const BatteryParams& p, double current, double dt) {
  const double a = current / (p.c * p.k_prime);
  return {a + (s.delta - a) * std::exp(-p.k_prime * dt), s.gamma - current * dt};
}

BatteryState advance(const BatteryState& s, const BatteryParams& p, double current, double dt) {
  if (dt < 0.0) throw NegativeDuration("advance: negative duration " + format_decimal(dt));
  if (current > 0.0 && dt > 0.0) {
    const auto ttd = time_to_death(s, p, current);
    if (ttd && *ttd < dt - kTimeTol)
      throw DiesWithinInterval("battery dies after " + format_decimal(*ttd) + " of " + format_decimal(dt) + " min");
  }
  return evolve(s, p, current, dt);
}

std::optional<double> time_to_death(const BatteryState& s, const BatteryParams& p, double current) {
  if (!is_alive(s, p)) throw AlreadyDead("time_to_death: battery is already dead");
  if (current <= 0.0) return std::nullopt;
  auto margin = [&](double t) { return death_margin(evolve(s, p, current, t), p); };
  // gamma runs out no later than gamma0 / i, so that is always a bracket end.
  double lo = 0.0;
  double hi = std::min(s.gamma / current, 1.0 / p.k_prime);
  while (margin(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 0.25 * kTimeTol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (margin(mid) > 0.0 ? lo : hi) = mid;
  }
  return hi;
}

double single_equivalent_lifetime(std::span<const BatteryParams> batteries, const LoadProfile& profile,
                                  double max_horizon) {
  if (batteries.empty()) throw InvalidArgument("single_equivalent_lifetime needs at least one battery");
  BatteryParams combined = batteries.front();
  combined.capacity = 0.0;
  for (const auto& b : batteries) {
    b.validate();
    if (b.c != combined.c || b.k_prime != combined.k_prime)
      throw MixedKinetics("combined-capacity bound needs identical c and k' across batteries");
    combined.capacity += b.capacity;
  }
  const double horizon = std::min(profile.end(), max_horizon);
  BatteryState s = BatteryState::fresh(combined);
  double t = 0.0;
  while (t < horizon - LoadProfile::kBoundaryEps) {
    const auto span = profile.span_at(t);
    const double piece_end = std::min(span.end, horizon);
    const double dt = piece_end - t;
    if (span.current > 0.0) {
      const auto ttd = time_to_death(s, combined, span.current);
      if (ttd && *ttd <= dt) return t + *ttd;
    }
    s = evolve(s, combined, span.current, dt);
    t = piece_end;
  }
  return horizon;
}

BatteryParams parse_battery_kind(const std::string& text) {
  if (text == "B1" || text == "b1") return BatteryParams::B1();
  if (text == "B2" || text == "b2") return BatteryParams::B2();
  const std::string prefix = "custom:";
  if (text.rfind(prefix, 0) == 0) {
    std::string_view rest(text);
    rest.remove_prefix(prefix.size());
    const auto c1 = rest.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : rest.find(',', c1 + 1);
    if (c2 == std::string_view::npos) throw ParseError("custom battery must be 'custom:C,c,kprime'");
    BatteryParams p{parse_decimal(rest.substr(0, c1)), parse_decimal(rest.substr(c1 + 1, c2 - c1 - 1)),
                    parse_decimal(rest.substr(c2 + 1))};
    try {
      p.validate();
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what());
    }
    return p;
  }
  throw ParseError("unknown battery kind '" + text + "' (expected B1, B2 or custom:C,c,kprime)");
}

}  // namespace kibam
