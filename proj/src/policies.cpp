#include "kibam/policies.hpp"

#include <algorithm>
#include <cmath>

#include "kibam/format.hpp"

namespace kibam {

BuiltinKind parse_builtin_kind(std::string_view name) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (key == "vmax" || key == "best-of-n") return BuiltinKind::Vmax;
  if (key == "vmin") return BuiltinKind::Vmin;
  if (key == "tmax") return BuiltinKind::Tmax;
  if (key == "tmin") return BuiltinKind::Tmin;
  if (key == "sequential") return BuiltinKind::Sequential;
  throw ParseError("unknown builtin policy '" + std::string(name) + "'");
}

std::string to_string(BuiltinKind kind) {
  switch (kind) {
    case BuiltinKind::Vmax: return "Vmax";
    case BuiltinKind::Vmin: return "Vmin";
    case BuiltinKind::Tmax: return "Tmax";
    case BuiltinKind::Tmin: return "Tmin";
    case BuiltinKind::Sequential: return "Sequential";
  }
  return "?";
}

int decide_builtin(BuiltinKind kind, const Observation& obs) {
  const int n = static_cast<int>(obs.size());
  auto usable = [&](int b) { return obs.sigma[static_cast<std::size_t>(b)] > 0.0; };
  if (kind == BuiltinKind::Sequential) {
    if (obs.active >= 0 && obs.active < n && usable(obs.active)) return obs.active;
    for (int b = std::max(obs.active + 1, 0); b < n; ++b)
      if (usable(b)) return b;
    throw AllDead("sequential policy has no battery left");
  }
  int best = -1;
  for (int b = 0; b < n; ++b) {
    if (!usable(b)) continue;
    if (best < 0) {
      best = b;
      continue;
    }
    const auto i = static_cast<std::size_t>(b);
    const auto j = static_cast<std::size_t>(best);
    bool better = false;
    switch (kind) {
      case BuiltinKind::Vmax: better = obs.sigma[i] > obs.sigma[j]; break;
      case BuiltinKind::Vmin: better = obs.sigma[i] < obs.sigma[j]; break;
      case BuiltinKind::Tmax: better = obs.rest[i] > obs.rest[j]; break;
      case BuiltinKind::Tmin: better = obs.rest[i] < obs.rest[j]; break;
      case BuiltinKind::Sequential: break;
    }
    if (better) best = b;
  }
  if (best < 0) throw AllDead("no battery has available charge");
  return best;
}

std::string RolloutResult::trace_csv(std::size_t batteries) const {
  std::string out = "time,active_battery,load";
  for (std::size_t b = 1; b <= batteries; ++b) out += ",sigma_" + std::to_string(b);
  for (std::size_t b = 1; b <= batteries; ++b) out += ",gamma_" + std::to_string(b);
  out += '\n';
  for (const auto& s : trace) {
    out += format_decimal(s.time) + "," + std::to_string(s.battery + 1) + "," + format_decimal(s.load);
    for (double v : s.sigma) out += "," + format_decimal(v);
    for (double v : s.gamma) out += "," + format_decimal(v);
    out += '\n';
  }
  return out;
}

RolloutResult rollout(const Policy& policy, const LoadProfile& profile, const std::vector<BatteryParams>& batteries,
                      const RolloutOptions& options) {
  if (batteries.empty()) throw InvalidArgument("rollout needs at least one battery");
  if (!(options.delta > 0.0)) throw InvalidArgument("decision period must be positive");
  for (const auto& b : batteries) b.validate();
  const std::size_t n = batteries.size();
  std::vector<BatteryState> states;
  for (const auto& b : batteries) states.push_back(BatteryState::fresh(b));

  RolloutResult result;
  const double end = std::min(profile.end(), options.max_time);
  Observation obs;
  obs.sigma.resize(n);
  obs.gamma.resize(n);
  obs.rest.assign(n, 0.0);

  auto advance_all = [&](int used, double current, double dt) {
    for (std::size_t b = 0; b < n; ++b) {
      const bool on = static_cast<int>(b) == used;
      states[b] = evolve(states[b], batteries[b], on ? current : 0.0, dt);
      obs.rest[b] = on ? 0.0 : obs.rest[b] + dt;
    }
  };

  double t = 0.0;
  while (t < end - LoadProfile::kBoundaryEps) {
    const auto span = profile.span_at(t);
    const double grid_next = (std::floor(t / options.delta + 1e-9) + 1.0) * options.delta;
    const double piece_end = std::min({grid_next, span.end, end});
    const double length = piece_end - t;
    if (span.current <= 0.0) {
      advance_all(-1, 0.0, length);
      t = piece_end;
      continue;
    }
    for (std::size_t b = 0; b < n; ++b) {
      obs.sigma[b] = available_charge(states[b], batteries[b]);
      obs.gamma[b] = states[b].gamma;
    }
    obs.load = span.current;
    obs.time = t;
    Decision d;
    try {
      d = policy.decide(obs);
    } catch (const AllDead&) {
      result.lifetime = t;
      return result;
    }
    if (d.battery < 0 || d.battery >= static_cast<int>(n) ||
        !is_alive(states[static_cast<std::size_t>(d.battery)], batteries[static_cast<std::size_t>(d.battery)])) {
      result.lifetime = t;
      return result;
    }
    ++result.decisions;
    if (d.fallback) ++result.fallbacks;
    if (obs.active >= 0 && obs.active != d.battery) ++result.switches;
    obs.active = d.battery;
    if (options.record_trace)
      result.trace.push_back({t, d.battery, span.current, d.fallback, obs.sigma, obs.gamma});
    const auto b = static_cast<std::size_t>(d.battery);
    const auto ttd = time_to_death(states[b], batteries[b], span.current);
    if (ttd && *ttd < length) {
      advance_all(d.battery, span.current, *ttd);
      t += *ttd;
    } else {
      advance_all(d.battery, span.current, length);
      t = piece_end;
    }
  }
  result.lifetime = end;
  return result;
}

double upper_bound(const LoadProfile& profile, const std::vector<BatteryParams>& batteries) {
  return single_equivalent_lifetime(batteries, profile);
}

RolloutResult vmax_reference(const LoadProfile& profile, const std::vector<BatteryParams>& batteries, double delta) {
  RolloutOptions options;
  options.delta = delta;
  return rollout(BuiltinPolicy(BuiltinKind::Vmax), profile, batteries, options);
}

}  // namespace kibam
