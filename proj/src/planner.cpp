#include "kibam/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <unordered_set>

#include "kibam/format.hpp"

namespace kibam {

std::int64_t to_ticks(double minutes) { return std::llround(minutes * kTicksPerMinute); }

DurationSet::DurationSet() : DurationSet({0.01, 0.02, 0.05, 0.1, 0.25, 0.5, 1.0}) {}

DurationSet::DurationSet(std::vector<double> minutes) {
  if (minutes.empty()) throw InvalidArgument("duration set must not be empty");
  std::vector<std::int64_t> ticks;
  for (double m : minutes) {
    if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("durations must be positive");
    const auto t = to_ticks(m);
    if (t <= 0) throw InvalidArgument("duration " + format_decimal(m) + " is below the 1e-6 min tick");
    ticks.push_back(t);
  }
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  ticks_ = std::move(ticks);
  for (auto t : ticks_) minutes_.push_back(from_ticks(t));
}

DurationSet DurationSet::with(double d) const {
  auto m = minutes_;
  m.push_back(d);
  return DurationSet(std::move(m));
}

DurationSet DurationSet::parse(std::string_view text) {
  std::vector<double> values;
  while (!text.empty()) {
    const auto comma = text.find(',');
    values.push_back(parse_decimal(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  try {
    return DurationSet(std::move(values));
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
}

std::string DurationSet::to_text() const {
  std::string out;
  for (std::size_t i = 0; i < minutes_.size(); ++i) {
    if (i) out += ',';
    out += format_decimal(minutes_[i]);
  }
  return out;
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::BatteryDead: return "batteryDead";
    case ViolationKind::Disaster: return "disaster";
    case ViolationKind::NotOptimal: return "notOptimal";
    case ViolationKind::BeyondHorizon: return "beyondHorizon";
  }
  return "?";
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Goal: return "goal";
    case StopReason::HorizonReached: return "horizon";
    case StopReason::OpenListEmpty: return "exhausted";
    case StopReason::Stalled: return "stalled";
    case StopReason::NodeBudget: return "node-budget";
    case StopReason::TimeBudget: return "time-budget";
  }
  return "?";
}

namespace {

constexpr double kDeathTol = 1e-9;

// Explicit Euler across `length` minutes in steps of at most `h`. Returns the
// first step end at which a loaded battery has a negative margin, if any.
std::optional<double> euler(BatteryState& s, const BatteryParams& p, double current, double length, double h) {
  double done = 0.0;
  while (done < length - 1e-12) {
    const double step = std::min(h, length - done);
    s.delta += step * (current / p.c - p.k_prime * s.delta);
    s.gamma -= step * current;
    done += step;
    if (current > 0.0 && death_margin(s, p) < 0.0) return done;
  }
  return std::nullopt;
}

}  // namespace

Planner::Planner(LoadProfile profile, std::vector<BatteryParams> batteries, SearchConfig config)
    : profile_(std::move(profile)), batteries_(std::move(batteries)), config_(std::move(config)) {
  if (batteries_.empty()) throw InvalidArgument("planner needs at least one battery");
  for (const auto& b : batteries_) b.validate();
  if (profile_.empty()) {
    if (config_.horizon > 0.0) throw InvalidArgument("horizon exceeds the empty profile");
  }
  double horizon = config_.horizon;
  if (horizon <= 0.0) {
    if (config_.goal == Goal::FinishProfile) {
      if (profile_.repeats()) throw InvalidArgument("finishing a repeating profile needs an explicit horizon");
      horizon = profile_.period();
    } else {
      horizon = profile_.empty() ? 0.0 : single_equivalent_lifetime(batteries_, profile_);
    }
  }
  if (!profile_.repeats()) horizon = std::min(horizon, profile_.period());
  horizon_ticks_ = static_cast<std::int64_t>(std::floor(horizon * kTicksPerMinute + 1e-3));
  resolution_ticks_ = config_.durations.ticks().front();
}

SearchState Planner::initial_state() const {
  SearchState s;
  for (const auto& b : batteries_) s.batteries.push_back(BatteryState::fresh(b));
  return s;
}

bool Planner::is_goal(const SearchState& s) const { return s.t_ticks >= horizon_ticks_; }

std::vector<Move> Planner::enabled(const SearchState& s) const {
  std::vector<Move> moves;
  if (s.t_ticks >= horizon_ticks_) return moves;
  const double current = profile_.current_at(s.t());
  const auto& ticks = config_.durations.ticks();
  const std::size_t largest = ticks.size() - 1;
  auto add_durations = [&](int action) {
    for (std::size_t j = ticks.size(); j-- > 0;) {
      if (s.t_ticks + ticks[j] > horizon_ticks_) continue;
      if (config_.symmetry_breaking && action == s.last_action && s.last_duration >= 0) {
        const auto prev = static_cast<std::size_t>(s.last_duration);
        if (j > prev) continue;
        if (j == prev && j != largest && s.run_ticks + ticks[j] > ticks[j + 1]) continue;
      }
      moves.push_back({action, j});
    }
  };
  if (current > 0.0) {
    for (std::size_t b = 0; b < batteries_.size(); ++b)
      if (is_alive(s.batteries[b], batteries_[b])) add_durations(static_cast<int>(b));
  } else {
    add_durations(kWait);
  }
  return moves;
}

std::variant<SearchState, Violation> Planner::transition(const SearchState& s, const Move& move) const {
  const auto d_ticks = config_.durations.ticks().at(move.duration);
  const auto t1_ticks = s.t_ticks + d_ticks;
  if (move.action >= static_cast<int>(batteries_.size())) throw InvalidArgument("no such battery");

  SearchState next = s;
  next.t_ticks = t1_ticks;
  next.active = move.action >= 0 ? move.action : -1;
  // Violations inside the horizon take precedence over overrunning it.
  const bool overruns = t1_ticks > horizon_ticks_;
  const double t_end = from_ticks(std::min(t1_ticks, horizon_ticks_));
  const double h = from_ticks(resolution_ticks_);
  double t = s.t();
  bool load_changed = false;
  double last_current = -1.0;
  while (t < t_end - LoadProfile::kBoundaryEps) {
    const auto span = profile_.span_at(t);
    const double piece_end = std::min(span.end, t_end);
    const double length = piece_end - t;
    if (last_current >= 0.0 && span.current != last_current) load_changed = true;
    last_current = span.current;
    if (move.action == kWait && span.current > 0.0) return Violation{ViolationKind::Disaster, t, -1};
    if (move.action >= 0 && span.current == 0.0) return Violation{ViolationKind::NotOptimal, t, move.action};
    for (std::size_t b = 0; b < batteries_.size(); ++b) {
      const bool used = static_cast<int>(b) == move.action;
      const double i = used ? span.current : 0.0;
      auto& st = next.batteries[b];
      if (config_.dynamics == Dynamics::Exact) {
        if (used) {
          if (!is_alive(st, batteries_[b])) return Violation{ViolationKind::BatteryDead, t, move.action};
          const auto ttd = time_to_death(st, batteries_[b], i);
          if (ttd && *ttd < length - kDeathTol) return Violation{ViolationKind::BatteryDead, t + *ttd, move.action};
        }
        st = evolve(st, batteries_[b], i, length);
      } else {
        if (auto died = euler(st, batteries_[b], i, length, h))
          return Violation{ViolationKind::BatteryDead, t + *died, move.action};
      }
    }
    t = piece_end;
  }
  if (overruns) return Violation{ViolationKind::BeyondHorizon, t_end, move.action};
  if (last_current >= 0.0 && t_end < profile_.end() - LoadProfile::kBoundaryEps &&
      profile_.current_at(t_end) != last_current)
    load_changed = true;

  if (load_changed) {
    next.last_action = kNoAction;
    next.last_duration = -1;
    next.run_ticks = 0;
  } else {
    const int idx = static_cast<int>(move.duration);
    if (move.action == s.last_action && idx == s.last_duration)
      next.run_ticks = s.run_ticks + d_ticks;
    else
      next.run_ticks = d_ticks;
    next.last_action = move.action;
    next.last_duration = idx;
  }
  return next;
}

double Planner::heuristic(const SearchState& s) const {
  double charge = 0.0;
  for (std::size_t b = 0; b < batteries_.size(); ++b) charge += available_charge(s.batteries[b], batteries_[b]);
  return s.t() + config_.charge_weight * charge;
}

std::vector<std::int64_t> Planner::dedup_key(const SearchState& s) const {
  std::vector<std::int64_t> key;
  key.reserve(2 * s.batteries.size() + 2);
  for (const auto& b : s.batteries) {
    key.push_back(std::llround(b.delta * 1e5));
    key.push_back(std::llround(b.gamma * 1e5));
  }
  key.push_back(s.active);
  std::int64_t phase = s.t_ticks;
  if (profile_.repeats()) {
    const auto period = to_ticks(profile_.period());
    if (period > 0) phase %= period;
  }
  key.push_back((phase + resolution_ticks_ / 2) / resolution_ticks_);
  return key;
}

namespace {

struct KeyHash {
  std::size_t operator()(const std::vector<std::int64_t>& key) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto v : key) {
      h ^= static_cast<std::uint64_t>(v) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

struct Node {
  SearchState state;
  std::size_t parent;
  Move move;
};

struct OpenEntry {
  std::int64_t h;
  std::int64_t t;
  int action_rank;
  std::int64_t d;
  std::uint64_t seq;
  std::size_t node;
};

// Max-heap order: larger h, then larger t, lower battery (wait last),
// longer duration, earlier generation.
struct OpenLess {
  bool operator()(const OpenEntry& a, const OpenEntry& b) const {
    if (a.h != b.h) return a.h < b.h;
    if (a.t != b.t) return a.t < b.t;
    if (a.action_rank != b.action_rank) return a.action_rank > b.action_rank;
    if (a.d != b.d) return a.d < b.d;
    return a.seq > b.seq;
  }
};

}  // namespace

SearchResult Planner::search() const {
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  const auto& ticks = config_.durations.ticks();
  const int wait_rank = static_cast<int>(batteries_.size());

  std::vector<Node> nodes;
  nodes.push_back({initial_state(), 0, {kNoAction, 0}});
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, OpenLess> open;
  std::unordered_set<std::vector<std::int64_t>, KeyHash> seen;
  std::uint64_t seq = 0;

  auto quantised_h = [&](const SearchState& s) { return std::llround(heuristic(s) * 1e9); };

  SearchResult result;
  result.horizon = horizon();
  std::size_t best = 0;

  auto finish = [&](std::size_t node, StopReason reason) {
    result.stop = reason;
    std::vector<PlanStep> steps;
    for (std::size_t n = node; n != 0; n = nodes[n].parent) {
      const auto& nd = nodes[n];
      const auto& parent = nodes[nd.parent].state;
      steps.push_back({parent.t(), nd.move.action >= 0 ? nd.move.action : -1, from_ticks(ticks[nd.move.duration])});
    }
    std::reverse(steps.begin(), steps.end());
    result.plan.steps = std::move(steps);
    result.lifetime = nodes[node].state.t();
    result.final_batteries = nodes[node].state.batteries;
    result.wall_seconds = std::chrono::duration<double>(Clock::now() - started).count();
    return result;
  };

  if (is_goal(nodes[0].state))
    return finish(0, config_.goal == Goal::FinishProfile ? StopReason::Goal : StopReason::HorizonReached);
  if (config_.deduplicate) seen.insert(dedup_key(nodes[0].state));
  open.push({quantised_h(nodes[0].state), 0, -1, 0, seq++, 0});

  auto budget_stop = [&](StopReason reason) -> SearchResult {
    auto partial = finish(best, reason);
    if (config_.goal == Goal::FinishProfile)
      throw BudgetExhausted("search budget exhausted (" + to_string(reason) + ") at t=" +
                                format_decimal(partial.lifetime),
                            partial);
    return partial;
  };

  while (!open.empty()) {
    if (config_.max_expansions && result.expansions >= config_.max_expansions)
      return budget_stop(StopReason::NodeBudget);
    if (config_.time_budget_seconds > 0.0 && (result.expansions & 255U) == 0 &&
        std::chrono::duration<double>(Clock::now() - started).count() > config_.time_budget_seconds)
      return budget_stop(StopReason::TimeBudget);
    if (config_.goal == Goal::MaximizeLifetime && config_.stall_expansions &&
        result.expansions - result.expansions_at_best >= config_.stall_expansions)
      return finish(best, StopReason::Stalled);

    const auto top = open.top();
    open.pop();
    ++result.expansions;
    const SearchState current = nodes[top.node].state;
    for (const auto& move : enabled(current)) {
      auto outcome = transition(current, move);
      if (!std::holds_alternative<SearchState>(outcome)) continue;
      ++result.generated;
      nodes.push_back({std::move(std::get<SearchState>(outcome)), top.node, move});
      const std::size_t id = nodes.size() - 1;
      const auto& child = nodes[id].state;
      if (is_goal(child))
        return finish(id, config_.goal == Goal::FinishProfile ? StopReason::Goal : StopReason::HorizonReached);
      if (config_.deduplicate && !seen.insert(dedup_key(child)).second) {
        nodes.pop_back();
        continue;
      }
      if (child.t_ticks > nodes[best].state.t_ticks) {
        best = id;
        result.expansions_at_best = result.expansions;
      }
      open.push({quantised_h(child), child.t_ticks, move.action >= 0 ? move.action : wait_rank,
                 ticks[move.duration], seq++, id});
    }
  }
  if (config_.goal == Goal::FinishProfile)
    throw Unsolvable("no plan services the profile up to t=" + format_decimal(horizon()));
  return finish(best, StopReason::OpenListEmpty);
}

SearchResult plan_search(const LoadProfile& profile, const std::vector<BatteryParams>& batteries,
                         const SearchConfig& config) {
  return Planner(profile, batteries, config).search();
}

}  // namespace kibam
