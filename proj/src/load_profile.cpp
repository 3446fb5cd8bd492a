#include "kibam/load_profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "kibam/format.hpp"
#include "kibam/rng.hpp"

namespace kibam {

LoadProfile::LoadProfile(std::vector<LoadSegment> segments, bool repeat)
    : segments_(std::move(segments)), repeat_(repeat) {
  starts_.reserve(segments_.size());
  double acc = 0.0;
  for (const auto& s : segments_) {
    if (!(s.duration > 0.0) || !std::isfinite(s.duration))
      throw InvalidArgument("load segment duration must be positive and finite");
    if (!(s.current >= 0.0) || !std::isfinite(s.current))
      throw InvalidArgument("load segment current must be nonnegative and finite");
    starts_.push_back(acc);
    acc += s.duration;
  }
  period_ = acc;
  if (repeat_ && segments_.empty()) throw InvalidArgument("a repeating profile needs at least one segment");
}

double LoadProfile::end() const {
  return repeat_ ? std::numeric_limits<double>::infinity() : period_;
}

bool LoadProfile::has_load() const {
  return std::any_of(segments_.begin(), segments_.end(), [](const LoadSegment& s) { return s.current > 0.0; });
}

double LoadProfile::max_current() const {
  double m = 0.0;
  for (const auto& s : segments_) m = std::max(m, s.current);
  return m;
}

double LoadProfile::min_positive_current() const {
  double m = 0.0;
  for (const auto& s : segments_)
    if (s.current > 0.0 && (m == 0.0 || s.current < m)) m = s.current;
  return m;
}

LoadProfile::Span LoadProfile::span_at(double t) const {
  if (!(t >= -kBoundaryEps)) throw BeyondHorizon("negative time " + format_decimal(t));
  if (segments_.empty() || (!repeat_ && t >= period_ - kBoundaryEps))
    throw BeyondHorizon("time " + format_decimal(t) + " is past the profile end " + format_decimal(period_));
  double cycle_start = 0.0;
  double phase = std::max(t, 0.0);
  if (repeat_) {
    double k = std::floor(phase / period_);
    cycle_start = k * period_;
    phase = t - cycle_start;
    if (phase >= period_ - kBoundaryEps) {
      k += 1.0;
      cycle_start = k * period_;
      phase = std::max(0.0, t - cycle_start);
    } else if (phase < 0.0) {
      phase = 0.0;
    }
  }
  // Last segment whose start is <= phase (snapping up onto nearby boundaries).
  auto it = std::upper_bound(starts_.begin(), starts_.end(), phase + kBoundaryEps);
  const auto idx = static_cast<std::size_t>(std::distance(starts_.begin(), it) - 1);
  Span span;
  span.start = cycle_start + starts_[idx];
  span.end = idx + 1 < starts_.size() ? cycle_start + starts_[idx + 1] : cycle_start + period_;
  span.current = segments_[idx].current;
  return span;
}

std::string LoadProfile::to_text() const {
  std::string out = repeat_ ? "#repeat=true\n" : "#repeat=false\n";
  for (const auto& s : segments_) {
    out += format_decimal(s.duration, 1);
    out += ',';
    out += format_decimal(s.current);
    out += '\n';
  }
  return out;
}

LoadProfile LoadProfile::parse(std::string_view text) {
  std::vector<LoadSegment> segments;
  bool repeat = false;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto body = trim(line.substr(1));
      if (body.rfind("repeat", 0) == 0) {
        auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ParseError("line " + std::to_string(line_no) + ": malformed repeat header");
        auto value = trim(body.substr(eq + 1));
        if (value == "true")
          repeat = true;
        else if (value == "false")
          repeat = false;
        else
          throw ParseError("line " + std::to_string(line_no) + ": repeat must be true or false");
        header_seen = true;
      }
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos)
      throw ParseError("line " + std::to_string(line_no) + ": expected 'duration,current'");
    try {
      segments.push_back({parse_decimal(line.substr(0, comma)), parse_decimal(line.substr(comma + 1))});
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header_seen) throw ParseError("missing '#repeat=true|false' header");
  try {
    return LoadProfile(std::move(segments), repeat);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
}

LoadProfile LoadProfile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open profile file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void LoadProfile::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write profile file " + path.string());
  out << to_text();
}

const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names{"CL_250",  "CL_500",  "CL_alt",  "ILs_250",
                                              "ILs_500", "ILs_alt", "ILl_250", "ILl_500"};
  return names;
}

LoadProfile make_benchmark(std::string_view name) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) { return std::tolower(ch); });
  using S = std::vector<LoadSegment>;
  if (key == "cl_250") return {S{{1.0, 0.25}}, true};
  if (key == "cl_500") return {S{{1.0, 0.5}}, true};
  if (key == "cl_alt") return {S{{1.0, 0.25}, {1.0, 0.5}}, true};
  if (key == "ils_250") return {S{{1.0, 0.25}, {1.0, 0.0}}, true};
  if (key == "ils_500") return {S{{1.0, 0.5}, {1.0, 0.0}}, true};
  if (key == "ils_alt") return {S{{1.0, 0.5}, {1.0, 0.0}, {1.0, 0.25}, {1.0, 0.0}}, true};
  if (key == "ill_250") return {S{{1.0, 0.25}, {2.0, 0.0}}, true};
  if (key == "ill_500") return {S{{1.0, 0.5}, {2.0, 0.0}}, true};
  throw UnknownBenchmark("unknown benchmark '" + std::string(name) + "'");
}

void TriangularDistribution::validate() const {
  if (!std::isfinite(low) || !std::isfinite(high) || !(low <= mode && mode <= high))
    throw InvalidArgument("triangular distribution needs low <= mode <= high");
}

double TriangularDistribution::variance() const {
  const double a = low, b = high, c = mode;
  return (a * a + b * b + c * c - a * b - a * c - b * c) / 18.0;
}

double TriangularDistribution::quantile(double u) const {
  const double width = high - low;
  if (width <= 0.0) return low;
  const double split = (mode - low) / width;
  if (u < split) return low + std::sqrt(u * width * (mode - low));
  return high - std::sqrt((1.0 - u) * width * (high - mode));
}

void StochasticLoadModel::validate() const {
  amplitude.validate();
  duration.validate();
  if (amplitude.low < 0.0) throw InvalidArgument("amplitudes must be nonnegative");
  if (!(duration.low > 0.0)) throw InvalidArgument("durations must be positive");
  if (!(load_prob >= 0.0 && load_prob <= 1.0)) throw InvalidArgument("load_prob must lie in [0, 1]");
  if (steps_per_minute < 0) throw InvalidArgument("steps_per_minute must be >= 0");
}

StochasticLoadModel StochasticLoadModel::with_amplitude_mode(double mode_amperes) const {
  StochasticLoadModel m = *this;
  m.amplitude.mode = mode_amperes;
  m.amplitude.validate();
  return m;
}

StochasticLoadModel StochasticLoadModel::with_seed(std::uint64_t new_seed) const {
  StochasticLoadModel m = *this;
  m.seed = new_seed;
  return m;
}

LoadProfile sample_profile(const StochasticLoadModel& model, double horizon) {
  model.validate();
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be positive and finite");
  SplitMix64 rng(model.seed);
  std::vector<LoadSegment> segments;
  if (model.steps_per_minute > 0) {
    // Integer step bookkeeping keeps every boundary an exact k / steps value.
    const double steps = model.steps_per_minute;
    const auto horizon_steps = static_cast<long long>(std::ceil(horizon * steps - 1e-9));
    long long total = 0;
    while (total < horizon_steps) {
      const bool is_load = rng.next_unit() < model.load_prob;
      const double amp = model.amplitude.quantile(rng.next_unit());
      const double dur = model.duration.quantile(rng.next_unit());
      long long k = std::max<long long>(1, std::llround(dur * steps));
      k = std::min(k, horizon_steps - total);
      total += k;
      segments.push_back({static_cast<double>(k) / steps, is_load ? amp : 0.0});
    }
    if (!segments.empty() && static_cast<double>(horizon_steps) / steps > horizon + 1e-12) {
      // Horizon off the step grid: cut the final piece back to the exact horizon.
      const double before = static_cast<double>(horizon_steps) / steps - segments.back().duration;
      segments.back().duration = horizon - before;
    }
  } else {
    double total = 0.0;
    while (total < horizon) {
      const bool is_load = rng.next_unit() < model.load_prob;
      const double amp = model.amplitude.quantile(rng.next_unit());
      double dur = model.duration.quantile(rng.next_unit());
      if (total + dur > horizon) dur = horizon - total;
      total += dur;
      segments.push_back({dur, is_load ? amp : 0.0});
    }
  }
  return LoadProfile(std::move(segments), false);
}

}  // namespace kibam
