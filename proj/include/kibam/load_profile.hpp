#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kibam/errors.hpp"

namespace kibam {

KIBAM_DECLARE_ERROR(UnknownBenchmark, InputError);
KIBAM_DECLARE_ERROR(BeyondHorizon, Error);

/// One piece of a piecewise-constant demand: `current` amperes for
/// `duration` minutes.
struct LoadSegment {
  double duration = 0.0;
  double current = 0.0;

  friend bool operator==(const LoadSegment&, const LoadSegment&) = default;
};

/// Piecewise-constant load demand i(t), right-continuous, optionally cycling.
///
/// Times are minutes from the start of the profile. A one-shot profile is
/// defined on [0, period()); a repeating one on [0, inf).
class LoadProfile {
 public:
  /// Snap distance for boundary lookups; sums of segment durations carry
  /// rounding noise well below this.
  static constexpr double kBoundaryEps = 1e-9;

  struct Span {
    double start = 0.0;
    double end = 0.0;
    double current = 0.0;
  };

  LoadProfile() = default;
  LoadProfile(std::vector<LoadSegment> segments, bool repeat);

  const std::vector<LoadSegment>& segments() const { return segments_; }
  bool repeats() const { return repeat_; }
  bool empty() const { return segments_.empty(); }
  /// Sum of the segment durations (one cycle for repeating profiles).
  double period() const { return period_; }
  /// Horizon end: period() for one-shot profiles, +inf when repeating.
  double end() const;
  bool has_load() const;
  double max_current() const;
  double min_positive_current() const;

  /// Segment containing t (absolute times). Throws BeyondHorizon.
  Span span_at(double t) const;
  double current_at(double t) const { return span_at(t).current; }
  /// Next segment boundary strictly after t; end() for the last segment.
  double next_change_after(double t) const { return span_at(t).end; }

  /// Line format: "#repeat=true|false" then "duration,current" per segment.
  std::string to_text() const;
  static LoadProfile parse(std::string_view text);
  static LoadProfile load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const LoadProfile&, const LoadProfile&) = default;

 private:
  std::vector<LoadSegment> segments_;
  std::vector<double> starts_;
  bool repeat_ = false;
  double period_ = 0.0;
};

const std::vector<std::string>& benchmark_names();

/// Deterministic benchmark loads with 1-minute jobs: CL_* continuous,
/// ILs_* with 1-minute idles, ILl_* with 2-minute idles. All repeat.
LoadProfile make_benchmark(std::string_view name);

/// Triangular distribution on [low, high] with the given mode; low == high
/// is a point mass.
struct TriangularDistribution {
  double low = 0.0;
  double mode = 0.0;
  double high = 0.0;

  void validate() const;
  double mean() const { return (low + mode + high) / 3.0; }
  double variance() const;
  /// Inverse CDF at u in [0, 1).
  double quantile(double u) const;
};

/// Generator of random alternating load/idle profiles.
struct StochasticLoadModel {
  TriangularDistribution amplitude{0.1, 0.425, 0.75};
  TriangularDistribution duration{0.1, 0.5, 5.0};
  double load_prob = 0.5;
  std::uint64_t seed = 0;
  /// Period durations are rounded to 1/steps_per_minute minutes so plans on
  /// the planner's duration grid can meet every load change exactly. Zero
  /// disables rounding.
  int steps_per_minute = 100;

  void validate() const;

  /// Same model with the amplitude mode moved to `mode_amperes` (the R100,
  /// R250, R500, R750 evaluation families).
  StochasticLoadModel with_amplitude_mode(double mode_amperes) const;
  StochasticLoadModel with_seed(std::uint64_t new_seed) const;
};

/// One-shot profile covering exactly [0, horizon). Each period draws, in
/// order, a load/idle coin, an amplitude and a duration from the model's
/// stream, so the result is a pure function of the model.
LoadProfile sample_profile(const StochasticLoadModel& model, double horizon);

}  // namespace kibam
