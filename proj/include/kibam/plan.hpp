#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kibam/errors.hpp"

namespace kibam {

KIBAM_DECLARE_ERROR(MalformedPlan, InputError);

/// One timed step. battery is 0-based; negative means wait.
struct PlanStep {
  double start = 0.0;
  int battery = -1;
  double duration = 0.0;

  bool is_wait() const { return battery < 0; }
  double end() const { return start + duration; }
  friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

/// Timed sequence of use/wait steps, contiguous from time 0.
struct Plan {
  std::vector<PlanStep> steps;

  double end() const { return steps.empty() ? 0.0 : steps.back().end(); }
  /// Throws MalformedPlan on gaps, overlaps, bad durations or batteries.
  void check_well_formed(std::size_t battery_count) const;

  /// "<start>: (use b<k>) [<duration>]" / "<start>: (wait) [<duration>]".
  std::string to_text() const;
  static Plan parse(std::string_view text);
  static Plan load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const Plan&, const Plan&) = default;
};

}  // namespace kibam
