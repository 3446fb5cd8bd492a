#include "kibam/rng.hpp"

#include <cmath>
#include <numbers>

namespace kibam {

// Box-Muller, one variate per pair of draws (no cached spare, so the stream
// position is a pure function of how many normals were requested).
double SplitMix64::next_normal() {
  const double u1 = next_unit_open();
  const double u2 = next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace kibam
