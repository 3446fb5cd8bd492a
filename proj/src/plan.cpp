#include "kibam/plan.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "kibam/errors.hpp"
#include "kibam/format.hpp"

namespace kibam {

namespace {
constexpr double kContiguityTol = 1e-9;
}

void Plan::check_well_formed(std::size_t battery_count) const {
  double expected = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    const std::string where = "step " + std::to_string(i + 1);
    if (!(s.duration > 0.0) || !std::isfinite(s.duration)) throw MalformedPlan(where + ": duration must be positive");
    if (std::abs(s.start - expected) > kContiguityTol)
      throw MalformedPlan(where + ": starts at " + format_decimal(s.start) + ", expected " + format_decimal(expected));
    if (s.battery >= static_cast<int>(battery_count))
      throw MalformedPlan(where + ": battery b" + std::to_string(s.battery + 1) + " does not exist");
    expected = s.start + s.duration;
  }
}

std::string Plan::to_text() const {
  std::string out;
  for (const auto& s : steps) {
    out += format_decimal(s.start, 2);
    out += s.is_wait() ? ": (wait) [" : ": (use b" + std::to_string(s.battery + 1) + ") [";
    out += format_decimal(s.duration, 2);
    out += "]\n";
  }
  return out;
}

Plan Plan::parse(std::string_view text) {
  Plan plan;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.empty() || line.front() == ';' || line.front() == '#') continue;
    const std::string where = "plan line " + std::to_string(line_no) + ": ";
    const auto colon = line.find(':');
    const auto open = line.find('(');
    const auto close = line.find(')');
    const auto lb = line.find('[');
    const auto rb = line.find(']');
    if (colon == std::string_view::npos || open == std::string_view::npos || close == std::string_view::npos ||
        lb == std::string_view::npos || rb == std::string_view::npos || !(colon < open && open < close && close < lb && lb < rb))
      throw ParseError(where + "expected '<start>: (use b<k>) [<duration>]' or '<start>: (wait) [<duration>]'");
    PlanStep step;
    try {
      step.start = parse_decimal(line.substr(0, colon));
      step.duration = parse_decimal(line.substr(lb + 1, rb - lb - 1));
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    const auto action = trim(line.substr(open + 1, close - open - 1));
    if (action == "wait") {
      step.battery = -1;
    } else if (action.rfind("use b", 0) == 0) {
      const auto idx = trim(action.substr(5));
      int k = 0;
      for (char ch : idx) {
        if (ch < '0' || ch > '9') throw ParseError(where + "bad battery name");
        k = k * 10 + (ch - '0');
        if (k > 1'000'000) throw ParseError(where + "battery index too large");
      }
      if (idx.empty() || k < 1) throw ParseError(where + "battery numbering starts at b1");
      step.battery = k - 1;
    } else {
      throw ParseError(where + "unknown action '" + std::string(action) + "'");
    }
    plan.steps.push_back(step);
  }
  return plan;
}

Plan Plan::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open plan file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Plan::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write plan file " + path.string());
  out << to_text();
}

}  // namespace kibam
