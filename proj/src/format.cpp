#include "kibam/format.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "kibam/errors.hpp"

namespace kibam {

std::string format_decimal(double value, int min_decimals) {
  if (value == 0.0) value = 0.0;  // drop the sign of -0
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
  if (ec != std::errc{}) throw Error("format_decimal: value not representable");
  std::string out(buf, end);
  if (min_decimals > 0) {
    auto dot = out.find('.');
    if (dot == std::string::npos) {
      out += '.';
      dot = out.size() - 1;
    }
    const auto decimals = static_cast<int>(out.size() - dot - 1);
    if (decimals < min_decimals) out.append(static_cast<std::size_t>(min_decimals - decimals), '0');
  }
  return out;
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

double parse_decimal(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
    throw ParseError("not a decimal number: '" + std::string(text) + "'");
  return value;
}

}  // namespace kibam
