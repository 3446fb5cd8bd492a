#pragma once

#include <string>
#include <string_view>

namespace kibam {

// Shortest decimal text that parses back to exactly `value`, padded with
// trailing zeros to at least `min_decimals` fractional digits.
std::string format_decimal(double value, int min_decimals = 0);

// Strict decimal parse of the whole token (surrounding blanks allowed).
// Throws ParseError.
double parse_decimal(std::string_view text);

std::string_view trim(std::string_view text);

}  // namespace kibam
