#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace uigauge {

/// Rounds a decimal literal ("12.25", "-3", "7e-1") half-up (away from zero)
/// to `decimals` fractional digits, operating on the decimal digits rather
/// than on the binary double. Returns nullopt if `text` is not a finite number.
std::optional<std::string> round_decimal_text(std::string_view text, int decimals);

/// Same rounding applied to the shortest round-trip representation of `value`.
std::string format_fixed(double value, int decimals);

inline std::string format_fixed1(double value) { return format_fixed(value, 1); }

/// Strict full-string number parse (leading/trailing spaces allowed).
std::optional<double> parse_double(std::string_view text);

}  // namespace uigauge
