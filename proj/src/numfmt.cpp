#include "uigauge/numfmt.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string>

namespace uigauge {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::optional<std::string> round_decimal_text(std::string_view text, int decimals) {
  text = trim(text);
  if (text.empty() || decimals < 0) return std::nullopt;
  if (!parse_double(text)) return std::nullopt;

  bool negative = false;
  if (text.front() == '-' || text.front() == '+') {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }

  // Split mantissa digits and exponent.
  std::string digits;
  int point_pos = -1;
  std::size_t i = 0;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (is_digit(c)) {
      digits.push_back(c);
    } else if (c == '.' && point_pos < 0) {
      point_pos = static_cast<int>(digits.size());
    } else {
      break;
    }
  }
  if (point_pos < 0) point_pos = static_cast<int>(digits.size());
  int exponent = 0;
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    exponent = std::atoi(std::string(text.substr(i + 1)).c_str());
  }
  point_pos += exponent;

  // Normalize so that the integer part has at least one digit and there are
  // decimals + 1 fractional digits available.
  while (point_pos <= 0) {
    digits.insert(digits.begin(), '0');
    ++point_pos;
  }
  while (static_cast<int>(digits.size()) < point_pos + decimals + 1) digits.push_back('0');

  std::string kept = digits.substr(0, static_cast<std::size_t>(point_pos + decimals));
  bool round_up = digits[static_cast<std::size_t>(point_pos + decimals)] >= '5';
  if (round_up) {
    int j = static_cast<int>(kept.size()) - 1;
    while (j >= 0) {
      if (kept[static_cast<std::size_t>(j)] == '9') {
        kept[static_cast<std::size_t>(j)] = '0';
        --j;
      } else {
        ++kept[static_cast<std::size_t>(j)];
        break;
      }
    }
    if (j < 0) {
      kept.insert(kept.begin(), '1');
      ++point_pos;
    }
  }

  std::string int_part = kept.substr(0, static_cast<std::size_t>(point_pos));
  std::string frac_part = kept.substr(static_cast<std::size_t>(point_pos));
  std::size_t nz = int_part.find_first_not_of('0');
  int_part = nz == std::string::npos ? "0" : int_part.substr(nz);

  bool all_zero = int_part == "0" && frac_part.find_first_not_of('0') == std::string::npos;
  std::string out = (negative && !all_zero) ? "-" : "";
  out += int_part;
  if (decimals > 0) {
    out += '.';
    out += frac_part;
  }
  return out;
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return "nan";
  auto rounded = round_decimal_text(std::string_view(buf, static_cast<std::size_t>(ptr - buf)), decimals);
  return rounded ? *rounded : std::string("nan");
}

}  // namespace uigauge
