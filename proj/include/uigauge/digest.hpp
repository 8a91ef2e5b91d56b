#pragma once

#include <string>
#include <string_view>

namespace uigauge {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Standard base64 with padding, no line breaks.
std::string base64_encode(std::string_view data);

}  // namespace uigauge
