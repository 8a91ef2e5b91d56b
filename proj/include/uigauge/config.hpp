#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace uigauge {

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Parses the TOML subset used by uigauge config files into a JSON object:
/// `[table]` and `[a.b]` headers, bare or quoted keys, dotted keys, basic and
/// literal strings, integers, floats, booleans and (possibly multi-line)
/// arrays of those. `${NAME}` inside basic strings is replaced from `env`;
/// an unset variable is a ConfigError. Throws ConfigError with a line number
/// on anything outside the subset.
nlohmann::json parse_toml(std::string_view text, const EnvLookup& env = process_env);
nlohmann::json load_toml(const std::filesystem::path& path, const EnvLookup& env = process_env);

}  // namespace uigauge
