#include "uigauge/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "uigauge/error.hpp"
#include "uigauge/numfmt.hpp"

namespace uigauge {

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

namespace {

class TomlReader {
 public:
  TomlReader(std::string_view text, const EnvLookup& env) : text_(text), env_(env) {}

  nlohmann::json parse() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (true) {
      skip_blank_and_comments();
      if (at_end()) break;
      if (peek() == '[') {
        ++pos_;
        if (peek() == '[') fail("arrays of tables are not supported");
        skip_inline_space();
        auto path = read_key_path();
        skip_inline_space();
        expect(']');
        table = &root;
        for (const auto& part : path) table = &descend(*table, part);
      } else {
        auto path = read_key_path();
        skip_inline_space();
        expect('=');
        skip_inline_space();
        nlohmann::json* target = table;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) target = &descend(*target, path[i]);
        if (target->contains(path.back())) fail("duplicate key '" + path.back() + "'");
        (*target)[path.back()] = read_value();
      }
      end_of_line();
    }
    return root;
  }

 private:
  std::string_view text_;
  const EnvLookup& env_;
  std::size_t pos_ = 0;

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  int line() const {
    int n = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) n += text_[i] == '\n';
    return n;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ConfigError, "line " + std::to_string(line()) + ": " + what);
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_inline_space() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!at_end() && peek() != '\n') ++pos_;
    }
  }

  void skip_blank_and_comments() {
    while (!at_end()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else if (c == '#') {
        skip_comment();
      } else {
        break;
      }
    }
  }

  void end_of_line() {
    skip_inline_space();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (!at_end() && peek() != '\n') fail("unexpected trailing characters");
  }

  nlohmann::json& descend(nlohmann::json& node, const std::string& key) {
    auto& child = node[key];
    if (child.is_null()) child = nlohmann::json::object();
    if (!child.is_object()) fail("key '" + key + "' is not a table");
    return child;
  }

  std::vector<std::string> read_key_path() {
    std::vector<std::string> parts;
    while (true) {
      skip_inline_space();
      if (peek() == '"') {
        parts.push_back(read_basic_string());
      } else if (peek() == '\'') {
        parts.push_back(read_literal_string());
      } else {
        std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
        if (pos_ == start) fail("expected a key");
        parts.emplace_back(text_.substr(start, pos_ - start));
      }
      skip_inline_space();
      if (peek() != '.') break;
      ++pos_;
    }
    return parts;
  }

  std::string read_basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      char c = text_[pos_++];
      if (c == '"') break;
      if (c == '\\') {
        if (at_end()) fail("unterminated escape");
        char e = text_[pos_++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case 'r': out.push_back('\r'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          case '$': out.push_back('$'); out.push_back('\x01'); break;  // literal "$", not interpolated
          default: fail(std::string("unsupported escape \\") + e);
        }
        continue;
      }
      out.push_back(c);
    }
    return interpolate(out);
  }

  std::string read_literal_string() {
    expect('\'');
    std::size_t end = text_.find('\'', pos_);
    std::size_t nl = text_.find('\n', pos_);
    if (end == std::string_view::npos || (nl != std::string_view::npos && nl < end)) fail("unterminated string");
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  std::string interpolate(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '$' && i + 1 < s.size() && s[i + 1] == '\x01') {
        out.push_back('$');
        ++i;
      } else if (s[i] == '$' && i + 1 < s.size() && s[i + 1] == '{') {
        std::size_t close = s.find('}', i + 2);
        if (close == std::string::npos) fail("unterminated ${...}");
        std::string name = s.substr(i + 2, close - i - 2);
        auto value = env_(name);
        if (!value) fail("environment variable " + name + " is not set");
        out += *value;
        i = close;
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }

  nlohmann::json read_value() {
    char c = peek();
    if (c == '"') return read_basic_string();
    if (c == '\'') return read_literal_string();
    if (c == '[') return read_array();
    std::size_t start = pos_;
    while (!at_end() && peek() != ',' && peek() != ']' && peek() != '#' && peek() != '\n' && peek() != '\r' &&
           peek() != ' ' && peek() != '\t') {
      ++pos_;
    }
    std::string token(text_.substr(start, pos_ - start));
    if (token == "true") return true;
    if (token == "false") return false;
    std::string digits;
    for (char ch : token) {
      if (ch != '_') digits.push_back(ch);
    }
    bool integral = !digits.empty() && digits.find_first_of(".eE") == std::string::npos;
    if (integral) {
      try {
        std::size_t used = 0;
        long long v = std::stoll(digits, &used);
        if (used == digits.size()) return v;
      } catch (const std::exception&) {
      }
    } else if (auto d = parse_double(digits)) {
      return *d;
    }
    fail("unsupported value '" + token + "'");
  }

  nlohmann::json read_array() {
    expect('[');
    nlohmann::json arr = nlohmann::json::array();
    while (true) {
      skip_blank_and_comments();
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      if (peek() == '[') fail("nested arrays are not supported");
      arr.push_back(read_value());
      skip_blank_and_comments();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }
};

}  // namespace

nlohmann::json parse_toml(std::string_view text, const EnvLookup& env) { return TomlReader(text, env).parse(); }

nlohmann::json load_toml(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_toml(buf.str(), env);
  } catch (const Error& e) {
    std::string what = e.what();
    std::string prefix = std::string(to_string(ErrorCode::ConfigError)) + ": ";
    if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
    throw Error(ErrorCode::ConfigError, path.string() + ": " + what);
  }
}

}  // namespace uigauge
