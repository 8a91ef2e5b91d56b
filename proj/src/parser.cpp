#include "uigauge/parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <vector>

#include "uigauge/numfmt.hpp"

namespace uigauge {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool iequals_at(std::string_view text, std::size_t pos, std::string_view word) {
  if (pos + word.size() > text.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) != std::tolower(static_cast<unsigned char>(word[i]))) {
      return false;
    }
  }
  return true;
}

// Whole-word, case-insensitive PASSED/FAILED occurrences; returns the last,
// or the first when `first` is set.
std::optional<Status> verdict_token(std::string_view text, bool first = false) {
  std::optional<Status> found;
  for (std::size_t i = 0; i + 6 <= text.size(); ++i) {
    if (i > 0 && is_word_char(text[i - 1])) continue;
    if (i + 6 < text.size() && is_word_char(text[i + 6])) continue;
    if (iequals_at(text, i, "passed")) {
      found = Status::Passed;
    } else if (iequals_at(text, i, "failed")) {
      found = Status::Failed;
    }
    if (found && first) break;
  }
  return found;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  return lines;
}

// Strips leading markdown decoration ("**", "##", "- ") from a line.
std::string_view strip_decoration(std::string_view line) {
  line = trim(line);
  while (!line.empty() && (line.front() == '*' || line.front() == '#' || line.front() == '_')) {
    line.remove_prefix(1);
  }
  return trim(line);
}

// If `line` starts with `label` followed by optional '*' and ':', returns the remainder.
std::optional<std::string_view> label_remainder(std::string_view line, std::string_view label, bool case_sensitive) {
  line = strip_decoration(line);
  bool match = case_sensitive ? line.substr(0, label.size()) == label : iequals_at(line, 0, label);
  if (!match) return std::nullopt;
  std::size_t i = label.size();
  while (i < line.size() && (line[i] == '*' || line[i] == '_' || line[i] == ' ')) ++i;
  if (i >= line.size() || line[i] != ':') return std::nullopt;
  ++i;
  std::string_view rest = line.substr(i);
  while (!rest.empty() && (rest.front() == '*' || rest.front() == '_')) rest.remove_prefix(1);
  return trim(rest);
}

// Parses a double-quoted attribute value starting at text[pos] == '"'.
std::optional<std::string_view> quoted_value(std::string_view text, std::size_t& pos) {
  if (pos >= text.size() || (text[pos] != '"' && text[pos] != '\'')) return std::nullopt;
  char quote = text[pos];
  std::size_t end = text.find(quote, pos + 1);
  if (end == std::string_view::npos) return std::nullopt;
  std::string_view v = text.substr(pos + 1, end - pos - 1);
  pos = end + 1;
  return v;
}

// Parses `<point x=".." y="..">` at `start`; reads attributes until both x and y
// are known, so free text in a later alt attribute cannot break the match.
std::optional<PointF> point_tag_at(std::string_view text, std::size_t start) {
  std::size_t pos = start + 6;  // "<point"
  if (pos >= text.size() || !is_space(text[pos])) return std::nullopt;
  std::optional<double> x, y;
  while (pos < text.size()) {
    while (pos < text.size() && is_space(text[pos])) ++pos;
    if (pos >= text.size() || text[pos] == '>' || text[pos] == '/') break;
    std::size_t name_begin = pos;
    while (pos < text.size() && (is_word_char(text[pos]) || text[pos] == '-')) ++pos;
    if (pos == name_begin) return std::nullopt;
    std::string_view name = text.substr(name_begin, pos - name_begin);
    while (pos < text.size() && is_space(text[pos])) ++pos;
    if (pos >= text.size() || text[pos] != '=') return std::nullopt;
    ++pos;
    while (pos < text.size() && is_space(text[pos])) ++pos;
    auto value = quoted_value(text, pos);
    if (!value) return std::nullopt;
    if (name == "x") {
      x = parse_double(*value);
      if (!x) return std::nullopt;
    } else if (name == "y") {
      y = parse_double(*value);
      if (!y) return std::nullopt;
    }
    if (x && y) return PointF{*x, *y};
  }
  return std::nullopt;
}

}  // namespace

std::optional<PointF> parse_point(std::string_view text, double scale_max) {
  std::optional<PointF> last;
  std::size_t pos = 0;
  while ((pos = text.find("<point", pos)) != std::string_view::npos) {
    if (auto p = point_tag_at(text, pos)) last = p;
    pos += 6;
  }
  if (!last) return std::nullopt;
  if (last->x < 0 || last->y < 0 || last->x > scale_max || last->y > scale_max) return std::nullopt;
  return last;
}

std::optional<Status> parse_conclusion(std::string_view text) {
  auto lines = split_lines(text);
  std::optional<Status> from_line;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto rest = label_remainder(lines[i], "conclusion", false);
    if (!rest) continue;
    std::optional<Status> v = verdict_token(*rest, true);
    if (!v && rest->find_first_not_of(" \t\r.:-*[]`'\"") == std::string_view::npos) {
      for (std::size_t j = i + 1; j < lines.size(); ++j) {
        if (trim(lines[j]).empty()) continue;
        v = verdict_token(lines[j], true);
        break;
      }
    }
    if (v) from_line = v;
  }
  if (from_line) return from_line;
  return verdict_token(text);
}

std::optional<NormalizedBox> parse_box(std::string_view text, double scale) {
  if (!(scale > 0)) return std::nullopt;
  std::optional<NormalizedBox> last;
  std::size_t pos = 0;
  while ((pos = text.find("[[", pos)) != std::string_view::npos) {
    std::size_t close = text.find("]]", pos + 2);
    if (close == std::string_view::npos) break;
    std::string_view inner = text.substr(pos + 2, close - pos - 2);
    std::array<double, 4> v{};
    std::size_t count = 0;
    bool ok = inner.find('[') == std::string_view::npos;
    std::size_t start = 0;
    while (ok && start <= inner.size()) {
      std::size_t comma = inner.find(',', start);
      std::string_view part = inner.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      auto num = parse_double(trim(part));
      if (!num || count >= 4) {
        ok = false;
        break;
      }
      v[count++] = *num;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (ok && count == 4) {
      bool in_range = std::all_of(v.begin(), v.end(), [&](double d) { return d >= 0 && d <= scale; });
      if (in_range && v[0] <= v[2] && v[1] <= v[3]) {
        last = NormalizedBox{v[0] / scale, v[1] / scale, v[2] / scale, v[3] / scale};
      }
    }
    pos += 2;
  }
  return last;
}

ParsedPrediction parse_prediction(std::string_view text, const ParseOptions& options) {
  ParsedPrediction p;
  p.raw = std::string(text);
  p.point = parse_point(text, options.coord_scale);
  p.box = parse_box(text, options.box_scale);
  p.conclusion = parse_conclusion(text);
  if (options.prefer_box && p.box) {
    p.grounding = GroundingSource::Box;
  } else if (p.point) {
    p.grounding = GroundingSource::Point;
  } else if (p.box) {
    p.grounding = GroundingSource::Box;
  }

  // Reasoning is whatever precedes the structured tail.
  std::size_t cut = text.size();
  std::size_t offset = 0;
  for (auto line : split_lines(text)) {
    if (label_remainder(line, "conclusion", false)) {
      cut = std::min(cut, offset);
      break;
    }
    offset += line.size() + 1;
  }
  if (auto tag = text.find("<point"); tag != std::string_view::npos) cut = std::min(cut, tag);
  auto reasoning = trim(text.substr(0, cut));
  if (!reasoning.empty()) p.reasoning = std::string(reasoning);
  return p;
}

nlohmann::json to_json(const ParsedPrediction& p) {
  nlohmann::json j;
  j["reasoning"] = p.reasoning ? nlohmann::json(*p.reasoning) : nlohmann::json();
  j["point"] = p.point ? nlohmann::json{p.point->x, p.point->y} : nlohmann::json();
  j["box"] = p.box ? nlohmann::json{p.box->x0, p.box->y0, p.box->x1, p.box->y1} : nlohmann::json();
  j["conclusion"] = p.conclusion ? nlohmann::json(*p.conclusion == Status::Passed ? "PASSED" : "FAILED")
                                 : nlohmann::json();
  j["grounding"] = p.grounding == GroundingSource::Point ? "point"
                   : p.grounding == GroundingSource::Box ? "box"
                                                         : "auto";
  j["raw"] = p.raw;
  return j;
}

ParsedPrediction prediction_from_json(const nlohmann::json& j) {
  ParsedPrediction p;
  if (j.contains("reasoning") && j["reasoning"].is_string()) p.reasoning = j["reasoning"].get<std::string>();
  if (j.contains("point") && j["point"].is_array() && j["point"].size() == 2) {
    p.point = PointF{j["point"][0].get<double>(), j["point"][1].get<double>()};
  }
  if (j.contains("box") && j["box"].is_array() && j["box"].size() == 4) {
    p.box = NormalizedBox{j["box"][0].get<double>(), j["box"][1].get<double>(), j["box"][2].get<double>(),
                          j["box"][3].get<double>()};
  }
  if (j.contains("conclusion") && j["conclusion"].is_string()) {
    p.conclusion = status_from_string(j["conclusion"].get<std::string>());
  }
  std::string g = j.value("grounding", std::string("auto"));
  p.grounding = g == "point" ? GroundingSource::Point : g == "box" ? GroundingSource::Box : GroundingSource::Auto;
  p.raw = j.value("raw", std::string());
  return p;
}

// ---- teacher replies ----

std::string TeacherParseError::message() const {
  return kind == TeacherParseErrorKind::MissingBlock ? "MissingBlock(" + detail + ")"
                                                     : "UnrecognizedConclusion(" + detail + ")";
}

namespace {

using Blocks = std::vector<std::pair<std::string_view, std::string>>;

// Splits a reply into header blocks. Code-fence lines are dropped; for a
// header that appears several times the last occurrence wins.
Blocks split_blocks(std::string_view text, std::initializer_list<std::string_view> headers) {
  Blocks blocks;
  std::string* current = nullptr;
  for (auto line : split_lines(text)) {
    if (trim(line).substr(0, 3) == "```") continue;
    bool is_header = false;
    for (auto h : headers) {
      if (auto rest = label_remainder(line, h, true)) {
        auto it = std::find_if(blocks.begin(), blocks.end(), [&](const auto& b) { return b.first == h; });
        if (it != blocks.end()) blocks.erase(it);
        blocks.emplace_back(h, std::string(*rest));
        current = &blocks.back().second;
        is_header = true;
        break;
      }
    }
    if (is_header || !current) continue;
    if (!current->empty()) current->push_back('\n');
    current->append(line);
  }
  for (auto& [h, body] : blocks) body = std::string(trim(body));
  return blocks;
}

std::optional<std::string> block(const Blocks& blocks, std::string_view header) {
  for (const auto& [h, body] : blocks) {
    if (h == header && !body.empty()) return body;
  }
  return std::nullopt;
}

std::string strip_wrapping(std::string_view s) {
  s = trim(s);
  auto wrap = [](char c) { return c == '"' || c == '\'' || c == '`' || c == '[' || c == ']' || c == '*' || c == '.'; };
  while (!s.empty() && wrap(s.front())) s.remove_prefix(1);
  while (!s.empty() && wrap(s.back())) s.remove_suffix(1);
  return std::string(trim(s));
}

}  // namespace

ParseResult<TeacherTestActionRecord> parse_teacher_test_action(std::string_view text) {
  auto blocks = split_blocks(text, {"REASONING", "UTTERANCE"});
  auto reasoning = block(blocks, "REASONING");
  if (!reasoning) return TeacherParseError{TeacherParseErrorKind::MissingBlock, "REASONING"};
  auto utterance = block(blocks, "UTTERANCE");
  if (!utterance) return TeacherParseError{TeacherParseErrorKind::MissingBlock, "UTTERANCE"};

  TeacherTestActionRecord rec;
  rec.reasoning = *reasoning;
  std::string bare = strip_wrapping(*utterance);
  std::string lowered = bare;
  for (auto& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lowered != "none") rec.utterance = *utterance;
  return rec;
}

ParseResult<TeacherExpectedResultRecord> parse_teacher_expected_result(std::string_view text,
                                                                       bool expects_prior_action) {
  auto blocks = split_blocks(text, {"TEST ACTION", "REASONING", "EXPECTED RESULT", "CONCLUSION"});
  TeacherExpectedResultRecord rec;
  rec.prior_test_action = block(blocks, "TEST ACTION");
  if (expects_prior_action && !rec.prior_test_action) {
    return TeacherParseError{TeacherParseErrorKind::MissingBlock, "TEST ACTION"};
  }
  auto reasoning = block(blocks, "REASONING");
  if (!reasoning) return TeacherParseError{TeacherParseErrorKind::MissingBlock, "REASONING"};
  auto expected = block(blocks, "EXPECTED RESULT");
  if (!expected) return TeacherParseError{TeacherParseErrorKind::MissingBlock, "EXPECTED RESULT"};
  auto conclusion = block(blocks, "CONCLUSION");
  if (!conclusion) return TeacherParseError{TeacherParseErrorKind::MissingBlock, "CONCLUSION"};

  // First word of the block decides; anything else is unrecognized.
  std::string verdict = strip_wrapping(*conclusion);
  std::size_t word_end = 0;
  while (word_end < verdict.size() && std::isalpha(static_cast<unsigned char>(verdict[word_end]))) ++word_end;
  std::string word = verdict.substr(0, word_end);
  for (auto& c : word) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (word == "PASSED") {
    rec.conclusion = Status::Passed;
  } else if (word == "FAILED") {
    rec.conclusion = Status::Failed;
  } else {
    return TeacherParseError{TeacherParseErrorKind::UnrecognizedConclusion, *conclusion};
  }
  rec.reasoning = *reasoning;
  rec.expected_result = *expected;
  return rec;
}

}  // namespace uigauge
