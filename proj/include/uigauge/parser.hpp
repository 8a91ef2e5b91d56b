#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

#include <json.hpp>

#include "uigauge/dataset.hpp"

namespace uigauge {

/// Box in [0,1] image-relative coordinates.
struct NormalizedBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  PointF centroid() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }
  friend bool operator==(const NormalizedBox&, const NormalizedBox&) = default;
};

/// Which geometry the evaluator should use. Auto means point first, then box.
enum class GroundingSource { Auto, Point, Box };

struct ParsedPrediction {
  std::optional<std::string> reasoning;
  std::optional<PointF> point;  // in coordinate-scale units
  std::optional<NormalizedBox> box;
  std::optional<Status> conclusion;
  GroundingSource grounding = GroundingSource::Auto;
  std::string raw;
};

struct ParseOptions {
  double coord_scale = 100.0;  // point coordinates lie in [0, coord_scale]
  double box_scale = 1000.0;   // [[x0,y0,x1,y1]] quadruples lie in [0, box_scale]
  bool prefer_box = false;     // model grounds with boxes natively
};

/// Last `<point x=".." y="..">` tag; nullopt if absent, non-numeric, or outside [0, scale_max].
std::optional<PointF> parse_point(std::string_view text, double scale_max = 100.0);

/// `Conclusion:` line (case-insensitive, last such line wins, first verdict on it; an empty remainder
/// looks at the next non-blank line), else the last standalone PASSED/FAILED
/// token anywhere, else nullopt.
std::optional<Status> parse_conclusion(std::string_view text);

/// Last well-formed `[[x0,y0,x1,y1]]` quadruple divided by `scale`.
std::optional<NormalizedBox> parse_box(std::string_view text, double scale = 1000.0);

ParsedPrediction parse_prediction(std::string_view text, const ParseOptions& options = {});

nlohmann::json to_json(const ParsedPrediction& p);
ParsedPrediction prediction_from_json(const nlohmann::json& j);

// ---- teacher replies ----

enum class TeacherParseErrorKind { MissingBlock, UnrecognizedConclusion };

struct TeacherParseError {
  TeacherParseErrorKind kind;
  std::string detail;  // header name or offending conclusion text
  std::string message() const;
};

/// Value-or-error result; the teacher parsers never throw.
template <typename T>
class ParseResult {
 public:
  ParseResult(T value) : state_(std::move(value)) {}
  ParseResult(TeacherParseError error) : state_(std::move(error)) {}

  bool ok() const { return std::holds_alternative<T>(state_); }
  explicit operator bool() const { return ok(); }
  const T& value() const { return std::get<T>(state_); }
  const TeacherParseError& error() const { return std::get<TeacherParseError>(state_); }

 private:
  std::variant<T, TeacherParseError> state_;
};

struct TeacherTestActionRecord {
  std::string reasoning;
  std::optional<std::string> utterance;  // nullopt: teacher answered "none"
};

struct TeacherExpectedResultRecord {
  std::optional<std::string> prior_test_action;
  std::string reasoning;
  std::string expected_result;
  Status conclusion = Status::Passed;
};

ParseResult<TeacherTestActionRecord> parse_teacher_test_action(std::string_view text);
ParseResult<TeacherExpectedResultRecord> parse_teacher_expected_result(std::string_view text,
                                                                       bool expects_prior_action);

}  // namespace uigauge
