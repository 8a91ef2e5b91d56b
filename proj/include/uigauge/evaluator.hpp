#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "uigauge/dataset.hpp"
#include "uigauge/parser.hpp"

namespace uigauge {

/// Point (or box centroid) containment test against the ground-truth box.
/// Points are in [0, coord_scale] and converted with (x/coord_scale)*width.
bool grounding_hit(const ParsedPrediction& pred, const BoundingBox& gt_box, int image_width, int image_height,
                   double coord_scale = 100.0);

struct ConclusionScore {
  bool correct = false;
  bool fallback_applied = false;
  Status effective = Status::Passed;  // prediction as scored; the inverse of gt under fallback
};

/// A missing conclusion is scored as the inverse of the ground truth.
ConclusionScore score_expected_result(const ParsedPrediction& pred, Status gt_status);

struct EvalRecord {
  std::string annotation_id;
  AnnotationKind kind = AnnotationKind::TestAction;
  Language language = Language::EN;
  ParsedPrediction prediction;
  bool prediction_present = false;
  std::optional<bool> grounding_hit;
  std::optional<bool> conclusion_correct;
  bool fallback_applied = false;
  std::optional<Status> gt_status;
  std::optional<Status> scored_status;
};

struct Ratio {
  std::size_t hits = 0;
  std::size_t n = 0;
  /// 100*hits/n, nullopt for an empty subset.
  std::optional<double> percent() const;
  void add(bool hit) {
    ++n;
    hits += hit ? 1 : 0;
  }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

// confusion[gt][pred], index 0 = Passed, 1 = Failed.
using Confusion = std::array<std::array<std::size_t, 2>, 2>;

inline std::size_t status_index(Status s) { return s == Status::Passed ? 0 : 1; }

struct MetricsReport {
  Ratio ta_vg, ta_vg_de, ta_vg_en;
  Ratio er_vg, er_vg_de, er_vg_en;
  Ratio er_evl, er_evl_de, er_evl_en;
  Confusion confusion{};
  std::optional<double> precision_passed;  // positive class: Passed
  std::optional<double> recall_passed;
  std::size_t fallbacks = 0;
  std::size_t missing_predictions = 0;
  bool evaluation_capable = true;  // false: the model emits no conclusions, ER_evl renders as "-"

  /// The nine accuracies in table column order.
  std::array<const Ratio*, 9> columns() const;
};

struct EvaluateOptions {
  double coord_scale = 100.0;
  std::optional<bool> evaluation_capable;  // unset: capable iff any ExpectedResult prediction has a conclusion
};

/// Scores every annotation. Predictions for ids not in the dataset raise
/// UnknownAnnotationId; annotations without a prediction count as unparseable.
std::vector<EvalRecord> score_records(const Dataset& dataset,
                                      const std::unordered_map<std::string, ParsedPrediction>& predictions,
                                      const EvaluateOptions& options = {});
MetricsReport aggregate(const std::vector<EvalRecord>& records, const EvaluateOptions& options = {});
MetricsReport evaluate(const Dataset& dataset, const std::unordered_map<std::string, ParsedPrediction>& predictions,
                       const EvaluateOptions& options = {});

using PredictionMap = std::unordered_map<std::string, ParsedPrediction>;

/// JSONL with {"annotation_id", "raw_response"} per line; a line may carry a
/// pre-parsed "prediction" object instead of the raw text. Duplicate ids are
/// a MalformedRecord.
PredictionMap parse_predictions(std::string_view text, const ParseOptions& options = {});
PredictionMap load_predictions(const std::filesystem::path& path, const ParseOptions& options = {});

/// Row-normalized percentages; a ground-truth row with no records stays 0.
/// EmptyInput when there are no ExpectedResult records.
std::array<std::array<double, 2>, 2> confusion_matrix(const std::vector<EvalRecord>& records);
std::array<std::array<double, 2>, 2> normalize_confusion(const Confusion& counts);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalRecord& record);

// ---- pointing benchmarks (ScreenSpot-style) ----

struct PointingItem {
  std::string id;
  std::string category;
  int width = 0;
  int height = 0;
  BoundingBox box;
};

struct PointingManifest {
  std::vector<PointingItem> items;
  std::optional<std::vector<std::string>> categories;  // closed set when declared
};

/// JSONL with item records {"id","category","width","height","box":[x0,y0,x1,y1]}
/// and an optional {"type":"categories","categories":[...]} record.
PointingManifest parse_pointing_manifest(std::string_view text);
PointingManifest load_pointing_manifest(const std::filesystem::path& path);

enum class AverageMode { Macro, Micro };

struct CategoryReport {
  std::vector<std::pair<std::string, Ratio>> per_category;  // declared order, else first appearance
  double macro_average = 0;  // unweighted mean of category accuracies
  double micro_average = 0;  // pooled hits / pooled n
  AverageMode mode = AverageMode::Macro;
  double average() const { return mode == AverageMode::Macro ? macro_average : micro_average; }
};

CategoryReport evaluate_pointing_benchmark(const PointingManifest& manifest,
                                           const std::unordered_map<std::string, ParsedPrediction>& predictions,
                                           double coord_scale = 100.0, AverageMode mode = AverageMode::Macro);
nlohmann::json to_json(const CategoryReport& report);

// ---- rendering ----

/// One table row: nine percentages in column order, nullopt renders as "-".
struct ReportRow {
  std::string model;
  std::array<std::optional<double>, 9> values{};
};

ReportRow to_row(const std::string& model, const MetricsReport& report);
/// Stable sort ascending by TA_vg; rows without TA_vg go last.
void sort_rows(std::vector<ReportRow>& rows);
/// Markdown table with the columns Model, ↓TA_vg, TA_vg^DE, TA_vg^EN, ER_vg, ...
std::string render_markdown(const std::vector<ReportRow>& rows);
/// {"rows": [{"model", "ta_vg", ..., "er_evl_en"}]}, null for a missing cell.
std::vector<ReportRow> rows_from_json(const nlohmann::json& j);
nlohmann::json to_json(const std::vector<ReportRow>& rows);
std::string render_category_markdown(const std::vector<std::pair<std::string, CategoryReport>>& rows);
std::string render_confusion_svg(const Confusion& counts, const std::string& title);

extern const std::array<const char*, 9> kMetricColumns;

}  // namespace uigauge
