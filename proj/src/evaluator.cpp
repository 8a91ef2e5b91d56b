#include "uigauge/evaluator.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "uigauge/error.hpp"
#include "uigauge/numfmt.hpp"

namespace uigauge {

using nlohmann::json;

const std::array<const char*, 9> kMetricColumns = {"ta_vg",  "ta_vg_de",  "ta_vg_en",  "er_vg", "er_vg_de",
                                                   "er_vg_en", "er_evl", "er_evl_de", "er_evl_en"};

bool grounding_hit(const ParsedPrediction& pred, const BoundingBox& gt_box, int image_width, int image_height,
                   double coord_scale) {
  std::optional<PointF> pixel;
  bool use_box = pred.grounding == GroundingSource::Box || (pred.grounding == GroundingSource::Auto && !pred.point);
  if (!use_box && pred.point) {
    pixel = PointF{pred.point->x / coord_scale * image_width, pred.point->y / coord_scale * image_height};
  } else if (pred.box) {
    PointF c = pred.box->centroid();
    pixel = PointF{c.x * image_width, c.y * image_height};
  }
  return pixel && gt_box.contains(pixel->x, pixel->y);
}

ConclusionScore score_expected_result(const ParsedPrediction& pred, Status gt_status) {
  if (pred.conclusion) return {*pred.conclusion == gt_status, false, *pred.conclusion};
  return {false, true, inverse(gt_status)};
}

std::optional<double> Ratio::percent() const {
  if (n == 0) return std::nullopt;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

std::array<const Ratio*, 9> MetricsReport::columns() const {
  return {&ta_vg, &ta_vg_de, &ta_vg_en, &er_vg, &er_vg_de, &er_vg_en, &er_evl, &er_evl_de, &er_evl_en};
}

std::vector<EvalRecord> score_records(const Dataset& dataset,
                                      const std::unordered_map<std::string, ParsedPrediction>& predictions,
                                      const EvaluateOptions& options) {
  std::vector<std::string> unknown;
  for (const auto& [id, _] : predictions) {
    if (!dataset.find_annotation(id)) unknown.push_back(id);
  }
  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    throw Error(ErrorCode::UnknownAnnotationId, "prediction for unknown annotation '" + unknown.front() + "'" +
                                                    (unknown.size() > 1 ? " (and " + std::to_string(unknown.size() - 1) + " more)" : ""));
  }

  const auto& annotations = dataset.annotations();
  std::vector<EvalRecord> records(annotations.size());
  const long n = static_cast<long>(annotations.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const Annotation& a = annotations[static_cast<std::size_t>(i)];
    const BenchmarkImage& img = dataset.image_of(a);
    EvalRecord& r = records[static_cast<std::size_t>(i)];
    r.annotation_id = a.id;
    r.kind = a.kind;
    r.language = img.language;
    auto it = predictions.find(a.id);
    r.prediction_present = it != predictions.end();
    if (r.prediction_present) r.prediction = it->second;
    r.grounding_hit = grounding_hit(r.prediction, a.box, img.width, img.height, options.coord_scale);
    if (a.kind == AnnotationKind::ExpectedResult) {
      ConclusionScore s = score_expected_result(r.prediction, *a.expected_status);
      r.conclusion_correct = s.correct;
      r.fallback_applied = s.fallback_applied;
      r.gt_status = a.expected_status;
      r.scored_status = s.effective;
    }
  }
  return records;
}

MetricsReport aggregate(const std::vector<EvalRecord>& records, const EvaluateOptions& options) {
  MetricsReport m;
  bool any_conclusion = false;
  for (const auto& r : records) {
    bool de = r.language == Language::DE;
    if (!r.prediction_present) ++m.missing_predictions;
    if (r.kind == AnnotationKind::TestAction) {
      m.ta_vg.add(*r.grounding_hit);
      (de ? m.ta_vg_de : m.ta_vg_en).add(*r.grounding_hit);
      continue;
    }
    m.er_vg.add(*r.grounding_hit);
    (de ? m.er_vg_de : m.er_vg_en).add(*r.grounding_hit);
    m.er_evl.add(*r.conclusion_correct);
    (de ? m.er_evl_de : m.er_evl_en).add(*r.conclusion_correct);
    m.confusion[status_index(*r.gt_status)][status_index(*r.scored_status)] += 1;
    if (r.fallback_applied) ++m.fallbacks;
    if (r.prediction.conclusion) any_conclusion = true;
  }
  std::size_t tp = m.confusion[0][0];
  std::size_t predicted_passed = m.confusion[0][0] + m.confusion[1][0];
  std::size_t actual_passed = m.confusion[0][0] + m.confusion[0][1];
  if (predicted_passed > 0) m.precision_passed = 100.0 * static_cast<double>(tp) / static_cast<double>(predicted_passed);
  if (actual_passed > 0) m.recall_passed = 100.0 * static_cast<double>(tp) / static_cast<double>(actual_passed);
  m.evaluation_capable = options.evaluation_capable.value_or(any_conclusion);
  return m;
}

MetricsReport evaluate(const Dataset& dataset, const std::unordered_map<std::string, ParsedPrediction>& predictions,
                       const EvaluateOptions& options) {
  return aggregate(score_records(dataset, predictions, options), options);
}

PredictionMap parse_predictions(std::string_view text, const ParseOptions& options) {
  PredictionMap out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = [&] { return "predictions line " + std::to_string(line_no); };
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedRecord, where() + ": not a JSON object");
    try {
      auto id = j.at("annotation_id").get<std::string>();
      ParsedPrediction p = j.contains("prediction") ? prediction_from_json(j["prediction"])
                                                    : parse_prediction(j.at("raw_response").get<std::string>(), options);
      if (!out.emplace(id, std::move(p)).second) {
        throw Error(ErrorCode::MalformedRecord, where() + ": duplicate prediction for '" + id + "'");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, where() + ": " + e.what());
    }
  }
  return out;
}

PredictionMap load_predictions(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_predictions(buf.str(), options);
}

std::array<std::array<double, 2>, 2> normalize_confusion(const Confusion& counts) {
  std::array<std::array<double, 2>, 2> out{};
  for (std::size_t g = 0; g < 2; ++g) {
    std::size_t row = counts[g][0] + counts[g][1];
    if (row == 0) continue;
    for (std::size_t p = 0; p < 2; ++p) out[g][p] = 100.0 * static_cast<double>(counts[g][p]) / static_cast<double>(row);
  }
  return out;
}

std::array<std::array<double, 2>, 2> confusion_matrix(const std::vector<EvalRecord>& records) {
  Confusion counts{};
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.kind != AnnotationKind::ExpectedResult) continue;
    counts[status_index(*r.gt_status)][status_index(*r.scored_status)] += 1;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::EmptyInput, "no ExpectedResult records to tabulate");
  return normalize_confusion(counts);
}

namespace {

json ratio_json(const Ratio& r) {
  auto pct = r.percent();
  return json{{"hits", r.hits}, {"n", r.n}, {"percent", pct ? json(*pct) : json()}};
}

Ratio ratio_from_json(const json& j) { return Ratio{j.at("hits").get<std::size_t>(), j.at("n").get<std::size_t>()}; }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(); }

}  // namespace

json to_json(const MetricsReport& m) {
  json j;
  auto cols = m.columns();
  for (std::size_t i = 0; i < cols.size(); ++i) j[kMetricColumns[i]] = ratio_json(*cols[i]);
  j["confusion"] = {{"passed", {{"passed", m.confusion[0][0]}, {"failed", m.confusion[0][1]}}},
                    {"failed", {{"passed", m.confusion[1][0]}, {"failed", m.confusion[1][1]}}}};
  j["precision_passed"] = optional_json(m.precision_passed);
  j["recall_passed"] = optional_json(m.recall_passed);
  j["fallbacks"] = m.fallbacks;
  j["missing_predictions"] = m.missing_predictions;
  j["evaluation_capable"] = m.evaluation_capable;
  return j;
}

MetricsReport metrics_from_json(const json& j) {
  MetricsReport m;
  try {
    std::array<Ratio*, 9> cols = {&m.ta_vg, &m.ta_vg_de, &m.ta_vg_en, &m.er_vg, &m.er_vg_de,
                                  &m.er_vg_en, &m.er_evl, &m.er_evl_de, &m.er_evl_en};
    for (std::size_t i = 0; i < cols.size(); ++i) *cols[i] = ratio_from_json(j.at(kMetricColumns[i]));
    const json& c = j.at("confusion");
    m.confusion[0][0] = c.at("passed").at("passed");
    m.confusion[0][1] = c.at("passed").at("failed");
    m.confusion[1][0] = c.at("failed").at("passed");
    m.confusion[1][1] = c.at("failed").at("failed");
    if (j.contains("precision_passed") && j["precision_passed"].is_number()) m.precision_passed = j["precision_passed"].get<double>();
    if (j.contains("recall_passed") && j["recall_passed"].is_number()) m.recall_passed = j["recall_passed"].get<double>();
    m.fallbacks = j.value("fallbacks", std::size_t{0});
    m.missing_predictions = j.value("missing_predictions", std::size_t{0});
    m.evaluation_capable = j.value("evaluation_capable", true);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("metrics report: ") + e.what());
  }
  return m;
}

json to_json(const EvalRecord& r) {
  json j{{"annotation_id", r.annotation_id},
         {"kind", std::string(to_string(r.kind))},
         {"language", std::string(to_string(r.language))},
         {"prediction_present", r.prediction_present},
         {"grounding_hit", r.grounding_hit ? json(*r.grounding_hit) : json()},
         {"conclusion_correct", r.conclusion_correct ? json(*r.conclusion_correct) : json()},
         {"fallback_applied", r.fallback_applied}};
  j["gt_status"] = r.gt_status ? json(std::string(to_string(*r.gt_status))) : json();
  j["scored_status"] = r.scored_status ? json(std::string(to_string(*r.scored_status))) : json();
  return j;
}

// ---- pointing ----

PointingManifest parse_pointing_manifest(std::string_view text) {
  PointingManifest m;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto where = [&] { return "line " + std::to_string(line_no); };
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedRecord, where() + ": not a JSON object");
    try {
      if (j.value("type", "") == "categories") {
        m.categories = j.at("categories").get<std::vector<std::string>>();
        continue;
      }
      PointingItem item;
      item.id = j.at("id").get<std::string>();
      item.category = j.at("category").get<std::string>();
      item.width = j.at("width").get<int>();
      item.height = j.at("height").get<int>();
      auto b = j.at("box").get<std::vector<int>>();
      if (b.size() != 4) throw Error(ErrorCode::MalformedRecord, where() + ": box needs 4 values");
      item.box = BoundingBox{b[0], b[1], b[2], b[3]};
      if (!item.box.valid_for(item.width, item.height)) {
        throw Error(ErrorCode::BoxOutOfBounds, where() + ": box of '" + item.id + "' is outside the image");
      }
      if (!ids.insert(item.id).second) throw Error(ErrorCode::DuplicateId, where() + ": duplicate id '" + item.id + "'");
      m.items.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, where() + ": " + e.what());
    }
  }
  if (m.categories) {
    std::set<std::string> allowed(m.categories->begin(), m.categories->end());
    for (const auto& item : m.items) {
      if (!allowed.count(item.category)) {
        throw Error(ErrorCode::UnknownCategory, "item '" + item.id + "' has undeclared category '" + item.category + "'");
      }
    }
  }
  return m;
}

PointingManifest load_pointing_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pointing_manifest(buf.str());
}

CategoryReport evaluate_pointing_benchmark(const PointingManifest& manifest,
                                           const std::unordered_map<std::string, ParsedPrediction>& predictions,
                                           double coord_scale, AverageMode mode) {
  if (manifest.items.empty()) throw Error(ErrorCode::EmptyInput, "pointing manifest has no items");
  CategoryReport report;
  report.mode = mode;
  std::map<std::string, std::size_t> slot;
  auto ensure = [&](const std::string& c) {
    auto [it, inserted] = slot.emplace(c, report.per_category.size());
    if (inserted) report.per_category.emplace_back(c, Ratio{});
    return it->second;
  };
  if (manifest.categories) {
    for (const auto& c : *manifest.categories) ensure(c);
  }
  std::set<std::string> ids;
  for (const auto& item : manifest.items) ids.insert(item.id);
  for (const auto& [id, _] : predictions) {
    if (!ids.count(id)) throw Error(ErrorCode::UnknownAnnotationId, "prediction for unknown item '" + id + "'");
  }
  static const ParsedPrediction kNone;
  Ratio pooled;
  for (const auto& item : manifest.items) {
    auto it = predictions.find(item.id);
    bool hit = grounding_hit(it == predictions.end() ? kNone : it->second, item.box, item.width, item.height, coord_scale);
    report.per_category[ensure(item.category)].second.add(hit);
    pooled.add(hit);
  }
  double sum = 0;
  std::size_t counted = 0;
  for (const auto& [c, r] : report.per_category) {
    if (auto p = r.percent()) {
      sum += *p;
      ++counted;
    }
  }
  report.macro_average = counted ? sum / static_cast<double>(counted) : 0.0;
  report.micro_average = *pooled.percent();
  return report;
}

json to_json(const CategoryReport& r) {
  json cats = json::array();
  for (const auto& [c, ratio] : r.per_category) {
    json e = ratio_json(ratio);
    e["category"] = c;
    cats.push_back(e);
  }
  return json{{"categories", cats},
              {"macro_average", r.macro_average},
              {"micro_average", r.micro_average},
              {"mode", r.mode == AverageMode::Macro ? "macro" : "micro"},
              {"average", r.average()}};
}

// ---- rendering ----

ReportRow to_row(const std::string& model, const MetricsReport& report) {
  ReportRow row;
  row.model = model;
  auto cols = report.columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    bool evl = i >= 6;
    if (evl && !report.evaluation_capable) continue;
    row.values[i] = cols[i]->percent();
  }
  return row;
}

void sort_rows(std::vector<ReportRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (!a.values[0] || !b.values[0]) return a.values[0].has_value() && !b.values[0].has_value();
    return *a.values[0] < *b.values[0];
  });
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_fixed1(*v) : "-"; }

std::string escape_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out += c;
  }
  return out;
}

}  // namespace

std::string render_markdown(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "| Model | ↓TA_vg | TA_vg^DE | TA_vg^EN | ER_vg | ER_vg^DE | ER_vg^EN | ER_evl | ER_evl^DE | ER_evl^EN |\n";
  out << "|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& r : rows) {
    out << "| " << escape_cell(r.model);
    for (const auto& v : r.values) out << " | " << cell(v);
    out << " |\n";
  }
  return out.str();
}

std::string render_category_markdown(const std::vector<std::pair<std::string, CategoryReport>>& rows) {
  std::ostringstream out;
  std::vector<std::string> categories;
  for (const auto& [_, r] : rows) {
    for (const auto& [c, __] : r.per_category) {
      if (std::find(categories.begin(), categories.end(), c) == categories.end()) categories.push_back(c);
    }
  }
  out << "| Model | ↓Avg |";
  for (const auto& c : categories) out << ' ' << escape_cell(c) << " |";
  out << "\n|---|---:|";
  for (std::size_t i = 0; i < categories.size(); ++i) out << "---:|";
  out << '\n';
  auto sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second.average() < b.second.average(); });
  for (const auto& [model, r] : sorted) {
    out << "| " << escape_cell(model) << " | " << format_fixed1(r.average()) << " |";
    for (const auto& c : categories) {
      auto it = std::find_if(r.per_category.begin(), r.per_category.end(), [&](const auto& e) { return e.first == c; });
      out << ' ' << (it == r.per_category.end() ? std::string("-") : cell(it->second.percent())) << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string render_confusion_svg(const Confusion& counts, const std::string& title) {
  auto pct = normalize_confusion(counts);
  const char* labels[2] = {"PASSED", "FAILED"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"320\" height=\"300\" viewBox=\"0 0 320 300\" "
         "font-family=\"sans-serif\">\n";
  std::string t;
  for (char c : title) {
    if (c == '<') t += "&lt;";
    else if (c == '>') t += "&gt;";
    else if (c == '&') t += "&amp;";
    else t += c;
  }
  svg << "<text x=\"160\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << t << "</text>\n";
  svg << "<text x=\"190\" y=\"50\" text-anchor=\"middle\" font-size=\"12\">predicted</text>\n";
  svg << "<text x=\"20\" y=\"170\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 20 170)\">ground truth</text>\n";
  for (int p = 0; p < 2; ++p) {
    svg << "<text x=\"" << 130 + p * 120 << "\" y=\"70\" text-anchor=\"middle\" font-size=\"12\">" << labels[p] << "</text>\n";
  }
  for (int g = 0; g < 2; ++g) {
    svg << "<text x=\"62\" y=\"" << 140 + g * 110 << "\" text-anchor=\"middle\" font-size=\"12\">" << labels[g] << "</text>\n";
    for (int p = 0; p < 2; ++p) {
      double v = pct[g][p];
      int shade = 255 - static_cast<int>(v / 100.0 * 200.0 + 0.5);
      svg << "<rect x=\"" << 70 + p * 120 << "\" y=\"" << 80 + g * 110 << "\" width=\"120\" height=\"110\" fill=\"rgb("
          << shade << ',' << shade << ",255)\" stroke=\"#333\"/>\n";
      svg << "<text x=\"" << 130 + p * 120 << "\" y=\"" << 132 + g * 110 << "\" text-anchor=\"middle\" font-size=\"16\">"
          << format_fixed1(v) << "%</text>\n";
      svg << "<text x=\"" << 130 + p * 120 << "\" y=\"" << 152 + g * 110 << "\" text-anchor=\"middle\" font-size=\"11\">n="
          << counts[g][p] << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<ReportRow> rows_from_json(const json& j) {
  std::vector<ReportRow> rows;
  try {
    for (const auto& r : j.at("rows")) {
      ReportRow row;
      row.model = r.at("model").get<std::string>();
      for (std::size_t i = 0; i < kMetricColumns.size(); ++i) {
        auto it = r.find(kMetricColumns[i]);
        if (it != r.end() && !it->is_null()) row.values[i] = it->get<double>();
      }
      rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("report rows: ") + e.what());
  }
  return rows;
}

json to_json(const std::vector<ReportRow>& rows) {
  json list = json::array();
  for (const auto& row : rows) {
    json r{{"model", row.model}};
    for (std::size_t i = 0; i < kMetricColumns.size(); ++i) r[kMetricColumns[i]] = optional_json(row.values[i]);
    list.push_back(r);
  }
  return json{{"rows", list}};
}

}  // namespace uigauge
