#include "uigauge/synth.hpp"

#include <cmath>
#include <condition_variable>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "uigauge/error.hpp"
#include "uigauge/numfmt.hpp"
#include "uigauge/parser.hpp"
#include "uigauge/templates.hpp"

namespace uigauge {

using nlohmann::json;

std::string_view to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::TestAction: return "test_action";
    case SampleKind::ExpectedResultPassed: return "expected_result_passed";
    case SampleKind::ExpectedResultFailed: return "expected_result_failed";
  }
  return "test_action";
}

std::optional<SampleKind> sample_kind_from_string(std::string_view s) {
  for (auto k : kSampleKinds) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

void TargetMix::validate() const {
  double sum = 0;
  for (double w : weights) {
    if (!(w >= 0)) throw Error(ErrorCode::ConfigError, "target_mix ratios must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::ConfigError, "target_mix ratios must sum to 1");
}

json to_json(const TrainingSample& s) {
  json prov{{"teacher_model", s.provenance.teacher_model},
            {"rephraser_model", s.provenance.rephraser_model ? json(*s.provenance.rephraser_model) : json()},
            {"source_annotation_id", s.provenance.source_annotation_id},
            {"retries_used", s.provenance.retries_used},
            {"prior_test_action", s.provenance.prior_test_action ? json(*s.provenance.prior_test_action) : json()}};
  return json{{"image_ref", s.image_ref},
              {"kind", std::string(to_string(s.kind))},
              {"prompt", s.prompt},
              {"response", s.response},
              {"provenance", prov}};
}

TrainingSample training_sample_from_json(const json& j) {
  TrainingSample s;
  try {
    s.image_ref = j.at("image_ref").get<std::string>();
    auto kind = sample_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::MalformedRecord, "unknown sample kind");
    s.kind = *kind;
    s.prompt = j.at("prompt").get<std::string>();
    s.response = j.at("response").get<std::string>();
    const json& p = j.at("provenance");
    s.provenance.teacher_model = p.at("teacher_model").get<std::string>();
    if (p.contains("rephraser_model") && p["rephraser_model"].is_string()) {
      s.provenance.rephraser_model = p["rephraser_model"].get<std::string>();
    }
    s.provenance.source_annotation_id = p.at("source_annotation_id").get<std::string>();
    s.provenance.retries_used = p.value("retries_used", 0);
    if (p.contains("prior_test_action") && p["prior_test_action"].is_string()) {
      s.provenance.prior_test_action = p["prior_test_action"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("training sample: ") + e.what());
  }
  return s;
}

std::pair<std::string, std::string> centroid_coordinates(const BoundingBox& box, int width, int height, double scale) {
  PointF c = box.centroid();
  return {format_fixed1(c.x / width * scale), format_fixed1(c.y / height * scale)};
}

namespace {

std::string trim_copy(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Point-tag text must stay on one line.
std::string one_line(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : trim_copy(s)) {
    if (c == '\n' || c == '\r' || c == '\t' || c == ' ') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

// InferTestAction appends its own period.
std::string without_final_period(std::string s) {
  while (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

Bindings marker_bindings(const MarkerStyle& style) {
  return {{"color", color_phrase(style)}, {"marker_type", marker_phrase(style)}};
}

EncodedImage som_image(const SourceItem& item, const MarkerStyle& style) {
  if (!item.image) throw Error(ErrorCode::MissingImageFile, "no image for " + item.annotation_id);
  return EncodedImage{"image/png", encode_png(render_som(*item.image, item.box, style))};
}

std::string rephrase(const std::string& text, const PipelineConfig& config, const PipelineModels& models) {
  if (!config.rephrase_enabled || text.empty()) return text;
  std::string out = trim_copy(models.rephraser->generate({nullptr, render(TemplateId::Rephrase, {{"text", text}}), 0}));
  return out.empty() ? text : out;
}

std::string respond(TemplateId id, Bindings bindings, bool with_reasoning) {
  if (!with_reasoning) bindings["reasoning"] = "";
  std::string text = render(id, bindings);
  if (!with_reasoning && !text.empty() && text.front() == '\n') text.erase(0, 1);
  return text;
}

void check_models(const PipelineConfig& config, const PipelineModels& models) {
  if (!models.teacher) throw Error(ErrorCode::ConfigError, "pipeline needs a teacher model");
  if (config.rephrase_enabled && !models.rephraser) throw Error(ErrorCode::ConfigError, "rephrasing needs a rephraser model");
  if (config.max_retries_per_item < 0) throw Error(ErrorCode::ConfigError, "max_retries_per_item must be >= 0");
}

Provenance provenance_for(const SourceItem& item, const PipelineConfig& config, const PipelineModels& models, int attempt) {
  Provenance p;
  p.teacher_model = models.teacher->model_id();
  if (config.rephrase_enabled) p.rephraser_model = models.rephraser->model_id();
  p.source_annotation_id = item.annotation_id;
  p.retries_used = attempt;
  return p;
}

}  // namespace

std::optional<TrainingSample> generate_test_action(const SourceItem& item, const PipelineConfig& config,
                                                   const PipelineModels& models) {
  check_models(config, models);
  std::string prompt = render(TemplateId::TeacherTestAction, marker_bindings(config.marker));
  EncodedImage image = som_image(item, config.marker);
  std::string last_error;
  for (int attempt = 0; attempt <= config.max_retries_per_item; ++attempt) {
    auto parsed = parse_teacher_test_action(models.teacher->generate({&image, prompt, attempt}));
    if (!parsed) {
      last_error = parsed.error().message();
      continue;
    }
    if (!parsed.value().utterance) return std::nullopt;

    std::string reasoning = rephrase(parsed.value().reasoning, config, models);
    std::string utterance = without_final_period(one_line(rephrase(*parsed.value().utterance, config, models)));
    auto [cx, cy] = centroid_coordinates(item.box, item.image->width(), item.image->height(), config.coord_scale);

    TrainingSample s;
    s.image_ref = item.image_ref;
    s.kind = SampleKind::TestAction;
    s.prompt = render(TemplateId::InferTestAction, {{"test_action", utterance}});
    s.response = respond(TemplateId::RespondTestAction,
                         {{"reasoning", reasoning}, {"center_x", cx}, {"center_y", cy}, {"test_action", utterance}},
                         config.reasoning_enabled);
    s.provenance = provenance_for(item, config, models, attempt);
    return s;
  }
  throw Error(ErrorCode::TeacherUnparseable, item.annotation_id + ": " + last_error + " after " +
                                                 std::to_string(config.max_retries_per_item + 1) + " attempts");
}

std::optional<TrainingSample> generate_expected_result(const SourceItem& item, Status target,
                                                       const PipelineConfig& config, const PipelineModels& models) {
  check_models(config, models);
  bool passed = target == Status::Passed;
  std::string prompt = render(passed ? TemplateId::TeacherExpectedPassed : TemplateId::TeacherExpectedFailed,
                              marker_bindings(config.marker));
  EncodedImage image = som_image(item, config.marker);
  std::optional<Error> last;
  for (int attempt = 0; attempt <= config.max_retries_per_item; ++attempt) {
    auto parsed = parse_teacher_expected_result(models.teacher->generate({&image, prompt, attempt}), passed);
    if (!parsed) {
      last = Error(ErrorCode::TeacherUnparseable, item.annotation_id + ": " + parsed.error().message());
      continue;
    }
    const auto& rec = parsed.value();
    if (rec.conclusion != target) {
      last = Error(ErrorCode::ConclusionMismatch, item.annotation_id + ": requested " + std::string(to_string(target)) +
                                                      ", teacher concluded " + std::string(to_string(rec.conclusion)));
      continue;
    }

    std::string reasoning = rephrase(rec.reasoning, config, models);
    std::string expectation = one_line(rephrase(rec.expected_result, config, models));
    auto [cx, cy] = centroid_coordinates(item.box, item.image->width(), item.image->height(), config.coord_scale);
    std::string verdict = passed ? "PASSED" : "FAILED";

    TrainingSample s;
    s.image_ref = item.image_ref;
    s.kind = passed ? SampleKind::ExpectedResultPassed : SampleKind::ExpectedResultFailed;
    Bindings prompt_bindings{{"expectation", expectation}};
    s.prompt = config.reasoning_enabled ? render(TemplateId::InferExpectedResult, prompt_bindings)
                                        : render_no_reasoning(TemplateId::InferExpectedResult, prompt_bindings);
    s.response = respond(TemplateId::RespondExpectedResult,
                         {{"reasoning", reasoning},
                          {"evaluation_result", verdict},
                          {"center_x", cx},
                          {"center_y", cy},
                          {"expectation", expectation}},
                         config.reasoning_enabled);
    s.provenance = provenance_for(item, config, models, attempt);
    s.provenance.prior_test_action = rec.prior_test_action;
    return s;
  }
  throw Error(last->code(), std::string(last->what()).substr(std::string(to_string(last->code())).size() + 2) +
                                " after " + std::to_string(config.max_retries_per_item + 1) + " attempts");
}

std::optional<std::string> self_validate(const TrainingSample& sample, const BoundingBox& box, int width, int height,
                                         double coord_scale) {
  auto point = parse_point(sample.response, coord_scale);
  if (!point) return "response has no parseable point";
  auto [cx, cy] = centroid_coordinates(box, width, height, coord_scale);
  if (format_fixed1(point->x) != cx || format_fixed1(point->y) != cy) {
    return "point (" + format_fixed1(point->x) + ", " + format_fixed1(point->y) + ") is not the box centroid (" + cx +
           ", " + cy + ")";
  }
  if (sample.kind != SampleKind::TestAction) {
    Status want = sample.kind == SampleKind::ExpectedResultPassed ? Status::Passed : Status::Failed;
    auto got = parse_conclusion(sample.response);
    if (got != want) return "conclusion does not match " + std::string(to_string(sample.kind));
  }
  return std::nullopt;
}

std::vector<SampleKind> schedule_kinds(std::size_t n, const TargetMix& mix) {
  mix.validate();
  std::vector<SampleKind> out;
  out.reserve(n);
  std::array<std::size_t, 3> assigned{};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t k = 0; k < 3; ++k) {
      double deficit = mix.weights[k] * static_cast<double>(i + 1) - static_cast<double>(assigned[k]);
      if (deficit > best_deficit + 1e-12) {
        best = k;
        best_deficit = deficit;
      }
    }
    ++assigned[best];
    out.push_back(kSampleKinds[best]);
  }
  return out;
}

json to_json(const PipelineSummary& s) {
  json emitted;
  for (std::size_t k = 0; k < 3; ++k) emitted[std::string(to_string(kSampleKinds[k]))] = s.emitted[k];
  return json{{"emitted", emitted},
              {"discarded",
               {{"non_interactive", s.non_interactive},
                {"conclusion_mismatch", s.conclusion_mismatch},
                {"teacher_unparseable", s.teacher_unparseable},
                {"self_validation_failed", s.self_validation_failed},
                {"backend_error", s.backend_errors}}},
              {"retries_total", s.retries_total},
              {"items_total", s.items_total},
              {"skipped_resume", s.skipped_resume},
              {"completed", s.completed},
              {"failures", s.failures}};
}

namespace {

struct Outcome {
  std::optional<TrainingSample> sample;
  enum class Kind { Emitted, NonInteractive, Mismatch, Unparseable, SelfValidation, Backend } kind = Kind::Emitted;
  std::string message;
  int retries = 0;
};

Outcome process_item(const Dataset& dataset, const Annotation& a, SampleKind kind, const PipelineConfig& config,
                     const PipelineModels& models, const std::filesystem::path& image_root) {
  Outcome out;
  const BenchmarkImage& img = dataset.image_of(a);
  try {
    Raster raster = read_image(image_root / img.file_path);
    SourceItem item{a.id, img.file_path, &raster, a.box};
    if (kind == SampleKind::TestAction) {
      out.sample = generate_test_action(item, config, models);
    } else {
      out.sample = generate_expected_result(item, kind == SampleKind::ExpectedResultPassed ? Status::Passed : Status::Failed,
                                            config, models);
    }
    if (!out.sample) {
      out.kind = Outcome::Kind::NonInteractive;
      out.message = "teacher marked the element non-interactive";
      return out;
    }
    out.retries = out.sample->provenance.retries_used;
    if (auto why = self_validate(*out.sample, a.box, raster.width(), raster.height(), config.coord_scale)) {
      out.sample.reset();
      out.kind = Outcome::Kind::SelfValidation;
      out.message = *why;
    }
  } catch (const Error& e) {
    out.sample.reset();
    out.message = e.what();
    out.retries = config.max_retries_per_item;
    switch (e.code()) {
      case ErrorCode::ConclusionMismatch: out.kind = Outcome::Kind::Mismatch; break;
      case ErrorCode::TeacherUnparseable: out.kind = Outcome::Kind::Unparseable; break;
      case ErrorCode::IoError:
      case ErrorCode::ConfigError: throw;
      default:
        out.kind = Outcome::Kind::Backend;
        out.retries = 0;
        break;
    }
  }
  return out;
}

std::set<std::string> completed_ids(const std::filesystem::path& path) {
  std::set<std::string> ids;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;  // torn tail line
    if (auto p = j.find("provenance"); p != j.end() && p->contains("source_annotation_id")) {
      ids.insert((*p)["source_annotation_id"].get<std::string>());
    }
  }
  return ids;
}

}  // namespace

PipelineSummary run_pipeline(const Dataset& dataset, const PipelineConfig& config, const PipelineModels& models,
                             const std::filesystem::path& output_path, const RunOptions& options) {
  check_models(config, models);
  config.marker.validate();
  const auto& annotations = dataset.annotations();
  std::vector<SampleKind> kinds = schedule_kinds(annotations.size(), config.target_mix);

  PipelineSummary summary;
  summary.items_total = annotations.size();
  std::set<std::string> done;
  if (options.resume) {
    done = completed_ids(output_path);
  }
  // A torn last line (interrupted write) is dropped by rewriting only valid lines.
  if (options.resume && std::filesystem::exists(output_path)) {
    std::ifstream in(output_path);
    std::string kept, line;
    while (std::getline(in, line)) {
      json j = json::parse(line, nullptr, false);
      if (!j.is_discarded() && j.is_object()) kept += line + '\n';
    }
    in.close();
    std::ofstream rewrite(output_path, std::ios::binary | std::ios::trunc);
    rewrite << kept;
  }
  if (output_path.has_parent_path()) std::filesystem::create_directories(output_path.parent_path());
  std::ofstream out(output_path, options.resume ? std::ios::binary | std::ios::app : std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + output_path.string());

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    if (done.count(annotations[i].id)) {
      ++summary.skipped_resume;
    } else {
      pending.push_back(i);
    }
  }

  std::vector<std::optional<Outcome>> results(pending.size());
  std::mutex mutex;
  std::size_t written = 0;  // prefix of `pending` already flushed
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;

  auto flush_prefix = [&] {
    // caller holds `mutex`
    while (written < results.size() && results[written]) {
      Outcome& o = *results[written];
      summary.retries_total += static_cast<std::size_t>(o.retries);
      const std::string& id = annotations[pending[written]].id;
      switch (o.kind) {
        case Outcome::Kind::Emitted: {
          out << to_json(*o.sample).dump() << '\n';
          out.flush();
          if (!out) throw Error(ErrorCode::IoError, "write failed for " + output_path.string());
          for (std::size_t k = 0; k < 3; ++k) summary.emitted[k] += o.sample->kind == kSampleKinds[k];
          break;
        }
        case Outcome::Kind::NonInteractive: ++summary.non_interactive; break;
        case Outcome::Kind::Mismatch: ++summary.conclusion_mismatch; break;
        case Outcome::Kind::Unparseable: ++summary.teacher_unparseable; break;
        case Outcome::Kind::SelfValidation: ++summary.self_validation_failed; break;
        case Outcome::Kind::Backend: ++summary.backend_errors; break;
      }
      if (o.kind != Outcome::Kind::Emitted) summary.failures.push_back(id + ": " + o.message);
      results[written].reset();
      ++written;
    }
  };

  auto worker = [&] {
    while (!abort) {
      if (options.cancel && options.cancel->load()) return;
      std::size_t slot = next++;
      if (slot >= pending.size()) return;
      std::size_t idx = pending[slot];
      try {
        Outcome o = process_item(dataset, annotations[idx], kinds[idx], config, models, options.image_root);
        std::lock_guard lock(mutex);
        results[slot] = std::move(o);
        flush_prefix();
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!fatal) fatal = std::current_exception();
        abort = true;
      }
    }
  };

  int threads = std::max(1, std::min<int>(config.workers, static_cast<int>(pending.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (fatal) std::rethrow_exception(fatal);
  summary.completed = written == pending.size();
  return summary;
}

}  // namespace uigauge
