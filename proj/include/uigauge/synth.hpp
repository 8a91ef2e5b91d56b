#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uigauge/dataset.hpp"
#include "uigauge/inference.hpp"
#include "uigauge/raster.hpp"
#include "uigauge/som.hpp"

namespace uigauge {

enum class SampleKind { TestAction, ExpectedResultPassed, ExpectedResultFailed };
inline constexpr std::array<SampleKind, 3> kSampleKinds = {SampleKind::TestAction, SampleKind::ExpectedResultPassed,
                                                           SampleKind::ExpectedResultFailed};
std::string_view to_string(SampleKind kind);
std::optional<SampleKind> sample_kind_from_string(std::string_view s);

struct TargetMix {
  std::array<double, 3> weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};  // indexed like kSampleKinds
  /// Ratios must be >= 0 and sum to 1 (within 1e-9).
  void validate() const;
};

struct PipelineConfig {
  MarkerStyle marker;
  TargetMix target_mix;
  int max_retries_per_item = 2;
  bool rephrase_enabled = true;
  bool reasoning_enabled = true;
  double coord_scale = 100.0;
  int workers = 4;
};

struct Provenance {
  std::string teacher_model;
  std::optional<std::string> rephraser_model;
  std::string source_annotation_id;
  int retries_used = 0;
  std::optional<std::string> prior_test_action;
};

struct TrainingSample {
  std::string image_ref;
  SampleKind kind = SampleKind::TestAction;
  std::string prompt;
  std::string response;
  Provenance provenance;
};

nlohmann::json to_json(const TrainingSample& sample);
TrainingSample training_sample_from_json(const nlohmann::json& j);

/// Models used by the pipeline; the rephraser may be null when rephrasing is off.
struct PipelineModels {
  TextModel* teacher = nullptr;
  TextModel* rephraser = nullptr;
};

/// One source item: the image (already decoded) and the annotated box.
struct SourceItem {
  std::string annotation_id;
  std::string image_ref;
  const Raster* image = nullptr;
  BoundingBox box;
};

/// Point-tag coordinates for a box: centroid / image dimension * scale, as one-decimal text.
std::pair<std::string, std::string> centroid_coordinates(const BoundingBox& box, int width, int height, double scale);

/// Returns nullopt when the teacher marks the element non-interactive.
/// Throws TeacherUnparseable after max_retries_per_item + 1 unparseable replies.
std::optional<TrainingSample> generate_test_action(const SourceItem& item, const PipelineConfig& config,
                                                   const PipelineModels& models);

/// Throws ConclusionMismatch when no attempt yields the requested verdict,
/// TeacherUnparseable when no attempt parses at all.
std::optional<TrainingSample> generate_expected_result(const SourceItem& item, Status target,
                                                       const PipelineConfig& config, const PipelineModels& models);

/// Checks the emitted response: point equals the box centroid at one decimal
/// and, for expected results, the conclusion matches the kind. Returns the
/// reason on failure.
std::optional<std::string> self_validate(const TrainingSample& sample, const BoundingBox& box, int width, int height,
                                         double coord_scale);

/// Kind per item, chosen by the largest deficit against the target mix
/// (ties: TestAction, Passed, Failed).
std::vector<SampleKind> schedule_kinds(std::size_t n, const TargetMix& mix);

struct PipelineSummary {
  std::array<std::size_t, 3> emitted{};  // indexed like kSampleKinds
  std::size_t non_interactive = 0;
  std::size_t conclusion_mismatch = 0;
  std::size_t teacher_unparseable = 0;
  std::size_t self_validation_failed = 0;
  std::size_t backend_errors = 0;
  std::size_t retries_total = 0;
  std::size_t items_total = 0;
  std::size_t skipped_resume = 0;
  bool completed = true;
  std::vector<std::string> failures;  // "annotation_id: reason", item order
};
nlohmann::json to_json(const PipelineSummary& summary);

struct RunOptions {
  std::filesystem::path image_root;       // resolves BenchmarkImage::file_path
  bool resume = false;                    // skip source ids already present in the output
  const std::atomic<bool>* cancel = nullptr;  // stop picking up new items when set
};

/// Streams samples to `output_path` (JSONL) in dataset order. Only a
/// contiguous prefix of finished items is written, so an interrupted run
/// resumed later yields the same file as an uninterrupted one.
PipelineSummary run_pipeline(const Dataset& dataset, const PipelineConfig& config, const PipelineModels& models,
                             const std::filesystem::path& output_path, const RunOptions& options = {});

}  // namespace uigauge
