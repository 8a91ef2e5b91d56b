#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace uigauge {

enum class Language { EN, DE };
enum class AnnotationKind { TestAction, ExpectedResult };
enum class Status { Passed, Failed };

std::string_view to_string(Language lang);
std::string_view to_string(AnnotationKind kind);
std::string_view to_string(Status status);
std::optional<Language> language_from_string(std::string_view s);
std::optional<AnnotationKind> kind_from_string(std::string_view s);
std::optional<Status> status_from_string(std::string_view s);

inline Status inverse(Status s) { return s == Status::Passed ? Status::Failed : Status::Passed; }

struct PointF {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const PointF&, const PointF&) = default;
};

/// Pixel box with inclusive lower and exclusive upper edges.
struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  long long area() const { return static_cast<long long>(width()) * height(); }
  PointF centroid() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }

  // Half-open containment: a point on x0/y0 is inside, on x1/y1 is not.
  bool contains(double px, double py) const { return px >= x0 && px < x1 && py >= y0 && py < y1; }

  bool valid_for(int image_width, int image_height) const {
    return 0 <= x0 && x0 < x1 && x1 <= image_width && 0 <= y0 && y0 < y1 && y1 <= image_height;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct BenchmarkImage {
  std::string id;
  std::string file_path;  // relative to the manifest directory
  int width = 0;
  int height = 0;
  Language language = Language::EN;
  std::string source;
  nlohmann::json extra = nlohmann::json::object();  // unknown fields, round-tripped
};

struct Annotation {
  std::string id;
  std::string image_id;
  AnnotationKind kind = AnnotationKind::TestAction;
  std::string instruction;
  BoundingBox box;
  std::optional<Status> expected_status;
  nlohmann::json extra = nlohmann::json::object();
};

struct LanguageSplit {
  std::size_t total = 0;
  std::size_t en = 0;
  std::size_t de = 0;

  void add(Language lang) {
    ++total;
    (lang == Language::EN ? en : de) += 1;
  }
  LanguageSplit& operator+=(const LanguageSplit& o) {
    total += o.total;
    en += o.en;
    de += o.de;
    return *this;
  }
  friend bool operator==(const LanguageSplit&, const LanguageSplit&) = default;
};

struct DatasetStats {
  LanguageSplit images;
  LanguageSplit annotations;
  LanguageSplit test_actions;
  LanguageSplit expected_results;
  LanguageSplit passed;
  LanguageSplit failed;

  DatasetStats& operator+=(const DatasetStats& o);
  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

nlohmann::json to_json(const DatasetStats& stats);

/// Validated, immutable benchmark dataset. Record order is the manifest order.
class Dataset {
 public:
  Dataset() = default;

  /// Validates all invariants (ids, geometry, status presence). Image file
  /// existence is checked by load_manifest, not here.
  Dataset(std::vector<BenchmarkImage> images, std::vector<Annotation> annotations);

  const std::vector<BenchmarkImage>& images() const { return images_; }
  const std::vector<Annotation>& annotations() const { return annotations_; }

  const BenchmarkImage* find_image(std::string_view id) const;
  const Annotation* find_annotation(std::string_view id) const;
  const BenchmarkImage& image_of(const Annotation& a) const;

  /// Indices into annotations() for one image, in manifest order.
  const std::vector<std::size_t>& annotations_of(std::string_view image_id) const;

  bool empty() const { return images_.empty() && annotations_.empty(); }

 private:
  void build_indices();

  std::vector<BenchmarkImage> images_;
  std::vector<Annotation> annotations_;
  std::unordered_map<std::string, std::size_t> image_index_;
  std::unordered_map<std::string, std::size_t> annotation_index_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_image_;
};

struct LoadOptions {
  bool check_image_files = true;
  /// Directory image paths are resolved against; defaults to the manifest's.
  std::optional<std::filesystem::path> image_root;
};

Dataset load_manifest(const std::filesystem::path& path, const LoadOptions& options = {});

/// Parses manifest text directly; `origin` is used in error messages.
Dataset parse_manifest(std::string_view text, const LoadOptions& options = {},
                       const std::filesystem::path& image_root = {}, std::string_view origin = "<memory>");

void write_manifest(const Dataset& dataset, std::ostream& out);
void write_manifest(const Dataset& dataset, const std::filesystem::path& path);

DatasetStats stats(const Dataset& dataset);

std::pair<Dataset, Dataset> split_by_language(const Dataset& dataset);

/// Field-name mapping for the Hugging Face export of the benchmark, whose
/// on-disk schema differs from the manifest format. Each record of the input
/// JSONL describes one annotation and carries its image attributes inline.
struct HfFieldMap {
  std::string image_path = "image_path";
  std::string image_width = "width";
  std::string image_height = "height";
  std::string language = "language";
  std::string source = "source";
  std::string kind = "type";
  std::string instruction = "instruction";
  std::string box = "box";  // [x0, y0, x1, y1]
  std::string status = "expectation";
};

/// Converts a flat per-annotation export into manifest records (images
/// deduplicated by path, ids assigned in input order).
Dataset convert_hf_export(std::string_view jsonl_text, const HfFieldMap& fields = {});

}  // namespace uigauge
