#include "uigauge/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "uigauge/error.hpp"

namespace uigauge {

using nlohmann::json;

namespace {

// Normalizes "Test Action", "test-action", "TEST_ACTION" to "testaction".
std::string squash(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

struct RecordRef {
  std::string id;
  std::size_t line = 0;
};

std::string where(const RecordRef& ref, std::string_view origin) {
  std::ostringstream os;
  os << "record '" << ref.id << "' (" << origin << ":" << ref.line << ")";
  return os.str();
}

[[noreturn]] void fail(ErrorCode code, const RecordRef& ref, std::string_view origin, const std::string& what) {
  throw Error(code, where(ref, origin) + ": " + what);
}

const std::unordered_set<std::string> kImageKeys = {"type", "id", "file_path", "width", "height", "language", "source"};
const std::unordered_set<std::string> kAnnotationKeys = {"type",     "id",  "image_id",       "kind",
                                                         "instruction", "box", "expected_status"};

json extra_fields(const json& record, const std::unordered_set<std::string>& known) {
  json extra = json::object();
  for (auto it = record.begin(); it != record.end(); ++it) {
    if (!known.count(it.key())) extra[it.key()] = it.value();
  }
  return extra;
}

// Shared invariant checks. `refs` gives line numbers for manifest-loaded data;
// programmatically built datasets pass record ordinals instead.
void validate(const std::vector<BenchmarkImage>& images, const std::vector<RecordRef>& image_refs,
              const std::vector<Annotation>& annotations, const std::vector<RecordRef>& ann_refs,
              std::string_view origin) {
  std::unordered_map<std::string, const BenchmarkImage*> by_id;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.id.empty()) fail(ErrorCode::MalformedRecord, image_refs[i], origin, "image id is empty");
    if (img.width <= 0 || img.height <= 0) {
      fail(ErrorCode::MalformedRecord, image_refs[i], origin, "image width and height must be positive");
    }
    if (!by_id.emplace(img.id, &img).second) {
      fail(ErrorCode::DuplicateId, image_refs[i], origin, "duplicate image id");
    }
  }
  std::unordered_set<std::string> ann_ids;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    const auto& ref = ann_refs[i];
    if (a.id.empty()) fail(ErrorCode::MalformedRecord, ref, origin, "annotation id is empty");
    if (!ann_ids.insert(a.id).second) fail(ErrorCode::DuplicateId, ref, origin, "duplicate annotation id");
    auto img = by_id.find(a.image_id);
    if (img == by_id.end()) {
      fail(ErrorCode::MalformedRecord, ref, origin, "unknown image_id '" + a.image_id + "'");
    }
    if (a.instruction.empty()) fail(ErrorCode::MalformedRecord, ref, origin, "instruction is empty");
    if (!a.box.valid_for(img->second->width, img->second->height)) {
      std::ostringstream os;
      os << "box [" << a.box.x0 << ", " << a.box.y0 << ", " << a.box.x1 << ", " << a.box.y1
         << "] is outside or degenerate for image " << img->second->width << "x" << img->second->height;
      fail(ErrorCode::BoxOutOfBounds, ref, origin, os.str());
    }
    if (a.kind == AnnotationKind::ExpectedResult && !a.expected_status) {
      fail(ErrorCode::StatusMissingOnExpectedResult, ref, origin, "expected result without expected_status");
    }
    if (a.kind == AnnotationKind::TestAction && a.expected_status) {
      fail(ErrorCode::MalformedRecord, ref, origin, "test action must not carry expected_status");
    }
  }
}

std::vector<RecordRef> ordinal_refs(const auto& records) {
  std::vector<RecordRef> refs;
  refs.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) refs.push_back({records[i].id, i + 1});
  return refs;
}

template <typename T>
T required(const json& record, const char* key, const RecordRef& ref, std::string_view origin) {
  auto it = record.find(key);
  if (it == record.end()) fail(ErrorCode::MalformedRecord, ref, origin, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::MalformedRecord, ref, origin, std::string("field '") + key + "' has the wrong type");
  }
}

BoundingBox parse_box(const json& value, const RecordRef& ref, std::string_view origin) {
  if (!value.is_array() || value.size() != 4) {
    fail(ErrorCode::MalformedRecord, ref, origin, "box must be an array [x0, y0, x1, y1]");
  }
  int v[4];
  for (int i = 0; i < 4; ++i) {
    if (!value[static_cast<std::size_t>(i)].is_number_integer()) {
      fail(ErrorCode::MalformedRecord, ref, origin, "box coordinates must be integers");
    }
    v[i] = value[static_cast<std::size_t>(i)].get<int>();
  }
  return {v[0], v[1], v[2], v[3]};
}

}  // namespace

std::string_view to_string(Language lang) { return lang == Language::EN ? "EN" : "DE"; }
std::string_view to_string(AnnotationKind kind) {
  return kind == AnnotationKind::TestAction ? "test_action" : "expected_result";
}
std::string_view to_string(Status status) { return status == Status::Passed ? "passed" : "failed"; }

std::optional<Language> language_from_string(std::string_view s) {
  auto v = squash(s);
  if (v == "en" || v == "english") return Language::EN;
  if (v == "de" || v == "german" || v == "deutsch") return Language::DE;
  return std::nullopt;
}

std::optional<AnnotationKind> kind_from_string(std::string_view s) {
  auto v = squash(s);
  if (v == "testaction") return AnnotationKind::TestAction;
  if (v == "expectedresult") return AnnotationKind::ExpectedResult;
  return std::nullopt;
}

std::optional<Status> status_from_string(std::string_view s) {
  auto v = squash(s);
  if (v == "passed" || v == "pass") return Status::Passed;
  if (v == "failed" || v == "fail") return Status::Failed;
  return std::nullopt;
}

DatasetStats& DatasetStats::operator+=(const DatasetStats& o) {
  images += o.images;
  annotations += o.annotations;
  test_actions += o.test_actions;
  expected_results += o.expected_results;
  passed += o.passed;
  failed += o.failed;
  return *this;
}

json to_json(const DatasetStats& s) {
  auto split = [](const LanguageSplit& l) { return json{{"total", l.total}, {"en", l.en}, {"de", l.de}}; };
  return json{{"images", split(s.images)},
              {"annotations", split(s.annotations)},
              {"test_actions", split(s.test_actions)},
              {"expected_results", split(s.expected_results)},
              {"passed", split(s.passed)},
              {"failed", split(s.failed)}};
}

Dataset::Dataset(std::vector<BenchmarkImage> images, std::vector<Annotation> annotations)
    : images_(std::move(images)), annotations_(std::move(annotations)) {
  validate(images_, ordinal_refs(images_), annotations_, ordinal_refs(annotations_), "<dataset>");
  build_indices();
}

void Dataset::build_indices() {
  image_index_.clear();
  annotation_index_.clear();
  by_image_.clear();
  for (std::size_t i = 0; i < images_.size(); ++i) {
    image_index_.emplace(images_[i].id, i);
    by_image_[images_[i].id];
  }
  for (std::size_t i = 0; i < annotations_.size(); ++i) {
    annotation_index_.emplace(annotations_[i].id, i);
    by_image_[annotations_[i].image_id].push_back(i);
  }
}

const BenchmarkImage* Dataset::find_image(std::string_view id) const {
  auto it = image_index_.find(std::string(id));
  return it == image_index_.end() ? nullptr : &images_[it->second];
}

const Annotation* Dataset::find_annotation(std::string_view id) const {
  auto it = annotation_index_.find(std::string(id));
  return it == annotation_index_.end() ? nullptr : &annotations_[it->second];
}

const BenchmarkImage& Dataset::image_of(const Annotation& a) const { return images_[image_index_.at(a.image_id)]; }

const std::vector<std::size_t>& Dataset::annotations_of(std::string_view image_id) const {
  static const std::vector<std::size_t> kNone;
  auto it = by_image_.find(std::string(image_id));
  return it == by_image_.end() ? kNone : it->second;
}

Dataset parse_manifest(std::string_view text, const LoadOptions& options, const std::filesystem::path& image_root,
                       std::string_view origin) {
  std::vector<BenchmarkImage> images;
  std::vector<RecordRef> image_refs;
  std::vector<Annotation> annotations;
  std::vector<RecordRef> ann_refs;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }

    RecordRef ref{"?", line_no};
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::MalformedRecord, ref, origin, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) fail(ErrorCode::MalformedRecord, ref, origin, "record is not a JSON object");
    if (auto id = record.find("id"); id != record.end() && id->is_string()) ref.id = id->get<std::string>();

    std::string type = record.value("type", std::string("annotation"));
    if (type == "image") {
      BenchmarkImage img;
      img.id = required<std::string>(record, "id", ref, origin);
      img.file_path = required<std::string>(record, "file_path", ref, origin);
      img.width = required<int>(record, "width", ref, origin);
      img.height = required<int>(record, "height", ref, origin);
      auto lang = language_from_string(required<std::string>(record, "language", ref, origin));
      if (!lang) fail(ErrorCode::MalformedRecord, ref, origin, "language must be EN or DE");
      img.language = *lang;
      img.source = record.value("source", std::string());
      img.extra = extra_fields(record, kImageKeys);
      images.push_back(std::move(img));
      image_refs.push_back(ref);
    } else if (type == "annotation") {
      Annotation a;
      a.id = required<std::string>(record, "id", ref, origin);
      a.image_id = required<std::string>(record, "image_id", ref, origin);
      auto kind = kind_from_string(required<std::string>(record, "kind", ref, origin));
      if (!kind) fail(ErrorCode::MalformedRecord, ref, origin, "kind must be test_action or expected_result");
      a.kind = *kind;
      a.instruction = required<std::string>(record, "instruction", ref, origin);
      auto box = record.find("box");
      if (box == record.end()) fail(ErrorCode::MalformedRecord, ref, origin, "missing field 'box'");
      a.box = parse_box(*box, ref, origin);
      if (auto st = record.find("expected_status"); st != record.end() && !st->is_null()) {
        if (!st->is_string()) fail(ErrorCode::MalformedRecord, ref, origin, "expected_status must be a string");
        auto status = status_from_string(st->get<std::string>());
        if (!status) fail(ErrorCode::MalformedRecord, ref, origin, "expected_status must be passed or failed");
        a.expected_status = status;
      }
      a.extra = extra_fields(record, kAnnotationKeys);
      annotations.push_back(std::move(a));
      ann_refs.push_back(ref);
    } else {
      fail(ErrorCode::MalformedRecord, ref, origin, "unknown record type '" + type + "'");
    }
    if (end == text.size()) break;
  }

  validate(images, image_refs, annotations, ann_refs, origin);

  if (options.check_image_files) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      auto file = image_root / images[i].file_path;
      std::error_code ec;
      if (!std::filesystem::is_regular_file(file, ec)) {
        fail(ErrorCode::MissingImageFile, image_refs[i], origin, "image file not found: " + file.string());
      }
    }
  }

  return Dataset(std::move(images), std::move(annotations));
}

Dataset load_manifest(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto root = options.image_root ? *options.image_root : path.parent_path();
  return parse_manifest(buf.str(), options, root, path.string());
}

void write_manifest(const Dataset& dataset, std::ostream& out) {
  for (const auto& img : dataset.images()) {
    json r = img.extra;
    r["type"] = "image";
    r["id"] = img.id;
    r["file_path"] = img.file_path;
    r["width"] = img.width;
    r["height"] = img.height;
    r["language"] = to_string(img.language);
    r["source"] = img.source;
    out << r.dump() << '\n';
  }
  for (const auto& a : dataset.annotations()) {
    json r = a.extra;
    r["type"] = "annotation";
    r["id"] = a.id;
    r["image_id"] = a.image_id;
    r["kind"] = to_string(a.kind);
    r["instruction"] = a.instruction;
    r["box"] = {a.box.x0, a.box.y0, a.box.x1, a.box.y1};
    if (a.expected_status) r["expected_status"] = to_string(*a.expected_status);
    out << r.dump() << '\n';
  }
}

void write_manifest(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write manifest " + path.string());
  write_manifest(dataset, out);
}

DatasetStats stats(const Dataset& dataset) {
  DatasetStats s;
  for (const auto& img : dataset.images()) s.images.add(img.language);
  for (const auto& a : dataset.annotations()) {
    Language lang = dataset.image_of(a).language;
    s.annotations.add(lang);
    if (a.kind == AnnotationKind::TestAction) {
      s.test_actions.add(lang);
    } else {
      s.expected_results.add(lang);
      (*a.expected_status == Status::Passed ? s.passed : s.failed).add(lang);
    }
  }
  return s;
}

std::pair<Dataset, Dataset> split_by_language(const Dataset& dataset) {
  std::vector<BenchmarkImage> en_images, de_images;
  std::vector<Annotation> en_ann, de_ann;
  for (const auto& img : dataset.images()) (img.language == Language::EN ? en_images : de_images).push_back(img);
  for (const auto& a : dataset.annotations()) {
    (dataset.image_of(a).language == Language::EN ? en_ann : de_ann).push_back(a);
  }
  return {Dataset(std::move(en_images), std::move(en_ann)), Dataset(std::move(de_images), std::move(de_ann))};
}

Dataset convert_hf_export(std::string_view jsonl_text, const HfFieldMap& f) {
  std::vector<BenchmarkImage> images;
  std::vector<Annotation> annotations;
  std::map<std::string, std::size_t> image_by_path;

  std::istringstream in{std::string(jsonl_text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    RecordRef ref{"line-" + std::to_string(line_no), line_no};
    json r;
    try {
      r = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::MalformedRecord, ref, "<hf-export>", e.what());
    }
    auto path = required<std::string>(r, f.image_path.c_str(), ref, "<hf-export>");
    auto [it, inserted] = image_by_path.emplace(path, images.size());
    if (inserted) {
      BenchmarkImage img;
      img.id = "img-" + std::to_string(images.size());
      img.file_path = path;
      img.width = required<int>(r, f.image_width.c_str(), ref, "<hf-export>");
      img.height = required<int>(r, f.image_height.c_str(), ref, "<hf-export>");
      auto lang = language_from_string(required<std::string>(r, f.language.c_str(), ref, "<hf-export>"));
      if (!lang) fail(ErrorCode::MalformedRecord, ref, "<hf-export>", "unrecognized language");
      img.language = *lang;
      img.source = r.value(f.source, std::string());
      images.push_back(std::move(img));
    }
    Annotation a;
    a.id = "ann-" + std::to_string(annotations.size());
    a.image_id = images[it->second].id;
    auto kind = kind_from_string(required<std::string>(r, f.kind.c_str(), ref, "<hf-export>"));
    if (!kind) fail(ErrorCode::MalformedRecord, ref, "<hf-export>", "unrecognized annotation type");
    a.kind = *kind;
    a.instruction = required<std::string>(r, f.instruction.c_str(), ref, "<hf-export>");
    a.box = parse_box(r.value(f.box, json()), ref, "<hf-export>");
    if (a.kind == AnnotationKind::ExpectedResult) {
      auto st = r.find(f.status);
      if (st == r.end() || !st->is_string()) {
        fail(ErrorCode::StatusMissingOnExpectedResult, ref, "<hf-export>", "expected result without status");
      }
      a.expected_status = status_from_string(st->get<std::string>());
      if (!a.expected_status) fail(ErrorCode::MalformedRecord, ref, "<hf-export>", "unrecognized status");
    }
    annotations.push_back(std::move(a));
  }
  return Dataset(std::move(images), std::move(annotations));
}

}  // namespace uigauge
