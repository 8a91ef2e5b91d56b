#include <doctest.h>

#include <functional>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "uigauge/dataset.hpp"
#include "uigauge/error.hpp"
#include "uigauge/numfmt.hpp"
#include "uigauge/raster.hpp"

using namespace uigauge;
using testsupport::TempDir;

namespace {

const char* kSmall = R"({"type":"image","id":"i1","file_path":"a.png","width":100,"height":50,"language":"EN","source":"x"}
{"type":"image","id":"i2","file_path":"b.png","width":200,"height":100,"language":"DE","source":"y"}
{"id":"a1","image_id":"i1","kind":"test_action","instruction":"Tap OK","box":[10,10,20,20]}
{"id":"a2","image_id":"i2","kind":"expected_result","instruction":"OK is shown","box":[0,0,200,100],"expected_status":"passed"}
{"id":"a3","image_id":"i2","kind":"expected_result","instruction":"Pause icon","box":[5,5,6,6],"expected_status":"failed","note":"keep me"}
)";

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

LoadOptions no_files() {
  LoadOptions o;
  o.check_image_files = false;
  return o;
}

}  // namespace

TEST_CASE("round_decimal_text rounds half away from zero on decimal digits") {
  CHECK(round_decimal_text("0.05", 1) == "0.1");
  CHECK(round_decimal_text("0.15", 1) == "0.2");
  CHECK(round_decimal_text("2.25", 1) == "2.3");
  CHECK(round_decimal_text("-2.25", 1) == "-2.3");
  CHECK(round_decimal_text("99.95", 1) == "100.0");
  CHECK(round_decimal_text("-0.04", 1) == "0.0");
  CHECK(round_decimal_text("1e2", 1) == "100.0");
  CHECK(round_decimal_text("1.25e-1", 2) == "0.13");
  CHECK_FALSE(round_decimal_text("abc", 1).has_value());
}

TEST_CASE("format_fixed1 uses the shortest representation before rounding") {
  // 0.15 is stored as 0.1499999..., but its shortest text is "0.15".
  CHECK(format_fixed1(0.15) == "0.2");
  CHECK(format_fixed1(87.55) == "87.6");
  CHECK(format_fixed1(100.0) == "100.0");
  CHECK(format_fixed1(0.0) == "0.0");
  CHECK(format_fixed1(-0.0) == "0.0");
  CHECK(format_fixed1(2.0 / 3.0 * 100.0) == "66.7");
}

TEST_CASE("parse_double is strict") {
  CHECK(parse_double("53.2") == 53.2);
  CHECK(parse_double(" +1.5 ") == 1.5);
  CHECK_FALSE(parse_double("1.5x").has_value());
  CHECK_FALSE(parse_double("").has_value());
  CHECK_FALSE(parse_double("nan").has_value());
  CHECK_FALSE(parse_double("inf").has_value());
}

TEST_CASE("bounding box containment is half-open") {
  BoundingBox b{10, 20, 30, 40};
  CHECK(b.contains(10, 20));
  CHECK(b.contains(29.999, 39.999));
  CHECK_FALSE(b.contains(30, 25));
  CHECK_FALSE(b.contains(15, 40));
  CHECK(b.centroid().x == 20.0);
  CHECK(b.valid_for(30, 40));
  CHECK_FALSE(b.valid_for(29, 40));
  CHECK_FALSE((BoundingBox{5, 5, 5, 9}).valid_for(10, 10));
}

TEST_CASE("manifest parsing and stats") {
  Dataset ds = parse_manifest(kSmall, no_files());
  CHECK(ds.images().size() == 2);
  CHECK(ds.annotations().size() == 3);
  DatasetStats s = stats(ds);
  CHECK(s.images.total == 2);
  CHECK(s.images.en == 1);
  CHECK(s.annotations.de == 2);
  CHECK(s.test_actions.total == 1);
  CHECK(s.expected_results.total == 2);
  CHECK(s.passed.de == 1);
  CHECK(s.failed.de == 1);
  CHECK(ds.find_annotation("a3")->extra["note"] == "keep me");
  CHECK(ds.annotations_of("i2").size() == 2);
  CHECK(&ds.image_of(*ds.find_annotation("a1")) == ds.find_image("i1"));
}

TEST_CASE("empty manifest gives all-zero stats") {
  Dataset ds = parse_manifest("", no_files());
  CHECK(ds.empty());
  CHECK(stats(ds) == DatasetStats{});
}

TEST_CASE("validation errors name the record and line") {
  std::string bad_box = R"({"type":"image","id":"i1","file_path":"a.png","width":100,"height":50,"language":"EN"}
{"id":"a1","image_id":"i1","kind":"test_action","instruction":"Tap","box":[10,10,10,20]}
)";
  CHECK(code_of([&] { parse_manifest(bad_box, no_files()); }) == ErrorCode::BoxOutOfBounds);
  auto msg = message_of([&] { parse_manifest(bad_box, no_files(), {}, "m.jsonl"); });
  CHECK(msg.find("'a1'") != std::string::npos);
  CHECK(msg.find("m.jsonl:2") != std::string::npos);

  std::string dup = std::string(kSmall) + R"({"id":"a1","image_id":"i1","kind":"test_action","instruction":"x","box":[1,1,2,2]})";
  CHECK(code_of([&] { parse_manifest(dup, no_files()); }) == ErrorCode::DuplicateId);

  std::string no_status = R"({"type":"image","id":"i1","file_path":"a.png","width":100,"height":50,"language":"EN"}
{"id":"a1","image_id":"i1","kind":"expected_result","instruction":"x","box":[1,1,2,2]})";
  CHECK(code_of([&] { parse_manifest(no_status, no_files()); }) == ErrorCode::StatusMissingOnExpectedResult);

  CHECK(code_of([&] { parse_manifest("{not json", no_files()); }) == ErrorCode::MalformedRecord);
  CHECK(code_of([&] { parse_manifest(R"({"id":"a","image_id":"nope","kind":"test_action","instruction":"x","box":[1,1,2,2]})", no_files()); }) ==
        ErrorCode::MalformedRecord);
  std::string ta_status = R"({"type":"image","id":"i1","file_path":"a.png","width":100,"height":50,"language":"EN"}
{"id":"a1","image_id":"i1","kind":"test_action","instruction":"x","box":[1,1,2,2],"expected_status":"passed"})";
  CHECK(code_of([&] { parse_manifest(ta_status, no_files()); }) == ErrorCode::MalformedRecord);
  std::string float_box = R"({"type":"image","id":"i1","file_path":"a.png","width":100,"height":50,"language":"EN"}
{"id":"a1","image_id":"i1","kind":"test_action","instruction":"x","box":[1.5,1,2,2]})";
  CHECK(code_of([&] { parse_manifest(float_box, no_files()); }) == ErrorCode::MalformedRecord);
}

TEST_CASE("missing image files are reported when checking") {
  TempDir dir;
  testsupport::spit(dir / "m.jsonl", kSmall);
  CHECK(code_of([&] { load_manifest(dir / "m.jsonl"); }) == ErrorCode::MissingImageFile);
  write_png(Raster(100, 50), dir / "a.png");
  write_png(Raster(200, 100), dir / "b.png");
  CHECK(load_manifest(dir / "m.jsonl").annotations().size() == 3);
}

TEST_CASE("write_manifest round-trips") {
  Dataset ds = parse_manifest(kSmall, no_files());
  std::ostringstream out;
  write_manifest(ds, out);
  Dataset again = parse_manifest(out.str(), no_files());
  CHECK(stats(again) == stats(ds));
  std::ostringstream out2;
  write_manifest(again, out2);
  CHECK(out.str() == out2.str());
  CHECK(again.find_annotation("a3")->extra["note"] == "keep me");
}

TEST_CASE("split_by_language partitions the dataset") {
  Dataset ds = parse_manifest(kSmall, no_files());
  auto [en, de] = split_by_language(ds);
  DatasetStats total = stats(en);
  total += stats(de);
  CHECK(total == stats(ds));
  CHECK(stats(en).images.de == 0);
  CHECK(stats(de).annotations.en == 0);
}

TEST_CASE("stats totals equal the sum of their language parts (property)") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::ostringstream m;
    int images = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < images; ++i) {
      m << R"({"type":"image","id":"i)" << i << R"(","file_path":"x","width":50,"height":50,"language":")"
        << (rng() % 2 ? "EN" : "DE") << "\"}\n";
    }
    int anns = static_cast<int>(rng() % 30);
    for (int a = 0; a < anns; ++a) {
      bool er = rng() % 2;
      m << R"({"id":"a)" << a << R"(","image_id":"i)" << rng() % images << R"(","kind":")"
        << (er ? "expected_result" : "test_action") << R"(","instruction":"t","box":[1,1,9,9])";
      if (er) m << R"(,"expected_status":")" << (rng() % 3 ? "passed" : "failed") << '"';
      m << "}\n";
    }
    DatasetStats s = stats(parse_manifest(m.str(), no_files()));
    for (const LanguageSplit* l : {&s.images, &s.annotations, &s.test_actions, &s.expected_results, &s.passed, &s.failed}) {
      CHECK(l->total == l->en + l->de);
    }
    CHECK(s.expected_results.total == s.passed.total + s.failed.total);
    CHECK(s.annotations.total == s.test_actions.total + s.expected_results.total);
  }
}

TEST_CASE("Hugging Face export conversion") {
  std::string hf = R"({"image_path":"imgs/1.png","width":100,"height":50,"language":"English","source":"a","type":"Test Action","instruction":"Tap","box":[1,2,3,4]}
{"image_path":"imgs/1.png","width":100,"height":50,"language":"English","source":"a","type":"Expected Result","instruction":"Shown","box":[1,2,30,40],"expectation":"PASSED"}
{"image_path":"imgs/2.png","width":80,"height":60,"language":"German","source":"b","type":"Expected Result","instruction":"Hidden","box":[0,0,8,6],"expectation":"failed"}
)";
  Dataset ds = convert_hf_export(hf);
  CHECK(ds.images().size() == 2);
  CHECK(ds.images()[0].id == "img-0");
  CHECK(ds.annotations()[2].id == "ann-2");
  CHECK(ds.annotations()[2].image_id == "img-1");
  CHECK(*ds.annotations()[1].expected_status == Status::Passed);
  CHECK(ds.images()[1].language == Language::DE);

  std::string missing_status = R"({"image_path":"x","width":10,"height":10,"language":"EN","type":"expected_result","instruction":"s","box":[1,1,2,2]})";
  CHECK(code_of([&] { convert_hf_export(missing_status); }) == ErrorCode::StatusMissingOnExpectedResult);

  HfFieldMap custom;
  custom.instruction = "text";
  std::string renamed = R"({"image_path":"x","width":10,"height":10,"language":"EN","type":"test_action","text":"Go","box":[1,1,2,2]})";
  CHECK(convert_hf_export(renamed, custom).annotations()[0].instruction == "Go");
}

TEST_CASE("PNG encode/decode round-trip and JPEG detection") {
  Raster r(7, 5, {10, 20, 30});
  r.set(3, 2, {255, 0, 128});
  auto bytes = encode_png(r);
  CHECK(decode_image(bytes) == r);
  TempDir dir;
  write_png(r, dir / "x.png");
  CHECK(read_image(dir / "x.png") == r);
  auto enc = read_encoded_image(dir / "x.png");
  CHECK(enc.mime == "image/png");
  std::vector<std::uint8_t> junk = {1, 2, 3, 4};
  CHECK_THROWS_AS(decode_image(junk), Error);
}
