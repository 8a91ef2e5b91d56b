// Drives the uigauge binary as a subprocess.
#include <doctest.h>
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "stub_models.hpp"
#include "test_support.hpp"
#include "uigauge/config.hpp"
#include "uigauge/dataset.hpp"
#include "uigauge/inference.hpp"
#include "uigauge/kernels.hpp"
#include "uigauge/raster.hpp"
#include "uigauge/synth.hpp"
#include "uigauge/templates.hpp"

using nlohmann::json;
using testsupport::fixtures;
using testsupport::slurp;
using testsupport::spit;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') {
      q += "'\\''";
    } else {
      q += c;
    }
  }
  return q + "'";
}

Result run_cli(const TempDir& tmp, const std::vector<std::string>& args) {
  static int counter = 0;
  ++counter;
  fs::path out = tmp / ("stdout" + std::to_string(counter));
  fs::path err = tmp / ("stderr" + std::to_string(counter));
  std::string cmd = quote(UIGAUGE_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " </dev/null >" + quote(out.string()) + " 2>" + quote(err.string());
  int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path eval200() { return fixtures() / "eval200" / "manifest.jsonl"; }

// Exact answers: the box centroid at four decimals plus the true verdict.
std::string oracle_predictions(const uigauge::Dataset& d) {
  std::ostringstream out;
  for (const auto& a : d.annotations()) {
    const auto& img = d.image_of(a);
    auto c = a.box.centroid();
    char buf[128];
    std::snprintf(buf, sizeof buf, "<point x=\"%.4f\" y=\"%.4f\">x</point>", c.x / img.width * 100.0,
                  c.y / img.height * 100.0);
    std::string text = buf;
    if (a.expected_status) text += std::string("\nConclusion: ") + (*a.expected_status == uigauge::Status::Passed ? "PASSED" : "FAILED");
    out << json{{"annotation_id", a.id}, {"raw_response", text}}.dump() << "\n";
  }
  return out.str();
}

uigauge::Dataset load_eval200() {
  uigauge::LoadOptions lo;
  lo.check_image_files = false;
  return uigauge::load_manifest(eval200(), lo);
}

}  // namespace

TEST_CASE("validate-dataset: exit codes and --json") {
  TempDir tmp;
  auto ok = run_cli(tmp, {"validate-dataset", eval200().string(), "--no-image-check"});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("| Images |") != std::string::npos);

  auto js = run_cli(tmp, {"--json", "validate-dataset", eval200().string(), "--no-image-check"});
  REQUIRE(js.code == 0);
  json j = json::parse(js.out);
  CHECK(j["valid"] == true);
  auto d = load_eval200();
  CHECK(j["stats"]["annotations"]["total"] == d.annotations().size());
  CHECK(j["stats"]["images"]["total"] == d.images().size());

  // Image files are checked by default and the fixture ships none.
  auto missing = run_cli(tmp, {"validate-dataset", eval200().string()});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("MissingImageFile") != std::string::npos);

  spit(tmp / "bad.jsonl",
       "{\"type\":\"image\",\"id\":\"i\",\"file_path\":\"x.png\",\"width\":10,\"height\":10,\"language\":\"EN\"}\n"
       "{\"type\":\"annotation\",\"id\":\"bad-box-7\",\"image_id\":\"i\",\"kind\":\"test_action\","
       "\"instruction\":\"t\",\"box\":[0,0,11,5]}\n");
  auto bad = run_cli(tmp, {"validate-dataset", (tmp / "bad.jsonl").string(), "--no-image-check"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("bad-box-7") != std::string::npos);

  auto usage = run_cli(tmp, {"validate-dataset", "--no-such-flag"});
  CHECK(usage.code == 2);
}

TEST_CASE("stats reports every source") {
  TempDir tmp;
  auto r = run_cli(tmp, {"--json", "stats", eval200().string(), "--no-image-check"});
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  std::size_t total = 0;
  for (const auto& [src, s] : j["per_source"].items()) total += s["annotations"]["total"].get<std::size_t>();
  CHECK(total == j["stats"]["annotations"]["total"].get<std::size_t>());
}

TEST_CASE("evaluate with oracle predictions, replay, and report") {
  TempDir tmp;
  auto d = load_eval200();
  spit(tmp / "oracle.jsonl", oracle_predictions(d));
  const std::string runs = (tmp / "runs").string();

  auto r = run_cli(tmp, {"--json", "--runs-dir", runs, "evaluate", "--dataset", eval200().string(), "--no-image-check",
                         "--predictions", (tmp / "oracle.jsonl").string(), "--run-id", "oracle", "--model", "Oracle"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  json j = json::parse(r.out);
  for (const char* col : {"ta_vg", "ta_vg_de", "ta_vg_en", "er_vg", "er_vg_de", "er_vg_en", "er_evl", "er_evl_de",
                          "er_evl_en"}) {
    CHECK_MESSAGE(j["metrics"][col]["percent"] == 100.0, col);
  }
  fs::path dir = tmp / "runs" / "oracle";
  for (const char* f : {"responses.jsonl", "predictions.jsonl", "records.jsonl", "report.json", "report.md",
                        "confusion.svg", "run_manifest.json"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  json manifest = json::parse(slurp(dir / "run_manifest.json"));
  CHECK(manifest["status"] == "complete");
  CHECK(manifest["dataset_digest"] == uigauge::sha256_hex(slurp(eval200())));

  auto rp = run_cli(tmp, {"--json", "--runs-dir", runs, "replay", "oracle"});
  REQUIRE_MESSAGE(rp.code == 0, rp.err);
  CHECK(json::parse(rp.out)["identical"] == true);
  CHECK(slurp(dir / "report.json") == slurp(tmp / "runs" / "oracle-replay" / "report.json"));

  auto rp2 = run_cli(tmp, {"--runs-dir", runs, "evaluate", "--replay", "oracle"});
  CHECK(rp2.code == 0);

  // A second, weaker run from the fixture predictions.
  auto weak = run_cli(tmp, {"--runs-dir", runs, "evaluate", "--dataset", eval200().string(), "--no-image-check",
                            "--predictions", (fixtures() / "eval200" / "predictions.jsonl").string(), "--run-id",
                            "weak", "--model", "Weak"});
  REQUIRE_MESSAGE(weak.code == 0, weak.err);

  auto rep = run_cli(tmp, {"--runs-dir", runs, "report", "oracle", "weak"});
  REQUIRE(rep.code == 0);
  auto weak_pos = rep.out.find("| Weak |");
  auto oracle_pos = rep.out.find("| Oracle | 100.0 |");
  CHECK(weak_pos != std::string::npos);
  CHECK(oracle_pos != std::string::npos);
  CHECK(weak_pos < oracle_pos);

  auto with_published = run_cli(tmp, {"--runs-dir", runs, "report", "oracle", "--from-json",
                                      (fixtures() / "published_baselines.json").string()});
  REQUIRE(with_published.code == 0);
  CHECK(with_published.out.find("| TinyClick | 61.0 | 54.6 | 67.8 | 53.3 | 47.3 | 59.2 | - | - | - |") !=
        std::string::npos);
  CHECK(with_published.out.rfind("| Oracle |") > with_published.out.find("| Human Domain Expert |"));

  auto unknown = run_cli(tmp, {"--runs-dir", runs, "report", "nope"});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("UnknownRunId") != std::string::npos);
  CHECK(run_cli(tmp, {"--runs-dir", runs, "replay", "nope"}).code == 1);
}

TEST_CASE("evaluate --evaluation-capable no renders ER_evl as '-'") {
  TempDir tmp;
  auto d = load_eval200();
  spit(tmp / "oracle.jsonl", oracle_predictions(d));
  auto r = run_cli(tmp, {"--runs-dir", (tmp / "runs").string(), "evaluate", "--dataset", eval200().string(),
                         "--no-image-check", "--predictions", (tmp / "oracle.jsonl").string(), "--run-id", "pointer",
                         "--evaluation-capable", "no"});
  REQUIRE(r.code == 0);
  CHECK(slurp(tmp / "runs" / "pointer" / "report.md").find("| 100.0 | 100.0 | 100.0 | - | - | - |") !=
        std::string::npos);
}

TEST_CASE("evaluate against a backend served from a pre-populated cache") {
  TempDir tmp;
  // 40 test actions over two images.
  uigauge::Raster a(200, 100, {10, 20, 30}), b(120, 80, {200, 100, 0});
  uigauge::write_png(a, tmp / "a.png");
  uigauge::write_png(b, tmp / "b.png");
  std::ostringstream m;
  m << R"({"type":"image","id":"A","file_path":"a.png","width":200,"height":100,"language":"EN"})" << "\n"
    << R"({"type":"image","id":"B","file_path":"b.png","width":120,"height":80,"language":"DE"})" << "\n";
  for (int i = 0; i < 40; ++i) {
    m << json{{"type", "annotation"}, {"id", "t" + std::to_string(i)}, {"image_id", i % 2 ? "B" : "A"},
              {"kind", "test_action"}, {"instruction", "Press button " + std::to_string(i) + "."},
              {"box", {0, 0, 50, 40}}}
             .dump()
      << "\n";
  }
  spit(tmp / "m.jsonl", m.str());
  spit(tmp / "cfg.toml", "[backends.mock]\nendpoint_url = \"http://127.0.0.1:9/v1\"\nmodel_id = \"mock-vlm\"\n");

  // Every fifth item points outside the box: an 80% schedule.
  auto transport = std::make_shared<uigauge::FunctionTransport>([](const uigauge::HttpRequest& req) {
    json body = json::parse(req.body);
    std::string prompt = body["messages"][0]["content"].back()["text"];
    auto pos = prompt.find("button ");
    int n = std::stoi(prompt.substr(pos + 7));
    std::string reply = n % 5 == 0 ? "<point x=\"90\" y=\"90\">x</point>" : "<point x=\"10\" y=\"10\">x</point>";
    return uigauge::HttpResponse{200, json{{"choices", {{{"message", {{"content", reply}}}}}}}.dump()};
  });
  auto config = uigauge::load_toml(tmp / "cfg.toml");
  auto cache = std::make_shared<uigauge::ResponseCache>(tmp / "cache.jsonl");
  uigauge::InferenceClient client(uigauge::backend_from_json("mock", config["backends"]["mock"]), transport, cache);
  auto da = uigauge::read_encoded_image(tmp / "a.png");
  auto db = uigauge::read_encoded_image(tmp / "b.png");
  for (int i = 0; i < 40; ++i) {
    uigauge::GenerateRequest req;
    req.image = i % 2 ? &db : &da;
    req.prompt = uigauge::render(uigauge::TemplateId::InferTestAction, {{"test_action", "Press button " + std::to_string(i)}});
    client.generate(req);
  }

  auto r = run_cli(tmp, {"--json", "--offline", "--config", (tmp / "cfg.toml").string(), "--cache",
                         (tmp / "cache.jsonl").string(), "--runs-dir", (tmp / "runs").string(), "evaluate",
                         "--dataset", (tmp / "m.jsonl").string(), "--backend", "mock", "--run-id", "mock"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  json j = json::parse(r.out);
  CHECK(j["metrics"]["ta_vg"]["percent"] == 80.0);
  CHECK(j["model"] == "mock-vlm");
  CHECK(json::parse(slurp(tmp / "runs" / "mock" / "run_manifest.json"))["backend_ids"][0] == "mock-vlm");

  // Offline without a cache: backend failure.
  auto miss = run_cli(tmp, {"--offline", "--config", (tmp / "cfg.toml").string(), "--cache",
                            (tmp / "empty.jsonl").string(), "--runs-dir", (tmp / "runs").string(), "evaluate",
                            "--dataset", (tmp / "m.jsonl").string(), "--backend", "mock", "--run-id", "miss"});
  CHECK(miss.code == 3);
  CHECK(miss.err.find("OfflineCacheMiss") != std::string::npos);
  CHECK(json::parse(slurp(tmp / "runs" / "miss" / "run_manifest.json"))["status"] == "failed");

  auto no_backend = run_cli(tmp, {"--runs-dir", (tmp / "runs").string(), "evaluate", "--dataset",
                                  (tmp / "m.jsonl").string(), "--backend", "mock"});
  CHECK(no_backend.code == 2);
}

TEST_CASE("generate-data offline reproduces the in-process pipeline") {
  TempDir tmp;
  const fs::path manifest = fixtures() / "pipeline30" / "manifest.jsonl";
  spit(tmp / "cfg.toml",
       "[backends.teacher]\nendpoint_url = \"http://127.0.0.1:9/v1\"\nmodel_id = \"stub-teacher\"\n"
       "[backends.rephraser]\nendpoint_url = \"http://127.0.0.1:9/v1\"\nmodel_id = \"stub-rephraser\"\n"
       "[pipeline]\nteacher = \"teacher\"\nrephraser = \"rephraser\"\nworkers = 3\n"
       "[pipeline.marker]\ncolor = \"red\"\ntype = \"box-with-arrow\"\n");

  auto stub_transport = [](std::shared_ptr<uigauge::TextModel> model) {
    return std::make_shared<uigauge::FunctionTransport>([model](const uigauge::HttpRequest& req) {
      json body = json::parse(req.body);
      uigauge::GenerateRequest g;
      g.prompt = body["messages"][0]["content"].back()["text"];
      std::string reply = model->generate(g);
      return uigauge::HttpResponse{200, json{{"choices", {{{"message", {{"content", reply}}}}}}}.dump()};
    });
  };
  auto config = uigauge::load_toml(tmp / "cfg.toml");
  auto cache = std::make_shared<uigauge::ResponseCache>(tmp / "cache.jsonl");
  uigauge::InferenceClient teacher(uigauge::backend_from_json("teacher", config["backends"]["teacher"]),
                                   stub_transport(std::make_shared<testsupport::StubTeacher>()), cache);
  uigauge::InferenceClient rephraser(uigauge::backend_from_json("rephraser", config["backends"]["rephraser"]),
                                     stub_transport(std::make_shared<testsupport::UppercaseRephraser>()), cache);
  uigauge::PipelineConfig pc;
  pc.workers = 3;
  auto summary = uigauge::run_pipeline(uigauge::load_manifest(manifest), pc, {&teacher, &rephraser},
                                       tmp / "expected.jsonl", {manifest.parent_path()});
  REQUIRE(summary.items_total == 30);

  auto r = run_cli(tmp, {"--offline", "--config", (tmp / "cfg.toml").string(), "--cache",
                         (tmp / "cache.jsonl").string(), "generate-data", "--dataset", manifest.string(), "--out",
                         (tmp / "out.jsonl").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(tmp / "out.jsonl") == slurp(tmp / "expected.jsonl"));
  json s = json::parse(slurp(tmp / "out.jsonl.summary.json"));
  CHECK(s["items_total"] == 30);
  CHECK(s["completed"] == true);

  auto resumed = run_cli(tmp, {"--offline", "--config", (tmp / "cfg.toml").string(), "--cache",
                               (tmp / "cache.jsonl").string(), "generate-data", "--dataset", manifest.string(),
                               "--out", (tmp / "out.jsonl").string(), "--resume"});
  CHECK(resumed.code == 0);
  CHECK(slurp(tmp / "out.jsonl") == slurp(tmp / "expected.jsonl"));

  auto cold = run_cli(tmp, {"--offline", "--config", (tmp / "cfg.toml").string(), "--cache",
                            (tmp / "none.jsonl").string(), "generate-data", "--dataset", manifest.string(), "--out",
                            (tmp / "cold.jsonl").string()});
  CHECK(cold.code == 3);
  CHECK(slurp(tmp / "cold.jsonl").empty());
}

TEST_CASE("analyze writes four figures deterministically") {
  TempDir tmp;
  auto d = load_eval200();
  spit(tmp / "oracle.jsonl", oracle_predictions(d));
  const std::string runs = (tmp / "runs").string();
  REQUIRE(run_cli(tmp, {"--runs-dir", runs, "evaluate", "--dataset", eval200().string(), "--no-image-check",
                        "--predictions", (fixtures() / "eval200" / "predictions.jsonl").string(), "--run-id", "r"})
              .code == 0);
  // Three-dimensional embeddings with two groups.
  {
    uigauge::Rng rng(3);
    std::ostringstream e;
    for (std::size_t i = 0; i < d.annotations().size(); ++i) {
      double off = i % 2 ? 10.0 : 0.0;
      e << json{{"id", d.annotations()[i].id}, {"embedding", {off + rng.normal(), rng.normal(), rng.normal()}}}.dump()
        << "\n";
    }
    spit(tmp / "emb.jsonl", e.str());
  }
  auto analyze = [&](const std::string& out, const std::string& seed) {
    return run_cli(tmp, {"--runs-dir", runs, "analyze", "--run", "r", "--embeddings", (tmp / "emb.jsonl").string(),
                         "--dataset", eval200().string(), "--k", "4", "--seed", seed, "--iterations", "300",
                         "--out", (tmp / out).string()});
  };
  auto first = analyze("a1", "7");
  REQUIRE_MESSAGE(first.code == 0, first.err);
  REQUIRE(analyze("a2", "7").code == 0);
  for (const char* f : {"ta_grounding.svg", "er_grounding.svg", "er_evaluation.svg", "clusters_legend.svg",
                        "analysis.json"}) {
    REQUIRE_MESSAGE(fs::exists(tmp / "a1" / f), f);
    CHECK_MESSAGE(slurp(tmp / "a1" / f) == slurp(tmp / "a2" / f), f);
  }
  json a = json::parse(slurp(tmp / "a1" / "analysis.json"));
  CHECK(a["points"].size() == d.annotations().size());
  CHECK(a["labels"].size() == 4);

  auto single = run_cli(tmp, {"--runs-dir", runs, "analyze", "--run", "r", "--embeddings",
                              (tmp / "emb.jsonl").string(), "--task", "test-action", "--k", "2", "--iterations", "50",
                              "--out", (tmp / "single").string()});
  REQUIRE(single.code == 0);
  CHECK(fs::exists(tmp / "single" / "ta_grounding.svg"));
  CHECK_FALSE(fs::exists(tmp / "single" / "er_grounding.svg"));

  // Two rows cannot form three clusters.
  spit(tmp / "two.jsonl", "{\"id\":\"ann-000\",\"embedding\":[0,1]}\n{\"id\":\"ann-001\",\"embedding\":[1,0]}\n");
  auto degenerate = run_cli(tmp, {"--runs-dir", runs, "analyze", "--run", "r", "--embeddings",
                                  (tmp / "two.jsonl").string(), "--k", "3", "--out", (tmp / "deg").string()});
  CHECK(degenerate.code == 2);
  CHECK(degenerate.err.find("DegenerateInput") != std::string::npos);
}

TEST_CASE("parse echoes structured JSON") {
  TempDir tmp;
  spit(tmp / "reply.txt", "Looks right.\nConclusion: FAILED\n<point x=\"12.5\" y=\"40\">x</point>");
  auto r = run_cli(tmp, {"parse", "--kind", "prediction", (tmp / "reply.txt").string()});
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["point"][0] == 12.5);
  CHECK(j["conclusion"] == "FAILED");

  spit(tmp / "teacher.txt", "REASONING:\n1. a\n\nUTTERANCE:\nnone");
  auto t = run_cli(tmp, {"parse", "--kind", "teacher-test-action", (tmp / "teacher.txt").string()});
  REQUIRE(t.code == 0);
  CHECK(json::parse(t.out)["utterance"].is_null());

  auto broken = run_cli(tmp, {"parse", "--kind", "teacher-expected-failed", (tmp / "teacher.txt").string()});
  CHECK(broken.code == 1);
  CHECK(json::parse(broken.out)["ok"] == false);

  CHECK(run_cli(tmp, {"parse", "--kind", "nonsense", (tmp / "reply.txt").string()}).code == 2);
}

TEST_CASE("prompts dump matches the library catalog") {
  TempDir tmp;
  auto r = run_cli(tmp, {"prompts", "dump"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out) == uigauge::template_catalog());
}

TEST_CASE("pointing command averages per category") {
  TempDir tmp;
  auto dir = fixtures() / "screenspot6";
  auto r = run_cli(tmp, {"--json", "pointing", "--manifest", (dir / "manifest.jsonl").string(), "--predictions",
                         (dir / "predictions.jsonl").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  json expected = json::parse(slurp(dir / "expected.json"));
  json j = json::parse(r.out);
  CHECK(j["macro_average"].get<double>() == doctest::Approx(expected["macro_average"].get<double>()));
}

TEST_CASE("som draws a marker") {
  TempDir tmp;
  uigauge::write_png(uigauge::Raster(64, 48), tmp / "in.png");
  auto r = run_cli(tmp, {"som", (tmp / "in.png").string(), "--box", "20", "10", "40", "30", "--marker-color", "green",
                         "-o", (tmp / "out.png").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto img = uigauge::read_image(tmp / "out.png");
  CHECK(img.at(20, 20) != uigauge::Rgb{255, 255, 255});
  CHECK(run_cli(tmp, {"som", (tmp / "in.png").string(), "--box", "20", "10", "90", "30", "-o",
                      (tmp / "bad.png").string()})
            .code == 1);
}

TEST_CASE("validate-dataset on a manifest with the published label distribution") {
  // Same shape as the real benchmark, which is not bundled.
  TempDir tmp;
  struct Lang {
    const char* code;
    int images, test_actions, passed, failed;
  };
  const Lang langs[] = {{"EN", 454, 1059, 662, 267}, {"DE", 544, 1210, 713, 297}};
  std::ostringstream m;
  int ann = 0;
  fs::create_directories(tmp / "img");
  for (const auto& l : langs) {
    std::vector<std::string> ids;
    for (int i = 0; i < l.images; ++i) {
      std::string id = std::string(l.code) + "-" + std::to_string(i);
      ids.push_back(id);
      spit(tmp / "img" / (id + ".png"), "");
      m << json{{"type", "image"}, {"id", id}, {"file_path", "img/" + id + ".png"}, {"width", 1280},
                {"height", 720}, {"language", l.code}, {"source", "brand" + std::to_string(i % 15)}}
               .dump()
        << "\n";
    }
    auto emit = [&](const char* kind, const char* status, int count) {
      for (int i = 0; i < count; ++i, ++ann) {
        json a{{"type", "annotation"}, {"id", "a" + std::to_string(ann)}, {"image_id", ids[ann % ids.size()]},
               {"kind", kind}, {"instruction", "x"}, {"box", {10, 10, 100, 60}}};
        if (status) a["expected_status"] = status;
        m << a.dump() << "\n";
      }
    };
    emit("test_action", nullptr, l.test_actions);
    emit("expected_result", "passed", l.passed);
    emit("expected_result", "failed", l.failed);
  }
  spit(tmp / "bench.jsonl", m.str());

  auto t0 = std::chrono::steady_clock::now();
  auto r = run_cli(tmp, {"--json", "validate-dataset", (tmp / "bench.jsonl").string()});
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE_MESSAGE(r.code == 0, r.err);
  json s = json::parse(r.out)["stats"];
  CHECK(s["images"] == json{{"total", 998}, {"en", 454}, {"de", 544}});
  CHECK(s["annotations"] == json{{"total", 4208}, {"en", 1988}, {"de", 2220}});
  CHECK(s["test_actions"] == json{{"total", 2269}, {"en", 1059}, {"de", 1210}});
  CHECK(s["expected_results"] == json{{"total", 1939}, {"en", 929}, {"de", 1010}});
  CHECK(s["passed"] == json{{"total", 1375}, {"en", 662}, {"de", 713}});
  CHECK(s["failed"] == json{{"total", 564}, {"en", 267}, {"de", 297}});
  CHECK(secs < 30.0);
}
