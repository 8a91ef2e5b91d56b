#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "cli.hpp"
#include "uigauge/digest.hpp"
#include "uigauge/error.hpp"
#include "uigauge/evaluator.hpp"
#include "uigauge/templates.hpp"

namespace uigauge::cli {
namespace {

namespace fs = std::filesystem;

struct EvaluateArgs {
  std::string dataset;
  std::string image_root;
  bool no_image_check = false;
  std::string predictions;
  std::string backend;
  std::string replay;
  std::string run_id;
  std::string model;
  double coord_scale = 100.0;
  double box_scale = 1000.0;
  bool prefer_box = false;
  std::string capable = "auto";
  bool no_reasoning = false;
};

struct RunSettings {
  std::string dataset;  // absolute manifest path
  std::string image_root;
  bool check_images = true;
  std::string model;
  ParseOptions parse;
  std::optional<bool> evaluation_capable;
};

json settings_json(const RunSettings& s) {
  return {{"dataset", s.dataset},
          {"image_root", s.image_root},
          {"check_images", s.check_images},
          {"model", s.model},
          {"coord_scale", s.parse.coord_scale},
          {"box_scale", s.parse.box_scale},
          {"prefer_box", s.parse.prefer_box},
          {"evaluation_capable", s.evaluation_capable ? json(*s.evaluation_capable) : json()}};
}

RunSettings settings_from_json(const json& j) {
  try {
    RunSettings s;
    s.dataset = j.at("dataset").get<std::string>();
    s.image_root = j.at("image_root").get<std::string>();
    s.check_images = j.at("check_images").get<bool>();
    s.model = j.at("model").get<std::string>();
    s.parse.coord_scale = j.at("coord_scale").get<double>();
    s.parse.box_scale = j.at("box_scale").get<double>();
    s.parse.prefer_box = j.at("prefer_box").get<bool>();
    if (!j.at("evaluation_capable").is_null()) s.evaluation_capable = j["evaluation_capable"].get<bool>();
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("run manifest config: ") + e.what());
  }
}

Dataset load_dataset(const RunSettings& s) {
  LoadOptions opts;
  opts.check_image_files = s.check_images;
  if (!s.image_root.empty()) opts.image_root = s.image_root;
  return load_manifest(s.dataset, opts);
}

void write_lines(const fs::path& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::binary);
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

/// Parses responses.jsonl in `dir` and writes every scored artifact. Returns the metrics.
MetricsReport score_run(const fs::path& dir, const Dataset& dataset, const RunSettings& s) {
  PredictionMap preds = load_predictions(dir / "responses.jsonl", s.parse);
  EvaluateOptions eo;
  eo.coord_scale = s.parse.coord_scale;
  eo.evaluation_capable = s.evaluation_capable;
  std::vector<EvalRecord> records = score_records(dataset, preds, eo);
  MetricsReport m = aggregate(records, eo);

  std::vector<json> pred_rows, record_rows;
  for (const auto& a : dataset.annotations()) {
    auto it = preds.find(a.id);
    if (it != preds.end()) pred_rows.push_back(json{{"annotation_id", a.id}, {"prediction", to_json(it->second)}});
  }
  for (const auto& r : records) record_rows.push_back(to_json(r));
  write_lines(dir / "predictions.jsonl", pred_rows);
  write_lines(dir / "records.jsonl", record_rows);
  write_json(dir / "report.json", json{{"model", s.model}, {"metrics", to_json(m)}});
  write_file(dir / "report.md", render_markdown({to_row(s.model, m)}));
  if (m.er_vg.n > 0) write_file(dir / "confusion.svg", render_confusion_svg(m.confusion, s.model));
  return m;
}

json outputs_json(const fs::path& dir) {
  json o = json::object();
  for (const char* f : {"responses.jsonl", "predictions.jsonl", "records.jsonl", "report.json", "report.md",
                        "confusion.svg"}) {
    if (fs::exists(dir / f)) o[f] = (dir / f).string();
  }
  return o;
}

std::string summary_text(const std::string& run_id, const fs::path& dir, const MetricsReport& m) {
  std::ostringstream out;
  out << "run " << run_id << " -> " << dir.string() << "\n"
      << render_markdown({to_row(run_id, m)});
  if (m.missing_predictions > 0) out << "missing predictions: " << m.missing_predictions << "\n";
  return out.str();
}

std::string instruction_prompt(const Annotation& a, bool reasoning) {
  if (a.kind == AnnotationKind::TestAction) {
    std::string text = a.instruction;
    while (!text.empty() && (text.back() == '.' || text.back() == ' ')) text.pop_back();
    return render(TemplateId::InferTestAction, {{"test_action", text}});
  }
  Bindings b{{"expectation", a.instruction}};
  return reasoning ? render(TemplateId::InferExpectedResult, b) : render_no_reasoning(TemplateId::InferExpectedResult, b);
}

bool is_backend_failure(ErrorCode c) {
  return c == ErrorCode::Timeout || c == ErrorCode::AuthFailure || c == ErrorCode::RateLimited ||
         c == ErrorCode::BackendError || c == ErrorCode::OfflineCacheMiss;
}

/// Queries the backend for every annotation and writes the answered ones to
/// responses.jsonl. Returns false when interrupted before finishing.
bool collect_responses(const Globals& g, const json& config, const EvaluateArgs& args, const Dataset& dataset,
                       const fs::path& image_root, const fs::path& dir, json& backend_snapshot) {
  auto client = make_client(g, config, args.backend);
  backend_snapshot = to_json(client->config());
  const auto& anns = dataset.annotations();

  std::mutex image_mutex;
  std::unordered_map<std::string, std::shared_ptr<EncodedImage>> images;
  auto image_for = [&](const BenchmarkImage& img) {
    std::lock_guard lock(image_mutex);
    auto& slot = images[img.id];
    if (!slot) slot = std::make_shared<EncodedImage>(read_encoded_image(image_root / img.file_path));
    return slot;
  };

  struct Outcome {
    std::optional<std::string> text;
    std::optional<Error> error;
  };
  std::function<Outcome(std::size_t)> fn = [&](std::size_t i) -> Outcome {
    if (interrupted().load()) return {};
    const Annotation& a = anns[i];
    auto image = image_for(dataset.image_of(a));
    GenerateRequest req;
    req.image = image.get();
    req.prompt = instruction_prompt(a, !args.no_reasoning);
    try {
      return {client->generate(req), std::nullopt};
    } catch (const Error& e) {
      if (!is_backend_failure(e.code())) throw;
      return {std::nullopt, e};
    }
  };
  std::vector<Outcome> outcomes =
      ordered_parallel_map<Outcome>(anns.size(), std::max(1, client->config().max_concurrency), fn);

  std::vector<json> rows;
  std::optional<Error> first_error;
  for (std::size_t i = 0; i < anns.size(); ++i) {
    if (outcomes[i].text) rows.push_back(json{{"annotation_id", anns[i].id}, {"raw_response", *outcomes[i].text}});
    if (outcomes[i].error && !first_error) first_error = outcomes[i].error;
  }
  write_lines(dir / "responses.jsonl", rows);
  if (first_error) throw *first_error;
  return rows.size() == anns.size() || !interrupted().load();
}

int run_evaluate(const Globals& g, const EvaluateArgs& args) {
  int sources = !args.predictions.empty() + !args.backend.empty();
  if (sources != 1) throw Error(ErrorCode::ConfigError, "give exactly one of --predictions or --backend");
  if (args.dataset.empty()) throw Error(ErrorCode::ConfigError, "--dataset is required");
  if (!(args.coord_scale > 0) || !(args.box_scale > 0)) throw Error(ErrorCode::ConfigError, "scales must be positive");

  RunSettings s;
  s.dataset = fs::absolute(args.dataset).lexically_normal().string();
  s.image_root = args.image_root.empty() ? "" : fs::absolute(args.image_root).lexically_normal().string();
  s.check_images = !args.no_image_check;
  s.parse.coord_scale = args.coord_scale;
  s.parse.box_scale = args.box_scale;
  s.parse.prefer_box = args.prefer_box;
  if (args.capable == "yes") s.evaluation_capable = true;
  else if (args.capable == "no") s.evaluation_capable = false;
  else if (args.capable != "auto") throw Error(ErrorCode::ConfigError, "--evaluation-capable must be auto, yes or no");

  std::string manifest_text = read_text(s.dataset);
  Dataset dataset = load_dataset(s);
  const std::string run_id = args.run_id.empty() ? default_run_id() : args.run_id;
  const fs::path dir = run_dir(g, run_id);
  fs::create_directories(dir);

  json config = load_config(g);
  json manifest{{"run_id", run_id},
                {"status", "running"},
                {"started_at", utc_now()},
                {"dataset_digest", sha256_hex(manifest_text)},
                {"source", args.predictions.empty() ? "backend" : "predictions"}};
  json backend_snapshot;
  fs::path image_root = s.image_root.empty() ? fs::path(s.dataset).parent_path() : fs::path(s.image_root);

  bool complete = true;
  if (!args.predictions.empty()) {
    s.model = args.model.empty() ? fs::path(args.predictions).stem().string() : args.model;
    write_file(dir / "responses.jsonl", read_text(args.predictions));
    manifest["predictions_file"] = fs::absolute(args.predictions).string();
  } else {
    write_json(dir / "run_manifest.json", manifest);
    try {
      complete = collect_responses(g, config, args, dataset, image_root, dir, backend_snapshot);
    } catch (const Error&) {
      manifest["status"] = "failed";
      manifest["finished_at"] = utc_now();
      write_json(dir / "run_manifest.json", manifest);
      throw;
    }
    s.model = args.model.empty() ? backend_snapshot.value("model_id", args.backend) : args.model;
    manifest["backend_ids"] = json::array({backend_snapshot.value("model_id", args.backend)});
    manifest["backend"] = backend_snapshot;
    manifest["reasoning"] = !args.no_reasoning;
  }
  manifest["config"] = settings_json(s);

  if (!complete) {
    manifest["status"] = "interrupted";
    manifest["finished_at"] = utc_now();
    manifest["outputs"] = outputs_json(dir);
    write_json(dir / "run_manifest.json", manifest);
    std::cerr << "interrupted; partial responses kept in " << (dir / "responses.jsonl").string()
              << " (rerun with --run-id " << run_id << " to finish from the cache)\n";
    return 130;
  }

  MetricsReport m = score_run(dir, dataset, s);
  manifest["status"] = "complete";
  manifest["finished_at"] = utc_now();
  manifest["outputs"] = outputs_json(dir);
  write_json(dir / "run_manifest.json", manifest);
  emit(g, json{{"run_id", run_id}, {"run_dir", dir.string()}, {"model", s.model}, {"metrics", to_json(m)}},
       summary_text(run_id, dir, m));
  return 0;
}

int run_replay(const Globals& g, const std::string& run_id) {
  const fs::path dir = run_dir(g, run_id);
  if (!fs::exists(dir / "run_manifest.json")) throw Error(ErrorCode::UnknownRunId, "no run '" + run_id + "' in " + g.runs_dir);
  json original = json::parse(read_text(dir / "run_manifest.json"), nullptr, false);
  if (original.is_discarded() || !original.contains("config")) {
    throw Error(ErrorCode::MalformedRecord, (dir / "run_manifest.json").string() + " is not a finished run manifest");
  }
  if (original.value("status", "") != "complete") {
    throw Error(ErrorCode::MalformedRecord, "run '" + run_id + "' did not complete");
  }
  RunSettings s = settings_from_json(original["config"]);
  std::string manifest_text = read_text(s.dataset);
  if (sha256_hex(manifest_text) != original.value("dataset_digest", "")) {
    throw Error(ErrorCode::MalformedRecord, "dataset " + s.dataset + " changed since run '" + run_id + "'");
  }
  Dataset dataset = load_dataset(s);

  const std::string replay_id = run_id + "-replay";
  const fs::path out = run_dir(g, replay_id);
  fs::create_directories(out);
  write_file(out / "responses.jsonl", read_text(dir / "responses.jsonl"));
  MetricsReport m = score_run(out, dataset, s);

  json manifest = original;
  manifest["run_id"] = replay_id;
  manifest["replay_of"] = run_id;
  manifest["started_at"] = utc_now();
  manifest["finished_at"] = utc_now();
  manifest["outputs"] = outputs_json(out);
  write_json(out / "run_manifest.json", manifest);

  bool identical = read_text(dir / "report.json") == read_text(out / "report.json");
  std::ostringstream human;
  human << summary_text(replay_id, out, m) << "report.json " << (identical ? "identical to" : "DIFFERS from")
        << " run " << run_id << "\n";
  emit(g, json{{"run_id", replay_id}, {"replay_of", run_id}, {"identical", identical}, {"metrics", to_json(m)}},
       human.str());
  return identical ? 0 : 1;
}

}  // namespace

void add_evaluate_commands(CLI::App& app, Globals& g, Action& action) {
  auto args = std::make_shared<EvaluateArgs>();
  auto* ev = app.add_subcommand("evaluate", "Score a model on a benchmark dataset; artifacts go to <runs-dir>/<run-id>/");
  ev->add_option("--dataset", args->dataset, "Dataset manifest (JSONL)");
  ev->add_option("--image-root", args->image_root, "Directory image paths are resolved against");
  ev->add_flag("--no-image-check", args->no_image_check, "Skip the image file existence check");
  ev->add_option("--predictions", args->predictions, "JSONL of {annotation_id, raw_response}");
  ev->add_option("--backend", args->backend, "Backend name from the config's [backends.*] tables");
  ev->add_option("--replay", args->replay, "Re-score a stored run from its raw responses");
  ev->add_option("--run-id", args->run_id, "Run directory name (default: timestamped)");
  ev->add_option("--model", args->model, "Model name used in reports");
  ev->add_option("--coord-scale", args->coord_scale, "Upper bound of point coordinates")->capture_default_str();
  ev->add_option("--box-scale", args->box_scale, "Upper bound of [[x0,y0,x1,y1]] box coordinates")->capture_default_str();
  ev->add_flag("--prefer-box", args->prefer_box, "Ground with the predicted box centroid when both are present");
  ev->add_option("--evaluation-capable", args->capable, "auto, yes or no")->capture_default_str();
  ev->add_flag("--no-reasoning", args->no_reasoning, "Ask for the verdict without step-by-step reasoning");
  ev->callback([&g, &action, args] {
    action = [&g, args] { return args->replay.empty() ? run_evaluate(g, *args) : run_replay(g, args->replay); };
  });

  auto replay_id = std::make_shared<std::string>();
  auto* rp = app.add_subcommand("replay", "Re-score a stored run from its raw responses and compare reports");
  rp->add_option("run-id", *replay_id, "Run to replay")->required();
  rp->callback([&g, &action, replay_id] { action = [&g, replay_id] { return run_replay(g, *replay_id); }; });
}

}  // namespace uigauge::cli
