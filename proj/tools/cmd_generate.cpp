#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "uigauge/error.hpp"
#include "uigauge/synth.hpp"

namespace uigauge::cli {
namespace {

namespace fs = std::filesystem;

struct GenerateArgs {
  std::string dataset;
  std::string image_root;
  std::string out;
  std::string summary;
  bool resume = false;
  std::string marker_color;
  std::string marker_type;
};

template <typename T>
T get_or(const json& table, const char* key, T fallback) {
  auto it = table.find(key);
  if (it == table.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ConfigError, std::string("[pipeline] ") + key + " has the wrong type");
  }
}

TargetMix mix_from_json(const json& j) {
  TargetMix mix;
  if (j.is_array()) {
    if (j.size() != 3) throw Error(ErrorCode::ConfigError, "[pipeline] target_mix needs three ratios");
    for (std::size_t k = 0; k < 3; ++k) mix.weights[k] = j[k].get<double>();
  } else if (j.is_object()) {
    mix.weights = {get_or(j, "test_action", 0.0), get_or(j, "expected_passed", 0.0), get_or(j, "expected_failed", 0.0)};
  } else {
    throw Error(ErrorCode::ConfigError, "[pipeline] target_mix must be an array or a table");
  }
  mix.validate();
  return mix;
}

void apply_marker(MarkerStyle& style, const std::string& color, const std::string& type) {
  if (!color.empty()) {
    auto c = parse_marker_color(color);
    if (!c) throw Error(ErrorCode::ConfigError, "unknown marker color '" + color + "'");
    style.color = *c;
  }
  if (!type.empty()) {
    auto t = parse_marker_type(type);
    if (!t) throw Error(ErrorCode::ConfigError, "unknown marker type '" + type + "'");
    style.marker_type = *t;
  }
}

PipelineConfig pipeline_from_json(const json& p) {
  PipelineConfig c;
  if (p.contains("target_mix")) c.target_mix = mix_from_json(p["target_mix"]);
  c.max_retries_per_item = get_or(p, "max_retries", c.max_retries_per_item);
  c.rephrase_enabled = get_or(p, "rephrase", c.rephrase_enabled);
  c.reasoning_enabled = get_or(p, "reasoning", c.reasoning_enabled);
  c.coord_scale = get_or(p, "coord_scale", c.coord_scale);
  c.workers = get_or(p, "workers", c.workers);
  if (c.max_retries_per_item < 0) throw Error(ErrorCode::ConfigError, "[pipeline] max_retries must be >= 0");
  if (c.workers < 1) throw Error(ErrorCode::ConfigError, "[pipeline] workers must be >= 1");
  if (auto m = p.find("marker"); m != p.end()) {
    apply_marker(c.marker, get_or<std::string>(*m, "color", ""), get_or<std::string>(*m, "type", ""));
    c.marker.stroke_width = get_or(*m, "stroke_width", c.marker.stroke_width);
    c.marker.arrow_length = get_or(*m, "arrow_length", c.marker.arrow_length);
  }
  return c;
}

std::string summary_text(const PipelineSummary& s, const std::string& out) {
  std::ostringstream o;
  o << "wrote " << out << "\n"
    << "emitted: test_action=" << s.emitted[0] << " expected_passed=" << s.emitted[1]
    << " expected_failed=" << s.emitted[2] << "\n"
    << "discarded: non_interactive=" << s.non_interactive << " conclusion_mismatch=" << s.conclusion_mismatch
    << " teacher_unparseable=" << s.teacher_unparseable << " self_validation=" << s.self_validation_failed
    << " backend=" << s.backend_errors << "\n"
    << "retries: " << s.retries_total << ", skipped on resume: " << s.skipped_resume << "\n";
  if (!s.completed) o << "interrupted; rerun with --resume to continue\n";
  return o.str();
}

int run_generate(const Globals& g, const GenerateArgs& args) {
  json config = load_config(g);
  auto p = config.find("pipeline");
  if (p == config.end() || !p->is_object()) throw Error(ErrorCode::ConfigError, "config has no [pipeline] table");
  PipelineConfig pc = pipeline_from_json(*p);
  apply_marker(pc.marker, args.marker_color, args.marker_type);

  std::string teacher_name = get_or<std::string>(*p, "teacher", "");
  if (teacher_name.empty()) throw Error(ErrorCode::ConfigError, "[pipeline] teacher is required");
  auto teacher = make_client(g, config, teacher_name);
  std::shared_ptr<InferenceClient> rephraser;
  if (pc.rephrase_enabled) {
    std::string name = get_or<std::string>(*p, "rephraser", "");
    if (name.empty()) throw Error(ErrorCode::ConfigError, "[pipeline] rephraser is required when rephrase = true");
    rephraser = name == teacher_name ? teacher : make_client(g, config, name);
  }

  std::string dataset_path = args.dataset.empty() ? get_or<std::string>(*p, "dataset", "") : args.dataset;
  if (dataset_path.empty()) throw Error(ErrorCode::ConfigError, "no dataset (--dataset or [pipeline] dataset)");
  std::string out = args.out.empty() ? get_or<std::string>(*p, "output", "") : args.out;
  if (out.empty()) throw Error(ErrorCode::ConfigError, "no output path (--out or [pipeline] output)");

  LoadOptions lo;
  if (!args.image_root.empty()) lo.image_root = args.image_root;
  Dataset dataset = load_manifest(dataset_path, lo);

  RunOptions ro;
  ro.image_root = args.image_root.empty() ? fs::path(dataset_path).parent_path() : fs::path(args.image_root);
  ro.resume = args.resume;
  ro.cancel = &interrupted();
  PipelineModels models{teacher.get(), rephraser.get()};
  PipelineSummary s = run_pipeline(dataset, pc, models, out, ro);

  json sj = to_json(s);
  sj["output"] = out;
  sj["teacher"] = teacher->model_id();
  sj["rephraser"] = rephraser ? json(rephraser->model_id()) : json();
  std::string summary_path = args.summary.empty() ? out + ".summary.json" : args.summary;
  write_json(summary_path, sj);
  emit(g, sj, summary_text(s, out));
  if (!s.completed) return 130;
  return s.backend_errors > 0 ? 3 : 0;
}

}  // namespace

void add_generate_command(CLI::App& app, Globals& g, Action& action) {
  auto args = std::make_shared<GenerateArgs>();
  auto* gen = app.add_subcommand("generate-data", "Generate Set-of-Mark training samples with a teacher model");
  gen->add_option("--dataset", args->dataset, "Source manifest (default: [pipeline] dataset)");
  gen->add_option("--image-root", args->image_root, "Directory image paths are resolved against");
  gen->add_option("-o,--out", args->out, "Training JSONL (default: [pipeline] output)");
  gen->add_option("--summary", args->summary, "Summary JSON (default: <out>.summary.json)");
  gen->add_flag("--resume", args->resume, "Skip items already present in the output");
  gen->add_option("--marker-color", args->marker_color, "Overrides [pipeline.marker] color");
  gen->add_option("--marker-type", args->marker_type, "Overrides [pipeline.marker] type");
  gen->callback([&g, &action, args] { action = [&g, args] { return run_generate(g, *args); }; });
}

}  // namespace uigauge::cli
