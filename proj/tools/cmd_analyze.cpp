#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "uigauge/analysis.hpp"
#include "uigauge/dataset.hpp"
#include "uigauge/error.hpp"

namespace uigauge::cli {
namespace {

namespace fs = std::filesystem;

struct AnalyzeArgs {
  std::string records;
  std::string run;
  std::string embeddings;
  std::string embed_backend;
  std::string dataset;
  std::string label_backend;
  std::string task = "all";
  std::string out;
  int k = 8;
  std::uint64_t seed = 0;
  double perplexity = 30.0;
  int iterations = 1000;
  int grid = 50;
};

struct RecordFlags {
  AnnotationKind kind = AnnotationKind::TestAction;
  bool grounding_hit = false;
  std::optional<bool> conclusion_correct;
};

std::unordered_map<std::string, RecordFlags> load_records(const fs::path& path) {
  std::unordered_map<std::string, RecordFlags> out;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    auto where = path.string() + ":" + std::to_string(line_no);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedRecord, where + ": not a JSON object");
    try {
      RecordFlags f;
      auto kind = kind_from_string(j.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::MalformedRecord, where + ": unknown kind");
      f.kind = *kind;
      f.grounding_hit = j.value("grounding_hit", json()).is_boolean() && j["grounding_hit"].get<bool>();
      if (j.value("conclusion_correct", json()).is_boolean()) f.conclusion_correct = j["conclusion_correct"].get<bool>();
      std::string id = j.at("annotation_id").get<std::string>();
      if (!out.emplace(id, f).second) throw Error(ErrorCode::DuplicateId, where + ": duplicate record '" + id + "'");
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, where + ": " + e.what());
    }
  }
  return out;
}

struct TaskPlot {
  const char* task;
  const char* file;
  const char* title;
};

constexpr TaskPlot kPlots[] = {
    {"test-action", "ta_grounding.svg", "Test action grounding failures"},
    {"expected-result-vg", "er_grounding.svg", "Expected result grounding failures"},
    {"expected-result-eval", "er_evaluation.svg", "Expected result evaluation failures"},
};

int run_analyze(const Globals& g, const AnalyzeArgs& args) {
  if (args.out.empty()) throw Error(ErrorCode::ConfigError, "--out is required");
  if (args.records.empty() == args.run.empty()) throw Error(ErrorCode::ConfigError, "give exactly one of --records or --run");
  if (args.embeddings.empty() == args.embed_backend.empty()) {
    throw Error(ErrorCode::ConfigError, "give exactly one of --embeddings or --embed-backend");
  }
  if (args.task != "all" && std::none_of(std::begin(kPlots), std::end(kPlots),
                                         [&](const TaskPlot& p) { return args.task == p.task; })) {
    throw Error(ErrorCode::ConfigError, "--task must be all, test-action, expected-result-vg or expected-result-eval");
  }
  if (args.grid < 1) throw Error(ErrorCode::ConfigError, "--grid must be >= 1");

  fs::path records_path = args.records.empty() ? run_dir(g, args.run) / "records.jsonl" : fs::path(args.records);
  if (!args.run.empty() && !fs::exists(records_path)) {
    throw Error(ErrorCode::UnknownRunId, "no records for run '" + args.run + "' in " + g.runs_dir);
  }
  auto records = load_records(records_path);

  std::optional<Dataset> dataset;
  if (!args.dataset.empty()) {
    LoadOptions lo;
    lo.check_image_files = false;
    dataset = load_manifest(args.dataset, lo);
  }
  auto utterance_of = [&](const std::string& id) -> std::string {
    if (dataset) {
      if (const Annotation* a = dataset->find_annotation(id)) return a->instruction;
    }
    return id;
  };

  json config = load_config(g);
  std::vector<std::string> notes;
  EmbeddingMatrix emb;
  if (!args.embeddings.empty()) {
    emb = load_embeddings(args.embeddings);
  } else {
    if (!dataset) throw Error(ErrorCode::ConfigError, "--embed-backend needs --dataset for the utterance texts");
    std::vector<std::string> ids, texts;
    for (const auto& a : dataset->annotations()) {
      if (!records.count(a.id)) continue;
      ids.push_back(a.id);
      texts.push_back(a.instruction);
    }
    auto client = make_client(g, config, args.embed_backend);
    emb = EmbeddingMatrix::from_rows(ids, client->embed(texts));
  }

  // Rows with both an embedding and a record, in embedding order.
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < emb.ids.size(); ++i) {
    if (records.count(emb.ids[i])) rows.push_back(i);
  }
  if (rows.size() < emb.ids.size()) {
    notes.push_back(std::to_string(emb.ids.size() - rows.size()) + " embeddings without an evaluation record ignored");
  }
  Matrix X(rows.size(), emb.values.cols);
  std::vector<std::string> ids, utterances;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(emb.values.row(rows[r]), emb.values.cols, X.row(r));
    ids.push_back(emb.ids[rows[r]]);
    utterances.push_back(utterance_of(ids.back()));
  }

  KMeansOptions ko;
  ko.k = args.k;
  ko.seed = args.seed;
  ClusterModel clusters = kmeans(X, ko);

  TsneOptions to;
  to.perplexity = args.perplexity;
  to.iterations = args.iterations;
  to.seed = args.seed;
  TsneLayout layout = tsne(X, to);
  notes.insert(notes.end(), layout.notes.begin(), layout.notes.end());

  std::shared_ptr<InferenceClient> labeler;
  if (!args.label_backend.empty()) labeler = make_client(g, config, args.label_backend);
  std::map<int, std::string> labels =
      label_clusters(clusters, utterances, labeler.get(), 10, args.seed, &notes);

  fs::create_directories(args.out);
  json result{{"seed", args.seed},
              {"k", args.k},
              {"perplexity", layout.perplexity},
              {"iterations", layout.iterations},
              {"kl", layout.kl},
              {"inertia", clusters.inertia},
              {"labels", json::object()},
              {"points", json::array()},
              {"plots", json::object()}};
  for (const auto& [c, name] : labels) result["labels"][std::to_string(c)] = name;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const RecordFlags& f = records.at(ids[i]);
    result["points"].push_back(json{{"id", ids[i]},
                                    {"kind", std::string(to_string(f.kind))},
                                    {"x", layout.coords.at(i, 0)},
                                    {"y", layout.coords.at(i, 1)},
                                    {"cluster", clusters.assignment[i]}});
  }

  for (const TaskPlot& plot : kPlots) {
    if (args.task != "all" && args.task != plot.task) continue;
    const bool ta = std::string_view(plot.task) == "test-action";
    const bool eval = std::string_view(plot.task) == "expected-result-eval";
    std::vector<std::size_t> members;
    std::vector<bool> failed;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const RecordFlags& f = records.at(ids[i]);
      if ((f.kind == AnnotationKind::TestAction) != ta) continue;
      members.push_back(i);
      failed.push_back(eval ? !f.conclusion_correct.value_or(false) : !f.grounding_hit);
    }
    Matrix sub(members.size(), 2);
    std::vector<int> sub_clusters;
    for (std::size_t r = 0; r < members.size(); ++r) {
      sub.at(r, 0) = layout.coords.at(members[r], 0);
      sub.at(r, 1) = layout.coords.at(members[r], 1);
      sub_clusters.push_back(clusters.assignment[members[r]]);
    }
    FailureGrid grid = failure_heatmap(sub, failed, args.grid);
    PlotInput in{&sub, &sub_clusters, &labels, &grid, plot.title};
    write_text_file(fs::path(args.out) / plot.file, render_plot_svg(in));
    std::size_t n_failed = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), true));
    result["plots"][plot.task] = json{{"file", plot.file}, {"points", members.size()}, {"failures", n_failed}};
  }
  write_text_file(fs::path(args.out) / "clusters_legend.svg", render_cluster_legend_svg(clusters.assignment, labels));
  result["notes"] = notes;
  write_json(fs::path(args.out) / "analysis.json", result);

  std::ostringstream human;
  human << "analyzed " << ids.size() << " utterances into " << args.k << " clusters (KL " << layout.kl << ")\n";
  for (const auto& [task, p] : result["plots"].items()) {
    human << "  " << task << ": " << p["file"].get<std::string>() << " (" << p["failures"].get<std::size_t>() << "/"
          << p["points"].get<std::size_t>() << " failures)\n";
  }
  for (const auto& n : notes) human << "note: " << n << "\n";
  emit(g, result, human.str());
  return 0;
}

}  // namespace

void add_analyze_command(CLI::App& app, Globals& g, Action& action) {
  auto args = std::make_shared<AnalyzeArgs>();
  auto* an = app.add_subcommand("analyze", "t-SNE layout, k-means clusters and failure heatmaps of utterances");
  an->add_option("--records", args->records, "Evaluation records JSONL");
  an->add_option("--run", args->run, "Use <runs-dir>/<run>/records.jsonl");
  an->add_option("--embeddings", args->embeddings, "JSONL of {id, embedding}");
  an->add_option("--embed-backend", args->embed_backend, "Backend used to embed the utterances");
  an->add_option("--dataset", args->dataset, "Manifest providing utterance texts");
  an->add_option("--label-backend", args->label_backend, "Backend that names clusters (default: cluster-i)");
  an->add_option("--task", args->task, "all, test-action, expected-result-vg or expected-result-eval")
      ->capture_default_str();
  an->add_option("-o,--out", args->out, "Output directory");
  an->add_option("--k", args->k, "Number of clusters")->capture_default_str();
  an->add_option("--seed", args->seed, "Seed for k-means++ and the t-SNE initialization")->capture_default_str();
  an->add_option("--perplexity", args->perplexity)->capture_default_str();
  an->add_option("--iterations", args->iterations)->capture_default_str();
  an->add_option("--grid", args->grid, "Heatmap cells per side")->capture_default_str();
  an->callback([&g, &action, args] { action = [&g, args] { return run_analyze(g, *args); }; });
}

}  // namespace uigauge::cli
