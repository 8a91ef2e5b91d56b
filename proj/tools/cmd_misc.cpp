#include <fstream>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "uigauge/error.hpp"
#include "uigauge/evaluator.hpp"
#include "uigauge/parser.hpp"
#include "uigauge/templates.hpp"

namespace uigauge::cli {
namespace {

namespace fs = std::filesystem;

void write_text_out(const std::string& path, const std::string& text) {
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
}

struct ReportArgs {
  std::vector<std::string> run_ids;
  std::vector<std::string> from_json;
  std::string out;
};

int run_report(const Globals& g, const ReportArgs& args) {
  if (args.run_ids.empty() && args.from_json.empty()) {
    throw Error(ErrorCode::ConfigError, "give run ids and/or --from-json tables");
  }
  std::vector<ReportRow> rows;
  for (const auto& id : args.run_ids) {
    fs::path path = run_dir(g, id) / "report.json";
    if (!fs::exists(path)) throw Error(ErrorCode::UnknownRunId, "no report for run '" + id + "' in " + g.runs_dir);
    json j = json::parse(read_text(path), nullptr, false);
    if (j.is_discarded() || !j.contains("metrics")) throw Error(ErrorCode::MalformedRecord, path.string() + ": not a report");
    rows.push_back(to_row(j.value("model", id), metrics_from_json(j["metrics"])));
  }
  for (const auto& file : args.from_json) {
    json j = json::parse(read_text(file), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedRecord, file + ": invalid JSON");
    auto more = rows_from_json(j);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  sort_rows(rows);
  std::string md = render_markdown(rows);
  if (!args.out.empty()) {
    if (fs::path(args.out).has_parent_path()) fs::create_directories(fs::path(args.out).parent_path());
    write_text_out(args.out, md);
  }
  emit(g, to_json(rows), md);
  return 0;
}

int run_parse(const Globals& g, const std::string& kind, const std::string& file, double coord_scale, bool prefer_box) {
  std::string text;
  if (file.empty() || file == "-") {
    std::stringstream s;
    s << std::cin.rdbuf();
    text = s.str();
  } else {
    text = read_text(file);
  }
  json out;
  int rc = 0;
  auto teacher_error = [&](const TeacherParseError& e) {
    rc = 1;
    return json{{"ok", false}, {"error", e.message()}};
  };
  if (kind == "prediction") {
    ParseOptions o;
    o.coord_scale = coord_scale;
    o.prefer_box = prefer_box;
    out = to_json(parse_prediction(text, o));
  } else if (kind == "teacher-test-action") {
    auto r = parse_teacher_test_action(text);
    out = r ? json{{"ok", true},
                   {"reasoning", r.value().reasoning},
                   {"utterance", r.value().utterance ? json(*r.value().utterance) : json()}}
            : teacher_error(r.error());
  } else if (kind == "teacher-expected-passed" || kind == "teacher-expected-failed") {
    auto r = parse_teacher_expected_result(text, kind == "teacher-expected-passed");
    if (r) {
      const auto& v = r.value();
      out = json{{"ok", true},
                 {"prior_test_action", v.prior_test_action ? json(*v.prior_test_action) : json()},
                 {"reasoning", v.reasoning},
                 {"expected_result", v.expected_result},
                 {"conclusion", std::string(to_string(v.conclusion))}};
    } else {
      out = teacher_error(r.error());
    }
  } else {
    throw Error(ErrorCode::ConfigError, "unknown --kind '" + kind + "'");
  }
  // The parse result is JSON regardless of --json.
  emit(Globals{true}, out, "");
  (void)g;
  return rc;
}

}  // namespace

void add_misc_commands(CLI::App& app, Globals& g, Action& action) {
  auto report = std::make_shared<ReportArgs>();
  auto* rep = app.add_subcommand("report", "Comparison table of runs, sorted ascending by TA_vg");
  rep->add_option("run-ids", report->run_ids, "Runs under --runs-dir");
  rep->add_option("--from-json", report->from_json, "Extra rows from a {\"rows\": [...]} table");
  rep->add_option("-o,--out", report->out, "Also write the Markdown here");
  rep->callback([&g, &action, report] { action = [&g, report] { return run_report(g, *report); }; });

  struct ParseArgs {
    std::string kind = "prediction";
    std::string file;
    double coord_scale = 100.0;
    bool prefer_box = false;
  };
  auto parse = std::make_shared<ParseArgs>();
  auto* pa = app.add_subcommand("parse", "Echo the structured parse of a model or teacher reply as JSON");
  pa->add_option("--kind", parse->kind)
      ->check(CLI::IsMember({"prediction", "teacher-test-action", "teacher-expected-passed", "teacher-expected-failed"}))
      ->capture_default_str();
  pa->add_option("file", parse->file, "Reply text (default: stdin)");
  pa->add_option("--coord-scale", parse->coord_scale)->capture_default_str();
  pa->add_flag("--prefer-box", parse->prefer_box);
  pa->callback([&g, &action, parse] {
    action = [&g, parse] { return run_parse(g, parse->kind, parse->file, parse->coord_scale, parse->prefer_box); };
  });

  auto* prompts = app.add_subcommand("prompts", "Prompt template utilities");
  prompts->require_subcommand(1);
  auto dump_out = std::make_shared<std::string>();
  auto* dump = prompts->add_subcommand("dump", "Print the template catalog as JSON");
  dump->add_option("-o,--out", *dump_out, "Write to a file instead of stdout");
  dump->callback([&action, dump_out] {
    action = [dump_out] {
      std::string text = template_catalog().dump(2) + "\n";
      if (dump_out->empty()) {
        std::cout << text;
      } else {
        write_text_out(*dump_out, text);
      }
      return 0;
    };
  });

  struct PointingArgs {
    std::string manifest, predictions;
    double coord_scale = 100.0;
    bool micro = false;
    std::string model = "model";
  };
  auto pt = std::make_shared<PointingArgs>();
  auto* pc = app.add_subcommand("pointing", "Per-category accuracy on a pointing benchmark");
  pc->add_option("--manifest", pt->manifest, "Pointing manifest JSONL")->required();
  pc->add_option("--predictions", pt->predictions, "JSONL of {annotation_id, raw_response}")->required();
  pc->add_option("--coord-scale", pt->coord_scale)->capture_default_str();
  pc->add_flag("--micro", pt->micro, "Report the pooled average instead of the category mean");
  pc->add_option("--model", pt->model, "Row name")->capture_default_str();
  pc->callback([&g, &action, pt] {
    action = [&g, pt] {
      ParseOptions o;
      o.coord_scale = pt->coord_scale;
      CategoryReport r = evaluate_pointing_benchmark(load_pointing_manifest(pt->manifest),
                                                     load_predictions(pt->predictions, o), pt->coord_scale,
                                                     pt->micro ? AverageMode::Micro : AverageMode::Macro);
      emit(g, to_json(r), render_category_markdown({{pt->model, r}}));
      return 0;
    };
  });
}

}  // namespace uigauge::cli
