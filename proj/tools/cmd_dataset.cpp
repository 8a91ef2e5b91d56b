#include <iostream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "uigauge/dataset.hpp"
#include "uigauge/error.hpp"
#include "uigauge/raster.hpp"
#include "uigauge/som.hpp"

namespace uigauge::cli {
namespace {

struct DatasetArgs {
  std::string manifest;
  std::string image_root;
  bool no_image_check = false;
};

void add_dataset_args(CLI::App* sub, DatasetArgs& a) {
  sub->add_option("manifest", a.manifest, "Dataset manifest (JSONL)")->required();
  sub->add_option("--image-root", a.image_root, "Directory image paths are resolved against");
  sub->add_flag("--no-image-check", a.no_image_check, "Skip the image file existence check");
}

Dataset load(const DatasetArgs& a) {
  LoadOptions opts;
  opts.check_image_files = !a.no_image_check;
  if (!a.image_root.empty()) opts.image_root = a.image_root;
  return load_manifest(a.manifest, opts);
}

std::string stats_table(const DatasetStats& s) {
  std::ostringstream out;
  auto row = [&](const char* label, const LanguageSplit& v) {
    out << "| " << label << " | " << v.total << " | " << v.de << " | " << v.en << " |\n";
  };
  out << "| | Total | DE | EN |\n|---|---:|---:|---:|\n";
  row("Images", s.images);
  row("Annotations", s.annotations);
  row("Test Action", s.test_actions);
  row("Expected Result", s.expected_results);
  row("Passed", s.passed);
  row("Failed", s.failed);
  return out.str();
}

}  // namespace

void add_dataset_commands(CLI::App& app, Globals& g, Action& action) {
  auto validate_args = std::make_shared<DatasetArgs>();
  auto* validate = app.add_subcommand("validate-dataset", "Validate a manifest and print its label distribution");
  add_dataset_args(validate, *validate_args);
  validate->callback([&g, &action, validate_args] {
    action = [&g, validate_args] {
      DatasetStats s = stats(load(*validate_args));
      emit(g, json{{"valid", true}, {"stats", to_json(s)}}, stats_table(s));
      return 0;
    };
  });

  auto stats_args = std::make_shared<DatasetArgs>();
  auto* st = app.add_subcommand("stats", "Label distribution overall and per source");
  add_dataset_args(st, *stats_args);
  st->callback([&g, &action, stats_args] {
    action = [&g, stats_args] {
      Dataset d = load(*stats_args);
      DatasetStats total = stats(d);
      std::map<std::string, std::vector<BenchmarkImage>> images_by_source;
      for (const auto& img : d.images()) images_by_source[img.source].push_back(img);
      json per_source = json::object();
      std::ostringstream human;
      human << stats_table(total);
      for (const auto& [source, images] : images_by_source) {
        std::vector<Annotation> anns;
        for (const auto& img : images) {
          for (std::size_t i : d.annotations_of(img.id)) anns.push_back(d.annotations()[i]);
        }
        DatasetStats s = stats(Dataset(images, std::move(anns)));
        std::string name = source.empty() ? "(none)" : source;
        per_source[name] = to_json(s);
        human << "\nsource: " << name << "\n" << stats_table(s);
      }
      emit(g, json{{"stats", to_json(total)}, {"per_source", per_source}}, human.str());
      return 0;
    };
  });

  struct HfArgs {
    std::string input, output;
    std::string field_map;
  };
  auto hf = std::make_shared<HfArgs>();
  auto* conv = app.add_subcommand("convert-hf", "Convert a flat per-annotation export into a manifest");
  conv->add_option("input", hf->input, "Export JSONL")->required();
  conv->add_option("-o,--out", hf->output, "Manifest to write")->required();
  conv->add_option("--field-map", hf->field_map, "JSON object overriding export field names");
  conv->callback([&g, &action, hf] {
    action = [&g, hf] {
      HfFieldMap fields;
      if (!hf->field_map.empty()) {
        json m = json::parse(hf->field_map, nullptr, false);
        if (!m.is_object()) throw Error(ErrorCode::ConfigError, "--field-map must be a JSON object");
        std::map<std::string, std::string*> slots{
            {"image_path", &fields.image_path}, {"width", &fields.image_width}, {"height", &fields.image_height},
            {"language", &fields.language},     {"source", &fields.source},     {"type", &fields.kind},
            {"instruction", &fields.instruction}, {"box", &fields.box},         {"expectation", &fields.status}};
        for (const auto& [k, v] : m.items()) {
          auto it = slots.find(k);
          if (it == slots.end() || !v.is_string()) throw Error(ErrorCode::ConfigError, "--field-map: bad entry '" + k + "'");
          *it->second = v.get<std::string>();
        }
      }
      Dataset d = convert_hf_export(read_text(hf->input), fields);
      write_manifest(d, hf->output);
      DatasetStats s = stats(d);
      emit(g, json{{"output", hf->output}, {"stats", to_json(s)}}, "wrote " + hf->output + "\n" + stats_table(s));
      return 0;
    };
  });

  struct SomArgs {
    std::string image, output, color = "red", type = "box-with-arrow";
    std::vector<int> box;
    int stroke = 3, arrow = 40;
  };
  auto som = std::make_shared<SomArgs>();
  auto* som_cmd = app.add_subcommand("som", "Draw a Set-of-Mark marker on an image");
  som_cmd->add_option("image", som->image, "Input PNG or JPEG")->required();
  som_cmd->add_option("--box", som->box, "x0 y0 x1 y1 in pixels")->expected(4)->required();
  som_cmd->add_option("-o,--out", som->output, "Output PNG")->required();
  som_cmd->add_option("--marker-color", som->color, "Palette name or #rrggbb")->capture_default_str();
  som_cmd->add_option("--marker-type", som->type, "box or box-with-arrow")->capture_default_str();
  som_cmd->add_option("--stroke-width", som->stroke)->capture_default_str();
  som_cmd->add_option("--arrow-length", som->arrow)->capture_default_str();
  som_cmd->callback([&g, &action, som] {
    action = [&g, som] {
      MarkerStyle style;
      auto color = parse_marker_color(som->color);
      if (!color) throw Error(ErrorCode::ConfigError, "unknown marker color '" + som->color + "'");
      auto type = parse_marker_type(som->type);
      if (!type) throw Error(ErrorCode::ConfigError, "unknown marker type '" + som->type + "'");
      style.color = *color;
      style.marker_type = *type;
      style.stroke_width = som->stroke;
      style.arrow_length = som->arrow;
      style.validate();
      Raster img = read_image(som->image);
      BoundingBox box{som->box[0], som->box[1], som->box[2], som->box[3]};
      if (!box.valid_for(img.width(), img.height())) {
        throw Error(ErrorCode::BoxOutOfBounds, "box outside the " + std::to_string(img.width()) + "x" +
                                                   std::to_string(img.height()) + " image");
      }
      write_png(render_som(img, box, style), som->output);
      emit(g, json{{"output", som->output}, {"style", style_phrase(style)}}, "wrote " + som->output);
      return 0;
    };
  });
}

}  // namespace uigauge::cli
