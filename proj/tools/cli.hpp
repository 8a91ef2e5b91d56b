#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "uigauge/inference.hpp"

namespace uigauge::cli {

struct Globals {
  bool json = false;
  bool offline = false;
  std::string runs_dir = "runs";
  std::string config_path;
  std::string cache_path;  // overrides [cache].path
};

using json = nlohmann::json;

/// Set by SIGINT; long-running commands stop taking new work and flush.
std::atomic<bool>& interrupted();

/// The subcommand callbacks store their work here; main runs it and maps
/// errors to exit codes.
using Action = std::function<int()>;

void add_dataset_commands(CLI::App& app, Globals& g, Action& action);
void add_evaluate_commands(CLI::App& app, Globals& g, Action& action);
void add_generate_command(CLI::App& app, Globals& g, Action& action);
void add_analyze_command(CLI::App& app, Globals& g, Action& action);
void add_misc_commands(CLI::App& app, Globals& g, Action& action);

// ---- shared helpers ----

nlohmann::json load_config(const Globals& g);

/// Resolves `[backends.<name>]` and builds a client. Offline clients get no
/// transport at all, so they cannot open a socket.
std::shared_ptr<InferenceClient> make_client(const Globals& g, const nlohmann::json& config, const std::string& name);

std::filesystem::path run_dir(const Globals& g, const std::string& run_id);
std::string utc_now();
std::string default_run_id();
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Prints `j` when --json is set, otherwise `human`.
void emit(const Globals& g, const nlohmann::json& j, const std::string& human);

}  // namespace uigauge::cli
