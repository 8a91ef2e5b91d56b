#include <csignal>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "uigauge/config.hpp"
#include "uigauge/error.hpp"

namespace uigauge::cli {

std::atomic<bool>& interrupted() {
  static std::atomic<bool> flag{false};
  return flag;
}

nlohmann::json load_config(const Globals& g) {
  if (g.config_path.empty()) return nlohmann::json::object();
  return load_toml(g.config_path);
}

std::shared_ptr<InferenceClient> make_client(const Globals& g, const nlohmann::json& config, const std::string& name) {
  auto backends = config.find("backends");
  if (backends == config.end() || !backends->contains(name)) {
    throw Error(ErrorCode::ConfigError, "no [backends." + name + "] table in " +
                                            (g.config_path.empty() ? std::string("(no --config given)") : g.config_path));
  }
  BackendConfig bc = backend_from_json(name, (*backends)[name]);
  std::string cache = g.cache_path;
  if (cache.empty()) {
    auto c = config.find("cache");
    if (c != config.end() && c->contains("path")) cache = (*c)["path"].get<std::string>();
  }
  if (cache.empty()) cache = (std::filesystem::path(g.runs_dir) / "cache.jsonl").string();
  ClientOptions opts;
  opts.offline = g.offline;
  return std::make_shared<InferenceClient>(bc, g.offline ? nullptr : make_http_transport(),
                                           std::make_shared<ResponseCache>(cache), opts);
}

std::filesystem::path run_dir(const Globals& g, const std::string& run_id) {
  if (run_id.empty() || run_id.find('/') != std::string::npos || run_id == "." || run_id == "..") {
    throw Error(ErrorCode::UnknownRunId, "invalid run id '" + run_id + "'");
  }
  return std::filesystem::path(g.runs_dir) / run_id;
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string default_run_id() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  std::random_device rd;
  std::ostringstream id;
  id << "run-" << buf << "-" << std::hex << (rd() & 0xffffu);
  return id.str();
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

void emit(const Globals& g, const nlohmann::json& j, const std::string& human) {
  if (g.json) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << human;
    if (!human.empty() && human.back() != '\n') std::cout << '\n';
  }
}

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Timeout:
    case ErrorCode::AuthFailure:
    case ErrorCode::RateLimited:
    case ErrorCode::BackendError:
    case ErrorCode::OfflineCacheMiss:
      return 3;
    case ErrorCode::ConfigError:
    case ErrorCode::DegenerateInput:
      return 2;
    default:
      return 1;
  }
}

void on_sigint(int) { interrupted().store(true); }

}  // namespace

}  // namespace uigauge::cli

int main(int argc, char** argv) {
  using namespace uigauge::cli;
  Globals g;
  Action action;

  CLI::App app{"uigauge: visual grounding benchmark harness and training data generator"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--json", g.json, "Machine-readable output on stdout");
  app.add_flag("--offline", g.offline, "Serve inference from the response cache only; never open a socket");
  app.add_option("--runs-dir", g.runs_dir, "Directory holding one <run-id>/ folder per run")->capture_default_str();
  app.add_option("--config", g.config_path, "TOML config with [backends.*], [pipeline], [cache]");
  app.add_option("--cache", g.cache_path, "Response cache JSONL (default: [cache].path or <runs-dir>/cache.jsonl)");

  add_dataset_commands(app, g, action);
  add_evaluate_commands(app, g, action);
  add_generate_command(app, g, action);
  add_analyze_command(app, g, action);
  add_misc_commands(app, g, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::signal(SIGINT, on_sigint);
  try {
    return action ? action() : 0;
  } catch (const uigauge::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
