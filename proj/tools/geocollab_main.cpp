#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <pthread.h>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "geocollab/error.hpp"
#include "geocollab/protocol_examples.hpp"
#include "geocollab/review.hpp"
#include "geocollab/scenario.hpp"
#include "geocollab/server.hpp"

using namespace geocollab;
namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

const std::set<std::string> kStringKeys = {"bind_address", "assets_dir", "store_dir"};

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ValidationError, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  Json j = Json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ValidationError, path + " is not valid JSON");
  return j;
}

/// GEOCOLLAB_<KEY> for every config key. Values parse as JSON where possible.
Json env_overrides() {
  Json out = Json::object();
  const Json defaults = sync::to_json(sync::ServerConfig{});
  for (const auto& [key, _] : defaults.items()) {
    std::string name = "GEOCOLLAB_";
    for (char c : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    const char* v = std::getenv(name.c_str());
    if (!v) continue;
    if (kStringKeys.contains(key)) {
      out[key] = v;
      continue;
    }
    Json parsed = Json::parse(v, nullptr, false);
    out[key] = parsed.is_discarded() ? Json(v) : parsed;
  }
  return out;
}

struct ServeFlags {
  std::string config;
  std::optional<std::string> bind;
  std::optional<int> port;
  std::optional<std::string> assets;
  std::optional<std::string> store;
  std::optional<std::size_t> max_sessions;
  std::optional<std::size_t> max_participants;
  std::optional<std::size_t> replay_capacity;
  std::optional<double> view_rate;
  std::optional<std::int64_t> write_timeout_ms;
  std::optional<std::int64_t> service_timeout_ms;
  std::optional<int> threads;
  std::vector<std::string> services;
};

int serve(const ServeFlags& f) {
  sync::ServerConfig cfg;
  try {
    Json merged = Json::object();
    if (!f.config.empty()) merged.update(read_json_file(f.config));
    merged.update(env_overrides());
    if (f.bind) merged["bind_address"] = *f.bind;
    if (f.port) merged["port"] = *f.port;
    if (f.assets) merged["assets_dir"] = *f.assets;
    if (f.store) merged["store_dir"] = *f.store;
    if (f.max_sessions) merged["max_sessions"] = *f.max_sessions;
    if (f.max_participants) merged["max_participants"] = *f.max_participants;
    if (f.replay_capacity) merged["replay_capacity"] = *f.replay_capacity;
    if (f.view_rate) merged["view_rate"] = *f.view_rate;
    if (f.write_timeout_ms) merged["write_timeout_ms"] = *f.write_timeout_ms;
    if (f.service_timeout_ms) merged["service_timeout_ms"] = *f.service_timeout_ms;
    if (f.threads) merged["threads"] = *f.threads;
    for (const auto& s : f.services) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0)
        throw Error(Errc::ValidationError, "--service expects op_kind=URL, got '" + s + "'", "services");
      merged["services"][s.substr(0, eq)] = s.substr(eq + 1);
    }
    cfg = sync::config_from_json(merged);
    sync::validate(cfg);
  } catch (const Error& e) {
    std::cerr << "geocollab serve: " << e.what() << "\n";
    return kExitUsage;
  }

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  sync::Server server(cfg);
  try {
    server.start();
  } catch (const Error& e) {
    std::cerr << "geocollab serve: " << e.what() << "\n";
    return kExitFailure;
  }
  std::cout << "listening on port " << server.port() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("event=signal signal={}", sig);
  server.stop();
  return 0;
}

void print_report(const sim::ScenarioReport& r) {
  std::cout << (r.passed ? "PASS " : "FAIL ") << r.scenario << " (" << r.elapsed_ms << " ms)\n";
  for (const auto& a : r.assertions)
    std::cout << "  " << (a.passed ? "pass " : "FAIL ") << a.name << (a.detail.empty() ? "" : ": " + a.detail) << "\n";
}

void write_report(const fs::path& path, const sim::ScenarioReport& r) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << sim::to_json(r).dump(2) << "\n";
  if (!out) throw Error(Errc::StoreFailure, "cannot write " + path.string());
}

/// 0 passed, 1 assertion failure, 2 scenario error.
int run_one(const fs::path& file, const std::optional<fs::path>& report, bool transcripts) {
  try {
    const auto s = sim::load_scenario(file);
    const auto r = sim::run_scenario(s, {transcripts});
    print_report(r);
    if (report) write_report(*report, r);
    return r.passed ? 0 : kExitFailure;
  } catch (const std::exception& e) {
    std::cout << "ERROR " << file.string() << ": " << e.what() << "\n";
    return kExitUsage;
  }
}

int run_all(const fs::path& dir, const std::optional<fs::path>& report_dir, bool transcripts) {
  if (!fs::is_directory(dir)) {
    std::cerr << "geocollab scenario run-all: " << dir << " is not a directory\n";
    return kExitUsage;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  int worst = 0;
  std::size_t passed = 0;
  for (const auto& f : files) {
    std::optional<fs::path> report;
    if (report_dir) report = *report_dir / (f.stem().string() + ".report.json");
    const int rc = run_one(f, report, transcripts);
    if (rc == 0) ++passed;
    worst = std::max(worst, rc);
  }
  std::cout << passed << "/" << files.size() << " scenarios passed\n";
  return worst;
}

int review_export(const std::string& store, const std::string& solution, int version, const std::string& out) {
  try {
    review::ReviewService svc(std::make_unique<review::FileReviewStore>(store));
    const Json doc = svc.export_comments(solution, version);
    std::ofstream f(out);
    f << doc.dump(2) << "\n";
    if (!f) throw Error(Errc::StoreFailure, "cannot write " + out);
    std::cout << "exported " << doc.at("comments").size() << " comments to " << out << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "geocollab review-export: " << e.what() << "\n";
    return kExitFailure;
  }
}

int review_seed(const std::string& store, const std::string& session, const std::string& title, int comments,
                std::uint64_t seed) {
  try {
    review::ReviewService svc(std::make_unique<review::FileReviewStore>(store));
    const auto pub = svc.publish_solution(session, title, geo::SceneState{});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> lat(31.225, 31.235), lon(121.465, 121.475);
    std::optional<std::string> first;
    for (int i = 1; i <= comments; ++i) {
      GeoAnchor a;
      a.lat = lat(rng);
      a.lon = lon(rng);
      const auto parent = i % 3 == 0 ? first : std::nullopt;
      const auto c = svc.post_comment(pub.solution_id, pub.version, "reviewer" + std::to_string(i),
                                      "comment " + std::to_string(i), a, parent);
      if (!first) first = c.comment_id;
    }
    std::cout << Json{{"solution_id", pub.solution_id}, {"version", pub.version}, {"comments", comments}}.dump() << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "geocollab review-seed: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("geocollab"));
  if (const char* level = std::getenv("GEOCOLLAB_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(level));
  CLI::App app{"Collaborative geodesign server and tools"};
  app.require_subcommand(1);

  ServeFlags sf;
  auto* serve_cmd = app.add_subcommand("serve", "Run the session, asset and review server");
  serve_cmd->add_option("--config", sf.config, "JSON config file");
  serve_cmd->add_option("--bind", sf.bind, "Bind address");
  serve_cmd->add_option("--port", sf.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--assets", sf.assets, "Static asset directory");
  serve_cmd->add_option("--store", sf.store, "Review store directory (memory when unset)");
  serve_cmd->add_option("--max-sessions", sf.max_sessions);
  serve_cmd->add_option("--max-participants", sf.max_participants);
  serve_cmd->add_option("--replay-capacity", sf.replay_capacity);
  serve_cmd->add_option("--view-rate", sf.view_rate, "Forwarded view updates per second");
  serve_cmd->add_option("--write-timeout-ms", sf.write_timeout_ms);
  serve_cmd->add_option("--service-timeout-ms", sf.service_timeout_ms);
  serve_cmd->add_option("--threads", sf.threads);
  serve_cmd->add_option("--service", sf.services, "External service, op_kind=URL (repeatable)");

  auto* scenario_cmd = app.add_subcommand("scenario", "Run simulation scenarios");
  scenario_cmd->require_subcommand(1);
  std::string scenario_path, scenario_dir, report_path, report_dir;
  bool no_transcripts = false;
  auto* run_cmd = scenario_cmd->add_subcommand("run", "Run one scenario file");
  run_cmd->add_option("path", scenario_path, "Scenario JSON")->required();
  run_cmd->add_option("--report", report_path, "Write the JSON report here");
  run_cmd->add_flag("--no-transcripts", no_transcripts, "Leave transcripts out of the report");
  auto* run_all_cmd = scenario_cmd->add_subcommand("run-all", "Run every scenario in a directory");
  run_all_cmd->add_option("dir", scenario_dir, "Directory of scenario JSON files")->required();
  run_all_cmd->add_option("--report-dir", report_dir, "Write one JSON report per scenario here");
  run_all_cmd->add_flag("--no-transcripts", no_transcripts, "Leave transcripts out of the reports");

  std::string store, solution, out, session = "seed", title = "Seeded solution";
  int version = 1, comments = 10;
  std::uint64_t seed = 1;
  auto* export_cmd = app.add_subcommand("review-export", "Export a solution version's comments");
  export_cmd->add_option("--store", store, "Review store directory")->required();
  export_cmd->add_option("--solution", solution, "Solution id")->required();
  export_cmd->add_option("--version", version, "Solution version")->check(CLI::PositiveNumber);
  export_cmd->add_option("--out", out, "Output file")->required();

  auto* seed_cmd = app.add_subcommand("review-seed", "Publish a solution with generated comments");
  seed_cmd->add_option("--store", store, "Review store directory")->required();
  seed_cmd->add_option("--session", session, "Source session id");
  seed_cmd->add_option("--title", title, "Solution title");
  seed_cmd->add_option("--comments", comments, "Number of comments")->check(CLI::NonNegativeNumber);
  seed_cmd->add_option("--seed", seed, "RNG seed");

  auto* dump_cmd = app.add_subcommand("protocol-dump", "Print one encoded example envelope per message kind");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  if (*serve_cmd) return serve(sf);
  if (*run_cmd) return run_one(scenario_path, report_path.empty() ? std::nullopt : std::optional<fs::path>(report_path),
                               !no_transcripts);
  if (*run_all_cmd)
    return run_all(scenario_dir, report_dir.empty() ? std::nullopt : std::optional<fs::path>(report_dir), !no_transcripts);
  if (*export_cmd) return review_export(store, solution, version, out);
  if (*seed_cmd) return review_seed(store, session, title, comments, seed);
  if (*dump_cmd) {
    for (const auto& env : protocol::golden_examples()) std::cout << protocol::encode_message(env) << "\n";
    return 0;
  }
  return kExitUsage;
}
