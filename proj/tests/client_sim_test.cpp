#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "geocollab/client.hpp"
#include "geocollab/error.hpp"
#include "geocollab/scenario.hpp"
#include "geocollab/server.hpp"

using namespace geocollab;
using namespace std::chrono_literals;

namespace {

struct IoThreads {
  boost::asio::io_context ioc;
  boost::asio::executor_work_guard<boost::asio::io_context::executor_type> guard{ioc.get_executor()};
  std::vector<std::thread> threads;
  IoThreads() {
    for (int i = 0; i < 2; ++i) threads.emplace_back([this] { ioc.run(); });
  }
  ~IoThreads() {
    guard.reset();
    ioc.stop();
    for (auto& t : threads) t.join();
  }
};

Errc scenario_error(const Json& j) {
  try {
    sim::parse_scenario(j);
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Timeout;  // sentinel: parsed fine
}

Json minimal() {
  return Json::parse(R"({
    "name": "m", "seed": 1,
    "clients": [{"name": "a", "session": "s"}, {"name": "b", "session": "s"}],
    "events": [{"do": "connect", "clients": ["a", "b"]}],
    "assertions": [{"check": "converged"}]})");
}

}  // namespace

TEST(HeadlessClient, ConnectToClosedPortFails) {
  IoThreads io;
  sim::HeadlessClient c(io.ioc, "x");
  try {
    c.connect("127.0.0.1", 1, "s", 1000ms);
    FAIL() << "connected to port 1";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConnectFailure);
  }
}

TEST(HeadlessClient, SecondJoinerIsFollowerWithServerScene) {
  sync::ServerConfig cfg;
  cfg.port = 0;
  sync::Server server(cfg);
  server.start();
  IoThreads io;
  sim::HeadlessClient a(io.ioc, "a"), b(io.ioc, "b");
  a.connect("127.0.0.1", server.port(), "s");
  a.send(protocol::MessageKind::stage_change, {{"stage", "problem_analysis"}});
  a.ping();
  b.connect("127.0.0.1", server.port(), "s");
  EXPECT_EQ(a.state().role, session::Role::leader);
  EXPECT_EQ(b.state().role, session::Role::follower);
  EXPECT_EQ(geo::to_hex(geo::scene_hash(b.state().scene)), server.session_info("s")->at("scene_hash"));
  EXPECT_EQ(b.state().scene.stage, geo::Stage::problem_analysis);
}

TEST(HeadlessClient, OverlongNameIsRefused) {
  sync::ServerConfig cfg;
  cfg.port = 0;
  sync::Server server(cfg);
  server.start();
  IoThreads io;
  sim::HeadlessClient empty(io.ioc, "");
  try {
    empty.connect("127.0.0.1", server.port(), "s", 2000ms);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SchemaViolation);
  }
  sim::HeadlessClient c(io.ioc, std::string(65, 'n'));
  try {
    c.connect("127.0.0.1", server.port(), "s", 2000ms);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ProtocolError);
    EXPECT_NE(std::string(e.what()).find("InvalidName"), std::string::npos);
  }
}

TEST(Scenario, ParseRejectsInvalidDocuments) {
  EXPECT_EQ(scenario_error(minimal()), Errc::Timeout);

  auto j = minimal();
  j["events"].push_back({{"do", "connect"}, {"client", "ghost"}});
  EXPECT_EQ(scenario_error(j), Errc::ScenarioInvalid);

  j = minimal();
  j["events"] = Json::parse(R"([{"do": "sleep", "ms": 1, "at_ms": 50}, {"do": "sleep", "ms": 1, "at_ms": 10}])");
  EXPECT_EQ(scenario_error(j), Errc::ScenarioInvalid);

  j = minimal();
  j["events"].push_back({{"do", "teleport"}, {"client", "a"}});
  EXPECT_EQ(scenario_error(j), Errc::ScenarioInvalid);

  j = minimal();
  j["assertions"].push_back({{"check", "vibes"}});
  EXPECT_EQ(scenario_error(j), Errc::ScenarioInvalid);

  j = minimal();
  j["server"] = {{"view_rate", -1}};
  EXPECT_EQ(scenario_error(j), Errc::ScenarioInvalid);

  j = minimal();
  j["clients"].push_back({{"name", "a"}, {"session", "s"}});
  EXPECT_EQ(scenario_error(j), Errc::ScenarioInvalid);

  j = minimal();
  j["extra"] = 1;
  EXPECT_EQ(scenario_error(j), Errc::ScenarioInvalid);
}

TEST(Scenario, CountExpandsClientNames) {
  auto j = minimal();
  j["clients"] = Json::parse(R"([{"name": "f", "session": "s", "count": 3}])");
  j["events"] = Json::parse(R"([{"do": "connect", "client": "f*"}])");
  const auto s = sim::parse_scenario(j);
  ASSERT_EQ(s.clients.size(), 3u);
  EXPECT_EQ(s.clients[2].name, "f3");
  EXPECT_EQ(s.events[0].clients.size(), 3u);
}

TEST(Scenario, SameSeedSameOutcomes) {
  const auto j = Json::parse(R"({
    "name": "det", "seed": 77,
    "clients": [{"name": "l", "session": "d"}, {"name": "f", "session": "d", "count": 2}],
    "events": [
      {"do": "connect", "clients": ["l", "f*"]},
      {"do": "random_actions", "client": "l", "count": 60},
      {"do": "follower_gated", "client": "f1", "count": 7},
      {"do": "quiesce"}],
    "assertions": [
      {"check": "converged"}, {"check": "gap_free"},
      {"check": "error_count", "client": "f1", "code": "NotLeader", "count": 7},
      {"check": "role", "name": "f2_leads", "client": "f2", "role": "leader"}]})");
  const auto s = sim::parse_scenario(j);
  const auto r1 = sim::run_scenario(s, {false});
  const auto r2 = sim::run_scenario(s, {false});
  ASSERT_EQ(r1.assertions.size(), r2.assertions.size());
  for (std::size_t i = 0; i < r1.assertions.size(); ++i) EXPECT_EQ(r1.assertions[i].passed, r2.assertions[i].passed);
  EXPECT_FALSE(r1.assertions.back().passed);
  EXPECT_TRUE(r1.assertions[0].passed && r1.assertions[1].passed && r1.assertions[2].passed);
  // Both runs build the same scene.
  EXPECT_EQ(r1.clients.at("l").at("scene_hash"), r2.clients.at("l").at("scene_hash"));
}

TEST(Scenario, CorruptedClientIsFlaggedOthersPass) {
  const auto j = Json::parse(R"({
    "name": "corrupt", "seed": 3,
    "clients": [{"name": "a", "session": "c"}, {"name": "b", "session": "c"}, {"name": "z", "session": "c"}],
    "events": [
      {"do": "connect", "clients": ["a", "b", "z"]},
      {"do": "random_actions", "client": "a", "count": 10},
      {"do": "quiesce"},
      {"do": "corrupt", "client": "z"}],
    "assertions": [{"check": "converged"}]})");
  const auto r = sim::run_scenario(sim::parse_scenario(j), {false});
  ASSERT_EQ(r.assertions.size(), 1u);
  EXPECT_FALSE(r.assertions[0].passed);
  EXPECT_NE(r.assertions[0].detail.find("z:"), std::string::npos);
  EXPECT_EQ(r.assertions[0].detail.find("a:"), std::string::npos);
  EXPECT_EQ(r.assertions[0].detail.find("b:"), std::string::npos);
}

TEST(Scenario, ReportIsJson) {
  const auto r = sim::run_scenario(sim::parse_scenario(minimal()));
  const Json j = sim::to_json(r);
  EXPECT_EQ(j.at("scenario"), "m");
  EXPECT_TRUE(j.at("passed").get<bool>());
  EXPECT_TRUE(j.at("clients").at("b").at("transcript").is_array());
  EXPECT_FALSE(j.at("clients").at("b").at("transcript").empty());
}

class Corpus : public ::testing::TestWithParam<std::string> {};

TEST_P(Corpus, Passes) {
  const auto r = sim::run_scenario(sim::load_scenario(GetParam()), {false});
  for (const auto& a : r.assertions) EXPECT_TRUE(a.passed) << a.name << ": " << a.detail;
}

std::vector<std::string> corpus_files() {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(std::filesystem::path(GEOCOLLAB_SOURCE_DIR) / "scenarios"))
    if (e.path().extension() == ".json") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

INSTANTIATE_TEST_SUITE_P(Scenarios, Corpus, ::testing::ValuesIn(corpus_files()), [](const auto& info) {
  return std::filesystem::path(info.param).stem().string();
});
