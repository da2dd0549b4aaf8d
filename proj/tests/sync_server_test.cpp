#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "geocollab/client.hpp"
#include "geocollab/fault_proxy.hpp"
#include "geocollab/server.hpp"

using namespace geocollab;
using namespace std::chrono_literals;
using protocol::MessageKind;

namespace {

struct IoThreads {
  boost::asio::io_context ioc;
  boost::asio::executor_work_guard<boost::asio::io_context::executor_type> guard{ioc.get_executor()};
  std::vector<std::thread> threads;
  explicit IoThreads(int n = 2) {
    for (int i = 0; i < n; ++i) threads.emplace_back([this] { ioc.run(); });
  }
  ~IoThreads() {
    guard.reset();
    ioc.stop();
    for (auto& t : threads) t.join();
  }
};

sync::ServerConfig test_config() {
  sync::ServerConfig c;
  c.port = 0;
  return c;
}

std::vector<protocol::Envelope> received(const sim::HeadlessClient& c, MessageKind kind) {
  std::vector<protocol::Envelope> out;
  for (const auto& t : c.transcript()) {
    if (t.sent) continue;
    auto env = protocol::decode_message(t.frame);
    if (env.kind == kind) out.push_back(std::move(env));
  }
  return out;
}

template <class Pred>
bool eventually(Pred pred, std::chrono::milliseconds timeout = 5000ms) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(2ms);
  }
  return pred();
}

Json sketch(const std::string& id) {
  return {{"id", id},
          {"author", "t"},
          {"kind", "polyline"},
          {"vertices", Json::array({{{"lat", 31.23}, {"lon", 121.47}, {"height", 0.0}},
                                    {{"lat", 31.231}, {"lon", 121.471}, {"height", 0.0}}})}};
}

}  // namespace

TEST(SyncServer, JoinWelcomePing) {
  sync::Server server(test_config());
  server.start();
  IoThreads io;
  sim::HeadlessClient a(io.ioc, "alice");
  a.connect("127.0.0.1", server.port(), "room-1");
  const auto st = a.state();
  EXPECT_TRUE(st.connected);
  EXPECT_FALSE(st.participant_id.empty());
  EXPECT_EQ(st.role, session::Role::leader);
  const Json pong = a.ping();
  EXPECT_EQ(pong.at("max_seq").get<std::uint64_t>(), st.last_seq);
  EXPECT_EQ(server.stats().participants, 1u);
}

TEST(SyncServer, InvalidSessionIdIsRejectedAndClosed) {
  sync::Server server(test_config());
  server.start();
  IoThreads io;
  auto ch = net::WsChannel::connect(io.ioc, "127.0.0.1", server.port(), "/ws/bad.id");
  std::mutex mu;
  std::vector<std::string> frames;
  std::atomic<bool> closed{false};
  ch->start(
      [&](std::string f) {
        std::lock_guard lk(mu);
        frames.push_back(std::move(f));
      },
      [&] { closed = true; });
  ASSERT_TRUE(eventually([&] { return closed.load(); }));
  std::lock_guard lk(mu);
  ASSERT_EQ(frames.size(), 1u);
  const Json j = Json::parse(frames[0]);
  EXPECT_EQ(j.at("kind"), "error");
  EXPECT_EQ(j.at("payload").at("code"), "ProtocolError");
}

TEST(SyncServer, FollowerMutationGetsPrivateNotLeader) {
  sync::Server server(test_config());
  server.start();
  IoThreads io;
  sim::HeadlessClient lead(io.ioc, "lead"), follow(io.ioc, "follow");
  lead.connect("127.0.0.1", server.port(), "gate");
  follow.connect("127.0.0.1", server.port(), "gate");
  follow.send(MessageKind::sketch_create, sketch("s1"));
  ASSERT_TRUE(eventually([&] { return !follow.state().errors.empty(); }));
  EXPECT_EQ(follow.state().errors[0].at("code"), "NotLeader");
  lead.ping();
  EXPECT_TRUE(lead.state().errors.empty());
  EXPECT_TRUE(lead.state().scene.sketches.empty());
}

TEST(SyncServer, StopClosesEveryConnection) {
  sync::Server server(test_config());
  server.start();
  IoThreads io;
  std::vector<std::unique_ptr<sim::HeadlessClient>> clients;
  for (int i = 0; i < 3; ++i) {
    clients.push_back(std::make_unique<sim::HeadlessClient>(io.ioc, "c" + std::to_string(i)));
    clients.back()->connect("127.0.0.1", server.port(), "shut");
  }
  server.stop();
  for (auto& c : clients) EXPECT_TRUE(eventually([&] { return c->state().disconnects == 1; }));
  server.stop();
}

TEST(SyncServer, TwelveClientsConverge) {
  sync::Server server(test_config());
  server.start();
  IoThreads io(3);
  std::vector<std::unique_ptr<sim::HeadlessClient>> clients;
  for (int i = 0; i < 12; ++i) {
    clients.push_back(std::make_unique<sim::HeadlessClient>(io.ioc, "c" + std::to_string(i)));
    clients.back()->connect("127.0.0.1", server.port(), "fan");
  }
  for (int i = 0; i < 50; ++i) clients[0]->send(MessageKind::sketch_create, sketch("s" + std::to_string(i)));
  clients[0]->ping();
  const auto info = server.session_info("fan");
  ASSERT_TRUE(info);
  const std::uint64_t max_seq = info->at("max_seq");
  for (auto& c : clients) {
    ASSERT_TRUE(eventually([&] { return c->state().last_seq == max_seq; })) << c->name();
    const auto st = c->state();
    EXPECT_EQ(geo::to_hex(geo::scene_hash(st.scene)), info->at("scene_hash"));
    EXPECT_EQ(st.scene.sketches.size(), 50u);
    EXPECT_EQ(st.out_of_order, 0u);
  }
}

TEST(SyncServer, StalledReaderIsDroppedWithoutBlockingOthers) {
  auto cfg = test_config();
  cfg.write_timeout_ms = 300;
  cfg.socket_send_buffer = 4096;
  sync::Server server(cfg);
  server.start();
  IoThreads io;
  net::FaultProxy proxy(io.ioc, "127.0.0.1", server.port());
  sim::HeadlessClient lead(io.ioc, "lead"), slow(io.ioc, "slow"), ok(io.ioc, "ok");
  lead.connect("127.0.0.1", server.port(), "stall");
  slow.connect("127.0.0.1", proxy.port(), "stall");
  ok.connect("127.0.0.1", server.port(), "stall");
  proxy.set_stalled(true);
  const std::string text(3000, 'x');
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 400; ++i) lead.send(MessageKind::chat, {{"text", text}});
  lead.ping(10s);
  ASSERT_TRUE(eventually([&] { return server.session_info("stall")->at("connected") == 2; }, 10s));
  EXPECT_LT(std::chrono::steady_clock::now() - start, 10s);
  const std::uint64_t max_seq = server.session_info("stall")->at("max_seq");
  EXPECT_TRUE(eventually([&] { return ok.state().last_seq == max_seq; }));
}

TEST(SyncServer, ExternalServiceRoundTrip) {
  httplib::Server stub;
  stub.Post("/echo", [](const httplib::Request& req, httplib::Response& res) {
    res.set_content(Json{{"echo", Json::parse(req.body)}}.dump(), "application/json");
  });
  stub.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(1500ms);
    res.set_content("{}", "application/json");
  });
  const int stub_port = stub.bind_to_any_port("127.0.0.1");
  std::thread stub_thread([&] { stub.listen_after_bind(); });

  auto cfg = test_config();
  cfg.service_timeout_ms = 300;
  cfg.services["echo"] = "http://127.0.0.1:" + std::to_string(stub_port) + "/echo";
  cfg.services["slow"] = "http://127.0.0.1:" + std::to_string(stub_port) + "/slow";
  sync::Server server(cfg);
  server.start();
  {
    IoThreads io;
    sim::HeadlessClient a(io.ioc, "a");
    a.connect("127.0.0.1", server.port(), "svc");
    a.send(MessageKind::op_exec, {{"op_kind", "echo"}, {"params", {{"x", 1}}}});
    a.send(MessageKind::op_exec, {{"op_kind", "slow"}, {"params", Json::object()}});
    a.send(MessageKind::op_exec, {{"op_kind", "nope"}, {"params", Json::object()}});
    a.send(MessageKind::op_exec, {{"op_kind", "distance"},
                                  {"params", {{"a", {{"lat", 0.0}, {"lon", 0.0}}}, {"b", {{"lat", 0.0}, {"lon", 1.0}}}}}});
    ASSERT_TRUE(eventually([&] { return received(a, MessageKind::op_result).size() == 3; }));
    const auto results = received(a, MessageKind::op_result);
    std::map<std::string, Json> by_kind;
    for (const auto& r : results) by_kind[r.payload.at("op_kind")] = r.payload;
    EXPECT_EQ(by_kind["echo"].at("result").at("echo").at("x"), 1);
    EXPECT_FALSE(by_kind["slow"].at("ok").get<bool>());
    EXPECT_EQ(by_kind["slow"].at("error").at("code"), "ServiceTimeout");
    EXPECT_NEAR(by_kind["distance"].at("result").at("meters").get<double>(), 111195.08, 0.01);
    const auto errs = a.state().errors;
    ASSERT_EQ(errs.size(), 1u);
    EXPECT_EQ(errs[0].at("code"), "UnknownService");
    const auto execs = received(a, MessageKind::op_exec);
    for (const auto& r : results) {
      const auto ref = r.payload.at("op_exec_seq").get<std::uint64_t>();
      EXPECT_TRUE(std::any_of(execs.begin(), execs.end(), [&](const auto& e) { return e.seq == ref; }));
      EXPECT_GT(*r.seq, ref);
    }
  }
  server.stop();
  stub.stop();
  stub_thread.join();
}

TEST(SyncServer, HealthAssetsAndRest) {
  const auto dir = std::filesystem::temp_directory_path() / "geocollab_assets_test";
  std::filesystem::create_directories(dir / "models");
  std::ofstream(dir / "models" / "a.gltf") << "{\"asset\":{}}";
  auto cfg = test_config();
  cfg.assets_dir = dir.string();
  sync::Server server(cfg);
  server.start();
  const auto port = server.port();

  auto health = net::http_request("127.0.0.1", port, "GET", "/healthz", "", 2000ms);
  EXPECT_EQ(health.status, 200);
  EXPECT_EQ(Json::parse(health.body).at("in_flight"), 0);

  auto asset = net::http_request("127.0.0.1", port, "GET", "/assets/models/a.gltf", "", 2000ms);
  EXPECT_EQ(asset.status, 200);
  EXPECT_EQ(asset.body, "{\"asset\":{}}");
  EXPECT_EQ(net::http_request("127.0.0.1", port, "GET", "/assets/../etc/passwd", "", 2000ms).status / 100, 4);
  EXPECT_EQ(net::http_request("127.0.0.1", port, "GET", "/assets/missing.png", "", 2000ms).status, 404);
  EXPECT_EQ(net::http_request("127.0.0.1", port, "GET", "/nothing", "", 2000ms).status, 404);

  auto created = net::http_request("127.0.0.1", port, "POST", "/api/solutions",
                                   R"({"source_session":"s1","title":"Plan A"})", 2000ms);
  EXPECT_EQ(created.status, 201);
  const std::string id = Json::parse(created.body).at("solution_id");
  auto list = net::http_request("127.0.0.1", port, "GET", "/api/solutions", "", 2000ms);
  EXPECT_EQ(list.status, 200);
  EXPECT_NE(list.body.find(id), std::string::npos);
  EXPECT_EQ(net::http_request("127.0.0.1", port, "GET", "/api/solutions/nope/1", "", 2000ms).status, 404);
  std::filesystem::remove_all(dir);
}

TEST(SyncServer, ReconnectReplaysMissedEntries) {
  sync::Server server(test_config());
  server.start();
  IoThreads io;
  sim::HeadlessClient lead(io.ioc, "lead"), f(io.ioc, "f");
  lead.connect("127.0.0.1", server.port(), "rj");
  f.connect("127.0.0.1", server.port(), "rj");
  f.ping();
  f.disconnect();
  for (int i = 0; i < 37; ++i) lead.send(MessageKind::sketch_create, sketch("s" + std::to_string(i)));
  lead.ping();
  f.reconnect("127.0.0.1", server.port());
  const auto st = f.state();
  ASSERT_FALSE(st.replay_sizes.empty());
  EXPECT_EQ(st.snapshots, 0u);
  EXPECT_EQ(st.scene.sketches.size(), 37u);
  EXPECT_EQ(geo::to_hex(geo::scene_hash(st.scene)), server.session_info("rj")->at("scene_hash"));
}
