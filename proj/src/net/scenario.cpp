#include "geocollab/scenario.hpp"

#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "geocollab/action_gen.hpp"
#include "geocollab/client.hpp"
#include "geocollab/error.hpp"
#include "geocollab/fault_proxy.hpp"
#include "geocollab/server.hpp"

namespace geocollab::sim {

using namespace std::chrono_literals;

namespace {

const std::set<std::string> kOps = {"connect",    "disconnect",   "reconnect",      "sever",   "delay",
                                    "drop_next",  "stall",        "act",            "random_actions",
                                    "follower_gated", "grant",    "deny",           "request_role",
                                    "sleep",      "quiesce",      "corrupt"};
const std::set<std::string> kOpsWithoutClients = {"sleep", "quiesce"};

const std::set<std::string> kChecks = {"converged",      "gap_free",     "isolation",  "leader",       "role",
                                       "single_leader",  "error_count",  "no_errors",  "leader_audit", "mutations",
                                       "replay",         "disconnected", "elapsed_under_ms"};
const std::set<std::string> kChecksWithoutClients = {"isolation", "single_leader", "leader_audit", "elapsed_under_ms"};

[[noreturn]] void invalid(const std::string& field, const std::string& msg) {
  throw Error(Errc::ScenarioInvalid, field + ": " + msg, field);
}

const Json& need(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) invalid(where + "." + key, "missing");
  return j.at(key);
}

std::string need_string(const Json& j, const char* key, const std::string& where) {
  const Json& v = need(j, key, where);
  if (!v.is_string() || v.get<std::string>().empty()) invalid(where + "." + key, "expected a non-empty string");
  return v.get<std::string>();
}

std::int64_t need_int(const Json& j, const char* key, const std::string& where, std::int64_t min = 0) {
  const Json& v = need(j, key, where);
  if (!v.is_number_integer() || v.get<std::int64_t>() < min)
    invalid(where + "." + key, "expected an integer >= " + std::to_string(min));
  return v.get<std::int64_t>();
}

std::int64_t opt_int(const Json& j, const char* key, const std::string& where, std::int64_t def, std::int64_t min = 0) {
  return j.contains(key) ? need_int(j, key, where, min) : def;
}

std::vector<std::string> select(const Json& item, const std::string& where, const std::vector<ScenarioClient>& declared) {
  std::vector<std::string> out;
  auto match = [&](const std::string& sel) {
    std::size_t before = out.size();
    if (!sel.empty() && sel.back() == '*') {
      const std::string prefix = sel.substr(0, sel.size() - 1);
      for (const auto& c : declared)
        if (c.name.starts_with(prefix)) out.push_back(c.name);
    } else {
      for (const auto& c : declared)
        if (c.name == sel) out.push_back(c.name);
    }
    if (out.size() == before) invalid(where, "no declared client matches '" + sel + "'");
  };
  if (item.contains("client")) {
    if (!item["client"].is_string()) invalid(where + ".client", "expected a string");
    match(item["client"].get<std::string>());
  }
  if (item.contains("clients")) {
    if (!item["clients"].is_array()) invalid(where + ".clients", "expected an array");
    for (const auto& c : item["clients"]) {
      if (!c.is_string()) invalid(where + ".clients", "expected strings");
      match(c.get<std::string>());
    }
  }
  return out;
}

Json args_without(const Json& item, std::initializer_list<const char*> keys) {
  Json a = item;
  for (const char* k : keys) a.erase(k);
  return a;
}

void substitute(Json& j, const std::string& token, const std::string& value) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    for (std::size_t pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos + value.size()))
      s.replace(pos, token.size(), value);
    j = s;
  } else if (j.is_structured()) {
    for (auto& v : j) substitute(v, token, value);
  }
}

}  // namespace

Scenario parse_scenario(const Json& j) {
  if (!j.is_object()) invalid("scenario", "expected an object");
  static const std::set<std::string> kTop = {"name", "description", "seed", "server", "timeout_ms",
                                             "clients", "events", "assertions"};
  for (const auto& [k, v] : j.items())
    if (!kTop.contains(k)) invalid(k, "unknown key");

  Scenario s;
  s.name = need_string(j, "name", "scenario");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) invalid("seed", "expected a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("server")) {
    if (!j["server"].is_object()) invalid("server", "expected an object");
    s.server = j["server"];
    try {
      sync::validate(sync::config_from_json(s.server));
    } catch (const Error& e) {
      invalid("server", e.what());
    }
  }
  s.timeout_ms = opt_int(j, "timeout_ms", "scenario", s.timeout_ms, 1);

  const Json& clients = need(j, "clients", "scenario");
  if (!clients.is_array() || clients.empty()) invalid("clients", "expected a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const std::string where = "clients[" + std::to_string(i) + "]";
    const Json& c = clients[i];
    if (!c.is_object()) invalid(where, "expected an object");
    const std::string name = need_string(c, "name", where);
    const std::string session = need_string(c, "session", where);
    if (!protocol::valid_session_id(session)) invalid(where + ".session", "invalid session id");
    const auto count = opt_int(c, "count", where, 0, 1);
    std::vector<std::string> expanded;
    if (count == 0) expanded.push_back(name);
    for (std::int64_t k = 1; k <= count; ++k) expanded.push_back(name + std::to_string(k));
    for (auto& n : expanded) {
      if (!names.insert(n).second) invalid(where + ".name", "duplicate client '" + n + "'");
      s.clients.push_back({n, session});
    }
  }

  const Json& events = need(j, "events", "scenario");
  if (!events.is_array()) invalid("events", "expected an array");
  std::int64_t last_at = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const std::string where = "events[" + std::to_string(i) + "]";
    const Json& e = events[i];
    if (!e.is_object()) invalid(where, "expected an object");
    ScenarioEvent ev;
    ev.op = need_string(e, "do", where);
    if (!kOps.contains(ev.op)) invalid(where + ".do", "unknown event '" + ev.op + "'");
    if (e.contains("at_ms")) {
      ev.at_ms = need_int(e, "at_ms", where);
      if (*ev.at_ms < last_at) invalid(where + ".at_ms", "event times must be non-decreasing");
      last_at = *ev.at_ms;
    }
    ev.clients = select(e, where, s.clients);
    if (ev.clients.empty() && !kOpsWithoutClients.contains(ev.op)) invalid(where, "names no client");
    ev.args = args_without(e, {"do", "at_ms", "client", "clients"});
    if (ev.op == "act") {
      const auto kind = protocol::kind_from_string(need_string(ev.args, "kind", where));
      if (!kind) invalid(where + ".kind", "unknown message kind");
      if (ev.args.contains("payload") && !ev.args["payload"].is_object()) invalid(where + ".payload", "expected an object");
      opt_int(ev.args, "repeat", where, 1, 1);
    }
    if (ev.op == "delay" || ev.op == "sleep") need_int(ev.args, "ms", where);
    if (ev.op == "drop_next") need_int(ev.args, "n", where, 1);
    if (ev.op == "random_actions") {
      need_int(ev.args, "count", where, 1);
      opt_int(ev.args, "interval_ms", where, 0);
    }
    if (ev.op == "follower_gated") need_int(ev.args, "count", where, 1);
    if (ev.op == "grant" || ev.op == "deny") {
      const std::string target = need_string(ev.args, "target", where);
      if (!names.contains(target)) invalid(where + ".target", "undeclared client '" + target + "'");
    }
    s.events.push_back(std::move(ev));
  }

  const Json& assertions = need(j, "assertions", "scenario");
  if (!assertions.is_array()) invalid("assertions", "expected an array");
  for (std::size_t i = 0; i < assertions.size(); ++i) {
    const std::string where = "assertions[" + std::to_string(i) + "]";
    const Json& a = assertions[i];
    if (!a.is_object()) invalid(where, "expected an object");
    ScenarioAssertion as;
    as.check = need_string(a, "check", where);
    if (!kChecks.contains(as.check)) invalid(where + ".check", "unknown check '" + as.check + "'");
    as.name = a.contains("name") ? need_string(a, "name", where) : as.check;
    as.clients = select(a, where, s.clients);
    if (as.clients.empty() && !kChecksWithoutClients.contains(as.check))
      for (const auto& c : s.clients) as.clients.push_back(c.name);
    as.args = args_without(a, {"check", "name", "client", "clients"});
    if (as.check == "error_count") {
      need_string(as.args, "code", where);
      need_int(as.args, "count", where);
    }
    if (as.check == "mutations") need_int(as.args, "count", where);
    if (as.check == "role") {
      const std::string r = need_string(as.args, "role", where);
      if (r != "leader" && r != "follower") invalid(where + ".role", "expected leader or follower");
    }
    if (as.check == "elapsed_under_ms") need_int(as.args, "ms", where, 1);
    if (as.check == "converged" && as.args.contains("flagged")) {
      if (!as.args["flagged"].is_array()) invalid(where + ".flagged", "expected an array");
      for (const auto& f : as.args["flagged"])
        if (!f.is_string() || !names.contains(f.get<std::string>())) invalid(where + ".flagged", "undeclared client");
    }
    s.assertions.push_back(std::move(as));
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ScenarioInvalid, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const Json j = Json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ScenarioInvalid, path.string() + " is not valid JSON");
  return parse_scenario(j);
}

Json to_json(const ScenarioReport& r) {
  Json a = Json::array();
  for (const auto& x : r.assertions) a.push_back({{"name", x.name}, {"passed", x.passed}, {"detail", x.detail}});
  return {{"scenario", r.scenario}, {"seed", r.seed},       {"passed", r.passed},
          {"elapsed_ms", r.elapsed_ms}, {"assertions", a}, {"clients", r.clients}};
}

namespace {

struct Slot {
  ScenarioClient decl;
  std::size_t index = 0;
  std::unique_ptr<net::FaultProxy> proxy;
  std::unique_ptr<HeadlessClient> client;
  std::mt19937_64 rng;
  std::uint64_t id_counter = 0;
  // Independent count of what a reconnect should replay: the seqs the
  // session's other clients applied while this one was away.
  std::optional<std::vector<std::uint64_t>> expected_replay;
};

class Runner {
 public:
  Runner(const Scenario& s, const RunOptions& opts) : s_(s), opts_(opts) {
    sync::ServerConfig cfg = sync::config_from_json(s.server);
    cfg.port = 0;
    cfg.bind_address = "127.0.0.1";
    server_ = std::make_unique<sync::Server>(cfg);
    server_->start();
    for (int i = 0; i < 2; ++i) threads_.emplace_back([this] { ioc_.run(); });
    for (std::size_t i = 0; i < s.clients.size(); ++i) {
      auto slot = std::make_unique<Slot>();
      slot->decl = s.clients[i];
      slot->index = i;
      slot->proxy = std::make_unique<net::FaultProxy>(ioc_, "127.0.0.1", server_->port());
      slot->client = std::make_unique<HeadlessClient>(ioc_, slot->decl.name);
      slot->rng.seed(s.seed * 1000003 + i);
      slots_[slot->decl.name] = std::move(slot);
    }
  }

  ~Runner() {
    slots_.clear();
    server_->stop();
    guard_.reset();
    ioc_.stop();
    for (auto& t : threads_) t.join();
  }

  ScenarioReport run() {
    start_ = std::chrono::steady_clock::now();
    deadline_ = start_ + std::chrono::milliseconds(s_.timeout_ms);
    for (std::size_t i = 0; i < s_.events.size(); ++i) {
      const auto& ev = s_.events[i];
      if (ev.at_ms) std::this_thread::sleep_until(start_ + std::chrono::milliseconds(*ev.at_ms));
      try {
        execute(ev);
      } catch (const Error& e) {
        if (e.code() == Errc::Timeout || e.code() == Errc::ScenarioInvalid) throw;
        throw Error(Errc::ScenarioInvalid, "events[" + std::to_string(i) + "] (" + ev.op + "): " + e.what());
      }
    }
    quiesce();
    const auto elapsed = std::chrono::steady_clock::now() - start_;

    ScenarioReport r;
    r.scenario = s_.name;
    r.seed = s_.seed;
    r.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    for (const auto& a : s_.assertions) r.assertions.push_back(evaluate(a, r.elapsed_ms));
    r.passed = std::all_of(r.assertions.begin(), r.assertions.end(), [](const auto& a) { return a.passed; });
    for (const auto& [name, slot] : slots_) r.clients[name] = describe(*slot);
    return r;
  }

 private:
  std::chrono::milliseconds remaining() const {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline_ - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw Error(Errc::Timeout, "scenario '" + s_.name + "' exceeded its time bound");
    return left;
  }

  Slot& slot(const std::string& name) { return *slots_.at(name); }

  std::vector<Slot*> session_peers(const Slot& self) {
    std::vector<Slot*> out;
    for (auto& [n, sl] : slots_)
      if (sl.get() != &self && sl->decl.session == self.decl.session && sl->client->state().connected)
        out.push_back(sl.get());
    return out;
  }

  std::string pid_of(const std::string& name) {
    const std::string pid = slot(name).client->state().participant_id;
    if (pid.empty()) throw Error(Errc::ScenarioInvalid, "client '" + name + "' has not joined");
    return pid;
  }

  void execute(const ScenarioEvent& ev) {
    const Json& a = ev.args;
    if (ev.op == "sleep") {
      std::this_thread::sleep_for(std::chrono::milliseconds(a.at("ms").get<std::int64_t>()));
      return;
    }
    if (ev.op == "quiesce") return quiesce();
    for (const auto& name : ev.clients) {
      Slot& sl = slot(name);
      HeadlessClient& c = *sl.client;
      if (ev.op == "connect") {
        c.connect("127.0.0.1", sl.proxy->port(), sl.decl.session, std::min(remaining(), std::chrono::milliseconds(5000)));
      } else if (ev.op == "disconnect") {
        c.disconnect();
        await_departure(sl);
      } else if (ev.op == "reconnect") {
        quiesce();
        const std::uint64_t last = c.state().last_seq;
        std::uint64_t observed = last;
        bool have_observer = false;
        for (Slot* peer : session_peers(sl)) {
          observed = std::max(observed, peer->client->state().last_seq);
          have_observer = true;
        }
        sl.expected_replay.reset();
        if (have_observer) {
          std::vector<std::uint64_t> seqs;
          for (std::uint64_t q = last + 1; q <= observed; ++q) seqs.push_back(q);
          sl.expected_replay = std::move(seqs);
        }
        c.reconnect("127.0.0.1", sl.proxy->port(), std::min(remaining(), std::chrono::milliseconds(10000)));
      } else if (ev.op == "sever") {
        sl.proxy->sever();
        await_departure(sl);
      } else if (ev.op == "delay") {
        sl.proxy->set_delay(std::chrono::milliseconds(a.at("ms").get<std::int64_t>()));
      } else if (ev.op == "drop_next") {
        sl.proxy->drop_next(a.at("n").get<std::size_t>());
      } else if (ev.op == "stall") {
        sl.proxy->set_stalled(a.value("on", true));
      } else if (ev.op == "act") {
        const auto kind = *protocol::kind_from_string(a.at("kind").get<std::string>());
        const auto repeat = a.value("repeat", std::int64_t{1});
        for (std::int64_t k = 1; k <= repeat; ++k) {
          Json payload = a.value("payload", Json::object());
          substitute(payload, "{i}", std::to_string(k));
          c.send(kind, std::move(payload));
        }
      } else if (ev.op == "random_actions") {
        random_actions(sl, a.at("count").get<std::int64_t>(), a.value("interval_ms", std::int64_t{0}));
      } else if (ev.op == "follower_gated") {
        const auto count = a.at("count").get<std::int64_t>();
        geo::SceneState shadow = c.state().scene;
        for (std::int64_t k = 0; k < count; ++k) {
          ActionSpec act;
          do act = random_action(sl.rng, shadow, name, sl.id_counter);
          while (!protocol::is_leader_gated(act.kind));
          c.send(act.kind, std::move(act.payload));
        }
      } else if (ev.op == "grant") {
        c.send(protocol::MessageKind::role_grant, {{"target", pid_of(a.at("target"))}});
      } else if (ev.op == "deny") {
        c.send(protocol::MessageKind::role_deny, {{"target", pid_of(a.at("target"))}});
      } else if (ev.op == "request_role") {
        c.send(protocol::MessageKind::role_request, Json::object());
      } else if (ev.op == "corrupt") {
        c.tamper([&](HeadlessClient::State& st) {
          geo::Sketch bogus;
          bogus.id = "tampered-" + name;
          bogus.author = name;
          bogus.kind = geo::SketchKind::polyline;
          bogus.vertices = {GeoAnchor{31.23, 121.47, 0.0, {}}, GeoAnchor{31.231, 121.471, 0.0, {}}};
          st.scene.sketches[bogus.id] = bogus;
        });
      }
    }
  }

  /// Blocks until the server has processed the participant's departure, so
  /// later events see a settled membership.
  void await_departure(Slot& sl) {
    const std::string pid = sl.client->state().participant_id;
    if (pid.empty()) return;
    while (true) {
      const auto info = server_->session_info(sl.decl.session);
      bool gone = true;
      if (info)
        for (const auto& p : info->at("participants"))
          if (p.at("id") == pid && p.at("connected").get<bool>()) gone = false;
      if (gone) return;
      remaining();
      std::this_thread::sleep_for(1ms);
    }
  }

  // Actions are generated against a shadow of the scene so the random stream
  // does not depend on when echoes arrive.
  void random_actions(Slot& sl, std::int64_t count, std::int64_t interval_ms) {
    geo::SceneState shadow = sl.client->state().scene;
    for (std::int64_t k = 0; k < count; ++k) {
      ActionSpec act = random_action(sl.rng, shadow, sl.decl.name, sl.id_counter);
      if (protocol::is_scene_mutating(act.kind)) {
        try {
          shadow = geo::scene_apply(shadow, geo::parse_scene_action(act.kind, act.payload));
        } catch (const Error&) {
          continue;
        }
      }
      sl.client->send(act.kind, std::move(act.payload));
      if (interval_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(interval_ms));
      remaining();
    }
  }

  /// Ping/pong per connected client, then require an idle server, idle
  /// proxies and every client at its session's max_seq; twice in a row.
  void quiesce() {
    int stable = 0;
    while (stable < 2) {
      bool ok = true;
      for (auto& [name, sl] : slots_) {
        auto& c = *sl->client;
        if (!c.state().connected) continue;
        try {
          c.ping(std::min(remaining(), std::chrono::milliseconds(250)));
        } catch (const Error& e) {
          if (e.code() != Errc::Timeout && e.code() != Errc::ProtocolError) throw;
          ok = false;
        }
      }
      if (ok && server_->stats().in_flight != 0) ok = false;
      for (auto& [name, sl] : slots_) {
        if (!ok) break;
        if (!sl->proxy->idle()) ok = false;
        const auto st = sl->client->state();
        if (!st.connected) continue;
        if (st.awaiting_replay) ok = false;
        const auto info = server_->session_info(sl->decl.session);
        if (!info || info->at("max_seq").get<std::uint64_t>() != st.last_seq) ok = false;
      }
      stable = ok ? stable + 1 : 0;
      if (!ok) {
        remaining();
        std::this_thread::sleep_for(2ms);
      }
    }
  }

  static std::string codes(const std::vector<Json>& errors) {
    std::string out;
    for (const auto& e : errors) out += (out.empty() ? "" : ",") + e.value("code", std::string("?"));
    return out;
  }

  AssertionResult evaluate(const ScenarioAssertion& a, std::int64_t elapsed_ms) {
    AssertionResult r{a.name, true, ""};
    auto fail = [&](const std::string& why) {
      r.passed = false;
      if (!r.detail.empty()) r.detail += "; ";
      r.detail += why;
    };
    const Json& args = a.args;

    if (a.check == "converged") {
      std::set<std::string> expected_flags;
      for (const auto& f : args.value("flagged", Json::array())) expected_flags.insert(f.get<std::string>());
      std::set<std::string> flagged;
      for (const auto& name : a.clients) {
        const auto st = slot(name).client->state();
        if (!st.connected) continue;
        if (st.awaiting_replay) {
          fail("precondition: " + name + " is mid-replay");
          continue;
        }
        const auto info = server_->session_info(st.session);
        if (!info) {
          fail(name + ": server has no session " + st.session);
          continue;
        }
        std::vector<std::string> why;
        if (geo::to_hex(geo::scene_hash(st.scene)) != info->at("scene_hash")) why.push_back("scene_hash differs");
        const Json view = st.last_view ? geo::to_json(*st.last_view) : Json(nullptr);
        if (view != info->at("last_view")) why.push_back("last_view differs");
        if (st.last_seq != info->at("max_seq").get<std::uint64_t>())
          why.push_back("last_seq " + std::to_string(st.last_seq) + " of " + info->at("max_seq").dump());
        if (!why.empty()) {
          flagged.insert(name);
          std::string msg = name + ":";
          for (const auto& w : why) msg += " " + w;
          if (!expected_flags.contains(name)) fail(msg);
          else r.detail += (r.detail.empty() ? "" : "; ") + std::string("flagged as expected ") + msg;
        }
      }
      for (const auto& f : expected_flags)
        if (!flagged.contains(f)) fail(f + " was expected to be flagged");
      if (r.passed && r.detail.empty()) r.detail = std::to_string(a.clients.size()) + " clients match the server";
    } else if (a.check == "gap_free") {
      for (const auto& name : a.clients) {
        const auto st = slot(name).client->state();
        std::size_t next_install = 0;
        std::uint64_t prev = 0;
        for (std::size_t i = 0; i < st.applied.size(); ++i) {
          while (next_install < st.installs.size() && st.installs[next_install].first <= i)
            prev = st.installs[next_install++].second;
          if (st.applied[i] != prev + 1) {
            fail(name + ": seq " + std::to_string(st.applied[i]) + " after " + std::to_string(prev));
            break;
          }
          prev = st.applied[i];
        }
        if (st.apply_failures) fail(name + ": " + std::to_string(st.apply_failures) + " apply failures");
        const auto info = server_->session_info(st.session);
        if (st.connected && info && st.last_seq != info->at("max_seq").get<std::uint64_t>())
          fail(name + ": stopped at " + std::to_string(st.last_seq) + " of " + info->at("max_seq").dump());
      }
      if (r.passed) r.detail = "every applied seq follows its predecessor";
    } else if (a.check == "isolation") {
      std::size_t total = 0;
      for (auto& [name, sl] : slots_) {
        const auto st = sl->client->state();
        total += st.foreign;
        for (const auto& t : sl->client->transcript()) {
          if (t.sent) continue;
          const Json j = Json::parse(t.frame, nullptr, false);
          if (j.is_object() && j.value("session", "") != sl->decl.session && j.value("kind", "") != "error") ++total;
        }
      }
      if (total) fail(std::to_string(total) + " envelopes crossed sessions");
      else r.detail = "no cross-session envelopes";
    } else if (a.check == "leader") {
      const std::string name = a.clients.front();
      const auto st = slot(name).client->state();
      const auto info = server_->session_info(st.session);
      if (!info || info->at("leader") != st.participant_id) fail("server leader is " + (info ? info->at("leader").dump() : "?"));
      for (auto& [n, sl] : slots_) {
        const auto other = sl->client->state();
        if (sl->decl.session != st.session || !other.connected) continue;
        if (other.leader != st.participant_id) fail(n + " thinks the leader is " + other.leader.value_or("nobody"));
      }
      if (r.passed) r.detail = name + " (" + st.participant_id + ") leads";
    } else if (a.check == "role") {
      const std::string want = args.at("role");
      for (const auto& name : a.clients) {
        const auto st = slot(name).client->state();
        if (std::string(session::to_string(st.role)) != want) fail(name + " is " + std::string(session::to_string(st.role)));
      }
    } else if (a.check == "single_leader") {
      std::map<std::string, int> leaders;
      std::map<std::string, int> connected;
      for (auto& [n, sl] : slots_) {
        const auto st = sl->client->state();
        if (!st.connected) continue;
        ++connected[st.session];
        if (st.role == session::Role::leader) ++leaders[st.session];
      }
      for (const auto& [session, count] : connected)
        if (leaders[session] != 1) fail(session + " has " + std::to_string(leaders[session]) + " leaders");
    } else if (a.check == "error_count" || a.check == "no_errors") {
      const std::string code = args.value("code", std::string());
      const auto want = args.value("count", std::int64_t{0});
      for (const auto& name : a.clients) {
        const auto st = slot(name).client->state();
        std::int64_t n = 0;
        for (const auto& e : st.errors)
          if (code.empty() || e.value("code", "") == code) ++n;
        if (n != want) fail(name + " got " + std::to_string(n) + " errors [" + codes(st.errors) + "], expected " + std::to_string(want));
        else if (r.detail.empty()) r.detail = name + " got " + std::to_string(n);
      }
    } else if (a.check == "leader_audit") {
      std::size_t bad = 0, checked = 0;
      for (auto& [n, sl] : slots_) {
        const auto st = sl->client->state();
        bad += st.non_leader_mutations;
        checked += st.applied.size();
      }
      if (bad) fail(std::to_string(bad) + " mutations from a non-leader");
      else r.detail = std::to_string(checked) + " applied envelopes audited";
    } else if (a.check == "mutations") {
      const auto want = args.at("count").get<std::int64_t>();
      for (const auto& name : a.clients) {
        std::int64_t n = 0;
        for (const auto& t : slot(name).client->transcript()) {
          if (t.sent) continue;
          const auto env = protocol::decode_message(t.frame);
          if (env.seq && protocol::is_scene_mutating(env.kind)) ++n;
        }
        if (n != want) fail(name + " saw " + std::to_string(n) + " scene mutations, expected " + std::to_string(want));
      }
    } else if (a.check == "replay") {
      for (const auto& name : a.clients) {
        Slot& sl = slot(name);
        const auto st = sl.client->state();
        if (st.replay_sizes.empty()) {
          fail(name + " never completed a replay");
          continue;
        }
        const bool snapshot = st.last_replay_snapshot;
        if (args.value("snapshot", false)) {
          if (!snapshot) fail(name + " replayed " + std::to_string(st.replay_sizes.back()) + " entries instead of a snapshot");
          else r.detail = name + " installed a snapshot";
          continue;
        }
        if (snapshot) {
          fail(name + " fell back to a snapshot");
          continue;
        }
        const auto& got = st.replay_seqs.back();
        if (args.contains("expected") && got.size() != args["expected"].get<std::size_t>())
          fail(name + " replayed " + std::to_string(got.size()) + ", expected " + args["expected"].dump());
        if (sl.expected_replay && got != *sl.expected_replay)
          fail(name + " replayed " + std::to_string(got.size()) + " seqs, peers saw " +
               std::to_string(sl.expected_replay->size()) + " while it was away");
        if (r.passed)
          r.detail = name + " replayed " + std::to_string(got.size()) +
                     (got.empty() ? "" : " (" + std::to_string(got.front()) + ".." + std::to_string(got.back()) + ")");
      }
    } else if (a.check == "disconnected") {
      for (const auto& name : a.clients)
        if (slot(name).client->state().connected) fail(name + " is still connected");
    } else if (a.check == "elapsed_under_ms") {
      const auto bound = args.at("ms").get<std::int64_t>();
      if (elapsed_ms >= bound) fail(std::to_string(elapsed_ms) + " ms");
      else r.detail = std::to_string(elapsed_ms) + " ms < " + std::to_string(bound);
    }
    return r;
  }

  Json describe(Slot& sl) {
    const auto st = sl.client->state();
    Json errors = Json::array();
    for (const auto& e : st.errors) errors.push_back(e);
    Json j = {{"session", st.session},
              {"participant_id", st.participant_id},
              {"role", std::string(session::to_string(st.role))},
              {"connected", st.connected},
              {"last_seq", st.last_seq},
              {"scene_hash", geo::to_hex(geo::scene_hash(st.scene))},
              {"applied", st.applied.size()},
              {"replay_sizes", st.replay_sizes},
              {"snapshots", st.snapshots},
              {"out_of_order", st.out_of_order},
              {"duplicates", st.duplicates},
              {"errors", errors},
              {"proxy", {{"forwarded", sl.proxy->forwarded()}, {"dropped", sl.proxy->dropped()}}}};
    if (opts_.transcripts) {
      Json t = Json::array();
      for (const auto& e : sl.client->transcript())
        t.push_back({{"dir", e.sent ? "out" : "in"}, {"at_ms", e.at_ms}, {"frame", e.frame}});
      j["transcript"] = std::move(t);
    }
    return j;
  }

  const Scenario& s_;
  RunOptions opts_;
  std::unique_ptr<sync::Server> server_;
  boost::asio::io_context ioc_;
  boost::asio::executor_work_guard<boost::asio::io_context::executor_type> guard_{ioc_.get_executor()};
  std::vector<std::thread> threads_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
  std::chrono::steady_clock::time_point start_, deadline_;
};

}  // namespace

ScenarioReport run_scenario(const Scenario& s, const RunOptions& opts) {
  Runner runner(s, opts);
  return runner.run();
}

}  // namespace geocollab::sim
