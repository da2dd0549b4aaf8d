#include "geocollab/client.hpp"

#include <thread>

#include <spdlog/spdlog.h>

#include "geocollab/error.hpp"

namespace geocollab::sim {

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

HeadlessClient::HeadlessClient(boost::asio::io_context& ioc, std::string name)
    : ioc_(ioc), name_(std::move(name)), alive_(std::make_shared<Alive>()) {
  alive_->self = this;
  st_.name = name_;
}

HeadlessClient::~HeadlessClient() {
  {
    std::lock_guard lk(alive_->mu);
    alive_->self = nullptr;
  }
  std::shared_ptr<net::WsChannel> ch;
  {
    std::lock_guard lk(mu_);
    ch = std::move(channel_);
  }
  if (ch) ch->abort();
}

bool HeadlessClient::wait_for(std::chrono::milliseconds timeout, const std::function<bool(const State&)>& pred) const {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    {
      std::lock_guard lk(mu_);
      if (pred(st_)) return true;
    }
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::microseconds(500));
  }
}

void HeadlessClient::open(const std::string& host, std::uint16_t port, const std::string& session,
                          std::chrono::milliseconds timeout) {
  net::WsChannel::ConnectOptions opts;
  opts.timeout = timeout;
  auto ch = net::WsChannel::connect(ioc_, host, port, "/ws/" + session, opts);
  std::weak_ptr<net::WsChannel> weak = ch;
  {
    std::lock_guard lk(mu_);
    channel_ = ch;
    st_.session = session;
    buffered_.clear();
  }
  ch->start(
      [alive = alive_](std::string frame) {
        std::lock_guard lk(alive->mu);
        if (alive->self) alive->self->on_frame(std::move(frame));
      },
      [alive = alive_, weak] {
        std::lock_guard lk(alive->mu);
        if (auto c = weak.lock(); c && alive->self) alive->self->on_closed(c);
      });
}

void HeadlessClient::connect(const std::string& host, std::uint16_t port, const std::string& session,
                             std::chrono::milliseconds timeout) {
  open(host, port, session, timeout);
  {
    std::lock_guard lk(mu_);
    send_locked(MessageKind::join, {{"display_name", name_}});
  }
  std::string error;
  const bool ok = wait_for(timeout, [&](const State& s) {
    if (!s.errors.empty()) error = s.errors.back().value("code", "") + ": " + s.errors.back().value("message", "");
    return s.connected || !error.empty();
  });
  if (!error.empty()) throw Error(Errc::ProtocolError, name_ + " was refused: " + error);
  if (!ok) throw Error(Errc::Timeout, name_ + " got no welcome");
}

void HeadlessClient::reconnect(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
  std::string session;
  std::size_t errors_before = 0;
  {
    std::lock_guard lk(mu_);
    if (st_.participant_id.empty()) throw Error(Errc::ProtocolError, name_ + " never joined");
    session = st_.session;
    errors_before = st_.errors.size();
  }
  disconnect();
  open(host, port, session, timeout);
  {
    std::lock_guard lk(mu_);
    st_.awaiting_replay = true;
    replay_accum_ = 0;
    replay_accum_seqs_.clear();
    send_locked(MessageKind::replay_request, {{"participant_id", st_.participant_id}, {"last_seq", st_.last_seq}});
  }
  std::string error;
  const bool ok = wait_for(timeout, [&](const State& s) {
    if (s.errors.size() > errors_before) error = s.errors.back().value("code", "");
    return !s.awaiting_replay || !error.empty();
  });
  if (!error.empty()) throw Error(Errc::ProtocolError, name_ + " replay refused: " + error);
  if (!ok) throw Error(Errc::Timeout, name_ + " replay did not complete");
  std::lock_guard lk(mu_);
  st_.connected = true;
}

void HeadlessClient::disconnect() {
  std::shared_ptr<net::WsChannel> ch;
  {
    std::lock_guard lk(mu_);
    ch = std::move(channel_);
    st_.connected = false;
  }
  if (ch) ch->abort();
}

void HeadlessClient::send_locked(MessageKind kind, Json payload) {
  if (!channel_) return;
  Envelope env;
  env.kind = kind;
  env.session = st_.session;
  env.sender = st_.participant_id.empty() ? name_ : st_.participant_id;
  env.ts = static_cast<std::int64_t>(session::system_clock_ms());
  env.payload = std::move(payload);
  std::string frame = protocol::encode_message(env);
  transcript_.push_back({true, now_ms(), frame});
  channel_->send(std::move(frame));
}

void HeadlessClient::send(MessageKind kind, Json payload) {
  std::lock_guard lk(mu_);
  send_locked(kind, std::move(payload));
}

Json HeadlessClient::ping(std::chrono::milliseconds timeout) {
  std::size_t before = 0;
  {
    std::lock_guard lk(mu_);
    if (!channel_) throw Error(Errc::ProtocolError, name_ + " is not connected");
    before = st_.pongs;
    send_locked(MessageKind::ping, Json::object());
  }
  if (!wait_for(timeout, [&](const State& s) { return s.pongs > before; }))
    throw Error(Errc::Timeout, name_ + " got no pong");
  std::lock_guard lk(mu_);
  return st_.last_pong;
}

HeadlessClient::State HeadlessClient::state() const {
  std::lock_guard lk(mu_);
  return st_;
}

void HeadlessClient::tamper(const std::function<void(State&)>& f) {
  std::lock_guard lk(mu_);
  f(st_);
}

std::vector<TranscriptEntry> HeadlessClient::transcript() const {
  std::lock_guard lk(mu_);
  return transcript_;
}

void HeadlessClient::on_closed(const std::shared_ptr<net::WsChannel>& ch) {
  std::lock_guard lk(mu_);
  if (channel_ != ch) return;
  channel_.reset();
  st_.connected = false;
  ++st_.disconnects;
}

void HeadlessClient::request_replay_locked() {
  if (st_.awaiting_replay || st_.participant_id.empty()) return;
  st_.awaiting_replay = true;
  replay_accum_ = 0;
  replay_accum_seqs_.clear();
  send_locked(MessageKind::replay_request, {{"participant_id", st_.participant_id}, {"last_seq", st_.last_seq}});
}

void HeadlessClient::apply_broadcast(const Envelope& env) {
  const std::uint64_t seq = *env.seq;
  if (seq <= st_.last_seq) {
    ++st_.duplicates;
    return;
  }
  if (seq != st_.last_seq + 1) {
    ++st_.out_of_order;
    spdlog::warn("client={} out-of-order seq {} after {}", name_, seq, st_.last_seq);
    buffered_.emplace(seq, env);
    request_replay_locked();
    return;
  }
  st_.last_seq = seq;
  st_.applied.push_back(seq);
  if (protocol::is_scene_mutating(env.kind)) {
    if (env.sender != st_.leader) ++st_.non_leader_mutations;
    try {
      st_.scene = geo::scene_apply(st_.scene, geo::parse_scene_action(env.kind, env.payload));
    } catch (const Error& e) {
      ++st_.apply_failures;
      spdlog::error("client={} cannot apply seq {}: {}", name_, seq, e.what());
    }
  }
  switch (env.kind) {
    case MessageKind::view_update:
      if (env.sender != st_.leader) ++st_.non_leader_mutations;
      st_.last_view = geo::view_from_json(env.payload, "payload");
      break;
    case MessageKind::leader_changed: {
      const std::string leader = env.payload.at("leader").get<std::string>();
      st_.leader = leader;
      st_.role = leader == st_.participant_id ? session::Role::leader : session::Role::follower;
      break;
    }
    case MessageKind::participant_left:
      if (st_.leader == env.payload.at("participant_id").get<std::string>()) st_.leader.reset();
      break;
    default: break;
  }
}

void HeadlessClient::drain_buffered() {
  while (!buffered_.empty()) {
    auto it = buffered_.begin();
    if (it->first <= st_.last_seq) {
      buffered_.erase(it);
      continue;
    }
    if (it->first != st_.last_seq + 1) return;
    Envelope env = std::move(it->second);
    buffered_.erase(it);
    apply_broadcast(env);
  }
}

void HeadlessClient::on_frame(std::string frame) {
  std::lock_guard lk(mu_);
  transcript_.push_back({false, now_ms(), frame});
  Envelope env;
  try {
    env = protocol::decode_message(frame);
  } catch (const Error& e) {
    spdlog::error("client={} undecodable frame: {}", name_, e.what());
    return;
  }
  if (!st_.session.empty() && env.session != st_.session && env.kind != MessageKind::error) {
    ++st_.foreign;
    return;
  }

  auto install = [&](const Json& p) {
    st_.scene = geo::scene_from_json(p.at("scene"));
    st_.last_view = p.contains("last_view") ? std::optional(geo::view_from_json(p.at("last_view"))) : std::nullopt;
    st_.last_seq = p.at("max_seq").get<std::uint64_t>();
    st_.leader = p.contains("leader") ? std::optional(p.at("leader").get<std::string>()) : std::nullopt;
    st_.role = st_.leader == st_.participant_id ? session::Role::leader : session::Role::follower;
    st_.installs.emplace_back(st_.applied.size(), st_.last_seq);
  };

  if (env.seq) {
    apply_broadcast(env);
    drain_buffered();
    return;
  }
  switch (env.kind) {
    case MessageKind::welcome:
      st_.participant_id = env.payload.at("participant_id").get<std::string>();
      install(env.payload);
      st_.connected = true;
      st_.ever_connected = true;
      drain_buffered();
      break;
    case MessageKind::snapshot:
      install(env.payload);
      ++st_.snapshots;
      st_.last_replay_snapshot = true;
      st_.replay_sizes.push_back(0);
      st_.replay_seqs.emplace_back();
      st_.awaiting_replay = false;
      drain_buffered();
      break;
    case MessageKind::replay_batch: {
      for (const auto& entry : env.payload.at("entries")) {
        Envelope inner = protocol::envelope_from_json(entry);
        if (*inner.seq > st_.last_seq) {
          ++replay_accum_;
          replay_accum_seqs_.push_back(*inner.seq);
        }
        apply_broadcast(inner);
      }
      if (env.payload.at("final").get<bool>()) {
        st_.replay_sizes.push_back(replay_accum_);
        st_.replay_seqs.push_back(std::move(replay_accum_seqs_));
        st_.last_replay_snapshot = false;
        replay_accum_seqs_.clear();
        replay_accum_ = 0;
        st_.awaiting_replay = false;
        drain_buffered();
      }
      break;
    }
    case MessageKind::pong:
      st_.last_pong = env.payload;
      ++st_.pongs;
      if (env.payload.value("max_seq", std::uint64_t{0}) > st_.last_seq && st_.connected) request_replay_locked();
      break;
    case MessageKind::error:
      st_.errors.push_back(env.payload);
      break;
    case MessageKind::role_deny:
      ++st_.role_denials;
      break;
    default:
      spdlog::warn("client={} unexpected unsequenced {}", name_, protocol::to_string(env.kind));
      break;
  }
}

}  // namespace geocollab::sim
