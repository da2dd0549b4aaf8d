#include "geocollab/server.hpp"

#include <atomic>
#include <chrono>
#include <deque>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <spdlog/spdlog.h>

#include "geocollab/analysis.hpp"
#include "geocollab/coalescer.hpp"
#include "geocollab/error.hpp"
#include "geocollab/rest.hpp"
#include "geocollab/session.hpp"
#include "service_client.hpp"

namespace geocollab::sync {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using protocol::Envelope;
using protocol::MessageKind;
using session::Audience;
using session::Outbox;

namespace {

std::int64_t steady_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

Json error_payload(const Error& e, std::optional<MessageKind> ref) {
  Json p = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
  if (!e.field().empty()) p["field"] = e.field();
  if (ref) p["ref_kind"] = std::string(protocol::to_string(*ref));
  return p;
}

std::string mime_type(const std::string& path) {
  static const std::pair<const char*, const char*> kTypes[] = {
      {".json", "application/json"}, {".geojson", "application/geo+json"}, {".html", "text/html"},
      {".js", "text/javascript"},    {".css", "text/css"},                 {".png", "image/png"},
      {".jpg", "image/jpeg"},        {".glb", "model/gltf-binary"},        {".gltf", "model/gltf+json"},
      {".txt", "text/plain"}};
  for (const auto& [ext, type] : kTypes)
    if (path.size() >= std::strlen(ext) && path.compare(path.size() - std::strlen(ext), std::string::npos, ext) == 0)
      return type;
  return "application/octet-stream";
}

}  // namespace

class WsConn;

struct PendingView {
  std::string pid;
  Json payload;
};

/// One design session and the connections attached to it. Every call into
/// `session` and every fanout happens under `mu`, so each connection's queue
/// receives broadcasts in seq order.
struct Room : std::enable_shared_from_this<Room> {
  Room(Server::Impl& srv, std::string id, session::SessionConfig cfg, std::int64_t window_ms, asio::io_context& ioc)
      : srv(srv), session(std::move(id), cfg), coalescer(window_ms), view_timer(ioc) {}

  Server::Impl& srv;
  std::mutex mu;
  session::Session session;
  std::map<std::string, std::shared_ptr<WsConn>> bound;  // pid -> connection
  std::size_t attached = 0;                             // connections, joined or not
  ViewCoalescer<PendingView> coalescer;
  asio::steady_timer view_timer;
  bool timer_armed = false;

  void handle(const std::shared_ptr<WsConn>& conn, const Envelope& env);
  void detach(const std::shared_ptr<WsConn>& conn);
  void deliver(const Outbox& box);

 private:
  void flush_view();
  void submit_view(const PendingView& v);
  void arm_view_timer();
  void op_exec(const std::string& pid, const Envelope& env);
  void publish(const std::string& pid, const Envelope& env);
};

struct Server::Impl {
  explicit Impl(ServerConfig c) : cfg(std::move(c)), acceptor(ioc), purge_timer(ioc), services(2) {}

  ServerConfig cfg;
  asio::io_context ioc;
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
  tcp::acceptor acceptor;
  asio::steady_timer purge_timer;
  asio::thread_pool services;
  std::vector<std::thread> threads;
  std::unique_ptr<review::ReviewService> review;
  std::uint16_t bound_port = 0;
  bool started = false;
  std::atomic<bool> stopping{false};
  bool stopped = false;

  mutable std::mutex rooms_mu;
  std::map<std::string, std::shared_ptr<Room>> rooms;
  mutable std::mutex conns_mu;
  std::set<std::shared_ptr<WsConn>> conns;

  std::atomic<std::int64_t> in_flight{0};
  std::atomic<std::int64_t> pending_views{0};

  std::shared_ptr<Room> attach(const std::string& id);
  void do_accept();
  void schedule_purge();
  std::int64_t in_flight_now() const { return in_flight.load() + pending_views.load(); }

  review::ReviewService& ensure_review() {
    std::lock_guard lk(review_mu);
    if (!review) {
      std::unique_ptr<review::ReviewStore> store;
      if (cfg.store_dir.empty()) {
        store = std::make_unique<review::MemoryReviewStore>();
      } else {
        std::error_code ec;
        std::filesystem::create_directories(cfg.store_dir, ec);
        store = std::make_unique<review::FileReviewStore>(cfg.store_dir);
      }
      review = std::make_unique<review::ReviewService>(std::move(store));
    }
    return *review;
  }
  std::mutex review_mu;
};

// ---- WebSocket connection ----

class WsConn : public std::enable_shared_from_this<WsConn> {
 public:
  WsConn(Server::Impl& srv, tcp::socket socket, std::string session_id)
      : srv_(srv), ws_(std::move(socket)), write_timer_(ws_.get_executor()), session_id_(std::move(session_id)) {}

  template <class Request>
  void start(Request req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(1 << 20);
    if (srv_.cfg.socket_send_buffer > 0) {
      beast::error_code ec;
      beast::get_lowest_layer(ws_).socket().set_option(asio::socket_base::send_buffer_size(srv_.cfg.socket_send_buffer), ec);
    }
    ws_.async_accept(req, beast::bind_front_handler(&WsConn::on_accept, shared_from_this()));
  }

  /// Queues a frame. Called from any thread, normally under the room mutex.
  void send(std::shared_ptr<const std::string> frame) {
    std::lock_guard lk(qmu_);
    if (closed_ || closing_ || close_after_) return;
    if (queue_.size() >= srv_.cfg.outbound_queue_limit) {
      spdlog::warn("event=overflow session={} participant={}", session_id_, pid);
      closing_ = true;
      asio::post(ws_.get_executor(), [self = shared_from_this()] { self->abort(); });
      return;
    }
    queue_.push_back(std::move(frame));
    ++srv_.in_flight;
    if (!writing_) {
      writing_ = true;
      asio::post(ws_.get_executor(), [self = shared_from_this()] { self->do_write(); });
    }
  }

  void send_envelope(const Envelope& env) {
    send(std::make_shared<const std::string>(protocol::encode_message(env)));
  }

  void send_error(const Error& e, std::optional<MessageKind> ref) {
    Envelope env;
    env.kind = MessageKind::error;
    env.session = protocol::valid_session_id(session_id_) ? session_id_ : "invalid";
    env.sender = std::string(protocol::kServerSender);
    env.ts = session::system_clock_ms();
    env.payload = error_payload(e, ref);
    send_envelope(env);
  }

  /// Flushes queued frames, then performs a server-initiated close.
  void shutdown() {
    std::lock_guard lk(qmu_);
    if (closed_ || close_after_) return;
    close_after_ = true;
    if (!writing_) asio::post(ws_.get_executor(), [self = shared_from_this()] { self->start_close(); });
  }

  /// Drops the connection without a close handshake.
  void abort_async() {
    asio::post(ws_.get_executor(), [self = shared_from_this()] { self->abort(); });
  }

  const std::string& session_id() const noexcept { return session_id_; }

  std::string pid;  // bound participant; guarded by the room mutex
  std::shared_ptr<Room> room;

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return finish();
    {
      std::lock_guard lk(srv_.conns_mu);
      srv_.conns.insert(shared_from_this());
    }
    if (srv_.stopping) {
      shutdown();
      do_read();
      return;
    }
    if (!protocol::valid_session_id(session_id_)) {
      send_error(Error(Errc::ProtocolError, "invalid session id"), std::nullopt);
      close_with(websocket::close_code::policy_error);
      do_read();
      return;
    }
    try {
      room = srv_.attach(session_id_);
    } catch (const Error& e) {
      send_error(e, std::nullopt);
      close_with(websocket::close_code::try_again_later);
      do_read();
      return;
    }
    do_read();
  }

  void close_with(websocket::close_code code) {
    std::lock_guard lk(qmu_);
    close_code_ = code;
    close_after_ = true;
    if (!writing_) asio::post(ws_.get_executor(), [self = shared_from_this()] { self->start_close(); });
  }

  void do_read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsConn::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return finish();
    ++srv_.in_flight;
    const std::string frame = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    if (room) {
      std::optional<MessageKind> kind;
      try {
        const Envelope env = protocol::decode_message(frame);
        kind = env.kind;
        if (env.session != session_id_)
          throw Error(Errc::ProtocolError, "envelope session '" + env.session + "' does not match the connection");
        room->handle(shared_from_this(), env);
      } catch (const Error& e) {
        send_error(e, kind);
      } catch (const std::exception& e) {
        send_error(Error(Errc::ProtocolError, e.what()), kind);
      }
    }
    --srv_.in_flight;
    do_read();
  }

  void do_write() {
    std::shared_ptr<const std::string> frame;
    {
      std::lock_guard lk(qmu_);
      if (closed_) return;
      if (queue_.empty()) {
        writing_ = false;
        if (close_after_) start_close_locked();
        return;
      }
      frame = queue_.front();
    }
    ws_.text(true);
    write_timer_.expires_after(std::chrono::milliseconds(srv_.cfg.write_timeout_ms));
    write_timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      spdlog::warn("event=write_timeout session={} participant={}", self->session_id_, self->pid);
      self->abort();
    });
    ws_.async_write(asio::buffer(*frame), [self = shared_from_this(), frame](beast::error_code ec, std::size_t) {
      self->write_timer_.cancel();
      {
        std::lock_guard lk(self->qmu_);
        if (!self->queue_.empty() && self->queue_.front() == frame) {
          self->queue_.pop_front();
          --self->srv_.in_flight;
        }
      }
      if (ec) return self->abort();
      self->do_write();
    });
  }

  void start_close() {
    std::lock_guard lk(qmu_);
    start_close_locked();
  }

  void start_close_locked() {
    if (closed_ || close_started_) return;
    close_started_ = true;
    write_timer_.expires_after(std::chrono::milliseconds(std::min<std::int64_t>(srv_.cfg.write_timeout_ms, 2000)));
    write_timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->abort();
    });
    ws_.async_close(websocket::close_reason(close_code_), [self = shared_from_this()](beast::error_code) {
      self->write_timer_.cancel();
    });
  }

  void abort() {
    beast::error_code ec;
    {
      std::lock_guard lk(qmu_);
      if (closed_) return;
      closed_ = true;
      srv_.in_flight -= static_cast<std::int64_t>(queue_.size());
      queue_.clear();
    }
    write_timer_.cancel();
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

  /// Read side ended: the connection is gone for good.
  void finish() {
    if (finished_.exchange(true)) return;
    {
      std::lock_guard lk(qmu_);
      closed_ = true;
      srv_.in_flight -= static_cast<std::int64_t>(queue_.size());
      queue_.clear();
    }
    write_timer_.cancel();
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
    auto self = shared_from_this();
    if (room) room->detach(self);
    std::lock_guard lk(srv_.conns_mu);
    srv_.conns.erase(self);
  }

  Server::Impl& srv_;
  websocket::stream<beast::tcp_stream> ws_;
  asio::steady_timer write_timer_;
  std::string session_id_;
  beast::flat_buffer buffer_;

  std::mutex qmu_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool writing_ = false;
  bool closing_ = false;
  bool close_after_ = false;
  bool close_started_ = false;
  bool closed_ = false;
  websocket::close_code close_code_ = websocket::close_code::going_away;
  std::atomic<bool> finished_{false};
};

// ---- Room ----

void Room::deliver(const Outbox& box) {
  for (const auto& m : box) {
    const auto frame = std::make_shared<const std::string>(protocol::encode_message(m.envelope));
    const Envelope& e = m.envelope;
    switch (e.kind) {
      case MessageKind::participant_joined:
        spdlog::info("event=join session={} participant={} role={}", session.id(), e.payload.value("participant_id", ""),
                     e.payload.value("role", ""));
        break;
      case MessageKind::participant_left:
        spdlog::info("event=leave session={} participant={}", session.id(), e.payload.value("participant_id", ""));
        break;
      case MessageKind::leader_changed:
        spdlog::info("event=leader_changed session={} leader={} reason={}", session.id(), e.payload.value("leader", ""),
                     e.payload.value("reason", ""));
        break;
      case MessageKind::publish_solution:
        spdlog::info("event=publish session={} solution={} version={}", session.id(), e.payload.value("solution_id", ""),
                     e.payload.value("version", 0));
        break;
      default: break;
    }
    switch (m.audience) {
      case Audience::all:
        for (auto& [pid, conn] : bound) conn->send(frame);
        break;
      case Audience::all_except:
        for (auto& [pid, conn] : bound)
          if (pid != m.participant) conn->send(frame);
        break;
      case Audience::only:
        if (auto it = bound.find(m.participant); it != bound.end()) it->second->send(frame);
        break;
    }
  }
}

void Room::submit_view(const PendingView& v) {
  try {
    deliver(session.submit_action(v.pid, MessageKind::view_update, v.payload));
  } catch (const Error&) {
    // The sender lost the floor or left before the window closed.
  }
}

void Room::flush_view() {
  const bool had = coalescer.has_pending();
  if (auto v = coalescer.flush()) submit_view(*v);
  if (had) --srv.pending_views;
}

void Room::arm_view_timer() {
  const auto deadline = coalescer.deadline();
  if (!deadline || timer_armed) return;
  timer_armed = true;
  view_timer.expires_after(std::chrono::milliseconds(std::max<std::int64_t>(0, *deadline - steady_ms())));
  view_timer.async_wait([self = shared_from_this()](beast::error_code ec) {
    std::lock_guard lk(self->mu);
    self->timer_armed = false;
    if (ec) return;
    if (auto v = self->coalescer.poll(steady_ms())) {
      self->submit_view(*v);
      --self->srv.pending_views;
    }
    self->arm_view_timer();
  });
}

void Room::handle(const std::shared_ptr<WsConn>& conn, const Envelope& env) {
  std::lock_guard lk(mu);
  const std::string& pid = conn->pid;
  auto require_joined = [&] {
    if (pid.empty()) throw Error(Errc::ProtocolError, "send join or replay_request first");
  };
  switch (env.kind) {
    case MessageKind::ping: {
      Envelope pong;
      pong.kind = MessageKind::pong;
      pong.session = session.id();
      pong.sender = std::string(protocol::kServerSender);
      pong.ts = session::system_clock_ms();
      pong.payload = {{"in_flight", std::max<std::int64_t>(0, srv.in_flight_now() - 1)}, {"max_seq", session.max_seq()}};
      conn->send_envelope(pong);
      return;
    }
    case MessageKind::join: {
      if (!pid.empty()) throw Error(Errc::ProtocolError, "already joined as " + pid);
      auto result = session.join(env.payload.at("display_name").get<std::string>());
      conn->pid = result.participant_id;
      bound[conn->pid] = conn;
      deliver(result.messages);
      return;
    }
    case MessageKind::replay_request: {
      const std::string who = env.payload.at("participant_id").get<std::string>();
      const auto last_seq = env.payload.at("last_seq").get<std::uint64_t>();
      if (!pid.empty() && pid != who) throw Error(Errc::ProtocolError, "connection is bound to " + pid);
      if (pid.empty()) {
        if (!session.participants().contains(who)) throw Error(Errc::UnknownParticipant, "no participant '" + who + "'");
        if (auto it = bound.find(who); it != bound.end() && it->second != conn) {
          // A stale socket still holds the identity; retire it quietly.
          it->second->pid.clear();
          it->second->abort_async();
          bound.erase(it);
        }
      }
      auto result = session.replay_since(who, last_seq);
      conn->pid = who;
      bound[who] = conn;
      deliver(result.messages);
      return;
    }
    case MessageKind::view_update:
      require_joined();
      session.require_leader(pid);
      if (!coalescer.has_pending()) ++srv.pending_views;
      if (auto v = coalescer.offer(PendingView{pid, env.payload}, steady_ms())) {
        submit_view(*v);
      }
      arm_view_timer();
      return;
    default: break;
  }

  require_joined();
  flush_view();
  switch (env.kind) {
    case MessageKind::role_grant:
      deliver(session.grant_role(pid, env.payload.at("target").get<std::string>()));
      break;
    case MessageKind::role_deny:
      deliver(session.deny_role(pid, env.payload.at("target").get<std::string>()));
      break;
    case MessageKind::op_exec: op_exec(pid, env); break;
    case MessageKind::publish_solution: publish(pid, env); break;
    case MessageKind::chat:
    case MessageKind::role_request:
    case MessageKind::sketch_create:
    case MessageKind::sketch_delete:
    case MessageKind::model_place:
    case MessageKind::model_move:
    case MessageKind::model_remove:
    case MessageKind::layer_import:
    case MessageKind::stage_change:
      deliver(session.submit_action(pid, env.kind, env.payload));
      break;
    default:
      throw Error(Errc::ProtocolError, std::string(protocol::to_string(env.kind)) + " is not accepted from clients");
  }
}

void Room::op_exec(const std::string& pid, const Envelope& env) {
  const std::string op_kind = env.payload.at("op_kind").get<std::string>();
  const Json params = env.payload.value("params", Json::object());
  session.require_leader(pid);

  if (auto it = srv.cfg.services.find(op_kind); it != srv.cfg.services.end()) {
    const Outbox box = session.submit_action(pid, MessageKind::op_exec, env.payload);
    const std::uint64_t seq = *box.front().envelope.seq;
    deliver(box);
    ++srv.in_flight;
    asio::post(srv.services, [self = shared_from_this(), url = it->second, params, seq, op_kind,
                              timeout = srv.cfg.service_timeout_ms] {
      Json outcome = call_external_service(url, params, timeout);
      outcome["op_exec_seq"] = seq;
      outcome["op_kind"] = op_kind;
      {
        std::lock_guard lk(self->mu);
        try {
          self->deliver(self->session.submit_server(MessageKind::op_result, std::move(outcome)));
        } catch (const Error& e) {
          spdlog::error("event=op_result_failed session={} error={}", self->session.id(), e.what());
        }
      }
      --self->srv.in_flight;
    });
    return;
  }
  if (!analysis::is_builtin(op_kind)) throw Error(Errc::UnknownService, "no service registered for '" + op_kind + "'");

  Json result = analysis::run_builtin(op_kind, params);
  Outbox box = session.submit_action(pid, MessageKind::op_exec, env.payload);
  const std::uint64_t seq = *box.front().envelope.seq;
  Outbox res = session.submit_server(
      MessageKind::op_result, {{"op_exec_seq", seq}, {"op_kind", op_kind}, {"ok", true}, {"result", std::move(result)}});
  box.insert(box.end(), res.begin(), res.end());
  deliver(box);
}

void Room::publish(const std::string& pid, const Envelope& env) {
  session.require_leader(pid);
  const auto pub = srv.review->publish_solution(session.id(), env.payload.at("title").get<std::string>(), session.scene());
  Json payload = env.payload;
  payload["solution_id"] = pub.solution_id;
  payload["version"] = pub.version;
  deliver(session.submit_action(pid, MessageKind::publish_solution, payload));
}

void Room::detach(const std::shared_ptr<WsConn>& conn) {
  {
    std::lock_guard lk(mu);
    if (!conn->pid.empty()) {
      if (auto it = bound.find(conn->pid); it != bound.end() && it->second == conn) {
        bound.erase(it);
        if (session.leader() == conn->pid) flush_view();
        try {
          deliver(session.handle_disconnect(conn->pid));
        } catch (const Error& e) {
          spdlog::error("event=disconnect_failed session={} error={}", session.id(), e.what());
        }
      }
      conn->pid.clear();
    }
  }
  std::lock_guard lk(srv.rooms_mu);
  if (attached > 0) --attached;
}

// ---- Server::Impl ----

std::shared_ptr<Room> Server::Impl::attach(const std::string& id) {
  std::lock_guard lk(rooms_mu);
  auto it = rooms.find(id);
  if (it == rooms.end()) {
    if (rooms.size() >= cfg.max_sessions) throw Error(Errc::SessionFull, "server is at its session limit");
    session::SessionConfig sc;
    sc.max_participants = cfg.max_participants;
    sc.replay_capacity = cfg.replay_capacity;
    sc.retention_ms = cfg.retention_ms;
    auto room = std::make_shared<Room>(*this, id, sc, static_cast<std::int64_t>(1000.0 / cfg.view_rate), ioc);
    it = rooms.emplace(id, std::move(room)).first;
    spdlog::info("event=session_open session={}", id);
  }
  ++it->second->attached;
  return it->second;
}

void Server::Impl::schedule_purge() {
  purge_timer.expires_after(std::chrono::milliseconds(std::min<std::int64_t>(cfg.retention_ms, 1000)));
  purge_timer.async_wait([self = this](beast::error_code ec) {
    if (ec || self->stopping) return;
    const auto now = session::system_clock_ms();
    std::vector<std::shared_ptr<Room>> snapshot;
    {
      std::lock_guard lk(self->rooms_mu);
      for (auto& [id, room] : self->rooms) snapshot.push_back(room);
    }
    for (auto& room : snapshot) {
      bool empty = false;
      {
        std::lock_guard lk(room->mu);
        room->session.purge_expired(now);
        empty = room->session.participants().empty() && !room->coalescer.has_pending();
      }
      std::lock_guard lk(self->rooms_mu);
      if (empty && room->attached == 0) {
        self->rooms.erase(room->session.id());
        spdlog::info("event=session_closed session={}", room->session.id());
      }
    }
    self->schedule_purge();
  });
}

// ---- HTTP ----

class HttpConn : public std::enable_shared_from_this<HttpConn> {
 public:
  HttpConn(Server::Impl& srv, tcp::socket socket) : srv_(srv), stream_(std::move(socket)) {}

  void start() {
    asio::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpConn::do_read, shared_from_this()));
  }

 private:
  using Request = http::request<http::string_body>;
  using Response = http::response<http::string_body>;

  void do_read() {
    parser_.emplace();
    parser_->body_limit(8 * 1024 * 1024);
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, *parser_, beast::bind_front_handler(&HttpConn::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      beast::error_code ignored;
      stream_.socket().shutdown(tcp::socket::shutdown_both, ignored);
      return;
    }
    Request req = parser_->release();
    if (websocket::is_upgrade(req)) {
      const std::string target(req.target());
      if (target.rfind("/ws/", 0) == 0) {
        std::string id = percent_decode(target.substr(4, target.find('?') == std::string::npos ? std::string::npos
                                                                                               : target.find('?') - 4));
        stream_.expires_never();
        std::make_shared<WsConn>(srv_, stream_.release_socket(), std::move(id))->start(std::move(req));
        return;
      }
    }
    respond(route(req));
  }

  Response json_response(const Request& req, http::status status, std::string body) {
    Response res{status, req.version()};
    res.set(http::field::server, "geocollab");
    res.set(http::field::content_type, "application/json");
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  }

  Response error_response(const Request& req, http::status status, const std::string& code, const std::string& msg) {
    return json_response(req, status, Json{{"error", {{"code", code}, {"message", msg}}}}.dump());
  }

  Response route(const Request& req) {
    const std::string target(req.target());
    const std::string path = target.substr(0, target.find('?'));
    if (path == "/healthz") {
      const auto st = stats_of(srv_);
      return json_response(req, http::status::ok,
                           Json{{"sessions", st.sessions}, {"participants", st.participants}, {"in_flight", st.in_flight}}.dump());
    }
    if (path.rfind("/debug/sessions/", 0) == 0) {
      auto info = session_info_of(srv_, percent_decode(path.substr(16)));
      if (!info) return error_response(req, http::status::not_found, "UnknownSession", "no such session");
      return json_response(req, http::status::ok, info->dump());
    }
    if (path.rfind("/assets/", 0) == 0) return asset(req, percent_decode(path.substr(8)));
    if (path.rfind("/ws/", 0) == 0)
      return error_response(req, http::status::upgrade_required, "ProtocolError", "WebSocket upgrade required");
    if (auto r = handle_review_api(*srv_.review, std::string(req.method_string()), target, req.body())) {
      Response res = json_response(req, static_cast<http::status>(r->status), std::move(r->body));
      return res;
    }
    return error_response(req, http::status::not_found, "NotFound", "no route for " + path);
  }

  Response asset(const Request& req, const std::string& rel) {
    if (srv_.cfg.assets_dir.empty() || req.method() != http::verb::get)
      return error_response(req, http::status::not_found, "NotFound", "no assets");
    std::filesystem::path p(rel);
    for (const auto& part : p)
      if (part == ".." || part == ".") return error_response(req, http::status::bad_request, "ValidationError", "bad asset path");
    if (rel.empty() || p.is_absolute()) return error_response(req, http::status::not_found, "NotFound", "no such asset");
    const auto full = std::filesystem::path(srv_.cfg.assets_dir) / p;
    std::ifstream in(full, std::ios::binary);
    if (!in || std::filesystem::is_directory(full))
      return error_response(req, http::status::not_found, "NotFound", "no such asset");
    std::stringstream ss;
    ss << in.rdbuf();
    Response res{http::status::ok, req.version()};
    res.set(http::field::content_type, mime_type(full.string()));
    res.keep_alive(req.keep_alive());
    res.body() = ss.str();
    res.prepare_payload();
    return res;
  }

  void respond(Response res) {
    auto sp = std::make_shared<Response>(std::move(res));
    http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!sp->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->do_read();
    });
  }

  static Server::Stats stats_of(Server::Impl& srv);
  static std::optional<Json> session_info_of(Server::Impl& srv, const std::string& id);

  Server::Impl& srv_;
  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
};

void Server::Impl::do_accept() {
  acceptor.async_accept(asio::make_strand(ioc), [self = this](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (ec == asio::error::operation_aborted || !self->acceptor.is_open()) return;
      spdlog::warn("event=accept_failed error={}", ec.message());
    } else {
      socket.set_option(tcp::no_delay(true), ec);
      std::make_shared<HttpConn>(*self, std::move(socket))->start();
    }
    self->do_accept();
  });
}

namespace {

Server::Stats compute_stats(const Server::Impl& impl) {
  Server::Stats st;
  std::vector<std::shared_ptr<Room>> rooms;
  {
    std::lock_guard lk(impl.rooms_mu);
    st.sessions = impl.rooms.size();
    for (const auto& [id, r] : impl.rooms) rooms.push_back(r);
  }
  for (const auto& r : rooms) {
    std::lock_guard lk(r->mu);
    st.participants += r->session.connected_count();
  }
  st.in_flight = static_cast<std::size_t>(std::max<std::int64_t>(0, impl.in_flight_now()));
  return st;
}

std::optional<Json> compute_session_info(const Server::Impl& impl, const std::string& id) {
  std::shared_ptr<Room> room;
  {
    std::lock_guard lk(impl.rooms_mu);
    auto it = impl.rooms.find(id);
    if (it == impl.rooms.end()) return std::nullopt;
    room = it->second;
  }
  std::lock_guard lk(room->mu);
  const auto& s = room->session;
  Json info = {{"session", s.id()},
               {"scene_hash", geo::to_hex(geo::scene_hash(s.scene()))},
               {"max_seq", s.max_seq()},
               {"connected", s.connected_count()},
               {"participants", s.snapshot_payload()["participants"]},
               {"role_queue", s.snapshot_payload()["role_queue"]}};
  info["leader"] = s.leader() ? Json(*s.leader()) : Json(nullptr);
  info["last_view"] = s.last_view() ? geo::to_json(*s.last_view()) : Json(nullptr);
  return info;
}

}  // namespace

Server::Stats HttpConn::stats_of(Server::Impl& srv) { return compute_stats(srv); }
std::optional<Json> HttpConn::session_info_of(Server::Impl& srv, const std::string& id) {
  return compute_session_info(srv, id);
}

// ---- Server ----

Server::Server(ServerConfig config) : impl_(std::make_shared<Impl>(std::move(config))) { validate(impl_->cfg); }

Server::~Server() { stop(); }

void Server::start() {
  auto& s = *impl_;
  if (s.started) return;
  s.ensure_review();
  beast::error_code ec;
  const auto address = asio::ip::make_address(s.cfg.bind_address, ec);
  if (ec) throw Error(Errc::BindFailure, "bad bind address '" + s.cfg.bind_address + "'");
  const tcp::endpoint endpoint{address, s.cfg.port};
  s.acceptor.open(endpoint.protocol(), ec);
  if (!ec) s.acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) s.acceptor.bind(endpoint, ec);
  if (!ec) s.acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    beast::error_code ignored;
    s.acceptor.close(ignored);
    throw Error(Errc::BindFailure, "cannot listen on " + s.cfg.bind_address + ":" + std::to_string(s.cfg.port) + ": " +
                                       ec.message());
  }
  s.bound_port = s.acceptor.local_endpoint().port();
  s.started = true;
  s.work.emplace(s.ioc.get_executor());
  s.do_accept();
  s.schedule_purge();
  for (int i = 0; i < s.cfg.threads; ++i) s.threads.emplace_back([&s] { s.ioc.run(); });
  spdlog::info("event=listening address={} port={}", s.cfg.bind_address, s.bound_port);
}

void Server::stop() {
  auto& s = *impl_;
  if (!s.started || s.stopped) return;
  s.stopped = true;
  s.stopping = true;
  asio::post(s.ioc, [impl = &s] {
    beast::error_code ec;
    impl->acceptor.close(ec);
    impl->purge_timer.cancel();
  });
  std::vector<std::shared_ptr<WsConn>> conns;
  {
    std::lock_guard lk(s.conns_mu);
    conns.assign(s.conns.begin(), s.conns.end());
  }
  for (auto& c : conns) c->shutdown();
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(3);
  while (std::chrono::steady_clock::now() < deadline) {
    {
      std::lock_guard lk(s.conns_mu);
      if (s.conns.empty()) break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  s.services.join();
  s.work.reset();
  s.ioc.stop();
  for (auto& t : s.threads) t.join();
  s.threads.clear();
  {
    std::lock_guard lk(s.conns_mu);
    s.conns.clear();
  }
  {
    std::lock_guard lk(s.rooms_mu);
    s.rooms.clear();
  }
  spdlog::info("event=stopped port={}", s.bound_port);
}

std::uint16_t Server::port() const noexcept { return impl_->bound_port; }
const ServerConfig& Server::config() const noexcept { return impl_->cfg; }
Server::Stats Server::stats() const { return compute_stats(*impl_); }
std::optional<Json> Server::session_info(const std::string& id) const { return compute_session_info(*impl_, id); }

review::ReviewService& Server::review() { return impl_->ensure_review(); }

}  // namespace geocollab::sync
