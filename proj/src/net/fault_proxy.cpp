#include "geocollab/fault_proxy.hpp"

#include <deque>

#include <boost/beast.hpp>
#include <spdlog/spdlog.h>

#include "geocollab/ws_channel.hpp"

namespace geocollab::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

/// Small receive window on the upstream socket so a stall backs up quickly.
constexpr int kStallReceiveBuffer = 4096;

struct Pair {
  std::shared_ptr<WsChannel> client;
  std::shared_ptr<WsChannel> upstream;
  std::deque<std::pair<std::chrono::steady_clock::time_point, std::string>> delayed;
  std::unique_ptr<asio::steady_timer> timer;
  bool timer_armed = false;
};

}  // namespace

struct FaultProxy::State : std::enable_shared_from_this<FaultProxy::State> {
  State(asio::io_context& ioc, std::string host, std::uint16_t port)
      : ioc(ioc), acceptor(ioc), upstream_host(std::move(host)), upstream_port(port) {}

  asio::io_context& ioc;
  tcp::acceptor acceptor;
  std::string upstream_host;
  std::uint16_t upstream_port;

  mutable std::mutex mu;
  std::vector<std::shared_ptr<Pair>> pairs;
  std::chrono::milliseconds delay{0};
  std::size_t drop_budget = 0;
  bool stalled = false;
  std::atomic<std::size_t> dropped{0};
  std::atomic<std::size_t> forwarded{0};
  bool closed = false;

  void do_accept() {
    acceptor.async_accept(asio::make_strand(ioc), [self = shared_from_this()](beast::error_code ec, tcp::socket s) {
      if (ec) return;
      self->on_socket(std::move(s));
      self->do_accept();
    });
  }

  void on_socket(tcp::socket socket) {
    auto stream = std::make_shared<beast::tcp_stream>(std::move(socket));
    auto buffer = std::make_shared<beast::flat_buffer>();
    auto req = std::make_shared<http::request<http::string_body>>();
    http::async_read(*stream, *buffer, *req, [self = shared_from_this(), stream, buffer, req](beast::error_code ec, std::size_t) {
      if (ec || !websocket::is_upgrade(*req)) return;
      std::shared_ptr<WsChannel> upstream;
      try {
        WsChannel::ConnectOptions opts;
        opts.timeout = std::chrono::milliseconds(5000);
        opts.receive_buffer = kStallReceiveBuffer;
        upstream = WsChannel::connect(self->ioc, self->upstream_host, self->upstream_port, std::string(req->target()), opts);
      } catch (const std::exception& e) {
        spdlog::warn("proxy upstream connect failed: {}", e.what());
        return;
      }
      auto ws = std::make_shared<WsChannel::Stream>(stream->release_socket());
      ws->set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      ws->read_message_max(1 << 20);
      ws->async_accept(*req, [self, ws, upstream, req](beast::error_code ec2) {
        if (ec2) {
          upstream->abort();
          return;
        }
        self->link(std::make_shared<WsChannel>(std::move(*ws)), upstream);
      });
    });
  }

  void link(std::shared_ptr<WsChannel> client, std::shared_ptr<WsChannel> upstream) {
    auto pair = std::make_shared<Pair>();
    pair->client = client;
    pair->upstream = upstream;
    pair->timer = std::make_unique<asio::steady_timer>(ioc);
    {
      std::lock_guard lk(mu);
      if (closed) {
        client->abort();
        upstream->abort();
        return;
      }
      pairs.push_back(pair);
      if (stalled) upstream->set_reading(false);
    }
    std::weak_ptr<Pair> weak = pair;
    client->start([upstream](std::string frame) { upstream->send(std::move(frame)); },
                  [self = shared_from_this(), weak] { self->drop_pair(weak); });
    upstream->start([self = shared_from_this(), weak](std::string frame) { self->downstream(weak, std::move(frame)); },
                    [self = shared_from_this(), weak] { self->drop_pair(weak); });
  }

  void downstream(const std::weak_ptr<Pair>& weak, std::string frame) {
    auto pair = weak.lock();
    if (!pair) return;
    std::lock_guard lk(mu);
    if (drop_budget > 0) {
      --drop_budget;
      ++dropped;
      return;
    }
    if (delay.count() == 0 && pair->delayed.empty()) {
      ++forwarded;
      pair->client->send(std::move(frame));
      return;
    }
    pair->delayed.emplace_back(std::chrono::steady_clock::now() + delay, std::move(frame));
    arm(pair);
  }

  void arm(const std::shared_ptr<Pair>& pair) {
    if (pair->timer_armed || pair->delayed.empty()) return;
    pair->timer_armed = true;
    pair->timer->expires_at(pair->delayed.front().first);
    pair->timer->async_wait([self = shared_from_this(), pair](beast::error_code ec) {
      std::lock_guard lk(self->mu);
      pair->timer_armed = false;
      if (ec) return;
      const auto now = std::chrono::steady_clock::now();
      while (!pair->delayed.empty() && pair->delayed.front().first <= now) {
        ++self->forwarded;
        pair->client->send(std::move(pair->delayed.front().second));
        pair->delayed.pop_front();
      }
      self->arm(pair);
    });
  }

  void drop_pair(const std::weak_ptr<Pair>& weak) {
    auto pair = weak.lock();
    if (!pair) return;
    pair->client->abort();
    pair->upstream->abort();
    std::lock_guard lk(mu);
    std::erase(pairs, pair);
    pair->timer->cancel();
  }
};

FaultProxy::FaultProxy(asio::io_context& ioc, std::string upstream_host, std::uint16_t upstream_port)
    : state_(std::make_shared<State>(ioc, std::move(upstream_host), upstream_port)) {
  const tcp::endpoint ep(asio::ip::make_address("127.0.0.1"), 0);
  state_->acceptor.open(ep.protocol());
  state_->acceptor.set_option(asio::socket_base::reuse_address(true));
  state_->acceptor.bind(ep);
  state_->acceptor.listen();
  state_->do_accept();
}

FaultProxy::~FaultProxy() {
  std::vector<std::shared_ptr<Pair>> pairs;
  {
    std::lock_guard lk(state_->mu);
    state_->closed = true;
    pairs.swap(state_->pairs);
  }
  asio::post(state_->acceptor.get_executor(), [s = state_] {
    beast::error_code ec;
    s->acceptor.close(ec);
  });
  for (auto& p : pairs) {
    p->client->abort();
    p->upstream->abort();
  }
}

std::uint16_t FaultProxy::port() const noexcept { return state_->acceptor.local_endpoint().port(); }

void FaultProxy::set_delay(std::chrono::milliseconds d) {
  std::lock_guard lk(state_->mu);
  state_->delay = d;
}

void FaultProxy::drop_next(std::size_t n) {
  std::lock_guard lk(state_->mu);
  state_->drop_budget += n;
}

void FaultProxy::set_stalled(bool stalled) {
  std::lock_guard lk(state_->mu);
  state_->stalled = stalled;
  for (auto& p : state_->pairs) p->upstream->set_reading(!stalled);
}

void FaultProxy::sever() {
  std::vector<std::shared_ptr<Pair>> pairs;
  {
    std::lock_guard lk(state_->mu);
    pairs = state_->pairs;
  }
  for (auto& p : pairs) {
    p->client->abort();
    p->upstream->abort();
  }
}

std::size_t FaultProxy::dropped() const noexcept { return state_->dropped; }
std::size_t FaultProxy::forwarded() const noexcept { return state_->forwarded; }

bool FaultProxy::idle() const {
  std::lock_guard lk(state_->mu);
  for (const auto& p : state_->pairs)
    if (!p->delayed.empty()) return false;
  return true;
}

}  // namespace geocollab::net
