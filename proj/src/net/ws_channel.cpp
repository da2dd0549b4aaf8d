#include "geocollab/ws_channel.hpp"

#include "geocollab/error.hpp"

namespace geocollab::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

std::shared_ptr<WsChannel> WsChannel::connect(asio::io_context& ioc, const std::string& host, std::uint16_t port,
                                              const std::string& target, ConnectOptions opts) {
  Stream ws(asio::make_strand(ioc));
  try {
    tcp::resolver resolver(ioc);
    const auto endpoints = resolver.resolve(host, std::to_string(port));
    auto& layer = beast::get_lowest_layer(ws);
    layer.expires_after(opts.timeout);
    beast::error_code ec;
    layer.socket().open(tcp::v4(), ec);
    if (opts.receive_buffer > 0) layer.socket().set_option(asio::socket_base::receive_buffer_size(opts.receive_buffer));
    layer.connect(endpoints);
    layer.socket().set_option(tcp::no_delay(true));
    ws.handshake(host + ":" + std::to_string(port), target);
    layer.expires_never();
  } catch (const beast::system_error& e) {
    throw Error(Errc::ConnectFailure, "cannot connect to " + host + ":" + std::to_string(port) + target + ": " + e.what());
  }
  ws.set_option(websocket::stream_base::timeout::suggested(beast::role_type::client));
  ws.read_message_max(1 << 20);
  return std::make_shared<WsChannel>(std::move(ws));
}

WsChannel::WsChannel(Stream stream) : ws_(std::move(stream)) {}

void WsChannel::start(OnMessage on_message, OnClose on_close) {
  on_message_ = std::move(on_message);
  on_close_ = std::move(on_close);
  asio::dispatch(ws_.get_executor(), [self = shared_from_this()] { self->do_read(); });
}

void WsChannel::do_read() {
  {
    std::lock_guard lk(mu_);
    if (closed_ || !reading_enabled_ || read_pending_) return;
    read_pending_ = true;
  }
  ws_.async_read(buffer_, beast::bind_front_handler(&WsChannel::on_read, shared_from_this()));
}

void WsChannel::on_read(beast::error_code ec, std::size_t) {
  {
    std::lock_guard lk(mu_);
    read_pending_ = false;
  }
  if (ec) return finish();
  std::string frame = beast::buffers_to_string(buffer_.data());
  buffer_.consume(buffer_.size());
  if (on_message_) on_message_(std::move(frame));
  do_read();
}

void WsChannel::set_reading(bool enabled) {
  {
    std::lock_guard lk(mu_);
    reading_enabled_ = enabled;
  }
  if (enabled) asio::post(ws_.get_executor(), [self = shared_from_this()] { self->do_read(); });
}

void WsChannel::send(std::string frame) {
  std::lock_guard lk(mu_);
  if (closed_ || close_requested_) return;
  queue_.push_back(std::move(frame));
  if (!writing_) {
    writing_ = true;
    asio::post(ws_.get_executor(), [self = shared_from_this()] { self->do_write(); });
  }
}

void WsChannel::do_write() {
  std::lock_guard lk(mu_);
  if (closed_) return;
  if (queue_.empty()) {
    writing_ = false;
    if (close_requested_) {
      ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
    }
    return;
  }
  ws_.text(true);
  ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    {
      std::lock_guard lk(self->mu_);
      if (!self->queue_.empty()) self->queue_.pop_front();
    }
    if (ec) return self->abort();
    self->do_write();
  });
}

void WsChannel::close() {
  std::lock_guard lk(mu_);
  if (closed_ || close_requested_) return;
  close_requested_ = true;
  if (!writing_) {
    writing_ = true;
    asio::post(ws_.get_executor(), [self = shared_from_this()] { self->do_write(); });
  }
}

void WsChannel::abort() {
  asio::dispatch(ws_.get_executor(), [self = shared_from_this()] {
    {
      std::lock_guard lk(self->mu_);
      if (self->closed_) return;
      self->closed_ = true;
      self->queue_.clear();
    }
    beast::error_code ec;
    auto& sock = beast::get_lowest_layer(self->ws_).socket();
    sock.shutdown(tcp::socket::shutdown_both, ec);
    sock.close(ec);
    bool read_pending;
    {
      std::lock_guard lk(self->mu_);
      read_pending = self->read_pending_;
    }
    if (!read_pending) self->finish();
  });
}

void WsChannel::finish() {
  OnClose cb;
  {
    std::lock_guard lk(mu_);
    closed_ = true;
    queue_.clear();
    if (finished_) return;
    finished_ = true;
    cb = std::move(on_close_);
  }
  beast::error_code ec;
  beast::get_lowest_layer(ws_).socket().close(ec);
  if (cb) cb();
}

bool WsChannel::is_open() const {
  std::lock_guard lk(mu_);
  return !closed_;
}

std::size_t WsChannel::queued() const {
  std::lock_guard lk(mu_);
  return queue_.size();
}

HttpResult http_request(const std::string& host, std::uint16_t port, const std::string& method,
                        const std::string& target, const std::string& body, std::chrono::milliseconds timeout) {
  asio::io_context ioc;
  beast::tcp_stream stream(ioc);
  try {
    tcp::resolver resolver(ioc);
    stream.expires_after(timeout);
    stream.connect(resolver.resolve(host, std::to_string(port)));
    http::request<http::string_body> req{http::string_to_verb(method), target, 11};
    req.set(http::field::host, host);
    req.set(http::field::content_type, "application/json");
    req.body() = body;
    req.prepare_payload();
    http::write(stream, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(stream, buffer, res);
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_both, ec);
    return {static_cast<int>(res.result_int()), res.body()};
  } catch (const beast::system_error& e) {
    throw Error(Errc::ConnectFailure, method + " " + target + " on port " + std::to_string(port) + ": " + e.what());
  }
}

}  // namespace geocollab::net
