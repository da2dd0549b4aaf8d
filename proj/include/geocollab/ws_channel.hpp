#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include <boost/asio.hpp>
#include <boost/beast.hpp>

namespace geocollab::net {

/// Text-frame WebSocket connection with a queued writer and a callback-driven
/// reader. Every stream operation runs on the channel's strand.
class WsChannel : public std::enable_shared_from_this<WsChannel> {
 public:
  using Stream = boost::beast::websocket::stream<boost::beast::tcp_stream>;
  using OnMessage = std::function<void(std::string)>;
  using OnClose = std::function<void()>;

  struct ConnectOptions {
    std::chrono::milliseconds timeout{5000};
    int receive_buffer = 0;  // SO_RCVBUF; 0 keeps the OS default
  };

  /// Blocking TCP connect and WebSocket handshake. Throws Error(ConnectFailure).
  static std::shared_ptr<WsChannel> connect(boost::asio::io_context& ioc, const std::string& host, std::uint16_t port,
                                            const std::string& target, ConnectOptions opts);
  static std::shared_ptr<WsChannel> connect(boost::asio::io_context& ioc, const std::string& host, std::uint16_t port,
                                            const std::string& target) {
    return connect(ioc, host, port, target, ConnectOptions{});
  }

  /// Wraps a stream whose handshake already completed.
  explicit WsChannel(Stream stream);

  void start(OnMessage on_message, OnClose on_close);
  void send(std::string frame);
  /// Close handshake once queued frames are written.
  void close();
  /// Drops the TCP connection immediately.
  void abort();
  /// While paused no reads are issued, so the peer eventually blocks on send.
  void set_reading(bool enabled);

  bool is_open() const;
  std::size_t queued() const;

 private:
  void do_read();
  void on_read(boost::beast::error_code ec, std::size_t n);
  void do_write();
  void finish();

  Stream ws_;
  boost::beast::flat_buffer buffer_;
  OnMessage on_message_;
  OnClose on_close_;

  mutable std::mutex mu_;
  std::deque<std::string> queue_;
  bool writing_ = false;
  bool close_requested_ = false;
  bool closed_ = false;
  bool reading_enabled_ = true;
  bool read_pending_ = false;
  bool finished_ = false;
};

/// Minimal blocking HTTP/1.1 client for the REST and health endpoints.
struct HttpResult {
  int status = 0;
  std::string body;
};
HttpResult http_request(const std::string& host, std::uint16_t port, const std::string& method,
                        const std::string& target, const std::string& body = {},
                        std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

}  // namespace geocollab::net
