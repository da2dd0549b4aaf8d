#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include <boost/asio.hpp>

namespace geocollab::net {

/// WebSocket-aware relay placed between one client and the server. Client
/// connections are forwarded frame by frame to the same target upstream.
/// Faults apply to the server-to-client direction:
///   delay      every frame is held back by a fixed time (order kept)
///   drop_next  the next n frames are discarded
///   stall      upstream reads stop, so the server's writes eventually block
///   sever      both sockets are dropped
class FaultProxy {
 public:
  FaultProxy(boost::asio::io_context& ioc, std::string upstream_host, std::uint16_t upstream_port);
  ~FaultProxy();
  FaultProxy(const FaultProxy&) = delete;
  FaultProxy& operator=(const FaultProxy&) = delete;

  std::uint16_t port() const noexcept;

  void set_delay(std::chrono::milliseconds d);
  void drop_next(std::size_t n);
  void set_stalled(bool stalled);
  void sever();

  std::size_t dropped() const noexcept;
  std::size_t forwarded() const noexcept;
  /// No delayed frame waiting to be forwarded.
  bool idle() const;

  struct State;

 private:
  std::shared_ptr<State> state_;
};

}  // namespace geocollab::net
