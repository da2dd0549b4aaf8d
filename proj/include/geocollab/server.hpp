#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "geocollab/geo_anchor.hpp"
#include "geocollab/review.hpp"

namespace geocollab::sync {

struct ServerConfig {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 8080;  // 0 picks a free port
  std::size_t max_sessions = 256;
  std::size_t max_participants = 64;
  std::size_t replay_capacity = 1024;
  double view_rate = 10.0;  // forwarded view updates per second
  std::int64_t write_timeout_ms = 5000;
  std::int64_t service_timeout_ms = 30000;
  std::map<std::string, std::string> services;  // op_kind -> URL
  std::string assets_dir;                       // empty disables /assets/
  std::string store_dir;                        // empty keeps review data in memory
  int threads = 2;
  std::int64_t retention_ms = 10 * 60 * 1000;
  std::size_t outbound_queue_limit = 4096;
  int socket_send_buffer = 0;  // bytes; 0 leaves the OS default
};

/// Overlays the keys present in `j` onto `base`. Unknown keys and bad values
/// throw Error(ValidationError) naming the key.
ServerConfig config_from_json(const Json& j, ServerConfig base = {});
Json to_json(const ServerConfig& c);
/// Throws Error(ValidationError) unless rates, caps and timeouts are positive.
void validate(const ServerConfig& c);

/// Register and data server in one process: WebSocket sessions at
/// /ws/{session_id}, static files at /assets/, the review REST API under
/// /api/, and /healthz.
class Server {
 public:
  explicit Server(ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts the worker threads. Throws Error(BindFailure).
  void start();
  /// Closes every WebSocket with a server-initiated close after flushing its
  /// queue, then stops the workers. Idempotent.
  void stop();

  std::uint16_t port() const noexcept;
  const ServerConfig& config() const noexcept;

  struct Stats {
    std::size_t sessions = 0;
    std::size_t participants = 0;  // connected
    std::size_t in_flight = 0;
  };
  Stats stats() const;
  /// {session, scene_hash, max_seq, leader, participants, last_view}; nullopt
  /// for an unknown session.
  std::optional<Json> session_info(const std::string& session_id) const;

  review::ReviewService& review();

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace geocollab::sync
