#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <boost/asio/io_context.hpp>

#include "geocollab/protocol.hpp"
#include "geocollab/scene.hpp"
#include "geocollab/session.hpp"
#include "geocollab/ws_channel.hpp"

namespace geocollab::sim {

using protocol::Envelope;
using protocol::MessageKind;

struct TranscriptEntry {
  bool sent = false;  // false: received
  std::int64_t at_ms = 0;
  std::string frame;
};

/// Headless participant. Applies sequenced broadcasts strictly in seq order,
/// buffers anything that arrives early and asks for a replay to fill the gap.
/// State is mutated only by the receive loop; accessors take a snapshot.
class HeadlessClient {
 public:
  HeadlessClient(boost::asio::io_context& ioc, std::string name);
  ~HeadlessClient();

  /// Opens /ws/{session} and sends join; blocks until the welcome arrives.
  /// Throws Error(ConnectFailure), Error(ProtocolError) or Error(Timeout).
  void connect(const std::string& host, std::uint16_t port, const std::string& session,
               std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));
  /// New socket for the existing identity; sends replay_request from the last
  /// applied seq and blocks until the replay (or snapshot) is complete.
  void reconnect(const std::string& host, std::uint16_t port,
                 std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));
  /// Drops the socket without a close handshake.
  void disconnect();

  void send(MessageKind kind, Json payload);
  /// Sends a ping and blocks until its pong has arrived. Returns the pong payload.
  Json ping(std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

  struct State {
    std::string name;
    std::string participant_id;
    std::string session;
    session::Role role = session::Role::follower;
    std::optional<std::string> leader;
    geo::SceneState scene;
    std::optional<geo::ViewState> last_view;
    std::uint64_t last_seq = 0;
    bool connected = false;
    bool ever_connected = false;
    bool awaiting_replay = false;
    std::vector<std::uint64_t> applied;             // seqs in application order
    // (index into applied, seq) at every welcome or snapshot install
    std::vector<std::pair<std::size_t, std::uint64_t>> installs;
    std::vector<Json> errors;                        // error payloads received
    std::vector<std::size_t> replay_sizes;           // entries per completed replay
    std::vector<std::vector<std::uint64_t>> replay_seqs;
    std::size_t snapshots = 0;                       // snapshot installs after the welcome
    bool last_replay_snapshot = false;
    std::size_t duplicates = 0;
    std::size_t out_of_order = 0;
    std::size_t foreign = 0;                         // envelopes for another session
    std::size_t non_leader_mutations = 0;            // scene mutations whose sender was not leader
    std::size_t apply_failures = 0;
    std::size_t role_denials = 0;
    std::size_t disconnects = 0;                     // connection losses not requested locally
    std::size_t pongs = 0;
    Json last_pong;
  };
  State state() const;
  /// Direct access to the local state, for detector tests only.
  void tamper(const std::function<void(State&)>& f);
  std::vector<TranscriptEntry> transcript() const;
  const std::string& name() const noexcept { return name_; }

 private:
  void open(const std::string& host, std::uint16_t port, const std::string& session,
            std::chrono::milliseconds timeout);
  void on_frame(std::string frame);
  void on_closed(const std::shared_ptr<net::WsChannel>& ch);
  void apply_broadcast(const Envelope& env);
  void drain_buffered();
  void request_replay_locked();
  void send_locked(MessageKind kind, Json payload);
  bool wait_for(std::chrono::milliseconds timeout, const std::function<bool(const State&)>& pred) const;

  struct Alive {
    std::mutex mu;
    HeadlessClient* self = nullptr;
  };

  boost::asio::io_context& ioc_;
  std::string name_;
  std::shared_ptr<Alive> alive_;
  mutable std::mutex mu_;
  State st_;
  std::map<std::uint64_t, Envelope> buffered_;
  std::vector<TranscriptEntry> transcript_;
  std::shared_ptr<net::WsChannel> channel_;
  std::size_t replay_accum_ = 0;
  std::vector<std::uint64_t> replay_accum_seqs_;
};

std::int64_t now_ms();

}  // namespace geocollab::sim
