#pragma once

#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "riclab/net.hpp"
#include "riclab/wire.hpp"

namespace riclab::client {

/// One established connection to the broker (agent or xApp side).
/// Sending is thread-safe; receiving belongs to a single thread.
class BrokerLink {
 public:
  BrokerLink() = default;
  BrokerLink(BrokerLink&&) = default;
  BrokerLink& operator=(BrokerLink&&) = default;

  /// Connects, performs the setup handshake and returns the established
  /// link; nullopt with `error` filled on refusal or transport failure.
  /// node_id 0 asks the broker to assign one.
  static std::optional<BrokerLink> establish(const net::Endpoint& ep, wire::NodeRole role,
                                             std::uint32_t node_id, std::string* error);

  std::uint32_t node_id() const { return node_id_; }

  /// Stamps seq and send time, encodes and sends.
  bool send(wire::MessageType type, const std::vector<std::uint8_t>& payload);
  /// Sends pre-encoded bytes verbatim (tests only; no stamping).
  bool send_raw(std::span<const std::uint8_t> bytes);
  /// Hot path: stamps seq and send time into a pre-encoded frame in place
  /// and sends it. Stamping and sending are atomic, so wire order always
  /// matches seq order even with a responder thread acking controls.
  bool send_stamped(std::vector<std::uint8_t>& frame);

  /// Blocking read of the next message; nullopt on EOF or stream error.
  std::optional<wire::MessageEnvelope> recv_message();

  enum class RecvStatus { message, timeout, closed };
  /// As recv_message but returns after timeout_ms without data.
  RecvStatus recv_message_timeout(wire::MessageEnvelope& out, int timeout_ms);

  /// Unblocks recv_message() from another thread.
  void shutdown() { sock_.shutdown_both(); }

  net::Socket& socket() { return sock_; }
  std::mutex& write_mutex() { return *write_mu_; }

 private:
  net::Socket sock_;
  wire::FrameAssembler assembler_;
  std::deque<wire::MessageEnvelope> inbox_;
  std::unique_ptr<std::mutex> write_mu_ = std::make_unique<std::mutex>();
  std::unique_ptr<std::atomic<std::uint64_t>> seq_ =
      std::make_unique<std::atomic<std::uint64_t>>(0);
  std::uint32_t node_id_ = 0;
};

/// Background reader for agents: answers forwarded control requests with an
/// accept ack and flags when the broker closes the connection.
class ControlResponder {
 public:
  /// Takes over the link's receive side; the owner may keep sending.
  void start(BrokerLink& link);
  void stop(BrokerLink& link);
  bool peer_closed() const { return peer_closed_.load(); }
  ~ControlResponder();

 private:
  std::thread thread_;
  std::atomic<bool> peer_closed_{false};
  std::atomic<bool> stopping_{false};
};

}  // namespace riclab::client
