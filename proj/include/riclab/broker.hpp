#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <json.hpp>

namespace riclab::broker {

struct BrokerConfig {
  std::string bind_host = "127.0.0.1";
  std::uint16_t agent_port = 0;  // 0 = pick an ephemeral port
  std::uint16_t xapp_port = 0;
  /// Bounded per-subscriber queue; on overflow the newest message is
  /// dropped and counted, the routing path never blocks.
  std::size_t subscriber_queue_capacity = 65536;
  /// Test hook: artificial delay added on the routing path per message.
  std::uint64_t debug_route_delay_ns = 0;
  /// Periodic stats line (JSON per line); 0 disables.
  std::uint32_t stats_interval_ms = 0;
  std::string stats_path;  // empty = stderr
};

struct BrokerStats {
  std::uint64_t agents = 0;            // currently registered
  std::uint64_t xapps = 0;
  std::uint64_t received = 0;          // indications read from agents
  std::uint64_t routed = 0;            // deliveries enqueued
  std::uint64_t dropped_unmatched = 0; // indications with no matching subscriber
  std::uint64_t dropped_overflow = 0;  // deliveries rejected by a full queue
};

nlohmann::json to_json(const BrokerStats& s);

/// Accepts agent connections on one port and xApp connections on another,
/// maintains the subscription table, and fans SensingIndications out to
/// matching subscribers preserving per-agent order.
class Broker {
 public:
  explicit Broker(BrokerConfig config);
  ~Broker();
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  /// Binds both listeners and starts serving. Throws std::system_error on
  /// bind failure.
  void start();
  /// Stops accepting, drains subscriber queues and joins every thread.
  void stop();

  std::uint16_t agent_port() const;
  std::uint16_t xapp_port() const;
  BrokerStats stats() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace riclab::broker
