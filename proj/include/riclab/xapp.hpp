#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "riclab/client.hpp"
#include "riclab/net.hpp"
#include "riclab/wire.hpp"

namespace riclab::xapp {

struct ReceivedIndication {
  std::uint64_t recv_ns = 0;  // local monotonic clock at arrival
  std::uint32_t agent_id = 0;
  std::uint64_t seq = 0;
  std::uint64_t send_ns = 0;
  wire::SensingPayload payload;
};

/// E42-side session: setup, subscribe, then a receive loop that stamps each
/// indication with its local receive time.
class XappSession {
 public:
  /// Throws std::runtime_error on connect/setup failure.
  static XappSession connect(const net::Endpoint& broker, std::uint32_t xapp_id);

  XappSession(XappSession&& other) noexcept
      : link_(std::move(other.link_)), stop_flag_(other.stop_flag_.load()) {}

  std::uint32_t xapp_id() const { return link_.node_id(); }

  /// Throws std::runtime_error when the broker rejects the subscription
  /// (e.g. empty filter list).
  void subscribe(const std::vector<wire::FilterEntry>& filters,
                 std::uint32_t report_interval_hint_ms = 0);
  void unsubscribe();

  /// Sends a control request toward an agent and waits for the relayed ack.
  /// Returns the ack's accepted flag; detail receives the broker/agent note.
  bool control(std::uint32_t target_agent_id, const std::vector<std::uint8_t>& payload,
               std::string* detail = nullptr);

  /// Receives until the sink returns false, stop() is called, or the broker
  /// closes the connection. Runs on the calling thread; every indication is
  /// stamped with its local receive time.
  void run(const std::function<bool(const ReceivedIndication&)>& sink);

  /// Convenience: record everything until stop() or disconnect.
  std::vector<ReceivedIndication> collect();

  /// Makes run()/collect() return soon; the session stays usable.
  void stop();
  /// Tears the connection down (unblocks everything for good).
  void close();

 private:
  explicit XappSession(client::BrokerLink link) : link_(std::move(link)) {}
  std::optional<wire::Response> await_response(
      wire::MessageType request, const std::function<void(const ReceivedIndication&)>& sink);

  client::BrokerLink link_;
  std::atomic<bool> stop_flag_{false};
};

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

enum class CvfKind : std::uint8_t { none = 0, prior, blockage, post };

const char* to_string(CvfKind k) noexcept;

struct FusedInterval {
  std::uint64_t interval_index = 0;
  double t_start_s = 0.0;
  double mean_snr_db = 0.0;  // meaningful iff sample_count > 0
  std::uint32_t sample_count = 0;
  CvfKind kind = CvfKind::none;
};

struct FusedTimeline {
  std::uint32_t interval_ms = 200;
  std::vector<FusedInterval> intervals;  // dense from interval 0
  std::uint64_t snr_samples = 0;         // fusion conservation: every sample lands once
};

/// Buckets SNR samples into fixed intervals on the nominal send-time grid
/// (payload sample_time_ns) and annotates each interval with the CVF kind
/// whose frame falls in it (latest frame wins). Receive times play no part,
/// so the timeline is independent of transport jitter.
FusedTimeline fuse(const std::vector<ReceivedIndication>& stream,
                   std::uint32_t interval_ms = 200, std::uint32_t fps = 5);

struct TransitionLog {
  std::optional<std::uint64_t> los_lost_ns;    // recv time of first Blockage
  std::optional<std::uint64_t> los_return_ns;  // recv time of first PostBlockage after it
  std::optional<double> anticipation_ms;       // los_lost - first Prior recv time

  /// epoch_ns, when set, rewrites absolute times as run-relative ms.
  nlohmann::json to_json(std::optional<std::uint64_t> epoch_ns = std::nullopt) const;
};

TransitionLog detect_transitions(const std::vector<ReceivedIndication>& stream);

/// fused timeline CSV: interval_index,t_start_s,mean_snr_db,cvf_kind
void write_fused_csv(std::ostream& os, const FusedTimeline& timeline);

}  // namespace riclab::xapp
