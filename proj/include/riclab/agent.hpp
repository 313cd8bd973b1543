#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "riclab/cvf.hpp"
#include "riclab/net.hpp"
#include "riclab/radio.hpp"
#include "riclab/scene.hpp"
#include "riclab/wire.hpp"

namespace riclab::agent {

/// Absolute-deadline pacing: deadline(k) = start + k * interval, so a slow
/// iteration never skews later sends (no drift at 5000 msg/s). Above
/// 2000 msg/s the final 200 us to a deadline are spun, since timer
/// granularity on a commodity OS exceeds such intervals.
class Pacer {
 public:
  Pacer(std::uint64_t start_ns, std::uint64_t interval_ns, bool spin);

  /// Waits for deadline k and returns the release time (monotonic ns).
  std::uint64_t wait(std::uint64_t k) const;
  std::uint64_t deadline(std::uint64_t k) const { return start_ns_ + k * interval_ns_; }

 private:
  std::uint64_t start_ns_;
  std::uint64_t interval_ns_;
  std::uint64_t spin_window_ns_;
};

struct LoadProfile {
  std::uint32_t message_payload_bytes = 16;  // SyntheticPad pad length
  std::uint32_t rate_msgs_per_s = 1000;
  std::uint32_t duration_s = 10;
  std::uint32_t agent_id = 1;

  std::uint64_t interval_ns() const { return 1'000'000'000ull / rate_msgs_per_s; }
  std::size_t wire_size() const {
    return message_payload_bytes + wire::kSyntheticPadOverhead;
  }
  void validate() const;  // throws std::invalid_argument
};

struct SendReport {
  std::uint32_t agent_id = 0;
  std::uint64_t sent = 0;
  double achieved_rate = 0.0;
  std::uint64_t max_send_jitter_ns = 0;
  std::uint64_t p99_send_jitter_ns = 0;
  std::size_t wire_bytes = 0;
  bool failed = false;
  std::string error;

  nlohmann::json to_json() const;
  static SendReport from_json(const nlohmann::json& j);
};

/// Sends duration*rate SyntheticPad indications of constant on-wire size,
/// each stamped immediately before transmission.
SendReport run_load_agent(const LoadProfile& profile, const net::Endpoint& broker);

struct RunReport {
  std::uint32_t agent_id = 0;
  std::uint64_t frames = 0;    // frames processed / samples taken
  std::uint64_t messages = 0;  // indications sent
  bool failed = false;
  std::string error;

  nlohmann::json to_json() const;
};

struct CvfAgentConfig {
  std::uint32_t agent_id = 100;
  std::uint32_t ue_id = 1;
  double duration_s = 10.0;
  bool realtime = true;  // false: process frames back to back (tests)
};

/// Runs the CVF engine over generated frames and emits its events as
/// SensingIndications, one connection, frames paced at the scene fps.
RunReport run_cvf_agent(const scene::SceneConfig& scn, const cvf::CvfConfig& cvf_config,
                        const CvfAgentConfig& cfg, const net::Endpoint& broker);

struct RadioAgentConfig {
  std::uint32_t agent_id = 200;
  std::uint32_t ue_id = 1;
  double duration_s = 10.0;
  bool realtime = true;
};

/// Emits an SnrReport every sample period. Blockage state and the payload's
/// sample_time_ns are taken at the nominal sample instant, so the stream's
/// content is deterministic under a fixed seed regardless of scheduling.
RunReport run_radio_agent(const scene::SceneConfig& scn, const radio::RadioConfig& radio_config,
                          const RadioAgentConfig& cfg, const net::Endpoint& broker);

}  // namespace riclab::agent
