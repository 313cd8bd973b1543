#include "riclab/agent.hpp"

#include <algorithm>
#include <stdexcept>

#include "riclab/client.hpp"
#include "riclab/clock.hpp"

namespace riclab::agent {

using client::BrokerLink;
using client::ControlResponder;
using wire::MessageType;

Pacer::Pacer(std::uint64_t start_ns, std::uint64_t interval_ns, bool spin)
    : start_ns_(start_ns),
      interval_ns_(interval_ns),
      spin_window_ns_(spin ? 200'000 : 0) {}

std::uint64_t Pacer::wait(std::uint64_t k) const {
  const std::uint64_t target = deadline(k);
  std::uint64_t now = monotonic_ns();
  if (now + spin_window_ns_ < target) {
    sleep_until_ns(target - spin_window_ns_);
    now = monotonic_ns();
  }
  while (now < target) now = monotonic_ns();
  return now;
}

void LoadProfile::validate() const {
  if (rate_msgs_per_s < 1) throw std::invalid_argument("load agent: rate must be >= 1");
  if (agent_id == 0 || agent_id == wire::kAnyAgent)
    throw std::invalid_argument("load agent: reserved agent id");
}

nlohmann::json SendReport::to_json() const {
  return {{"agent_id", agent_id},
          {"sent", sent},
          {"achieved_rate", achieved_rate},
          {"max_send_jitter_ns", max_send_jitter_ns},
          {"p99_send_jitter_ns", p99_send_jitter_ns},
          {"wire_bytes", wire_bytes},
          {"failed", failed},
          {"error", error}};
}

SendReport SendReport::from_json(const nlohmann::json& j) {
  SendReport r;
  r.agent_id = j.at("agent_id").get<std::uint32_t>();
  r.sent = j.at("sent").get<std::uint64_t>();
  r.achieved_rate = j.at("achieved_rate").get<double>();
  r.max_send_jitter_ns = j.at("max_send_jitter_ns").get<std::uint64_t>();
  r.p99_send_jitter_ns = j.at("p99_send_jitter_ns").get<std::uint64_t>();
  r.wire_bytes = j.at("wire_bytes").get<std::size_t>();
  r.failed = j.at("failed").get<bool>();
  r.error = j.at("error").get<std::string>();
  return r;
}

nlohmann::json RunReport::to_json() const {
  return {{"agent_id", agent_id},
          {"frames", frames},
          {"messages", messages},
          {"failed", failed},
          {"error", error}};
}

SendReport run_load_agent(const LoadProfile& profile, const net::Endpoint& broker) {
  profile.validate();
  SendReport report;
  report.agent_id = profile.agent_id;
  report.wire_bytes = profile.wire_size();

  std::string err;
  auto link = BrokerLink::establish(broker, wire::NodeRole::Agent, profile.agent_id, &err);
  if (!link) {
    report.failed = true;
    report.error = err;
    return report;
  }
  ControlResponder responder;
  responder.start(*link);

  const std::uint64_t total =
      static_cast<std::uint64_t>(profile.duration_s) * profile.rate_msgs_per_s;

  // Constant frame, re-stamped in place per send: seq at offset 8,
  // send timestamp at offset 16.
  wire::SyntheticPad pad;
  pad.pad.assign(profile.message_payload_bytes, 0xA5);
  std::vector<std::uint8_t> frame = wire::encode(wire::make_indication(
      profile.agent_id, 0, 0, wire::SensingPayload{std::move(pad)}));

  std::vector<std::uint64_t> jitters;
  jitters.reserve(total);
  const Pacer pacer(monotonic_ns(), profile.interval_ns(), profile.rate_msgs_per_s > 2000);
  const std::uint64_t start_ns = pacer.deadline(0);
  std::uint64_t last_send_ns = start_ns;

  for (std::uint64_t k = 0; k < total; ++k) {
    const std::uint64_t released = pacer.wait(k);
    jitters.push_back(released - pacer.deadline(k));
    if (!link->send_stamped(frame)) {
      report.failed = true;
      report.error = "connection lost mid-run";
      break;
    }
    last_send_ns = released;
    report.sent++;
  }

  if (responder.peer_closed() && report.sent < total) {
    report.failed = true;
    if (report.error.empty()) report.error = "broker closed connection";
  }
  responder.stop(*link);

  const double elapsed_s = static_cast<double>(last_send_ns - start_ns) / 1e9;
  report.achieved_rate = elapsed_s > 0.0 ? static_cast<double>(report.sent) / elapsed_s
                                         : static_cast<double>(report.sent);
  if (!jitters.empty()) {
    report.max_send_jitter_ns = *std::max_element(jitters.begin(), jitters.end());
    std::sort(jitters.begin(), jitters.end());
    const std::size_t rank =
        (jitters.size() * 99 + 99) / 100;  // nearest-rank p99, 1-indexed
    report.p99_send_jitter_ns = jitters[std::min(rank, jitters.size()) - 1];
  }
  return report;
}

RunReport run_cvf_agent(const scene::SceneConfig& scn, const cvf::CvfConfig& cvf_config,
                        const CvfAgentConfig& cfg, const net::Endpoint& broker) {
  scn.validate();
  cvf_config.validate();
  RunReport report;
  report.agent_id = cfg.agent_id;

  std::string err;
  auto link = BrokerLink::establish(broker, wire::NodeRole::Agent, cfg.agent_id, &err);
  if (!link) {
    report.failed = true;
    report.error = err;
    return report;
  }
  ControlResponder responder;
  responder.start(*link);

  cvf::CvfEngine engine(scn.gnb_pos, cvf_config);
  const std::uint64_t total_frames =
      static_cast<std::uint64_t>(cfg.duration_s * scn.fps + 1e-9);
  const Pacer pacer(monotonic_ns(), 1'000'000'000ull / scn.fps, false);

  for (std::uint64_t k = 0; k < total_frames; ++k) {
    if (cfg.realtime) pacer.wait(k);
    const scene::Frame frame = scene::generate_frame(scn, k);
    report.frames++;
    for (const auto& ev : engine.step(frame)) {
      wire::SensingPayload payload;
      switch (ev.kind) {
        case cvf::EventKind::PriorBlockage:
          payload = wire::PriorBlockage{ev.obstacle_id, ev.box, ev.time_to_block_ms,
                                        ev.frame_index, cfg.ue_id};
          break;
        case cvf::EventKind::Blockage:
          payload = wire::Blockage{ev.obstacle_id, ev.box, ev.frame_index, cfg.ue_id};
          break;
        case cvf::EventKind::PostBlockage:
          payload = wire::PostBlockage{ev.obstacle_id, ev.frame_index, cfg.ue_id};
          break;
      }
      if (!link->send(MessageType::SensingIndication, wire::encode_payload(payload))) {
        report.failed = true;
        report.error = "connection lost mid-run";
        responder.stop(*link);
        return report;
      }
      report.messages++;
    }
  }
  responder.stop(*link);
  return report;
}

RunReport run_radio_agent(const scene::SceneConfig& scn, const radio::RadioConfig& radio_config,
                          const RadioAgentConfig& cfg, const net::Endpoint& broker) {
  scn.validate();
  radio_config.validate();
  RunReport report;
  report.agent_id = cfg.agent_id;

  std::string err;
  auto link = BrokerLink::establish(broker, wire::NodeRole::Agent, cfg.agent_id, &err);
  if (!link) {
    report.failed = true;
    report.error = err;
    return report;
  }
  ControlResponder responder;
  responder.start(*link);

  radio::SnrSampler sampler(radio_config);
  const std::uint64_t total =
      radio::SnrSampler::sample_count(cfg.duration_s, radio_config.sample_period_ms);
  const Pacer pacer(monotonic_ns(),
                    static_cast<std::uint64_t>(radio_config.sample_period_ms) * 1'000'000ull,
                    false);

  for (std::uint64_t k = 0; k < total; ++k) {
    if (cfg.realtime) pacer.wait(k);
    const std::uint64_t nominal_ns = sampler.nominal_time_ns(k);
    const bool blocked =
        scene::ground_truth_blocked_at(scn, static_cast<double>(nominal_ns) / 1e9);
    const wire::SnrReport snr{cfg.ue_id, sampler.sample(blocked), nominal_ns};
    if (!link->send(MessageType::SensingIndication,
                    wire::encode_payload(wire::SensingPayload{snr}))) {
      report.failed = true;
      report.error = "connection lost mid-run";
      break;
    }
    report.frames++;
    report.messages++;
  }
  responder.stop(*link);
  return report;
}

}  // namespace riclab::agent
