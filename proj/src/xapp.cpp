#include "riclab/xapp.hpp"

#include <atomic>
#include <cstdio>
#include <stdexcept>

#include "riclab/clock.hpp"

namespace riclab::xapp {

using client::BrokerLink;
using wire::MessageType;

const char* to_string(CvfKind k) noexcept {
  switch (k) {
    case CvfKind::none: return "none";
    case CvfKind::prior: return "prior";
    case CvfKind::blockage: return "blockage";
    case CvfKind::post: return "post";
  }
  return "?";
}

XappSession XappSession::connect(const net::Endpoint& broker, std::uint32_t xapp_id) {
  std::string err;
  auto link = BrokerLink::establish(broker, wire::NodeRole::Xapp, xapp_id, &err);
  if (!link) throw std::runtime_error("xapp: " + err);
  return XappSession(std::move(*link));
}

namespace {

ReceivedIndication to_indication(wire::MessageEnvelope&& env, std::uint64_t recv_ns,
                                 const wire::SensingPayload& payload) {
  return {recv_ns, env.agent_id, env.seq, env.send_timestamp_ns, payload};
}

}  // namespace

std::optional<wire::Response> XappSession::await_response(
    MessageType request, const std::function<void(const ReceivedIndication&)>& sink) {
  const std::uint64_t deadline = monotonic_ns() + 5'000'000'000ull;
  while (monotonic_ns() < deadline) {
    wire::MessageEnvelope env;
    const auto status = link_.recv_message_timeout(env, 100);
    if (status == BrokerLink::RecvStatus::closed) return std::nullopt;
    if (status == BrokerLink::RecvStatus::timeout) continue;
    if (env.type == MessageType::SensingIndication) {
      auto payload = wire::decode_sensing(env.payload);
      if (payload.ok() && sink)
        sink(to_indication(std::move(env), monotonic_ns(), *payload.value));
      continue;
    }
    if (env.type != MessageType::SetupResponse) continue;
    auto resp = wire::decode_response(env.payload);
    if (resp.ok() && resp->request == request) return *resp.value;
  }
  return std::nullopt;
}

void XappSession::subscribe(const std::vector<wire::FilterEntry>& filters,
                            std::uint32_t report_interval_hint_ms) {
  wire::Subscription sub{xapp_id(), filters, report_interval_hint_ms};
  if (!link_.send(MessageType::SubscriptionRequest, wire::encode_payload(sub)))
    throw std::runtime_error("xapp: subscription send failed");
  auto resp = await_response(MessageType::SubscriptionRequest, nullptr);
  if (!resp) throw std::runtime_error("xapp: no subscription response");
  if (!resp->accepted) throw std::runtime_error("xapp: subscription rejected: " + resp->detail);
}

void XappSession::unsubscribe() {
  wire::SubscriptionDelete del{xapp_id()};
  if (!link_.send(MessageType::SubscriptionDeleteRequest, wire::encode_payload(del)))
    throw std::runtime_error("xapp: unsubscribe send failed");
}

bool XappSession::control(std::uint32_t target_agent_id,
                          const std::vector<std::uint8_t>& payload, std::string* detail) {
  wire::ControlCommand cmd{target_agent_id, payload};
  if (!link_.send(MessageType::ControlRequest, wire::encode_payload(cmd))) {
    if (detail) *detail = "send failed";
    return false;
  }
  auto resp = await_response(MessageType::ControlRequest, nullptr);
  if (!resp) {
    if (detail) *detail = "no control ack";
    return false;
  }
  if (detail) *detail = resp->detail;
  return resp->accepted;
}

void XappSession::run(const std::function<bool(const ReceivedIndication&)>& sink) {
  stop_flag_.store(false);
  while (!stop_flag_.load(std::memory_order_relaxed)) {
    wire::MessageEnvelope env;
    const auto status = link_.recv_message_timeout(env, 50);
    if (status == BrokerLink::RecvStatus::closed) break;
    if (status == BrokerLink::RecvStatus::timeout) continue;
    if (env.type != MessageType::SensingIndication) continue;  // late acks
    const std::uint64_t recv_ns = monotonic_ns();
    auto payload = wire::decode_sensing(env.payload);
    if (!payload.ok()) break;  // poisoned stream
    if (!sink(to_indication(std::move(env), recv_ns, *payload.value))) break;
  }
}

std::vector<ReceivedIndication> XappSession::collect() {
  std::vector<ReceivedIndication> out;
  run([&out](const ReceivedIndication& ind) {
    out.push_back(ind);
    return true;
  });
  return out;
}

void XappSession::stop() { stop_flag_.store(true); }

void XappSession::close() { link_.shutdown(); }

// ---------------------------------------------------------------------------

FusedTimeline fuse(const std::vector<ReceivedIndication>& stream, std::uint32_t interval_ms,
                   std::uint32_t fps) {
  FusedTimeline timeline;
  timeline.interval_ms = interval_ms;
  const std::uint64_t interval_ns = static_cast<std::uint64_t>(interval_ms) * 1'000'000ull;

  struct Acc {
    std::int64_t centi_sum = 0;
    std::uint32_t count = 0;
    std::optional<std::uint64_t> kind_frame;  // latest CVF frame seen
    CvfKind kind = CvfKind::none;
  };
  std::vector<Acc> acc;
  auto at = [&acc](std::uint64_t idx) -> Acc& {
    if (idx >= acc.size()) acc.resize(idx + 1);
    return acc[idx];
  };

  auto cvf_interval = [&](std::uint64_t frame_index) {
    const std::uint64_t t_ms = frame_index * 1000ull / fps;
    return t_ms / interval_ms;
  };
  auto note_kind = [&](std::uint64_t frame_index, CvfKind kind) {
    Acc& a = at(cvf_interval(frame_index));
    if (!a.kind_frame || frame_index >= *a.kind_frame) {
      a.kind_frame = frame_index;
      a.kind = kind;
    }
  };

  for (const auto& ind : stream) {
    if (const auto* snr = std::get_if<wire::SnrReport>(&ind.payload)) {
      Acc& a = at(snr->sample_time_ns / interval_ns);
      a.centi_sum += snr->snr_centi_db;
      a.count += 1;
      timeline.snr_samples += 1;
    } else if (const auto* prior = std::get_if<wire::PriorBlockage>(&ind.payload)) {
      note_kind(prior->frame_index, CvfKind::prior);
    } else if (const auto* blk = std::get_if<wire::Blockage>(&ind.payload)) {
      note_kind(blk->frame_index, CvfKind::blockage);
    } else if (const auto* post = std::get_if<wire::PostBlockage>(&ind.payload)) {
      note_kind(post->frame_index, CvfKind::post);
    }
  }

  timeline.intervals.reserve(acc.size());
  for (std::uint64_t i = 0; i < acc.size(); ++i) {
    FusedInterval fi;
    fi.interval_index = i;
    fi.t_start_s = static_cast<double>(i) * interval_ms / 1000.0;
    fi.sample_count = acc[i].count;
    if (acc[i].count > 0)
      fi.mean_snr_db = static_cast<double>(acc[i].centi_sum) / (100.0 * acc[i].count);
    fi.kind = acc[i].kind;
    timeline.intervals.push_back(fi);
  }
  return timeline;
}

TransitionLog detect_transitions(const std::vector<ReceivedIndication>& stream) {
  TransitionLog log;
  std::optional<std::uint64_t> first_prior;
  for (const auto& ind : stream) {
    if (std::holds_alternative<wire::PriorBlockage>(ind.payload)) {
      if (!first_prior && !log.los_lost_ns) first_prior = ind.recv_ns;
    } else if (std::holds_alternative<wire::Blockage>(ind.payload)) {
      if (!log.los_lost_ns) log.los_lost_ns = ind.recv_ns;
    } else if (std::holds_alternative<wire::PostBlockage>(ind.payload)) {
      if (log.los_lost_ns && !log.los_return_ns) log.los_return_ns = ind.recv_ns;
    }
  }
  if (first_prior && log.los_lost_ns && *log.los_lost_ns >= *first_prior)
    log.anticipation_ms = static_cast<double>(*log.los_lost_ns - *first_prior) / 1e6;
  return log;
}

nlohmann::json TransitionLog::to_json(std::optional<std::uint64_t> epoch_ns) const {
  auto time_field = [&](const std::optional<std::uint64_t>& t) -> nlohmann::json {
    if (!t) return nullptr;
    if (epoch_ns) return static_cast<double>(*t - *epoch_ns) / 1e6;  // run-relative ms
    return *t;
  };
  nlohmann::json j;
  j["los_lost"] = time_field(los_lost_ns);
  j["los_return"] = time_field(los_return_ns);
  j["anticipation_ms"] = anticipation_ms ? nlohmann::json(*anticipation_ms) : nullptr;
  j["time_unit"] = epoch_ns ? "ms_run_relative" : "ns_monotonic";
  return j;
}

void write_fused_csv(std::ostream& os, const FusedTimeline& timeline) {
  os << "interval_index,t_start_s,mean_snr_db,cvf_kind\n";
  char line[128];
  for (const auto& fi : timeline.intervals) {
    if (fi.sample_count > 0) {
      std::snprintf(line, sizeof(line), "%llu,%.3f,%.4f,%s\n",
                    static_cast<unsigned long long>(fi.interval_index), fi.t_start_s,
                    fi.mean_snr_db, to_string(fi.kind));
    } else {
      std::snprintf(line, sizeof(line), "%llu,%.3f,,%s\n",
                    static_cast<unsigned long long>(fi.interval_index), fi.t_start_s,
                    to_string(fi.kind));
    }
    os << line;
  }
}

}  // namespace riclab::xapp
