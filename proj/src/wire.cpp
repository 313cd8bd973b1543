#include "riclab/wire.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace riclab::wire {
namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_i32(std::vector<std::uint8_t>& out, std::int32_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void put_box(std::vector<std::uint8_t>& out, const geom::Box2D& b) {
  put_f64(out, b.center.x);
  put_f64(out, b.center.y);
  put_f64(out, b.half.x);
  put_f64(out, b.half.y);
}

// Bounds-checked big-endian reader.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool ok() const { return ok_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t u8() { return take(1) ? bytes_[pos_ - 1] : 0; }

  std::uint16_t u16() {
    if (!take(2)) return 0;
    return static_cast<std::uint16_t>(bytes_[pos_ - 2] << 8 | bytes_[pos_ - 1]);
  }

  std::uint32_t u32() {
    if (!take(4)) return 0;
    std::uint32_t v = 0;
    for (std::size_t i = pos_ - 4; i < pos_; ++i) v = v << 8 | bytes_[i];
    return v;
  }

  std::uint64_t u64() {
    if (!take(8)) return 0;
    std::uint64_t v = 0;
    for (std::size_t i = pos_ - 8; i < pos_; ++i) v = v << 8 | bytes_[i];
    return v;
  }

  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  geom::Box2D box() {
    geom::Box2D b;
    b.center.x = f64();
    b.center.y = f64();
    b.half.x = f64();
    b.half.y = f64();
    return b;
  }

  std::vector<std::uint8_t> bytes(std::size_t n) {
    if (!take(n)) return {};
    return {bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ - n),
            bytes_.begin() + static_cast<std::ptrdiff_t>(pos_)};
  }

  std::string str(std::size_t n) {
    if (!take(n)) return {};
    return {reinterpret_cast<const char*>(bytes_.data() + pos_ - n), n};
  }

 private:
  bool take(std::size_t n) {
    if (!ok_ || remaining() < n) {
      ok_ = false;
      return false;
    }
    pos_ += n;
    return true;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

template <typename T>
Parsed<T> parsed_ok(T value, std::size_t consumed) {
  Parsed<T> p;
  p.value = std::move(value);
  p.consumed = consumed;
  return p;
}

template <typename T>
Parsed<T> parsed_err(DecodeError e) {
  Parsed<T> p;
  p.error = e;
  return p;
}

// Exact-length check shared by all fixed-layout payload decoders: short
// input and trailing bytes are both length mismatches.
template <typename T>
Parsed<T> finish(const Reader& r, T value, std::size_t total) {
  if (!r.ok() || r.remaining() != 0) return parsed_err<T>(DecodeError::length_mismatch);
  return parsed_ok(std::move(value), total);
}

}  // namespace

const char* to_string(MessageType t) noexcept {
  switch (t) {
    case MessageType::SetupRequest: return "SetupRequest";
    case MessageType::SetupResponse: return "SetupResponse";
    case MessageType::SubscriptionRequest: return "SubscriptionRequest";
    case MessageType::SubscriptionDeleteRequest: return "SubscriptionDeleteRequest";
    case MessageType::ControlRequest: return "ControlRequest";
    case MessageType::SensingIndication: return "SensingIndication";
  }
  return "?";
}

const char* to_string(PayloadKind k) noexcept {
  switch (k) {
    case PayloadKind::PriorBlockage: return "PriorBlockage";
    case PayloadKind::Blockage: return "Blockage";
    case PayloadKind::PostBlockage: return "PostBlockage";
    case PayloadKind::SnrReport: return "SnrReport";
    case PayloadKind::SyntheticPad: return "SyntheticPad";
  }
  return "?";
}

const char* to_string(DecodeError e) noexcept {
  switch (e) {
    case DecodeError::none: return "none";
    case DecodeError::bad_magic: return "bad magic";
    case DecodeError::unknown_version: return "unknown version";
    case DecodeError::unknown_type: return "unknown message type";
    case DecodeError::unknown_tag: return "unknown payload tag";
    case DecodeError::truncated: return "truncated frame";
    case DecodeError::length_mismatch: return "length mismatch";
    case DecodeError::oversize: return "oversize frame";
  }
  return "?";
}

PayloadKind payload_kind(const SensingPayload& p) noexcept {
  return static_cast<PayloadKind>(static_cast<std::uint8_t>(p.index()) + 1);
}

std::uint32_t synthetic_pad_length(std::size_t wire_size) {
  if (wire_size < kSyntheticPadOverhead)
    throw std::invalid_argument("wire size below the 33-byte SyntheticPad minimum");
  return static_cast<std::uint32_t>(wire_size - kSyntheticPadOverhead);
}

bool Subscription::matches(std::uint32_t agent_id, PayloadKind kind) const {
  for (const auto& f : filters) {
    const bool agent_ok = f.agent_id == kAnyAgent || f.agent_id == agent_id;
    const bool kind_ok = !f.kind.has_value() || *f.kind == kind;
    if (agent_ok && kind_ok) return true;
  }
  return false;
}

// --- envelope ---------------------------------------------------------------

std::vector<std::uint8_t> encode(const MessageEnvelope& msg) {
  if (msg.payload.size() > 0xFFFFFFFFull)
    throw std::length_error("payload exceeds 32-bit length field");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + msg.payload.size());
  put_u8(out, kMagic0);
  put_u8(out, kMagic1);
  put_u8(out, kVersion);
  put_u8(out, static_cast<std::uint8_t>(msg.type));
  put_u32(out, msg.agent_id);
  put_u64(out, msg.seq);
  put_u64(out, msg.send_timestamp_ns);
  put_u32(out, static_cast<std::uint32_t>(msg.payload.size()));
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

Parsed<MessageEnvelope> decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2) return parsed_err<MessageEnvelope>(DecodeError::truncated);
  if (bytes[0] != kMagic0 || bytes[1] != kMagic1)
    return parsed_err<MessageEnvelope>(DecodeError::bad_magic);
  if (bytes.size() < 3) return parsed_err<MessageEnvelope>(DecodeError::truncated);
  if (bytes[2] != kVersion) return parsed_err<MessageEnvelope>(DecodeError::unknown_version);
  if (bytes.size() < 4) return parsed_err<MessageEnvelope>(DecodeError::truncated);
  const std::uint8_t type = bytes[3];
  if (type < static_cast<std::uint8_t>(MessageType::SetupRequest) ||
      type > static_cast<std::uint8_t>(MessageType::SensingIndication))
    return parsed_err<MessageEnvelope>(DecodeError::unknown_type);
  if (bytes.size() < kHeaderSize) return parsed_err<MessageEnvelope>(DecodeError::truncated);

  Reader r(bytes.subspan(4));
  MessageEnvelope msg;
  msg.type = static_cast<MessageType>(type);
  msg.agent_id = r.u32();
  msg.seq = r.u64();
  msg.send_timestamp_ns = r.u64();
  const std::uint32_t payload_len = r.u32();
  const std::size_t frame_len = kHeaderSize + payload_len;
  if (bytes.size() < frame_len) return parsed_err<MessageEnvelope>(DecodeError::truncated);
  msg.payload.assign(bytes.begin() + kHeaderSize,
                     bytes.begin() + static_cast<std::ptrdiff_t>(frame_len));
  return parsed_ok(std::move(msg), frame_len);
}

// --- sensing payloads --------------------------------------------------------

std::vector<std::uint8_t> encode_payload(const SensingPayload& p) {
  std::vector<std::uint8_t> out;
  put_u8(out, static_cast<std::uint8_t>(payload_kind(p)));
  std::visit(
      [&out](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PriorBlockage>) {
          put_u32(out, v.obstacle_id);
          put_box(out, v.box);
          put_u32(out, v.time_to_block_ms);
          put_u64(out, v.frame_index);
          put_u32(out, v.ue_id);
        } else if constexpr (std::is_same_v<T, Blockage>) {
          put_u32(out, v.obstacle_id);
          put_box(out, v.box);
          put_u64(out, v.frame_index);
          put_u32(out, v.ue_id);
        } else if constexpr (std::is_same_v<T, PostBlockage>) {
          put_u32(out, v.obstacle_id);
          put_u64(out, v.frame_index);
          put_u32(out, v.ue_id);
        } else if constexpr (std::is_same_v<T, SnrReport>) {
          put_u32(out, v.ue_id);
          put_i32(out, v.snr_centi_db);
          put_u64(out, v.sample_time_ns);
        } else if constexpr (std::is_same_v<T, SyntheticPad>) {
          put_u32(out, static_cast<std::uint32_t>(v.pad.size()));
          out.insert(out.end(), v.pad.begin(), v.pad.end());
        }
      },
      p);
  return out;
}

Parsed<SensingPayload> decode_sensing(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) return parsed_err<SensingPayload>(DecodeError::length_mismatch);
  const std::uint8_t tag = bytes[0];
  Reader r(bytes.subspan(1));
  const std::size_t total = bytes.size();
  switch (tag) {
    case static_cast<std::uint8_t>(PayloadKind::PriorBlockage): {
      PriorBlockage v;
      v.obstacle_id = r.u32();
      v.box = r.box();
      v.time_to_block_ms = r.u32();
      v.frame_index = r.u64();
      v.ue_id = r.u32();
      return finish<SensingPayload>(r, v, total);
    }
    case static_cast<std::uint8_t>(PayloadKind::Blockage): {
      Blockage v;
      v.obstacle_id = r.u32();
      v.box = r.box();
      v.frame_index = r.u64();
      v.ue_id = r.u32();
      return finish<SensingPayload>(r, v, total);
    }
    case static_cast<std::uint8_t>(PayloadKind::PostBlockage): {
      PostBlockage v;
      v.obstacle_id = r.u32();
      v.frame_index = r.u64();
      v.ue_id = r.u32();
      return finish<SensingPayload>(r, v, total);
    }
    case static_cast<std::uint8_t>(PayloadKind::SnrReport): {
      SnrReport v;
      v.ue_id = r.u32();
      v.snr_centi_db = r.i32();
      v.sample_time_ns = r.u64();
      return finish<SensingPayload>(r, v, total);
    }
    case static_cast<std::uint8_t>(PayloadKind::SyntheticPad): {
      SyntheticPad v;
      const std::uint32_t n = r.u32();
      if (!r.ok() || r.remaining() != n)
        return parsed_err<SensingPayload>(DecodeError::length_mismatch);
      v.pad = r.bytes(n);
      return finish<SensingPayload>(r, std::move(v), total);
    }
    default:
      return parsed_err<SensingPayload>(DecodeError::unknown_tag);
  }
}

std::optional<PayloadKind> peek_sensing_kind(std::span<const std::uint8_t> payload) noexcept {
  if (payload.empty()) return std::nullopt;
  const std::uint8_t tag = payload[0];
  if (tag < static_cast<std::uint8_t>(PayloadKind::PriorBlockage) ||
      tag > static_cast<std::uint8_t>(PayloadKind::SyntheticPad))
    return std::nullopt;
  return static_cast<PayloadKind>(tag);
}

// --- control-plane payloads ---------------------------------------------------

std::vector<std::uint8_t> encode_payload(const SetupRequest& p) {
  std::vector<std::uint8_t> out;
  put_u8(out, static_cast<std::uint8_t>(p.role));
  put_u32(out, p.node_id);
  return out;
}

Parsed<SetupRequest> decode_setup_request(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  SetupRequest v;
  const std::uint8_t role = r.u8();
  v.node_id = r.u32();
  if (role != static_cast<std::uint8_t>(NodeRole::Agent) &&
      role != static_cast<std::uint8_t>(NodeRole::Xapp))
    return parsed_err<SetupRequest>(DecodeError::unknown_tag);
  v.role = static_cast<NodeRole>(role);
  return finish(r, v, bytes.size());
}

std::vector<std::uint8_t> encode_payload(const Response& p) {
  std::vector<std::uint8_t> out;
  put_u8(out, static_cast<std::uint8_t>(p.request));
  put_u8(out, p.accepted ? 1 : 0);
  put_u32(out, p.ref_id);
  put_u16(out, static_cast<std::uint16_t>(p.detail.size()));
  out.insert(out.end(), p.detail.begin(), p.detail.end());
  return out;
}

Parsed<Response> decode_response(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Response v;
  v.request = static_cast<MessageType>(r.u8());
  v.accepted = r.u8() != 0;
  v.ref_id = r.u32();
  const std::uint16_t n = r.u16();
  v.detail = r.str(n);
  return finish(r, std::move(v), bytes.size());
}

std::vector<std::uint8_t> encode_payload(const Subscription& p) {
  std::vector<std::uint8_t> out;
  put_u32(out, p.xapp_id);
  put_u32(out, p.report_interval_hint_ms);
  put_u16(out, static_cast<std::uint16_t>(p.filters.size()));
  for (const auto& f : p.filters) {
    put_u32(out, f.agent_id);
    put_u8(out, f.kind ? static_cast<std::uint8_t>(*f.kind) : 0xFF);
  }
  return out;
}

Parsed<Subscription> decode_subscription(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Subscription v;
  v.xapp_id = r.u32();
  v.report_interval_hint_ms = r.u32();
  const std::uint16_t n = r.u16();
  for (std::uint16_t i = 0; i < n && r.ok(); ++i) {
    FilterEntry f;
    f.agent_id = r.u32();
    const std::uint8_t kind = r.u8();
    if (kind != 0xFF) {
      if (kind < static_cast<std::uint8_t>(PayloadKind::PriorBlockage) ||
          kind > static_cast<std::uint8_t>(PayloadKind::SyntheticPad))
        return parsed_err<Subscription>(DecodeError::unknown_tag);
      f.kind = static_cast<PayloadKind>(kind);
    }
    v.filters.push_back(f);
  }
  return finish(r, std::move(v), bytes.size());
}

std::vector<std::uint8_t> encode_payload(const SubscriptionDelete& p) {
  std::vector<std::uint8_t> out;
  put_u32(out, p.xapp_id);
  return out;
}

Parsed<SubscriptionDelete> decode_subscription_delete(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  SubscriptionDelete v;
  v.xapp_id = r.u32();
  return finish(r, v, bytes.size());
}

std::vector<std::uint8_t> encode_payload(const ControlCommand& p) {
  std::vector<std::uint8_t> out;
  put_u32(out, p.target_agent_id);
  put_u32(out, static_cast<std::uint32_t>(p.payload.size()));
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  return out;
}

Parsed<ControlCommand> decode_control(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  ControlCommand v;
  v.target_agent_id = r.u32();
  const std::uint32_t n = r.u32();
  if (!r.ok() || r.remaining() != n)
    return parsed_err<ControlCommand>(DecodeError::length_mismatch);
  v.payload = r.bytes(n);
  return finish(r, std::move(v), bytes.size());
}

// --- stream reassembly --------------------------------------------------------

std::vector<MessageEnvelope> FrameAssembler::feed(std::span<const std::uint8_t> chunk) {
  std::vector<MessageEnvelope> out;
  if (poisoned()) return out;
  buf_.insert(buf_.end(), chunk.begin(), chunk.end());
  for (;;) {
    std::span<const std::uint8_t> view(buf_.data() + pos_, buf_.size() - pos_);
    auto parsed = decode(view);
    if (parsed.ok()) {
      out.push_back(std::move(*parsed.value));
      pos_ += parsed.consumed;
      continue;
    }
    if (parsed.error != DecodeError::truncated) {
      error_ = parsed.error;
      return out;
    }
    // Incomplete frame. Refuse to buffer frames beyond the limit; the
    // length field is trusted only once magic/version/type passed above.
    if (view.size() >= kHeaderSize) {
      const std::size_t payload_len = (std::size_t)view[24] << 24 |
                                      (std::size_t)view[25] << 16 |
                                      (std::size_t)view[26] << 8 | view[27];
      if (kHeaderSize + payload_len > max_frame_) {
        error_ = DecodeError::oversize;
        return out;
      }
    }
    break;  // wait for more bytes
  }
  // Compact once the consumed prefix dominates.
  if (pos_ > 4096 && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  return out;
}

}  // namespace riclab::wire
