#pragma once

// Wire protocol shared by the broker, agents and xApps.
//
// Every message is one frame:
//
//   offset  size  field
//   0       2     magic 0xC0 0x9E
//   2       1     version (1)
//   3       1     msg_type
//   4       4     agent_id          (sender id; broker uses 0)
//   8       8     seq               (strictly increasing per connection)
//   16      8     send_timestamp_ns (monotonic clock, stamped at send)
//   24      4     payload_len
//   28      N     payload
//
// All multi-byte integers are big-endian; doubles travel as the big-endian
// byte order of their IEEE-754 bits. Payload encodings per message type are
// documented in docs/wire-format.md together with golden hex vectors.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "riclab/geometry.hpp"

namespace riclab::wire {

inline constexpr std::uint8_t kMagic0 = 0xC0;
inline constexpr std::uint8_t kMagic1 = 0x9E;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 28;
/// On-wire bytes of a SyntheticPad envelope beyond the pad itself:
/// header + kind tag + 4-byte pad length.
inline constexpr std::size_t kSyntheticPadOverhead = kHeaderSize + 5;
/// Wildcard agent id in subscription filters; real agents must not use it.
inline constexpr std::uint32_t kAnyAgent = 0xFFFFFFFFu;

enum class MessageType : std::uint8_t {
  SetupRequest = 0x01,
  SetupResponse = 0x02,
  SubscriptionRequest = 0x03,
  SubscriptionDeleteRequest = 0x04,
  ControlRequest = 0x05,
  SensingIndication = 0x06,
};

enum class PayloadKind : std::uint8_t {
  PriorBlockage = 0x01,
  Blockage = 0x02,
  PostBlockage = 0x03,
  SnrReport = 0x04,
  SyntheticPad = 0x05,
};

const char* to_string(MessageType t) noexcept;
const char* to_string(PayloadKind k) noexcept;

// ---------------------------------------------------------------------------
// Sensing payloads (SensingIndication body, tag byte first)
// ---------------------------------------------------------------------------

struct PriorBlockage {
  std::uint32_t obstacle_id = 0;
  geom::Box2D box;
  std::uint32_t time_to_block_ms = 0;  // > 0
  std::uint64_t frame_index = 0;
  std::uint32_t ue_id = 0;
  friend bool operator==(const PriorBlockage&, const PriorBlockage&) = default;
};

struct Blockage {
  std::uint32_t obstacle_id = 0;
  geom::Box2D box;
  std::uint64_t frame_index = 0;
  std::uint32_t ue_id = 0;
  friend bool operator==(const Blockage&, const Blockage&) = default;
};

struct PostBlockage {
  std::uint32_t obstacle_id = 0;
  std::uint64_t frame_index = 0;
  std::uint32_t ue_id = 0;
  friend bool operator==(const PostBlockage&, const PostBlockage&) = default;
};

struct SnrReport {
  std::uint32_t ue_id = 0;
  std::int32_t snr_centi_db = 0;    // SNR in dB times 100
  std::uint64_t sample_time_ns = 0; // nominal run-relative sample time
  friend bool operator==(const SnrReport&, const SnrReport&) = default;
};

struct SyntheticPad {
  std::vector<std::uint8_t> pad;
  friend bool operator==(const SyntheticPad&, const SyntheticPad&) = default;
};

using SensingPayload =
    std::variant<PriorBlockage, Blockage, PostBlockage, SnrReport, SyntheticPad>;

PayloadKind payload_kind(const SensingPayload& p) noexcept;

/// Pad length that makes a SyntheticPad envelope occupy exactly `wire_size`
/// bytes on the wire. Throws std::invalid_argument below the 33-byte minimum.
std::uint32_t synthetic_pad_length(std::size_t wire_size);

// ---------------------------------------------------------------------------
// Control-plane payloads
// ---------------------------------------------------------------------------

enum class NodeRole : std::uint8_t { Agent = 1, Xapp = 2 };

struct SetupRequest {
  NodeRole role = NodeRole::Agent;
  std::uint32_t node_id = 0;  // 0 = ask the broker to assign one
  friend bool operator==(const SetupRequest&, const SetupRequest&) = default;
};

/// Generic broker/agent response. The enum on the wire has no dedicated ack
/// types beyond SetupResponse, so subscription and control acks ride in
/// SetupResponse-typed envelopes carrying the request type they answer.
struct Response {
  MessageType request = MessageType::SetupRequest;
  bool accepted = false;
  std::uint32_t ref_id = 0;  // assigned node id, or the seq being acked
  std::string detail;
  friend bool operator==(const Response&, const Response&) = default;
};

struct FilterEntry {
  std::uint32_t agent_id = kAnyAgent;   // kAnyAgent = any agent
  std::optional<PayloadKind> kind;      // nullopt = any payload kind
  friend bool operator==(const FilterEntry&, const FilterEntry&) = default;
};

struct Subscription {
  std::uint32_t xapp_id = 0;
  std::vector<FilterEntry> filters;          // must be nonempty
  std::uint32_t report_interval_hint_ms = 0; // 0 = every message

  bool valid() const { return !filters.empty(); }
  bool matches(std::uint32_t agent_id, PayloadKind kind) const;
  friend bool operator==(const Subscription&, const Subscription&) = default;
};

struct SubscriptionDelete {
  std::uint32_t xapp_id = 0;
  friend bool operator==(const SubscriptionDelete&, const SubscriptionDelete&) = default;
};

struct ControlCommand {
  std::uint32_t target_agent_id = 0;
  std::vector<std::uint8_t> payload;  // opaque, may be empty
  friend bool operator==(const ControlCommand&, const ControlCommand&) = default;
};

// ---------------------------------------------------------------------------
// Envelope
// ---------------------------------------------------------------------------

struct MessageEnvelope {
  MessageType type = MessageType::SensingIndication;
  std::uint32_t agent_id = 0;
  std::uint64_t seq = 0;
  std::uint64_t send_timestamp_ns = 0;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const MessageEnvelope&, const MessageEnvelope&) = default;
};

enum class DecodeError : std::uint8_t {
  none = 0,
  bad_magic,
  unknown_version,
  unknown_type,
  unknown_tag,
  truncated,       // recoverable: need more bytes
  length_mismatch, // inner length field disagrees with the data
  oversize,        // frame larger than the assembler's limit
};

const char* to_string(DecodeError e) noexcept;

template <typename T>
struct Parsed {
  std::optional<T> value;
  DecodeError error = DecodeError::none;
  std::size_t consumed = 0;  // bytes consumed when value is set

  bool ok() const { return value.has_value(); }
  const T& operator*() const { return *value; }
  const T* operator->() const { return &*value; }
};

/// Deterministic encoding; identical envelopes produce identical bytes.
/// Throws std::length_error if the payload exceeds the 32-bit length field.
std::vector<std::uint8_t> encode(const MessageEnvelope& msg);

/// Decodes exactly one frame from the front of `bytes`. Returns `truncated`
/// while the frame is incomplete; every other error is fatal for the stream.
Parsed<MessageEnvelope> decode(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_payload(const SensingPayload& p);
std::vector<std::uint8_t> encode_payload(const SetupRequest& p);
std::vector<std::uint8_t> encode_payload(const Response& p);
std::vector<std::uint8_t> encode_payload(const Subscription& p);
std::vector<std::uint8_t> encode_payload(const SubscriptionDelete& p);
std::vector<std::uint8_t> encode_payload(const ControlCommand& p);

Parsed<SensingPayload> decode_sensing(std::span<const std::uint8_t> bytes);
Parsed<SetupRequest> decode_setup_request(std::span<const std::uint8_t> bytes);
Parsed<Response> decode_response(std::span<const std::uint8_t> bytes);
Parsed<Subscription> decode_subscription(std::span<const std::uint8_t> bytes);
Parsed<SubscriptionDelete> decode_subscription_delete(std::span<const std::uint8_t> bytes);
Parsed<ControlCommand> decode_control(std::span<const std::uint8_t> bytes);

/// Kind tag of a sensing payload without decoding the body; nullopt when the
/// payload is empty or the tag is unknown.
std::optional<PayloadKind> peek_sensing_kind(std::span<const std::uint8_t> payload) noexcept;

template <typename P>
MessageEnvelope make_message(MessageType type, std::uint32_t sender_id,
                             std::uint64_t seq, std::uint64_t ts_ns, const P& p) {
  return MessageEnvelope{type, sender_id, seq, ts_ns, encode_payload(p)};
}

inline MessageEnvelope make_indication(std::uint32_t agent_id, std::uint64_t seq,
                                       std::uint64_t ts_ns, const SensingPayload& p) {
  return make_message(MessageType::SensingIndication, agent_id, seq, ts_ns, p);
}

// ---------------------------------------------------------------------------
// Stream reassembly
// ---------------------------------------------------------------------------

/// Reassembles envelopes from an ordered byte stream regardless of chunk
/// boundaries. Any decode error other than "incomplete frame" poisons the
/// stream: feed() stops yielding and error() reports the cause.
class FrameAssembler {
 public:
  static constexpr std::size_t kDefaultMaxFrame = 64u << 20;

  explicit FrameAssembler(std::size_t max_frame_bytes = kDefaultMaxFrame)
      : max_frame_(max_frame_bytes) {}

  std::vector<MessageEnvelope> feed(std::span<const std::uint8_t> chunk);

  bool poisoned() const { return error_ != DecodeError::none; }
  DecodeError error() const { return error_; }
  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::size_t max_frame_;
  DecodeError error_ = DecodeError::none;
};

}  // namespace riclab::wire
