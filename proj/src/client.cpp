#include "riclab/client.hpp"

#include "riclab/clock.hpp"

namespace riclab::client {

using wire::MessageEnvelope;
using wire::MessageType;

std::optional<BrokerLink> BrokerLink::establish(const net::Endpoint& ep, wire::NodeRole role,
                                                std::uint32_t node_id, std::string* error) {
  auto fail = [&](const std::string& why) -> std::optional<BrokerLink> {
    if (error) *error = why;
    return std::nullopt;
  };

  auto sock = net::connect(ep);
  if (!sock) return fail("cannot connect to " + ep.str());

  BrokerLink link;
  link.sock_ = std::move(*sock);
  if (!link.send(MessageType::SetupRequest, wire::encode_payload(wire::SetupRequest{role, node_id})))
    return fail("setup send failed");

  auto reply = link.recv_message();
  if (!reply || reply->type != MessageType::SetupResponse)
    return fail("no setup response");
  auto resp = wire::decode_response(reply->payload);
  if (!resp.ok()) return fail("malformed setup response");
  if (!resp->accepted)
    return fail(resp->detail.empty() ? "setup rejected" : "setup rejected: " + resp->detail);
  link.node_id_ = resp->ref_id != 0 ? resp->ref_id : node_id;
  return link;
}

bool BrokerLink::send(MessageType type, const std::vector<std::uint8_t>& payload) {
  std::lock_guard lk(*write_mu_);
  MessageEnvelope env{type, node_id_, seq_->fetch_add(1), monotonic_ns(), payload};
  return sock_.send_all(wire::encode(env));
}

bool BrokerLink::send_raw(std::span<const std::uint8_t> bytes) {
  std::lock_guard lk(*write_mu_);
  return sock_.send_all(bytes);
}

bool BrokerLink::send_stamped(std::vector<std::uint8_t>& frame) {
  auto patch_u64 = [&frame](std::size_t offset, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
      frame[offset + static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>(v >> (56 - 8 * i));
  };
  std::lock_guard lk(*write_mu_);
  patch_u64(8, seq_->fetch_add(1));
  patch_u64(16, monotonic_ns());
  return sock_.send_all(frame);
}

std::optional<MessageEnvelope> BrokerLink::recv_message() {
  std::vector<std::uint8_t> buf(64 * 1024);
  for (;;) {
    if (!inbox_.empty()) {
      MessageEnvelope msg = std::move(inbox_.front());
      inbox_.pop_front();
      return msg;
    }
    if (assembler_.poisoned()) return std::nullopt;
    const long n = sock_.recv_some(buf);
    if (n <= 0) return std::nullopt;
    for (auto& m : assembler_.feed({buf.data(), static_cast<std::size_t>(n)}))
      inbox_.push_back(std::move(m));
  }
}

BrokerLink::RecvStatus BrokerLink::recv_message_timeout(MessageEnvelope& out, int timeout_ms) {
  std::vector<std::uint8_t> buf(64 * 1024);
  for (;;) {
    if (!inbox_.empty()) {
      out = std::move(inbox_.front());
      inbox_.pop_front();
      return RecvStatus::message;
    }
    if (assembler_.poisoned()) return RecvStatus::closed;
    const long n = sock_.recv_some_timeout(buf, timeout_ms);
    if (n == net::Socket::kRecvTimeout) return RecvStatus::timeout;
    if (n <= 0) return RecvStatus::closed;
    for (auto& m : assembler_.feed({buf.data(), static_cast<std::size_t>(n)}))
      inbox_.push_back(std::move(m));
  }
}

void ControlResponder::start(BrokerLink& link) {
  thread_ = std::thread([this, &link] {
    while (auto msg = link.recv_message()) {
      if (msg->type != MessageType::ControlRequest) continue;
      wire::Response ack{MessageType::ControlRequest, true,
                         static_cast<std::uint32_t>(msg->seq), ""};
      link.send(MessageType::SetupResponse, wire::encode_payload(ack));
    }
    if (!stopping_) peer_closed_ = true;
  });
}

void ControlResponder::stop(BrokerLink& link) {
  stopping_ = true;
  link.shutdown();
  if (thread_.joinable()) thread_.join();
}

ControlResponder::~ControlResponder() {
  if (thread_.joinable()) thread_.join();
}

}  // namespace riclab::client
