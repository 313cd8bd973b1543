#include "riclab/broker.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <vector>

#include "riclab/clock.hpp"
#include "riclab/net.hpp"
#include "riclab/wire.hpp"

namespace riclab::broker {

using wire::MessageEnvelope;
using wire::MessageType;

nlohmann::json to_json(const BrokerStats& s) {
  return {{"agents", s.agents},
          {"xapps", s.xapps},
          {"received", s.received},
          {"routed", s.routed},
          {"dropped_unmatched", s.dropped_unmatched},
          {"dropped_overflow", s.dropped_overflow}};
}

namespace {

using SharedBytes = std::shared_ptr<const std::vector<std::uint8_t>>;

// Reverse-index key over (agent id | wildcard, payload kind | wildcard).
std::uint64_t index_key(std::uint32_t agent_id, std::uint8_t kind) {
  return static_cast<std::uint64_t>(agent_id) << 8 | kind;
}
constexpr std::uint8_t kAnyKind = 0xFF;

struct ConnBase {
  net::Socket sock;
  std::thread reader;
  std::mutex write_mu;
  std::uint64_t out_seq = 0;  // guarded by write_mu
  std::atomic<bool> reader_done{false};

  bool send_message(MessageType type, const std::vector<std::uint8_t>& payload) {
    std::lock_guard lk(write_mu);
    MessageEnvelope env{type, 0, out_seq++, monotonic_ns(), payload};
    return sock.send_all(wire::encode(env));
  }

  bool send_response(const wire::Response& r) {
    return send_message(MessageType::SetupResponse, wire::encode_payload(r));
  }
};

struct AgentConn : ConnBase {
  std::uint32_t agent_id = 0;
  bool registered = false;
  bool seq_seen = false;
  std::uint64_t last_seq = 0;
};

struct XappConn : ConnBase {
  std::uint32_t xapp_id = 0;
  bool registered = false;

  std::mutex queue_mu;
  std::condition_variable queue_cv;
  std::deque<SharedBytes> queue;
  bool closing = false;  // no new deliveries; writer drains and exits
  std::thread writer;
};

}  // namespace

struct Broker::Impl {
  BrokerConfig config;
  net::Listener agent_listener;
  net::Listener xapp_listener;
  std::thread agent_accept;
  std::thread xapp_accept;
  std::thread stats_thread;
  std::atomic<bool> running{false};

  std::atomic<std::uint64_t> received{0};
  std::atomic<std::uint64_t> routed{0};
  std::atomic<std::uint64_t> dropped_unmatched{0};
  std::atomic<std::uint64_t> dropped_overflow{0};

  // Registries, subscription index and pending control relays. A routed
  // message snapshots its targets under this mutex, so it observes any
  // table update entirely or not at all.
  std::mutex table_mu;
  std::map<std::uint32_t, AgentConn*> agents;
  std::map<std::uint32_t, XappConn*> xapps;
  std::unordered_map<std::uint64_t, std::vector<XappConn*>> sub_index;
  std::map<std::uint32_t, wire::Subscription> subscriptions;  // by xapp id
  // (target agent id, forwarded seq) -> (xapp id, xapp's control seq)
  std::map<std::pair<std::uint32_t, std::uint64_t>, std::pair<std::uint32_t, std::uint64_t>>
      pending_controls;
  std::uint32_t next_assigned_id = 1;

  std::mutex conns_mu;
  std::vector<std::unique_ptr<AgentConn>> agent_conns;
  std::vector<std::unique_ptr<XappConn>> xapp_conns;

  // --- subscription table ----------------------------------------------------

  void index_insert(const wire::Subscription& sub, XappConn* conn) {
    for (const auto& f : sub.filters) {
      const std::uint8_t kind = f.kind ? static_cast<std::uint8_t>(*f.kind) : kAnyKind;
      sub_index[index_key(f.agent_id, kind)].push_back(conn);
    }
  }

  void index_erase(XappConn* conn) {
    for (auto it = sub_index.begin(); it != sub_index.end();) {
      auto& vec = it->second;
      std::erase(vec, conn);
      it = vec.empty() ? sub_index.erase(it) : std::next(it);
    }
  }

  void set_subscription(XappConn* conn, const wire::Subscription& sub) {
    std::lock_guard lk(table_mu);
    index_erase(conn);
    subscriptions[conn->xapp_id] = sub;
    index_insert(sub, conn);
  }

  void clear_subscription(XappConn* conn) {
    std::lock_guard lk(table_mu);
    index_erase(conn);
    subscriptions.erase(conn->xapp_id);
  }

  // --- routing ----------------------------------------------------------------

  bool route(AgentConn& from, const MessageEnvelope& env) {
    received.fetch_add(1, std::memory_order_relaxed);
    const auto kind = wire::peek_sensing_kind(env.payload);
    if (!kind) return false;  // unknown tag poisons the link

    if (config.debug_route_delay_ns > 0)
      sleep_until_ns(monotonic_ns() + config.debug_route_delay_ns);

    thread_local std::vector<XappConn*> targets;
    targets.clear();
    {
      std::lock_guard lk(table_mu);
      const std::uint8_t k = static_cast<std::uint8_t>(*kind);
      const std::uint64_t keys[4] = {
          index_key(from.agent_id, k), index_key(from.agent_id, kAnyKind),
          index_key(wire::kAnyAgent, k), index_key(wire::kAnyAgent, kAnyKind)};
      for (const auto key : keys) {
        auto it = sub_index.find(key);
        if (it == sub_index.end()) continue;
        for (XappConn* c : it->second) {
          if (std::find(targets.begin(), targets.end(), c) == targets.end())
            targets.push_back(c);
        }
      }
    }
    if (targets.empty()) {
      dropped_unmatched.fetch_add(1, std::memory_order_relaxed);
      return true;
    }

    auto bytes = std::make_shared<const std::vector<std::uint8_t>>(wire::encode(env));
    for (XappConn* c : targets) {
      bool accepted = false;
      {
        std::lock_guard lk(c->queue_mu);
        if (!c->closing && c->queue.size() < config.subscriber_queue_capacity) {
          c->queue.push_back(bytes);
          accepted = true;
        }
      }
      if (accepted) {
        routed.fetch_add(1, std::memory_order_relaxed);
        c->queue_cv.notify_one();
      } else {
        dropped_overflow.fetch_add(1, std::memory_order_relaxed);
      }
    }
    return true;
  }

  // --- agent side ---------------------------------------------------------------

  bool handle_agent_message(AgentConn& conn, const MessageEnvelope& env) {
    if (conn.seq_seen && env.seq <= conn.last_seq) return false;  // seq must increase
    conn.seq_seen = true;
    conn.last_seq = env.seq;

    if (!conn.registered) {
      if (env.type != MessageType::SetupRequest) {
        conn.send_response({MessageType::SetupRequest, false, 0, "setup required first"});
        return false;
      }
      auto req = wire::decode_setup_request(env.payload);
      if (!req.ok() || req->role != wire::NodeRole::Agent) {
        conn.send_response({MessageType::SetupRequest, false, 0, "bad setup request"});
        return false;
      }
      std::uint32_t id = req->node_id;
      bool taken = false;
      {
        std::lock_guard lk(table_mu);
        if (id == 0) {
          while (agents.count(next_assigned_id)) ++next_assigned_id;
          id = next_assigned_id++;
        }
        taken = id == wire::kAnyAgent || agents.count(id) > 0;
        if (!taken) {
          agents[id] = &conn;
          conn.agent_id = id;
          conn.registered = true;
        }
      }
      if (taken) {
        conn.send_response(
            {MessageType::SetupRequest, false, id, "agent id already registered"});
        return false;
      }
      return conn.send_response({MessageType::SetupRequest, true, conn.agent_id, ""});
    }

    switch (env.type) {
      case MessageType::SensingIndication:
        return route(conn, env);
      case MessageType::SetupResponse: {
        // Control ack from the agent: relay to the requesting xApp.
        auto resp = wire::decode_response(env.payload);
        if (!resp.ok()) return false;
        if (resp->request != MessageType::ControlRequest) return true;
        XappConn* xapp = nullptr;
        std::uint64_t orig_seq = 0;
        {
          std::lock_guard lk(table_mu);
          auto it = pending_controls.find({conn.agent_id, resp->ref_id});
          if (it == pending_controls.end()) return true;  // stale ack
          auto xit = xapps.find(it->second.first);
          if (xit != xapps.end()) xapp = xit->second;
          orig_seq = it->second.second;
          pending_controls.erase(it);
        }
        if (xapp)
          xapp->send_response(
              {MessageType::ControlRequest, resp->accepted, static_cast<std::uint32_t>(orig_seq),
               resp->detail});
        return true;
      }
      case MessageType::SetupRequest:
        conn.send_response({MessageType::SetupRequest, false, conn.agent_id,
                            "already set up"});
        return false;
      default:
        return false;  // agents have no business sending anything else
    }
  }

  void agent_reader(AgentConn& conn) {
    wire::FrameAssembler assembler;
    std::vector<std::uint8_t> buf(64 * 1024);
    bool alive = true;
    while (alive) {
      const long n = conn.sock.recv_some(buf);
      if (n <= 0) break;
      for (auto& msg : assembler.feed({buf.data(), static_cast<std::size_t>(n)})) {
        if (!handle_agent_message(conn, msg)) {
          alive = false;
          break;
        }
      }
      if (assembler.poisoned()) break;
    }
    deregister_agent(conn);
    conn.sock.shutdown_both();
    conn.reader_done = true;
  }

  void deregister_agent(AgentConn& conn) {
    if (!conn.registered) return;
    std::vector<std::pair<XappConn*, std::uint64_t>> orphaned;
    {
      std::lock_guard lk(table_mu);
      agents.erase(conn.agent_id);
      for (auto it = pending_controls.begin(); it != pending_controls.end();) {
        if (it->first.first == conn.agent_id) {
          auto xit = xapps.find(it->second.first);
          if (xit != xapps.end()) orphaned.emplace_back(xit->second, it->second.second);
          it = pending_controls.erase(it);
        } else {
          ++it;
        }
      }
      conn.registered = false;
    }
    for (auto& [xapp, seq] : orphaned)
      xapp->send_response({MessageType::ControlRequest, false,
                           static_cast<std::uint32_t>(seq), "agent disconnected"});
  }

  // --- xapp side -----------------------------------------------------------------

  bool handle_xapp_message(XappConn& conn, const MessageEnvelope& env) {
    if (!conn.registered) {
      if (env.type != MessageType::SetupRequest) {
        conn.send_response({MessageType::SetupRequest, false, 0, "setup required first"});
        return false;
      }
      auto req = wire::decode_setup_request(env.payload);
      if (!req.ok() || req->role != wire::NodeRole::Xapp) {
        conn.send_response({MessageType::SetupRequest, false, 0, "bad setup request"});
        return false;
      }
      std::uint32_t id = req->node_id;
      bool taken = false;
      {
        std::lock_guard lk(table_mu);
        if (id == 0) {
          while (xapps.count(next_assigned_id)) ++next_assigned_id;
          id = next_assigned_id++;
        }
        taken = xapps.count(id) > 0;
        if (!taken) {
          xapps[id] = &conn;
          conn.xapp_id = id;
          conn.registered = true;
        }
      }
      if (taken) {
        conn.send_response(
            {MessageType::SetupRequest, false, id, "xapp id already registered"});
        return false;
      }
      return conn.send_response({MessageType::SetupRequest, true, conn.xapp_id, ""});
    }

    switch (env.type) {
      case MessageType::SubscriptionRequest: {
        auto sub = wire::decode_subscription(env.payload);
        if (!sub.ok() || !sub->valid() || sub->xapp_id != conn.xapp_id) {
          return conn.send_response({MessageType::SubscriptionRequest, false,
                                     static_cast<std::uint32_t>(env.seq),
                                     "invalid subscription"});
        }
        set_subscription(&conn, *sub.value);
        return conn.send_response(
            {MessageType::SubscriptionRequest, true, static_cast<std::uint32_t>(env.seq), ""});
      }
      case MessageType::SubscriptionDeleteRequest: {
        auto del = wire::decode_subscription_delete(env.payload);
        if (!del.ok() || del->xapp_id != conn.xapp_id)
          return conn.send_response({MessageType::SubscriptionDeleteRequest, false,
                                     static_cast<std::uint32_t>(env.seq), "bad delete"});
        clear_subscription(&conn);
        return conn.send_response({MessageType::SubscriptionDeleteRequest, true,
                                   static_cast<std::uint32_t>(env.seq), ""});
      }
      case MessageType::ControlRequest: {
        auto cmd = wire::decode_control(env.payload);
        if (!cmd.ok())
          return conn.send_response({MessageType::ControlRequest, false,
                                     static_cast<std::uint32_t>(env.seq), "bad control"});
        AgentConn* agent = nullptr;
        {
          std::lock_guard lk(table_mu);
          auto it = agents.find(cmd->target_agent_id);
          if (it != agents.end()) agent = it->second;
        }
        if (!agent)
          return conn.send_response({MessageType::ControlRequest, false,
                                     static_cast<std::uint32_t>(env.seq), "unknown agent"});
        bool sent = false;
        {
          std::lock_guard lk(agent->write_mu);
          const std::uint64_t fwd_seq = agent->out_seq++;
          {
            std::lock_guard tl(table_mu);
            pending_controls[{agent->agent_id, fwd_seq}] = {conn.xapp_id, env.seq};
          }
          MessageEnvelope fwd{MessageType::ControlRequest, 0, fwd_seq, monotonic_ns(),
                              env.payload};
          sent = agent->sock.send_all(wire::encode(fwd));
        }
        if (!sent)
          return conn.send_response({MessageType::ControlRequest, false,
                                     static_cast<std::uint32_t>(env.seq),
                                     "agent unreachable"});
        return true;
      }
      case MessageType::SetupRequest:
        conn.send_response({MessageType::SetupRequest, false, conn.xapp_id, "already set up"});
        return false;
      default:
        return false;
    }
  }

  void xapp_reader(XappConn& conn) {
    wire::FrameAssembler assembler;
    std::vector<std::uint8_t> buf(64 * 1024);
    bool alive = true;
    while (alive) {
      const long n = conn.sock.recv_some(buf);
      if (n <= 0) break;
      for (auto& msg : assembler.feed({buf.data(), static_cast<std::size_t>(n)})) {
        if (!handle_xapp_message(conn, msg)) {
          alive = false;
          break;
        }
      }
      if (assembler.poisoned()) break;
    }
    if (conn.registered) {
      clear_subscription(&conn);
      std::lock_guard lk(table_mu);
      xapps.erase(conn.xapp_id);
      conn.registered = false;
    }
    // The peer is gone; stop the writer without draining.
    {
      std::lock_guard lk(conn.queue_mu);
      conn.closing = true;
      conn.queue.clear();
    }
    conn.queue_cv.notify_all();
    conn.reader_done = true;
  }

  void xapp_writer(XappConn& conn) {
    std::vector<SharedBytes> batch;
    for (;;) {
      {
        std::unique_lock lk(conn.queue_mu);
        conn.queue_cv.wait(lk, [&] { return conn.closing || !conn.queue.empty(); });
        if (conn.queue.empty()) break;  // closing and drained
        const std::size_t take = std::min<std::size_t>(conn.queue.size(), 64);
        batch.assign(conn.queue.begin(), conn.queue.begin() + static_cast<std::ptrdiff_t>(take));
        conn.queue.erase(conn.queue.begin(), conn.queue.begin() + static_cast<std::ptrdiff_t>(take));
      }
      for (const auto& bytes : batch) {
        std::lock_guard lk(conn.write_mu);
        if (!conn.sock.send_all(*bytes)) {
          std::lock_guard qk(conn.queue_mu);
          conn.closing = true;
          conn.queue.clear();
          return;
        }
      }
      batch.clear();
    }
  }

  // --- accept loops -----------------------------------------------------------------

  void accept_agents() {
    while (running) {
      auto sock = agent_listener.accept();
      if (!sock) break;
      auto conn = std::make_unique<AgentConn>();
      conn->sock = std::move(*sock);
      AgentConn* raw = conn.get();
      raw->reader = std::thread([this, raw] { agent_reader(*raw); });
      std::lock_guard lk(conns_mu);
      agent_conns.push_back(std::move(conn));
    }
  }

  void accept_xapps() {
    while (running) {
      auto sock = xapp_listener.accept();
      if (!sock) break;
      auto conn = std::make_unique<XappConn>();
      conn->sock = std::move(*sock);
      XappConn* raw = conn.get();
      raw->reader = std::thread([this, raw] { xapp_reader(*raw); });
      raw->writer = std::thread([this, raw] { xapp_writer(*raw); });
      std::lock_guard lk(conns_mu);
      xapp_conns.push_back(std::move(conn));
    }
  }

  void stats_loop() {
    FILE* out = nullptr;
    if (!config.stats_path.empty()) out = std::fopen(config.stats_path.c_str(), "a");
    while (running) {
      std::this_thread::sleep_for(std::chrono::milliseconds(config.stats_interval_ms));
      if (!running) break;
      const std::string line = to_json(snapshot()).dump();
      std::fprintf(out ? out : stderr, "%s\n", line.c_str());
      std::fflush(out ? out : stderr);
    }
    if (out) std::fclose(out);
  }

  BrokerStats snapshot() {
    BrokerStats s;
    {
      std::lock_guard lk(table_mu);
      s.agents = agents.size();
      s.xapps = xapps.size();
    }
    s.received = received.load();
    s.routed = routed.load();
    s.dropped_unmatched = dropped_unmatched.load();
    s.dropped_overflow = dropped_overflow.load();
    return s;
  }
};

Broker::Broker(BrokerConfig config) : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
}

Broker::~Broker() { stop(); }

void Broker::start() {
  impl_->agent_listener = net::Listener::bind(impl_->config.bind_host, impl_->config.agent_port);
  impl_->xapp_listener = net::Listener::bind(impl_->config.bind_host, impl_->config.xapp_port);
  impl_->running = true;
  impl_->agent_accept = std::thread([this] { impl_->accept_agents(); });
  impl_->xapp_accept = std::thread([this] { impl_->accept_xapps(); });
  if (impl_->config.stats_interval_ms > 0)
    impl_->stats_thread = std::thread([this] { impl_->stats_loop(); });
}

void Broker::stop() {
  if (!impl_->running.exchange(false)) return;
  impl_->agent_listener.close();
  impl_->xapp_listener.close();
  if (impl_->agent_accept.joinable()) impl_->agent_accept.join();
  if (impl_->xapp_accept.joinable()) impl_->xapp_accept.join();

  {
    std::lock_guard lk(impl_->conns_mu);
    for (auto& c : impl_->agent_conns) c->sock.shutdown_both();
    for (auto& c : impl_->agent_conns)
      if (c->reader.joinable()) c->reader.join();

    for (auto& c : impl_->xapp_conns) {
      {
        std::lock_guard qk(c->queue_mu);
        c->closing = true;
      }
      c->queue_cv.notify_all();
      if (c->writer.joinable()) c->writer.join();  // drains first
      c->sock.shutdown_both();
      if (c->reader.joinable()) c->reader.join();
    }
  }
  if (impl_->stats_thread.joinable()) impl_->stats_thread.join();
}

std::uint16_t Broker::agent_port() const { return impl_->agent_listener.port(); }
std::uint16_t Broker::xapp_port() const { return impl_->xapp_listener.port(); }
BrokerStats Broker::stats() const { return impl_->snapshot(); }

}  // namespace riclab::broker
