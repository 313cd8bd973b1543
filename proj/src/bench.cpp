#include "riclab/bench.hpp"

#include <pthread.h>
#include <sched.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>
#include <unordered_map>

#include "riclab/agent.hpp"
#include "riclab/broker.hpp"
#include "riclab/clock.hpp"
#include "riclab/xapp.hpp"
#include "subprocess.hpp"

namespace riclab::bench {

void BenchConfig::validate() const {
  if (agents.empty() || sizes_bytes.empty() || rates_per_agent.empty())
    throw std::invalid_argument("bench: sweep lists must be nonempty");
  if (duration_s < 1) throw std::invalid_argument("bench: duration must be >= 1 s");
  if (repetitions < 1) throw std::invalid_argument("bench: repetitions must be >= 1");
  for (const auto r : rates_per_agent)
    if (r < 1) throw std::invalid_argument("bench: rate must be >= 1");
  for (const auto a : agents)
    if (a < 1) throw std::invalid_argument("bench: agent count must be >= 1");
}

BenchConfig bench_config_from_json(const nlohmann::json& j) {
  BenchConfig config;
  if (j.contains("agents")) config.agents = j.at("agents").get<std::vector<std::uint32_t>>();
  if (j.contains("sizes_bytes"))
    config.sizes_bytes = j.at("sizes_bytes").get<std::vector<std::uint32_t>>();
  if (j.contains("rates_per_agent"))
    config.rates_per_agent = j.at("rates_per_agent").get<std::vector<std::uint32_t>>();
  config.duration_s = j.value("duration_s", config.duration_s);
  config.repetitions = j.value("repetitions", config.repetitions);
  config.paper_views_only = j.value("paper_views_only", config.paper_views_only);
  config.view_rate = j.value("view_rate", config.view_rate);
  config.view_size = j.value("view_size", config.view_size);
  config.agents_in_process = j.value("agents_in_process", config.agents_in_process);
  config.queue_capacity = j.value("queue_capacity", config.queue_capacity);
  config.warmup_ms = j.value("warmup_ms", config.warmup_ms);
  config.keep_cpu_warm = j.value("keep_cpu_warm", config.keep_cpu_warm);
  config.raw_records_dir = j.value("raw_records_dir", config.raw_records_dir);
  if (j.contains("thresholds")) {
    const auto& jt = j.at("thresholds");
    config.thresholds.mean_ms = jt.value("mean_ms", config.thresholds.mean_ms);
    config.thresholds.p99_ms = jt.value("p99_ms", config.thresholds.p99_ms);
    config.thresholds.max_loss = jt.value("max_loss", config.thresholds.max_loss);
  }
  config.validate();
  return config;
}

BenchConfig load_bench_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open bench config: " + path);
  nlohmann::json j;
  in >> j;
  return bench_config_from_json(j);
}

Stats summarize(std::span<const std::int64_t> delays_ns) {
  if (delays_ns.empty()) throw std::invalid_argument("summarize: empty input");
  std::vector<std::int64_t> sorted(delays_ns.begin(), delays_ns.end());
  std::sort(sorted.begin(), sorted.end());

  long double sum = 0.0L;
  for (const auto d : sorted) sum += static_cast<long double>(d);

  auto nearest_rank = [&sorted](unsigned pct) {
    const std::size_t rank = (sorted.size() * pct + 99) / 100;  // ceil, 1-indexed
    return sorted[std::min(std::max<std::size_t>(rank, 1), sorted.size()) - 1];
  };

  Stats s;
  s.count = sorted.size();
  s.mean_ms = static_cast<double>(sum / static_cast<long double>(sorted.size())) / 1e6;
  s.p50_ms = static_cast<double>(nearest_rank(50)) / 1e6;
  s.p95_ms = static_cast<double>(nearest_rank(95)) / 1e6;
  s.p99_ms = static_cast<double>(nearest_rank(99)) / 1e6;
  s.max_ms = static_cast<double>(sorted.back()) / 1e6;
  return s;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

// --- agent subprocesses ------------------------------------------------------

agent::SendReport collect_load_agent(std::uint32_t agent_id, subprocess::Child child) {
  agent::SendReport report;
  report.agent_id = agent_id;
  const std::string out = subprocess::read_all(child.out_fd);
  const int code = subprocess::wait_exit(child.pid);
  try {
    report = agent::SendReport::from_json(nlohmann::json::parse(out));
  } catch (const std::exception&) {
    report.failed = true;
    report.error = "agent subprocess produced no report (exit " + std::to_string(code) + ")";
  }
  return report;
}

// Keeps the CPU clock up for the duration of a repetition without starving
// anyone: SCHED_IDLE only runs when the core would otherwise be idle.
class CpuWarmer {
 public:
  explicit CpuWarmer(bool enabled) {
    if (!enabled) return;
    thread_ = std::thread([this] {
      sched_param param{};
      pthread_setschedparam(pthread_self(), SCHED_IDLE, &param);
      while (!stop_.load(std::memory_order_relaxed)) {
      }
    });
  }
  ~CpuWarmer() {
    stop_.store(true);
    if (thread_.joinable()) thread_.join();
  }

 private:
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

void dump_raw_records(const BenchConfig& config, CellKey key, std::uint32_t rep_index,
                      const std::vector<LatencyRecord>& records) {
  namespace fs = std::filesystem;
  fs::create_directories(config.raw_records_dir);
  char name[128];
  std::snprintf(name, sizeof(name), "records_a%u_s%u_r%u_rep%u.csv", key.agents,
                key.size_bytes, key.rate, rep_index);
  std::ofstream os(fs::path(config.raw_records_dir) / name);
  os << "agent_id,seq,send_ns,recv_ns,delay_ns\n";
  char line[160];
  for (const auto& r : records) {
    std::snprintf(line, sizeof(line), "%u,%llu,%llu,%llu,%lld\n", r.agent_id,
                  static_cast<unsigned long long>(r.seq),
                  static_cast<unsigned long long>(r.send_ns),
                  static_cast<unsigned long long>(r.recv_ns),
                  static_cast<long long>(r.delay_ns()));
    os << line;
  }
}

RepetitionResult run_repetition(const BenchConfig& config, CellKey key, std::uint32_t rep_index,
                                std::string* error) {
  RepetitionResult rep;
  CpuWarmer warmer(config.keep_cpu_warm);

  broker::BrokerConfig bcfg;
  bcfg.subscriber_queue_capacity = config.queue_capacity;
  bcfg.debug_route_delay_ns = config.debug_route_delay_ns;
  broker::Broker broker(bcfg);
  broker.start();
  const net::Endpoint agent_ep{"127.0.0.1", broker.agent_port()};
  const net::Endpoint xapp_ep{"127.0.0.1", broker.xapp_port()};

  auto session = xapp::XappSession::connect(xapp_ep, 9000);
  session.subscribe({{wire::kAnyAgent, wire::PayloadKind::SyntheticPad}});

  std::vector<LatencyRecord> records;
  records.reserve(static_cast<std::size_t>(key.agents) * key.rate * config.duration_s + 1024);
  std::atomic<std::uint64_t> received{0};
  std::unordered_map<std::uint32_t, std::uint64_t> last_seq;
  bool fifo_ok = true;

  std::thread rx([&] {
    session.run([&](const xapp::ReceivedIndication& ind) {
      records.push_back({ind.agent_id, ind.seq, ind.send_ns, ind.recv_ns});
      auto [it, fresh] = last_seq.try_emplace(ind.agent_id, ind.seq);
      if (!fresh) {
        if (ind.seq <= it->second) fifo_ok = false;
        it->second = ind.seq;
      }
      received.fetch_add(1, std::memory_order_relaxed);
      return true;
    });
  });

  const std::uint64_t epoch_ns = monotonic_ns();

  // Launch the load agents.
  std::vector<agent::SendReport> reports(key.agents);
  if (config.agents_in_process) {
    std::vector<std::thread> threads;
    threads.reserve(key.agents);
    for (std::uint32_t i = 0; i < key.agents; ++i) {
      threads.emplace_back([&, i] {
        const agent::LoadProfile profile{key.size_bytes, key.rate, config.duration_s, i + 1};
        reports[i] = agent::run_load_agent(profile, agent_ep);
      });
    }
    for (auto& t : threads) t.join();
  } else {
    const std::string bin = subprocess::runner_binary();
    std::vector<subprocess::Child> children(key.agents);
    for (std::uint32_t i = 0; i < key.agents; ++i) {
      auto child = subprocess::spawn_capture(
          {bin, "agent", "load", "--broker", agent_ep.str(), "--agent-id",
           std::to_string(i + 1), "--rate", std::to_string(key.rate), "--size",
           std::to_string(key.size_bytes), "--duration", std::to_string(config.duration_s)});
      if (!child) {
        if (error) *error = "failed to spawn agent subprocess";
        for (std::uint32_t j = 0; j < i; ++j) {
          subprocess::read_all(children[j].out_fd);
          subprocess::wait_exit(children[j].pid);
        }
        session.stop();
        rx.join();
        session.close();
        broker.stop();
        rep.conservation_ok = false;
        return rep;
      }
      children[i] = *child;
    }
    for (std::uint32_t i = 0; i < key.agents; ++i)
      reports[i] = collect_load_agent(i + 1, children[i]);
  }

  for (const auto& r : reports) {
    rep.sent += r.sent;
    if (r.failed && error && error->empty())
      *error = "agent " + std::to_string(r.agent_id) + ": " + r.error;
  }

  // Drain until the conservation identity closes or nothing moves anymore.
  const std::uint64_t drain_deadline = monotonic_ns() + 5'000'000'000ull;
  std::uint64_t last_count = received.load();
  std::uint64_t last_change = monotonic_ns();
  for (;;) {
    const auto stats = broker.stats();
    const std::uint64_t have = received.load() + stats.dropped_overflow + stats.dropped_unmatched;
    if (have >= rep.sent) break;
    const std::uint64_t now = monotonic_ns();
    if (now > drain_deadline) break;
    if (received.load() != last_count) {
      last_count = received.load();
      last_change = now;
    } else if (now - last_change > 2'000'000'000ull) {
      break;  // stalled
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }

  session.stop();
  rx.join();
  session.close();
  const auto broker_stats = broker.stats();
  broker.stop();

  rep.received = received.load();
  rep.loss = rep.sent - std::min(rep.sent, rep.received);
  rep.overflow = broker_stats.dropped_overflow;
  rep.unmatched = broker_stats.dropped_unmatched;
  rep.fifo_ok = fifo_ok;
  rep.conservation_ok = rep.sent == rep.received + rep.overflow + rep.unmatched;

  if (!config.raw_records_dir.empty()) dump_raw_records(config, key, rep_index, records);

  // Delay statistics over post-warmup records.
  std::vector<std::int64_t> delays;
  delays.reserve(records.size());
  const std::uint64_t warmup_end = epoch_ns + static_cast<std::uint64_t>(config.warmup_ms) * 1'000'000ull;
  for (const auto& r : records) {
    if (r.delay_ns() < 0) rep.negative_delays++;
    if (r.recv_ns >= warmup_end) delays.push_back(r.delay_ns());
  }
  if (delays.empty())
    for (const auto& r : records) delays.push_back(r.delay_ns());
  if (!delays.empty()) rep.stats = summarize(delays);
  return rep;
}

}  // namespace

nlohmann::json CellReport::to_json() const {
  nlohmann::json jreps = nlohmann::json::array();
  for (const auto& r : reps) {
    jreps.push_back({{"count", r.stats.count},
                     {"mean_ms", r.stats.mean_ms},
                     {"p50_ms", r.stats.p50_ms},
                     {"p95_ms", r.stats.p95_ms},
                     {"p99_ms", r.stats.p99_ms},
                     {"max_ms", r.stats.max_ms},
                     {"sent", r.sent},
                     {"received", r.received},
                     {"loss", r.loss},
                     {"overflow", r.overflow},
                     {"unmatched", r.unmatched},
                     {"fifo_ok", r.fifo_ok},
                     {"conservation_ok", r.conservation_ok}});
  }
  return {{"agents", key.agents},
          {"size_bytes", key.size_bytes},
          {"rate", key.rate},
          {"wire_bytes", key.size_bytes + wire::kSyntheticPadOverhead},
          {"repetitions", std::move(jreps)},
          {"median_mean_ms", median_mean_ms},
          {"median_p99_ms", median_p99_ms},
          {"loss_total", loss_total},
          {"supported", supported},
          {"valid", valid},
          {"error", error}};
}

nlohmann::json BenchReport::to_json() const {
  nlohmann::json jcells = nlohmann::json::array();
  for (const auto& c : cells) jcells.push_back(c.to_json());
  // Support observed on the reference i7-8700 PTP-synchronized testbed;
  // hardware-dependent, recorded for comparison and never asserted.
  const nlohmann::json reference = nlohmann::json::array({
      {{"agents", 6}, {"size_bytes", 16}, {"rate", 1000}, {"supported", true}},
      {{"agents", 1}, {"size_bytes", 2048}, {"rate", 1000}, {"supported", true}},
      {{"agents", 2}, {"size_bytes", 1024}, {"rate", 1000}, {"supported", true}},
      {{"agents", 9}, {"size_bytes", 16}, {"rate", 500}, {"supported", true}},
      {{"agents", 2}, {"size_bytes", 16}, {"rate", 5000}, {"supported", true}},
  });
  return {{"cells", std::move(jcells)},
          {"audits_ok", audits_ok},
          {"agent_placement", agent_placement},
          {"reference_support_matrix", reference},
          {"reference_note",
           "reference values observed on an i7-8700 testbed with PTP-synchronized VMs; "
           "hardware-dependent, not asserted by the suite"}};
}

const CellReport* find_cell(const BenchReport& report, CellKey key) {
  for (const auto& c : report.cells)
    if (c.key.agents == key.agents && c.key.size_bytes == key.size_bytes &&
        c.key.rate == key.rate)
      return &c;
  return nullptr;
}

namespace {

void finalize_cell(const BenchConfig& config, CellReport& cell) {
  std::vector<double> means;
  std::vector<double> p99s;
  for (const auto& r : cell.reps) {
    cell.loss_total += r.loss;
    means.push_back(r.stats.mean_ms);
    p99s.push_back(r.stats.p99_ms);
  }
  cell.median_mean_ms = median(means);
  cell.median_p99_ms = median(p99s);
  cell.supported = cell.valid;
  for (const auto& r : cell.reps) {
    cell.supported = cell.supported && r.stats.mean_ms < config.thresholds.mean_ms &&
                     r.stats.p99_ms < config.thresholds.p99_ms &&
                     r.loss <= config.thresholds.max_loss;
  }
}

}  // namespace

CellReport run_cell(const BenchConfig& config, CellKey key) {
  config.validate();
  CellReport cell;
  cell.key = key;
  cell.valid = true;

  for (std::uint32_t rep = 0; rep < config.repetitions; ++rep) {
    std::string error;
    RepetitionResult r = run_repetition(config, key, rep, &error);
    if (!error.empty()) {
      cell.valid = false;  // an agent failure invalidates the cell
      cell.error = error;
    }
    cell.reps.push_back(std::move(r));
  }
  finalize_cell(config, cell);
  return cell;
}

BenchReport run_sweep(const BenchConfig& config) {
  config.validate();
  std::vector<CellKey> keys;
  auto add_key = [&keys](CellKey k) {
    for (const auto& e : keys)
      if (e.agents == k.agents && e.size_bytes == k.size_bytes && e.rate == k.rate) return;
    keys.push_back(k);
  };
  if (config.paper_views_only) {
    for (const auto a : config.agents)
      for (const auto s : config.sizes_bytes) add_key({a, s, config.view_rate});
    for (const auto a : config.agents)
      for (const auto r : config.rates_per_agent) add_key({a, config.view_size, r});
  } else {
    for (const auto a : config.agents)
      for (const auto s : config.sizes_bytes)
        for (const auto r : config.rates_per_agent) add_key({a, s, r});
  }

  // Repetition-major order: each pass covers every cell, so slow drift
  // (thermal state, cpu governor) lands on all cells rather than skewing
  // whichever cells happen to run first.
  std::vector<CellReport> cells(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    cells[i].key = keys[i];
    cells[i].valid = true;
  }
  for (std::uint32_t rep = 0; rep < config.repetitions; ++rep) {
    for (std::size_t i = 0; i < keys.size(); ++i) {
      std::string error;
      RepetitionResult r = run_repetition(config, keys[i], rep, &error);
      if (!error.empty()) {
        cells[i].valid = false;
        cells[i].error = error;
      }
      cells[i].reps.push_back(std::move(r));
    }
  }

  BenchReport report;
  report.agent_placement =
      config.agents_in_process ? "in-process threads, one host" : "one process per agent, one host";
  for (auto& cell : cells) {
    finalize_cell(config, cell);
    for (const auto& r : cell.reps)
      report.audits_ok = report.audits_ok && r.conservation_ok && r.fifo_ok &&
                         r.negative_delays == 0;
    report.cells.push_back(std::move(cell));
  }
  return report;
}

void write_csvs(const BenchReport& report, const BenchConfig& config,
                const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  char line[512];

  std::ofstream cells(fs::path(out_dir) / "cells.csv");
  cells << "agents,size_bytes,rate,wire_bytes,rep,count,mean_ms,p50_ms,p95_ms,p99_ms,"
           "max_ms,sent,received,loss,overflow,unmatched,valid,supported\n";
  for (const auto& c : report.cells) {
    const std::size_t wire_bytes = c.key.size_bytes + wire::kSyntheticPadOverhead;
    for (std::size_t i = 0; i < c.reps.size(); ++i) {
      const auto& r = c.reps[i];
      std::snprintf(line, sizeof(line),
                    "%u,%u,%u,%zu,%zu,%llu,%.6f,%.6f,%.6f,%.6f,%.6f,%llu,%llu,%llu,%llu,"
                    "%llu,%d,\n",
                    c.key.agents, c.key.size_bytes, c.key.rate, wire_bytes, i,
                    static_cast<unsigned long long>(r.stats.count), r.stats.mean_ms,
                    r.stats.p50_ms, r.stats.p95_ms, r.stats.p99_ms, r.stats.max_ms,
                    static_cast<unsigned long long>(r.sent),
                    static_cast<unsigned long long>(r.received),
                    static_cast<unsigned long long>(r.loss),
                    static_cast<unsigned long long>(r.overflow),
                    static_cast<unsigned long long>(r.unmatched), c.valid ? 1 : 0);
      cells << line;
    }
    std::snprintf(line, sizeof(line),
                  "%u,%u,%u,%zu,agg,,%.6f,,,%.6f,,,,%llu,,,%d,%d\n", c.key.agents,
                  c.key.size_bytes, c.key.rate, wire_bytes, c.median_mean_ms,
                  c.median_p99_ms, static_cast<unsigned long long>(c.loss_total),
                  c.valid ? 1 : 0, c.supported ? 1 : 0);
    cells << line;
  }

  auto write_view = [&](const std::string& name, auto&& predicate) {
    std::ofstream os(fs::path(out_dir) / name);
    os << "agents,size_bytes,rate,median_mean_ms,median_p99_ms,supported,valid\n";
    for (const auto& c : report.cells) {
      if (!predicate(c.key)) continue;
      std::snprintf(line, sizeof(line), "%u,%u,%u,%.6f,%.6f,%d,%d\n", c.key.agents,
                    c.key.size_bytes, c.key.rate, c.median_mean_ms, c.median_p99_ms,
                    c.supported ? 1 : 0, c.valid ? 1 : 0);
      os << line;
    }
  };
  write_view("latency_vs_size.csv",
             [&](CellKey k) { return k.rate == config.view_rate; });
  write_view("latency_vs_agents.csv",
             [&](CellKey k) { return k.size_bytes == config.view_size; });
  write_view("latency_vs_rate.csv",
             [&](CellKey k) { return k.size_bytes == config.view_size; });
}

}  // namespace riclab::bench
