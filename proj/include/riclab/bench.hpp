#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace riclab::bench {

struct SupportThresholds {
  double mean_ms = 1.0;
  double p99_ms = 5.0;
  std::uint64_t max_loss = 0;
};

struct BenchConfig {
  std::vector<std::uint32_t> agents{1, 2, 3, 4, 5, 6};
  std::vector<std::uint32_t> sizes_bytes{16, 64, 256, 1024, 2048};  // pad length
  std::vector<std::uint32_t> rates_per_agent{500, 1000, 2000, 5000};
  std::uint32_t duration_s = 10;
  std::uint32_t repetitions = 3;
  SupportThresholds thresholds;
  /// Default sweeps only the three figure views (sizes x agents at
  /// 1000 msg/s, agents x rates at 16 B); false runs the full grid.
  bool paper_views_only = true;
  std::uint32_t view_rate = 1000;
  std::uint32_t view_size = 16;
  /// One process per agent by default; in-process threads for tests.
  bool agents_in_process = false;
  std::uint64_t debug_route_delay_ns = 0;  // routing-delay test hook
  std::size_t queue_capacity = 65536;
  /// Records received in the first warmup window are excluded from stats
  /// (connection setup and first-touch effects), not from the loss audit.
  std::uint32_t warmup_ms = 200;
  /// Runs a SCHED_IDLE spinner during each repetition. Low-rate cells
  /// otherwise idle the CPU between messages and the frequency governor
  /// downclocks them, skewing cross-cell comparisons; the spinner only
  /// consumes cycles nothing else wants.
  bool keep_cpu_warm = true;
  /// When set, every repetition dumps its raw latency records here
  /// (records_a{agents}_s{size}_r{rate}_rep{k}.csv). Large.
  std::string raw_records_dir;

  void validate() const;  // throws std::invalid_argument
};

BenchConfig bench_config_from_json(const nlohmann::json& j);
BenchConfig load_bench_config_file(const std::string& path);

struct LatencyRecord {
  std::uint32_t agent_id = 0;
  std::uint64_t seq = 0;
  std::uint64_t send_ns = 0;
  std::uint64_t recv_ns = 0;

  std::int64_t delay_ns() const {
    return static_cast<std::int64_t>(recv_ns) - static_cast<std::int64_t>(send_ns);
  }
};

struct Stats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
  std::uint64_t count = 0;
};

/// Exact mean and nearest-rank percentiles over the full sample.
/// Throws std::invalid_argument on empty input.
Stats summarize(std::span<const std::int64_t> delays_ns);

struct CellKey {
  std::uint32_t agents = 1;
  std::uint32_t size_bytes = 16;
  std::uint32_t rate = 1000;
};

struct RepetitionResult {
  Stats stats;
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::uint64_t loss = 0;      // sent - received after drain
  std::uint64_t overflow = 0;  // broker queue drops
  std::uint64_t unmatched = 0;
  std::uint64_t negative_delays = 0;
  bool fifo_ok = true;      // per-agent seq strictly increasing
  bool conservation_ok = true;  // sent == received + overflow + unmatched
};

struct CellReport {
  CellKey key;
  std::vector<RepetitionResult> reps;
  double median_mean_ms = 0.0;
  double median_p99_ms = 0.0;
  std::uint64_t loss_total = 0;
  bool supported = false;
  bool valid = false;  // false when an agent failed (invalid, not unsupported)
  std::string error;

  nlohmann::json to_json() const;
};

struct BenchReport {
  std::vector<CellReport> cells;
  bool audits_ok = true;  // every conservation/fifo/non-negativity audit passed
  /// How agents were hosted for this run (they share one machine either
  /// way; the report records the placement rather than fixing it).
  std::string agent_placement;
  nlohmann::json to_json() const;
};

const CellReport* find_cell(const BenchReport& report, CellKey key);

/// Runs one sweep cell: broker + measurement xApp + N load agents at
/// (size, rate), repeated config.repetitions times.
CellReport run_cell(const BenchConfig& config, CellKey key);

BenchReport run_sweep(const BenchConfig& config);

/// cells.csv plus the three figure-view CSVs under out_dir.
void write_csvs(const BenchReport& report, const BenchConfig& config,
                const std::string& out_dir);

}  // namespace riclab::bench
