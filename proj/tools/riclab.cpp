// riclab: desk-scale vision-radio sensing testbed.
//
// Subcommands: broker, agent (load|cvf|radio), xapp fuse, bench, usecase,
// scene dump. Exit codes: 0 ok, 1 runtime failure, 2 bind failure,
// 3 connect failure, 4 invalid configuration.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "riclab/agent.hpp"
#include "riclab/bench.hpp"
#include "riclab/broker.hpp"
#include "riclab/clock.hpp"
#include "riclab/usecase.hpp"
#include "riclab/xapp.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitBind = 2;
constexpr int kExitConnect = 3;
constexpr int kExitConfig = 4;

std::atomic<bool> g_stop{false};

void install_signal_handlers() {
  struct sigaction sa{};
  sa.sa_handler = [](int) { g_stop = true; };
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
}

riclab::net::Endpoint parse_endpoint_or_exit(const std::string& s) {
  try {
    return riclab::net::Endpoint::parse(s);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    std::exit(kExitConfig);
  }
}

riclab::usecase::ScenarioSpec load_scenario_or_exit(const std::string& path) {
  try {
    if (path.empty()) return riclab::usecase::canonical_scenario();
    return riclab::usecase::load_scenario_file(path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    std::exit(kExitConfig);
  }
}

std::string env_or(const char* name, const char* fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

int cmd_broker(std::uint16_t agent_port, std::uint16_t xapp_port, const std::string& bind,
               std::size_t queue_capacity, std::uint32_t stats_interval_ms,
               const std::string& stats_file, std::uint64_t route_delay_ns,
               bool print_ports) {
  riclab::broker::BrokerConfig config;
  config.bind_host = bind;
  config.agent_port = agent_port;
  config.xapp_port = xapp_port;
  config.subscriber_queue_capacity = queue_capacity;
  config.stats_interval_ms = stats_interval_ms;
  config.stats_path = stats_file;
  config.debug_route_delay_ns = route_delay_ns;

  riclab::broker::Broker broker(config);
  try {
    broker.start();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "broker: %s\n", e.what());
    return kExitBind;
  }
  if (print_ports) {
    const nlohmann::json ports = {{"agent_port", broker.agent_port()},
                                  {"xapp_port", broker.xapp_port()}};
    std::printf("%s\n", ports.dump().c_str());
    std::fflush(stdout);
  }
  std::fprintf(stderr, "broker: agents on %s:%u, xapps on %s:%u\n", bind.c_str(),
               broker.agent_port(), bind.c_str(), broker.xapp_port());
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  broker.stop();
  const auto stats = riclab::broker::to_json(broker.stats());
  std::fprintf(stderr, "broker: final %s\n", stats.dump().c_str());
  return 0;
}

int cmd_agent_load(const std::string& broker, std::uint32_t agent_id, std::uint32_t rate,
                   std::uint32_t size, std::uint32_t duration) {
  const auto ep = parse_endpoint_or_exit(broker);
  riclab::agent::LoadProfile profile{size, rate, duration, agent_id};
  try {
    profile.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  const auto report = riclab::agent::run_load_agent(profile, ep);
  std::printf("%s\n", report.to_json().dump().c_str());
  if (report.failed) {
    std::fprintf(stderr, "load agent: %s\n", report.error.c_str());
    return report.sent == 0 ? kExitConnect : kExitRuntime;
  }
  return 0;
}

int cmd_agent_cvf(const std::string& broker, const std::string& scenario_path,
                  std::uint32_t agent_id, std::uint32_t ue_id, double duration_override) {
  const auto ep = parse_endpoint_or_exit(broker);
  const auto spec = load_scenario_or_exit(scenario_path);
  riclab::agent::CvfAgentConfig cfg{agent_id, ue_id,
                                    duration_override > 0 ? duration_override : spec.duration_s,
                                    true};
  const auto report = riclab::agent::run_cvf_agent(spec.scene, spec.cvf, cfg, ep);
  std::printf("%s\n", report.to_json().dump().c_str());
  if (report.failed) {
    std::fprintf(stderr, "cvf agent: %s\n", report.error.c_str());
    return report.frames == 0 ? kExitConnect : kExitRuntime;
  }
  return 0;
}

int cmd_agent_radio(const std::string& broker, const std::string& scenario_path,
                    std::uint32_t agent_id, std::uint32_t ue_id, double duration_override,
                    std::int64_t seed_override) {
  const auto ep = parse_endpoint_or_exit(broker);
  auto spec = load_scenario_or_exit(scenario_path);
  if (seed_override >= 0) spec.radio.rng_seed = static_cast<std::uint64_t>(seed_override);
  riclab::agent::RadioAgentConfig cfg{agent_id, ue_id,
                                      duration_override > 0 ? duration_override : spec.duration_s,
                                      true};
  const auto report = riclab::agent::run_radio_agent(spec.scene, spec.radio, cfg, ep);
  std::printf("%s\n", report.to_json().dump().c_str());
  if (report.failed) {
    std::fprintf(stderr, "radio agent: %s\n", report.error.c_str());
    return report.frames == 0 ? kExitConnect : kExitRuntime;
  }
  return 0;
}

int cmd_xapp_fuse(const std::string& broker, const std::string& scenario_path,
                  const std::string& out_dir, bool normalize, double duration_override) {
  const auto ep = parse_endpoint_or_exit(broker);
  const auto spec = load_scenario_or_exit(scenario_path);
  const double duration_s = duration_override > 0 ? duration_override : spec.duration_s;

  std::unique_ptr<riclab::xapp::XappSession> session;
  try {
    session = std::make_unique<riclab::xapp::XappSession>(
        riclab::xapp::XappSession::connect(ep, 900));
    session->subscribe({{riclab::wire::kAnyAgent, riclab::wire::PayloadKind::PriorBlockage},
                        {riclab::wire::kAnyAgent, riclab::wire::PayloadKind::Blockage},
                        {riclab::wire::kAnyAgent, riclab::wire::PayloadKind::PostBlockage},
                        {riclab::wire::kAnyAgent, riclab::wire::PayloadKind::SnrReport}});
  } catch (const std::exception& e) {
    std::fprintf(stderr, "xapp: %s\n", e.what());
    return kExitConnect;
  }
  std::printf("{\"ready\":true}\n");
  std::fflush(stdout);

  std::vector<riclab::xapp::ReceivedIndication> stream;
  std::atomic<std::uint64_t> last_recv_ns{riclab::monotonic_ns()};
  const std::uint64_t run_start = riclab::monotonic_ns();

  std::thread monitor([&] {
    const std::uint64_t min_run_ns =
        run_start + static_cast<std::uint64_t>((duration_s + 1.0) * 1e9);
    for (;;) {
      if (g_stop) break;
      const std::uint64_t now = riclab::monotonic_ns();
      if (now > min_run_ns && now - last_recv_ns.load() > 1'000'000'000ull) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    session->stop();
  });

  session->run([&](const riclab::xapp::ReceivedIndication& ind) {
    stream.push_back(ind);
    last_recv_ns.store(ind.recv_ns, std::memory_order_relaxed);
    return true;
  });
  monitor.join();
  session->close();

  riclab::usecase::UsecaseResult result;
  result.stream = std::move(stream);
  result.received = result.stream.size();
  result.timeline = riclab::xapp::fuse(result.stream, 200, spec.scene.fps);
  result.transitions = riclab::xapp::detect_transitions(result.stream);
  for (const auto& ind : result.stream) {
    if (std::holds_alternative<riclab::wire::SnrReport>(ind.payload))
      result.snr_messages++;
    else
      result.cvf_messages++;
  }
  result.clean = true;

  riclab::usecase::UsecaseOptions options;
  options.out_dir = out_dir;
  options.normalize_timestamps = normalize;
  riclab::usecase::write_outputs(result, spec, options);

  std::printf("%s\n", result.summary_json().dump().c_str());
  return 0;
}

int cmd_usecase(const std::string& scenario_path, const std::string& out_dir, bool normalize,
                bool multi_process, std::int64_t seed) {
  auto spec = load_scenario_or_exit(scenario_path);
  riclab::usecase::UsecaseOptions options;
  options.out_dir = out_dir;
  options.normalize_timestamps = normalize;
  options.multi_process = multi_process;
  if (seed >= 0) options.seed_override = static_cast<std::uint64_t>(seed);

  try {
    const auto result = riclab::usecase::run_usecase(spec, options);
    std::printf("%s\n", result.summary_json().dump(2).c_str());
    if (!result.clean) {
      std::fprintf(stderr, "usecase: %s\n", result.error.c_str());
      return kExitRuntime;
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "usecase: %s\n", e.what());
    return kExitRuntime;
  }
}

int cmd_bench(const std::string& config_path, std::vector<std::uint32_t> agents,
              std::vector<std::uint32_t> sizes, std::vector<std::uint32_t> rates,
              std::int64_t duration, std::int64_t reps, const std::string& out_dir,
              bool in_process, bool full_grid, bool raw_records,
              std::uint64_t route_delay_ns) {
  riclab::bench::BenchConfig config;
  if (!config_path.empty()) {
    try {
      config = riclab::bench::load_bench_config_file(config_path);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitConfig;
    }
  }
  if (!agents.empty()) config.agents = std::move(agents);
  if (!sizes.empty()) config.sizes_bytes = std::move(sizes);
  if (!rates.empty()) config.rates_per_agent = std::move(rates);
  auto pick_anchor = [](const std::vector<std::uint32_t>& values, std::uint32_t wanted) {
    for (const auto v : values)
      if (v == wanted) return wanted;
    return values.front();
  };
  config.view_rate = pick_anchor(config.rates_per_agent, config.view_rate);
  config.view_size = pick_anchor(config.sizes_bytes, config.view_size);
  if (duration >= 0) config.duration_s = static_cast<std::uint32_t>(duration);
  if (reps >= 0) config.repetitions = static_cast<std::uint32_t>(reps);
  if (in_process) config.agents_in_process = true;
  if (full_grid) config.paper_views_only = false;
  if (raw_records && !out_dir.empty())
    config.raw_records_dir = (std::filesystem::path(out_dir) / "records").string();
  config.debug_route_delay_ns = route_delay_ns;
  try {
    config.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }

  const auto report = riclab::bench::run_sweep(config);
  if (!out_dir.empty()) {
    riclab::bench::write_csvs(report, config, out_dir);
    std::ofstream os(std::filesystem::path(out_dir) / "report.json");
    os << report.to_json().dump(2) << "\n";
  }
  std::printf("%s\n", report.to_json().dump(2).c_str());
  return report.audits_ok ? 0 : kExitRuntime;
}

int cmd_scene_dump(const std::string& scenario_path, std::uint64_t frames) {
  const auto spec = load_scenario_or_exit(scenario_path);
  const std::uint64_t total =
      frames > 0 ? frames
                 : static_cast<std::uint64_t>(spec.duration_s * spec.scene.fps + 1e-9);
  riclab::scene::write_frame_csv_header(std::cout);
  for (std::uint64_t k = 0; k < total; ++k)
    riclab::scene::write_frame_csv(std::cout, riclab::scene::generate_frame(spec.scene, k));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  install_signal_handlers();
  CLI::App app{"desk-scale vision-radio sensing testbed"};
  app.require_subcommand(1);

  // broker
  auto* broker_cmd = app.add_subcommand("broker", "run the sensing broker");
  std::uint16_t agent_port = 36421;
  std::uint16_t xapp_port = 36422;
  std::string bind = "127.0.0.1";
  std::size_t queue_capacity = 65536;
  std::uint32_t stats_interval = 1000;
  std::string stats_file;
  std::uint64_t route_delay_ns = 0;
  bool print_ports = false;
  broker_cmd->add_option("--agent-port", agent_port, "agent listen port (0 = ephemeral)");
  broker_cmd->add_option("--xapp-port", xapp_port, "xapp listen port (0 = ephemeral)");
  broker_cmd->add_option("--bind", bind, "bind address");
  broker_cmd->add_option("--queue-capacity", queue_capacity, "per-subscriber queue bound");
  broker_cmd->add_option("--stats-interval-ms", stats_interval, "stats line period (0 = off)");
  broker_cmd->add_option("--stats-file", stats_file, "stats destination (default stderr)");
  broker_cmd->add_option("--route-delay-ns", route_delay_ns,
                         "artificial routing delay (test hook)");
  broker_cmd->add_flag("--print-ports", print_ports, "print chosen ports as JSON on stdout");

  // agent
  auto* agent_cmd = app.add_subcommand("agent", "run a sensing agent");
  agent_cmd->require_subcommand(1);
  std::string broker_ep = env_or("RICLAB_AGENT_ENDPOINT", "127.0.0.1:36421");
  std::uint32_t agent_id = 1;
  std::uint32_t ue_id = 1;
  std::string scenario_path;
  double duration_override = 0.0;

  auto* load_cmd = agent_cmd->add_subcommand("load", "synthetic load agent");
  std::uint32_t rate = 1000;
  std::uint32_t size = 16;
  std::uint32_t load_duration = 10;
  load_cmd->add_option("--broker", broker_ep, "broker agent endpoint");
  load_cmd->add_option("--agent-id", agent_id, "agent id");
  load_cmd->add_option("--rate", rate, "messages per second");
  load_cmd->add_option("--size", size, "pad payload bytes");
  load_cmd->add_option("--duration", load_duration, "run duration in seconds");

  auto* cvf_cmd = agent_cmd->add_subcommand("cvf", "video-function agent");
  cvf_cmd->add_option("--broker", broker_ep, "broker agent endpoint");
  cvf_cmd->add_option("--agent-id", agent_id, "agent id");
  cvf_cmd->add_option("--ue-id", ue_id, "ue id for emitted messages");
  cvf_cmd->add_option("--scenario", scenario_path, "scenario file (default canonical)");
  cvf_cmd->add_option("--duration", duration_override, "override scenario duration");

  auto* radio_cmd = agent_cmd->add_subcommand("radio", "radio sensing agent");
  std::int64_t seed_override = -1;
  radio_cmd->add_option("--broker", broker_ep, "broker agent endpoint");
  radio_cmd->add_option("--agent-id", agent_id, "agent id");
  radio_cmd->add_option("--ue-id", ue_id, "ue id for emitted messages");
  radio_cmd->add_option("--scenario", scenario_path, "scenario file (default canonical)");
  radio_cmd->add_option("--duration", duration_override, "override scenario duration");
  radio_cmd->add_option("--seed", seed_override, "override radio rng seed");

  // xapp
  auto* xapp_cmd = app.add_subcommand("xapp", "run an xapp");
  xapp_cmd->require_subcommand(1);
  auto* fuse_cmd = xapp_cmd->add_subcommand("fuse", "vision-aided monitoring xapp");
  std::string xapp_broker_ep = env_or("RICLAB_XAPP_ENDPOINT", "127.0.0.1:36422");
  std::string out_dir;
  bool normalize = false;
  fuse_cmd->add_option("--broker", xapp_broker_ep, "broker xapp endpoint");
  fuse_cmd->add_option("--scenario", scenario_path, "scenario file (default canonical)");
  fuse_cmd->add_option("--out-dir", out_dir, "output directory");
  fuse_cmd->add_option("--duration", duration_override, "override scenario duration");
  fuse_cmd->add_flag("--normalize-timestamps", normalize, "run-relative times in outputs");

  // usecase
  auto* usecase_cmd = app.add_subcommand("usecase", "end-to-end blockage use case");
  bool multi_process = false;
  std::int64_t usecase_seed = -1;
  std::string usecase_out = "usecase_out";
  usecase_cmd->add_option("--scenario", scenario_path, "scenario file (default canonical)");
  usecase_cmd->add_option("--out-dir", usecase_out, "output directory");
  usecase_cmd->add_flag("--normalize-timestamps", normalize, "run-relative times in outputs");
  usecase_cmd->add_flag("--multi-process", multi_process, "one process per component");
  usecase_cmd->add_option("--seed", usecase_seed, "override radio rng seed");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "latency sweep");
  std::string bench_config_path;
  std::vector<std::uint32_t> b_agents;
  std::vector<std::uint32_t> b_sizes;
  std::vector<std::uint32_t> b_rates;
  std::int64_t b_duration = -1;
  std::int64_t b_reps = -1;
  std::string bench_out = "bench_out";
  bool in_process = false;
  bool full_grid = false;
  bench_cmd->add_option("--config", bench_config_path, "bench config file (json)");
  bench_cmd->add_option("--agents", b_agents, "agent counts")->delimiter(',');
  bench_cmd->add_option("--sizes", b_sizes, "pad payload sizes in bytes")->delimiter(',');
  bench_cmd->add_option("--rates", b_rates, "per-agent message rates")->delimiter(',');
  bench_cmd->add_option("--duration", b_duration, "seconds per repetition");
  bench_cmd->add_option("--reps", b_reps, "repetitions per cell");
  bench_cmd->add_option("--out-dir", bench_out, "output directory");
  bench_cmd->add_flag("--in-process", in_process, "agents as threads, not processes");
  bench_cmd->add_flag("--full-grid", full_grid, "full cartesian sweep, not figure views");
  bool raw_records = false;
  bench_cmd->add_flag("--raw-records", raw_records, "dump per-message latency records (large)");
  bench_cmd->add_option("--route-delay-ns", route_delay_ns, "broker routing delay hook");

  // scene
  auto* scene_cmd = app.add_subcommand("scene", "scene utilities");
  scene_cmd->require_subcommand(1);
  auto* dump_cmd = scene_cmd->add_subcommand("dump", "frame stream as CSV");
  std::uint64_t dump_frames = 0;
  dump_cmd->add_option("--scenario", scenario_path, "scenario file (default canonical)");
  dump_cmd->add_option("--frames", dump_frames, "frame count (default scenario duration)");

  CLI11_PARSE(app, argc, argv);

  if (broker_cmd->parsed())
    return cmd_broker(agent_port, xapp_port, bind, queue_capacity, stats_interval, stats_file,
                      route_delay_ns, print_ports);
  if (load_cmd->parsed()) return cmd_agent_load(broker_ep, agent_id, rate, size, load_duration);
  if (cvf_cmd->parsed())
    return cmd_agent_cvf(broker_ep, scenario_path, agent_id, ue_id, duration_override);
  if (radio_cmd->parsed())
    return cmd_agent_radio(broker_ep, scenario_path, agent_id, ue_id, duration_override,
                           seed_override);
  if (fuse_cmd->parsed())
    return cmd_xapp_fuse(xapp_broker_ep, scenario_path, out_dir, normalize, duration_override);
  if (usecase_cmd->parsed())
    return cmd_usecase(scenario_path, usecase_out, normalize, multi_process, usecase_seed);
  if (bench_cmd->parsed())
    return cmd_bench(bench_config_path, b_agents, b_sizes, b_rates, b_duration, b_reps,
                     bench_out, in_process, full_grid, raw_records, route_delay_ns);
  if (dump_cmd->parsed()) return cmd_scene_dump(scenario_path, dump_frames);
  return kExitConfig;
}
