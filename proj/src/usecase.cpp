#include "riclab/usecase.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "riclab/clock.hpp"
#include "subprocess.hpp"

namespace riclab::usecase {

namespace fs = std::filesystem;

void ScenarioSpec::validate() const {
  scene.validate();
  cvf.validate();
  radio.validate();
  if (duration_s <= 0.0) throw std::invalid_argument("scenario: duration must be positive");
  if (cvf.fps != scene.fps)
    throw std::invalid_argument("scenario: cvf fps must match scene fps");
}

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  ScenarioSpec spec;
  spec.scene = scene::scene_from_json(j.at("scene"));
  if (j.contains("cvf")) {
    const auto& jc = j.at("cvf");
    spec.cvf.window_frames = jc.value("window_frames", 5u);
    spec.cvf.horizon_ms = jc.value("horizon_ms", 600u);
    spec.cvf.post_hold_frames = jc.value("post_hold_frames", 3u);
  }
  spec.cvf.fps = spec.scene.fps;
  if (j.contains("radio")) {
    const auto& jr = j.at("radio");
    spec.radio.sample_period_ms = jr.value("sample_period_ms", 10u);
    spec.radio.snr_los_db = jr.value("snr_los_db", 28.0);
    spec.radio.blockage_loss_db = jr.value("blockage_loss_db", 10.0);
    spec.radio.noise_sigma_db = jr.value("noise_sigma_db", 1.5);
    spec.radio.rng_seed = jr.value("seed", 0ull);
  }
  spec.duration_s = j.value("duration_s", 10.0);
  spec.validate();
  return spec;
}

nlohmann::json scenario_to_json(const ScenarioSpec& spec) {
  return {{"scene", scene::scene_to_json(spec.scene)},
          {"cvf",
           {{"window_frames", spec.cvf.window_frames},
            {"horizon_ms", spec.cvf.horizon_ms},
            {"post_hold_frames", spec.cvf.post_hold_frames}}},
          {"radio",
           {{"sample_period_ms", spec.radio.sample_period_ms},
            {"snr_los_db", spec.radio.snr_los_db},
            {"blockage_loss_db", spec.radio.blockage_loss_db},
            {"noise_sigma_db", spec.radio.noise_sigma_db},
            {"seed", spec.radio.rng_seed}}},
          {"duration_s", spec.duration_s}};
}

ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
  nlohmann::json j;
  in >> j;
  return scenario_from_json(j);
}

ScenarioSpec canonical_scenario() {
  ScenarioSpec spec;
  spec.scene.gnb_pos = {0.0, 0.0};
  spec.scene.ue_marker_box = {{10.0, 0.0}, {0.3, 0.3}};
  spec.scene.extent = {30.0, 12.0};
  spec.scene.fps = 5;
  scene::ObstacleSpec obstacle;
  obstacle.id = 1;
  obstacle.initial_box = {{10.0, 4.0}, {0.5, 0.5}};
  obstacle.motion = {{0.0, 2.5, {0.0, -1.5}},   // descend onto the UE
                     {6.5, 9.0, {0.0, 1.5}}};   // retreat after a 4 s hold
  spec.scene.obstacles.push_back(obstacle);
  spec.cvf = cvf::CvfConfig{};  // W=5, horizon 600 ms, post hold 3, fps 5
  spec.radio = radio::RadioConfig{};
  spec.radio.rng_seed = 42;
  spec.duration_s = 10.0;
  return spec;
}

nlohmann::json UsecaseResult::summary_json() const {
  return {{"cvf_messages", cvf_messages},
          {"snr_messages", snr_messages},
          {"received", received},
          {"intervals", timeline.intervals.size()},
          {"broker", broker::to_json(broker_stats)},
          {"clean", clean},
          {"error", error}};
}

void write_event_csv_from_stream(std::ostream& os,
                                 const std::vector<xapp::ReceivedIndication>& stream,
                                 std::uint32_t fps) {
  cvf::write_event_csv_header(os);
  for (const auto& ind : stream) {
    cvf::CvfEvent ev;
    if (const auto* p = std::get_if<wire::PriorBlockage>(&ind.payload)) {
      ev = {cvf::EventKind::PriorBlockage, p->obstacle_id, p->frame_index, p->box,
            p->time_to_block_ms};
    } else if (const auto* b = std::get_if<wire::Blockage>(&ind.payload)) {
      ev = {cvf::EventKind::Blockage, b->obstacle_id, b->frame_index, b->box, 0};
    } else if (const auto* q = std::get_if<wire::PostBlockage>(&ind.payload)) {
      ev = {cvf::EventKind::PostBlockage, q->obstacle_id, q->frame_index, {}, 0};
    } else {
      continue;
    }
    cvf::write_event_csv(os, ev, fps);
  }
}

void write_outputs(const UsecaseResult& result, const ScenarioSpec& spec,
                   const UsecaseOptions& options) {
  if (options.out_dir.empty()) return;
  fs::create_directories(options.out_dir);

  {
    std::ofstream os(fs::path(options.out_dir) / "fused.csv");
    xapp::write_fused_csv(os, result.timeline);
  }
  {
    std::ofstream os(fs::path(options.out_dir) / "cvf_events.csv");
    write_event_csv_from_stream(os, result.stream, spec.scene.fps);
  }
  {
    std::optional<std::uint64_t> epoch;
    if (options.normalize_timestamps && !result.stream.empty())
      epoch = result.stream.front().recv_ns;
    std::ofstream os(fs::path(options.out_dir) / "transitions.json");
    os << result.transitions.to_json(epoch).dump(2) << "\n";
  }
  {
    std::ofstream os(fs::path(options.out_dir) / "summary.json");
    os << result.summary_json().dump(2) << "\n";
  }
}

namespace {

std::vector<wire::FilterEntry> vision_filters() {
  return {{wire::kAnyAgent, wire::PayloadKind::PriorBlockage},
          {wire::kAnyAgent, wire::PayloadKind::Blockage},
          {wire::kAnyAgent, wire::PayloadKind::PostBlockage},
          {wire::kAnyAgent, wire::PayloadKind::SnrReport}};
}

UsecaseResult run_single_process(const ScenarioSpec& spec, const UsecaseOptions& options) {
  UsecaseResult result;

  broker::Broker broker(broker::BrokerConfig{});
  broker.start();
  const net::Endpoint agent_ep{"127.0.0.1", broker.agent_port()};
  const net::Endpoint xapp_ep{"127.0.0.1", broker.xapp_port()};

  auto session = xapp::XappSession::connect(xapp_ep, 900);
  session.subscribe(vision_filters());

  std::vector<xapp::ReceivedIndication> stream;
  std::atomic<std::uint64_t> received{0};
  std::thread rx([&] {
    session.run([&](const xapp::ReceivedIndication& ind) {
      stream.push_back(ind);
      received.fetch_add(1, std::memory_order_relaxed);
      return true;
    });
  });

  agent::RunReport cvf_report;
  agent::RunReport radio_report;
  std::thread cvf_thread([&] {
    const agent::CvfAgentConfig cfg{100, 1, spec.duration_s, true};
    cvf_report = agent::run_cvf_agent(spec.scene, spec.cvf, cfg, agent_ep);
  });
  std::thread radio_thread([&] {
    const agent::RadioAgentConfig cfg{200, 1, spec.duration_s, true};
    radio_report = agent::run_radio_agent(spec.scene, spec.radio, cfg, agent_ep);
  });
  cvf_thread.join();
  radio_thread.join();

  result.cvf_messages = cvf_report.messages;
  result.snr_messages = radio_report.messages;
  const std::uint64_t expected = result.cvf_messages + result.snr_messages;

  const std::uint64_t deadline = monotonic_ns() + 5'000'000'000ull;
  while (received.load() < expected && monotonic_ns() < deadline)
    std::this_thread::sleep_for(std::chrono::milliseconds(5));

  session.stop();
  rx.join();
  session.close();
  result.broker_stats = broker.stats();
  broker.stop();

  result.stream = std::move(stream);
  result.received = result.stream.size();
  result.timeline = xapp::fuse(result.stream, 200, spec.scene.fps);
  result.transitions = xapp::detect_transitions(result.stream);
  result.clean = !cvf_report.failed && !radio_report.failed &&
                 result.stream.size() == expected &&
                 result.broker_stats.dropped_overflow == 0 &&
                 result.broker_stats.dropped_unmatched == 0;
  if (cvf_report.failed) result.error = cvf_report.error;
  if (radio_report.failed) result.error = radio_report.error;
  if (result.clean == false && result.error.empty()) result.error = "message loss detected";

  write_outputs(result, spec, options);
  return result;
}

UsecaseResult run_multi_process(const ScenarioSpec& spec, const UsecaseOptions& options) {
  UsecaseResult result;
  if (options.out_dir.empty()) {
    result.error = "multi-process mode requires an output directory";
    return result;
  }
  fs::create_directories(options.out_dir);
  const std::string bin = subprocess::runner_binary();
  const std::string scenario_path = (fs::path(options.out_dir) / "_scenario.json").string();
  {
    std::ofstream os(scenario_path);
    os << scenario_to_json(spec).dump(2) << "\n";
  }

  auto fail = [&](const std::string& why) {
    result.clean = false;
    result.error = why;
    return result;
  };

  // Broker first; it prints its chosen ports.
  auto broker_child = subprocess::spawn_capture(
      {bin, "broker", "--agent-port", "0", "--xapp-port", "0", "--print-ports"});
  if (!broker_child) return fail("cannot spawn broker");
  const auto ports_line = subprocess::read_line(broker_child->out_fd);
  if (!ports_line) {
    subprocess::send_sigterm(broker_child->pid);
    subprocess::wait_exit(broker_child->pid);
    return fail("broker did not report its ports");
  }
  std::string agent_ep;
  std::string xapp_ep;
  try {
    const auto ports = nlohmann::json::parse(*ports_line);
    agent_ep = "127.0.0.1:" + std::to_string(ports.at("agent_port").get<int>());
    xapp_ep = "127.0.0.1:" + std::to_string(ports.at("xapp_port").get<int>());
  } catch (const std::exception&) {
    subprocess::send_sigterm(broker_child->pid);
    subprocess::wait_exit(broker_child->pid);
    return fail("malformed broker port line");
  }

  // The xApp subscribes before any agent starts publishing.
  std::vector<std::string> xapp_args = {bin,           "xapp",       "fuse",
                                        "--broker",    xapp_ep,      "--scenario",
                                        scenario_path, "--out-dir",  options.out_dir};
  if (options.normalize_timestamps) xapp_args.push_back("--normalize-timestamps");
  auto xapp_child = subprocess::spawn_capture(xapp_args);
  if (!xapp_child) {
    subprocess::send_sigterm(broker_child->pid);
    subprocess::wait_exit(broker_child->pid);
    return fail("cannot spawn xapp");
  }
  const auto ready = subprocess::read_line(xapp_child->out_fd);
  if (!ready || ready->find("ready") == std::string::npos) {
    subprocess::send_sigterm(broker_child->pid);
    subprocess::wait_exit(broker_child->pid);
    subprocess::read_all(xapp_child->out_fd);
    subprocess::wait_exit(xapp_child->pid);
    return fail("xapp did not become ready");
  }

  auto cvf_child = subprocess::spawn_capture({bin, "agent", "cvf", "--broker", agent_ep,
                                              "--scenario", scenario_path, "--agent-id",
                                              "100"});
  auto radio_child = subprocess::spawn_capture({bin, "agent", "radio", "--broker", agent_ep,
                                                "--scenario", scenario_path, "--agent-id",
                                                "200"});
  bool ok = cvf_child.has_value() && radio_child.has_value();

  std::uint64_t cvf_messages = 0;
  std::uint64_t snr_messages = 0;
  if (cvf_child) {
    const std::string out = subprocess::read_all(cvf_child->out_fd);
    ok &= subprocess::wait_exit(cvf_child->pid) == 0;
    try {
      cvf_messages = nlohmann::json::parse(out).at("messages").get<std::uint64_t>();
    } catch (const std::exception&) {
      ok = false;
    }
  }
  if (radio_child) {
    const std::string out = subprocess::read_all(radio_child->out_fd);
    ok &= subprocess::wait_exit(radio_child->pid) == 0;
    try {
      snr_messages = nlohmann::json::parse(out).at("messages").get<std::uint64_t>();
    } catch (const std::exception&) {
      ok = false;
    }
  }

  const std::string xapp_out = subprocess::read_all(xapp_child->out_fd);
  ok &= subprocess::wait_exit(xapp_child->pid) == 0;

  subprocess::send_sigterm(broker_child->pid);
  subprocess::read_all(broker_child->out_fd);
  subprocess::wait_exit(broker_child->pid);

  result.cvf_messages = cvf_messages;
  result.snr_messages = snr_messages;
  result.clean = ok;
  try {
    const auto summary = nlohmann::json::parse(xapp_out);
    result.received = summary.value("received", 0ull);
    result.clean = ok && result.received == cvf_messages + snr_messages;
  } catch (const std::exception&) {
    result.clean = false;
  }
  if (!result.clean && result.error.empty()) result.error = "multi-process run incomplete";
  return result;
}

}  // namespace

UsecaseResult run_usecase(const ScenarioSpec& spec_in, const UsecaseOptions& options) {
  ScenarioSpec spec = spec_in;
  if (options.seed_override) spec.radio.rng_seed = *options.seed_override;
  spec.validate();
  return options.multi_process ? run_multi_process(spec, options)
                               : run_single_process(spec, options);
}

}  // namespace riclab::usecase
