#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "riclab/agent.hpp"
#include "riclab/broker.hpp"
#include "riclab/cvf.hpp"
#include "riclab/radio.hpp"
#include "riclab/scene.hpp"
#include "riclab/xapp.hpp"

namespace riclab::usecase {

struct ScenarioSpec {
  scene::SceneConfig scene;
  cvf::CvfConfig cvf;
  radio::RadioConfig radio;
  double duration_s = 10.0;

  void validate() const;
};

ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec load_scenario_file(const std::string& path);

/// The checked-in crossing scenario: fixed gNB and UE, one obstacle that
/// descends onto the UE, holds in front of it for four seconds and retreats.
/// All crossing times are closed-form on the 5 fps frame grid.
ScenarioSpec canonical_scenario();

struct UsecaseOptions {
  std::string out_dir;  // empty = no files written
  bool normalize_timestamps = false;
  bool multi_process = false;  // one OS process per component
  std::optional<std::uint64_t> seed_override;
};

struct UsecaseResult {
  xapp::FusedTimeline timeline;
  xapp::TransitionLog transitions;
  std::vector<xapp::ReceivedIndication> stream;
  std::uint64_t cvf_messages = 0;
  std::uint64_t snr_messages = 0;
  std::uint64_t received = 0;
  broker::BrokerStats broker_stats;
  bool clean = false;  // every sent indication was delivered, no failures
  std::string error;

  nlohmann::json summary_json() const;
};

/// Runs broker + CVF agent + radio agent + vision xApp for the scenario
/// duration and fuses the result. In multi-process mode each component is a
/// child process of the CLI binary and the outputs are written by the xApp
/// child; the produced fused/event CSVs are identical between modes.
UsecaseResult run_usecase(const ScenarioSpec& spec, const UsecaseOptions& options);

/// fused.csv, cvf_events.csv, transitions.json, summary.json.
void write_outputs(const UsecaseResult& result, const ScenarioSpec& spec,
                   const UsecaseOptions& options);

/// The event CSV is reconstructed from the received CVF payloads, so the
/// single- and multi-process paths emit identical bytes.
void write_event_csv_from_stream(std::ostream& os,
                                 const std::vector<xapp::ReceivedIndication>& stream,
                                 std::uint32_t fps);

}  // namespace riclab::usecase
