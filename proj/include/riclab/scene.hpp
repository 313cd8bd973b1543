#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "riclab/geometry.hpp"

namespace riclab::scene {

/// One constant-velocity stretch of an obstacle's scripted motion.
/// Outside every segment the obstacle holds its position.
struct MotionSegment {
  double start_s = 0.0;
  double stop_s = 0.0;
  geom::Vec2 velocity;
};

struct ObstacleSpec {
  std::uint32_t id = 0;
  geom::Box2D initial_box;
  std::vector<MotionSegment> motion;  // sorted, non-overlapping
};

struct SceneConfig {
  geom::Vec2 gnb_pos;
  geom::Box2D ue_marker_box{{0.0, 0.0}, {0.3, 0.3}};
  std::vector<ObstacleSpec> obstacles;
  std::uint32_t fps = 5;
  geom::Vec2 extent{100.0, 100.0};  // scene rectangle, centered on the origin

  geom::Box2D extent_box() const {
    return {{0.0, 0.0}, {extent.x / 2.0, extent.y / 2.0}};
  }
  double frame_period_s() const { return 1.0 / fps; }

  void validate() const;  // throws std::invalid_argument
};

struct Detection {
  std::uint32_t obstacle_id = 0;
  geom::Box2D box;
};

struct Frame {
  std::uint64_t frame_index = 0;
  double time_s = 0.0;
  std::vector<Detection> detections;      // sorted by obstacle_id
  std::optional<geom::Box2D> ue_marker;   // absent while an obstacle occludes it
};

/// Piecewise constant-velocity position at an arbitrary time.
geom::Vec2 obstacle_center_at(const ObstacleSpec& spec, double time_s);

/// Pure and deterministic: the same (config, index) always yields an
/// identical frame. An obstacle appears in detections only while its box
/// intersects the scene extent; the UE marker is withheld while any
/// obstacle box overlaps it.
Frame generate_frame(const SceneConfig& config, std::uint64_t frame_index);

/// Physical ground truth, independent of detection visibility: true iff any
/// obstacle box intersects the gNB-to-marker-center segment or overlaps the
/// UE marker box.
bool ground_truth_blocked_at(const SceneConfig& config, double time_s);
bool ground_truth_blocked(const SceneConfig& config, std::uint64_t frame_index);

SceneConfig scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneConfig& config);

/// Debug export: one row per detection plus one for the marker when visible.
void write_frame_csv_header(std::ostream& os);
void write_frame_csv(std::ostream& os, const Frame& frame);

}  // namespace riclab::scene
