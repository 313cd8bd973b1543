#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "riclab/geometry.hpp"
#include "riclab/scene.hpp"

namespace riclab::cvf {

struct CvfConfig {
  std::uint32_t window_frames = 5;     // tracking window W, >= 2
  std::uint32_t horizon_ms = 600;      // prediction horizon H, >= one frame period
  std::uint32_t post_hold_frames = 3;  // PostBlockage repetitions after a blockage ends
  std::uint32_t fps = 5;
  /// Default keeps the asymmetric rule: Blockage fires on overlap with the
  /// UE's last-known marker box while Prior predicts against the los
  /// segment. When set, an obstacle currently cutting the los mid-path also
  /// counts as a Blockage.
  bool los_counts_as_blockage = false;

  std::uint32_t horizon_frames() const {
    return static_cast<std::uint32_t>((static_cast<std::uint64_t>(horizon_ms) * fps + 999) / 1000);
  }
  /// Milliseconds per frame, rounded to the nearest integer.
  std::uint32_t frame_ms() const { return (1000 + fps / 2) / fps; }

  void validate() const;  // throws std::invalid_argument
};

enum class TrackState : std::uint8_t { Clear, Prior, Blocked, Post };

struct TrackSample {
  std::uint64_t frame_index = 0;
  geom::Vec2 center;
  geom::Box2D box;
};

/// Per-obstacle tracking history over the last W observed frames, plus the
/// blockage state machine. Transitions follow
/// Clear -> Prior -> Blocked -> Post -> Clear, with the two shortcuts
/// Prior -> Clear (prediction withdrawn) and Clear -> Blocked (a blockage
/// faster than the prediction path could see).
class ObstacleTrack {
 public:
  ObstacleTrack(std::uint32_t id, std::size_t window) : id_(id), window_(window) {}

  void observe(std::uint64_t frame_index, const geom::Box2D& box);

  std::uint32_t id() const { return id_; }
  std::size_t size() const { return history_.size(); }
  bool empty() const { return history_.empty(); }
  const TrackSample& oldest() const { return history_.front(); }
  const TrackSample& latest() const { return history_.back(); }
  std::uint64_t last_observed_frame() const { return history_.back().frame_index; }

  TrackState state = TrackState::Clear;
  std::uint32_t post_frames_remaining = 0;

 private:
  std::uint32_t id_;
  std::size_t window_;
  std::deque<TrackSample> history_;  // ordered by frame_index, capacity W
};

/// Window-endpoint velocity estimate in m/s; nullopt below two samples.
std::optional<geom::Vec2> estimate_velocity(const ObstacleTrack& track, std::uint32_t fps);

/// Sweeps the track's latest box through h = 1..horizon_frames() future
/// frame steps under the estimated velocity and returns the lead time in ms
/// of the first step whose box intersects the line-of-sight segment.
std::optional<std::uint32_t> predict_prior(const ObstacleTrack& track, geom::Vec2 los_a,
                                           geom::Vec2 los_b, const CvfConfig& config);

enum class EventKind : std::uint8_t { PriorBlockage = 1, Blockage = 2, PostBlockage = 3 };

const char* to_string(EventKind k) noexcept;

struct CvfEvent {
  EventKind kind = EventKind::PriorBlockage;
  std::uint32_t obstacle_id = 0;
  std::uint64_t frame_index = 0;
  geom::Box2D box;
  std::uint32_t time_to_block_ms = 0;  // PriorBlockage only
};

/// Consumes frames in order and emits at most one event per obstacle per
/// frame: Blockage while the obstacle's current box overlaps the UE's
/// last-known marker box, otherwise Prior while a line-of-sight obstruction
/// is predicted within the horizon, and Post for the configured number of
/// frames after a blockage clears.
class CvfEngine {
 public:
  CvfEngine(geom::Vec2 gnb_pos, CvfConfig config);

  /// Throws std::invalid_argument on an out-of-order frame.
  std::vector<CvfEvent> step(const scene::Frame& frame);

  const std::optional<geom::Box2D>& last_marker() const { return marker_; }
  const CvfConfig& config() const { return config_; }

 private:
  geom::Vec2 gnb_pos_;
  CvfConfig config_;
  std::optional<geom::Box2D> marker_;
  std::optional<std::uint64_t> last_frame_;
  std::map<std::uint32_t, ObstacleTrack> tracks_;
};

/// Event log export: frame_index,time_s,obstacle_id,kind,time_to_block_ms
void write_event_csv_header(std::ostream& os);
void write_event_csv(std::ostream& os, const CvfEvent& event, std::uint32_t fps);

}  // namespace riclab::cvf
