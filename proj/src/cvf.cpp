#include "riclab/cvf.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace riclab::cvf {

void CvfConfig::validate() const {
  if (window_frames < 2) throw std::invalid_argument("cvf: window must be >= 2 frames");
  if (fps < 1) throw std::invalid_argument("cvf: fps must be >= 1");
  if (static_cast<std::uint64_t>(horizon_ms) * fps < 1000)
    throw std::invalid_argument("cvf: horizon must be >= one frame period");
  if (post_hold_frames < 1) throw std::invalid_argument("cvf: post hold must be >= 1");
}

const char* to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::PriorBlockage: return "prior";
    case EventKind::Blockage: return "blockage";
    case EventKind::PostBlockage: return "post";
  }
  return "?";
}

void ObstacleTrack::observe(std::uint64_t frame_index, const geom::Box2D& box) {
  history_.push_back({frame_index, box.center, box});
  while (history_.size() > window_) history_.pop_front();
}

std::optional<geom::Vec2> estimate_velocity(const ObstacleTrack& track, std::uint32_t fps) {
  if (track.size() < 2) return std::nullopt;
  const TrackSample& a = track.oldest();
  const TrackSample& b = track.latest();
  const double dt = static_cast<double>(b.frame_index - a.frame_index) / fps;
  return geom::Vec2{(b.center.x - a.center.x) / dt, (b.center.y - a.center.y) / dt};
}

std::optional<std::uint32_t> predict_prior(const ObstacleTrack& track, geom::Vec2 los_a,
                                           geom::Vec2 los_b, const CvfConfig& config) {
  const auto velocity = estimate_velocity(track, config.fps);
  if (!velocity) return std::nullopt;
  if (los_a == los_b) return std::nullopt;
  const geom::Box2D current = track.latest().box;
  const std::uint32_t steps = config.horizon_frames();
  for (std::uint32_t h = 1; h <= steps; ++h) {
    const double dt = static_cast<double>(h) / config.fps;
    const geom::Box2D future{current.center + *velocity * dt, current.half};
    if (geom::segment_intersects_box(los_a, los_b, future))
      return static_cast<std::uint32_t>(
          std::lround(1000.0 * static_cast<double>(h) / config.fps));
  }
  return std::nullopt;
}

CvfEngine::CvfEngine(geom::Vec2 gnb_pos, CvfConfig config)
    : gnb_pos_(gnb_pos), config_(config) {
  config_.validate();
}

std::vector<CvfEvent> CvfEngine::step(const scene::Frame& frame) {
  if (last_frame_ && frame.frame_index <= *last_frame_)
    throw std::invalid_argument("cvf: frames must arrive in increasing order");
  last_frame_ = frame.frame_index;

  if (frame.ue_marker) marker_ = frame.ue_marker;

  // Track every detection first so velocity estimates see this frame.
  for (const auto& d : frame.detections) {
    auto [it, inserted] = tracks_.try_emplace(d.obstacle_id, d.obstacle_id,
                                              config_.window_frames);
    it->second.observe(frame.frame_index, d.box);
  }

  std::vector<CvfEvent> events;
  for (auto& [id, track] : tracks_) {
    const bool seen_now = !track.empty() && track.last_observed_frame() == frame.frame_index;
    bool blocked_now = seen_now && marker_.has_value() &&
                       geom::boxes_overlap(track.latest().box, *marker_);
    if (!blocked_now && config_.los_counts_as_blockage && seen_now && marker_) {
      blocked_now =
          geom::segment_intersects_box(gnb_pos_, marker_->center, track.latest().box);
    }

    if (blocked_now) {
      // A blockage observed during the post hold starts a fresh cycle.
      track.state = TrackState::Blocked;
      track.post_frames_remaining = 0;
      events.push_back({EventKind::Blockage, id, frame.frame_index, track.latest().box, 0});
      continue;
    }

    if (track.state == TrackState::Blocked) {
      track.state = TrackState::Post;
      track.post_frames_remaining = config_.post_hold_frames;
    }
    if (track.state == TrackState::Post) {
      if (track.post_frames_remaining > 0) {
        events.push_back({EventKind::PostBlockage, id, frame.frame_index,
                          seen_now ? track.latest().box : geom::Box2D{}, 0});
        if (--track.post_frames_remaining == 0) track.state = TrackState::Clear;
      } else {
        track.state = TrackState::Clear;
      }
      continue;
    }

    // Clear or Prior: predict, emit while the prediction stands.
    std::optional<std::uint32_t> lead;
    if (seen_now && marker_)
      lead = predict_prior(track, gnb_pos_, marker_->center, config_);
    if (lead) {
      track.state = TrackState::Prior;
      events.push_back({EventKind::PriorBlockage, id, frame.frame_index,
                        track.latest().box, *lead});
    } else {
      track.state = TrackState::Clear;
    }
  }
  return events;
}

void write_event_csv_header(std::ostream& os) {
  os << "frame_index,time_s,obstacle_id,kind,time_to_block_ms\n";
}

void write_event_csv(std::ostream& os, const CvfEvent& event, std::uint32_t fps) {
  char line[128];
  std::snprintf(line, sizeof(line), "%llu,%.3f,%u,%s,%u\n",
                static_cast<unsigned long long>(event.frame_index),
                static_cast<double>(event.frame_index) / fps, event.obstacle_id,
                to_string(event.kind),
                event.kind == EventKind::PriorBlockage ? event.time_to_block_ms : 0);
  os << line;
}

}  // namespace riclab::cvf
