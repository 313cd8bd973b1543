#include "riclab/scene.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace riclab::scene {

void SceneConfig::validate() const {
  if (fps < 1) throw std::invalid_argument("scene: fps must be >= 1");
  if (extent.x <= 0.0 || extent.y <= 0.0)
    throw std::invalid_argument("scene: extent must be positive");
  if (ue_marker_box.half.x <= 0.0 || ue_marker_box.half.y <= 0.0)
    throw std::invalid_argument("scene: ue marker half extents must be positive");
  const geom::Box2D bounds = extent_box();
  if (!geom::boxes_overlap(ue_marker_box, bounds))
    throw std::invalid_argument("scene: ue marker outside extent");
  std::set<std::uint32_t> ids;
  for (const auto& o : obstacles) {
    if (!ids.insert(o.id).second)
      throw std::invalid_argument("scene: duplicate obstacle id " + std::to_string(o.id));
    if (o.initial_box.half.x <= 0.0 || o.initial_box.half.y <= 0.0)
      throw std::invalid_argument("scene: obstacle half extents must be positive");
    if (!geom::boxes_overlap(o.initial_box, bounds))
      throw std::invalid_argument("scene: obstacle " + std::to_string(o.id) +
                                  " starts outside extent");
    double prev_stop = -1.0;
    for (const auto& m : o.motion) {
      if (m.stop_s < m.start_s)
        throw std::invalid_argument("scene: motion segment stops before it starts");
      if (m.start_s < prev_stop)
        throw std::invalid_argument("scene: motion segments overlap");
      prev_stop = m.stop_s;
    }
  }
}

geom::Vec2 obstacle_center_at(const ObstacleSpec& spec, double time_s) {
  geom::Vec2 c = spec.initial_box.center;
  for (const auto& m : spec.motion) {
    if (time_s <= m.start_s) break;
    const double active = std::min(time_s, m.stop_s) - m.start_s;
    c = c + m.velocity * active;
  }
  return c;
}

namespace {

geom::Box2D obstacle_box_at(const ObstacleSpec& spec, double time_s) {
  return {obstacle_center_at(spec, time_s), spec.initial_box.half};
}

}  // namespace

Frame generate_frame(const SceneConfig& config, std::uint64_t frame_index) {
  Frame f;
  f.frame_index = frame_index;
  f.time_s = static_cast<double>(frame_index) / config.fps;
  const geom::Box2D bounds = config.extent_box();

  bool marker_occluded = false;
  for (const auto& o : config.obstacles) {
    const geom::Box2D box = obstacle_box_at(o, f.time_s);
    if (geom::boxes_overlap(box, config.ue_marker_box)) marker_occluded = true;
    if (geom::boxes_overlap(box, bounds)) f.detections.push_back({o.id, box});
  }
  std::sort(f.detections.begin(), f.detections.end(),
            [](const Detection& a, const Detection& b) {
              return a.obstacle_id < b.obstacle_id;
            });
  if (!marker_occluded) f.ue_marker = config.ue_marker_box;
  return f;
}

bool ground_truth_blocked_at(const SceneConfig& config, double time_s) {
  const geom::Vec2 los_a = config.gnb_pos;
  const geom::Vec2 los_b = config.ue_marker_box.center;
  for (const auto& o : config.obstacles) {
    const geom::Box2D box = obstacle_box_at(o, time_s);
    if (geom::boxes_overlap(box, config.ue_marker_box)) return true;
    if (geom::segment_intersects_box(los_a, los_b, box)) return true;
  }
  return false;
}

bool ground_truth_blocked(const SceneConfig& config, std::uint64_t frame_index) {
  return ground_truth_blocked_at(config, static_cast<double>(frame_index) / config.fps);
}

namespace {

geom::Vec2 vec_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2)
    throw std::invalid_argument("scene: expected [x, y] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

geom::Box2D box_from_json(const nlohmann::json& j) {
  return {vec_from_json(j.at("center")), vec_from_json(j.at("half_extent"))};
}

nlohmann::json vec_to_json(geom::Vec2 v) { return nlohmann::json::array({v.x, v.y}); }

nlohmann::json box_to_json(const geom::Box2D& b) {
  return {{"center", vec_to_json(b.center)}, {"half_extent", vec_to_json(b.half)}};
}

}  // namespace

SceneConfig scene_from_json(const nlohmann::json& j) {
  SceneConfig c;
  c.gnb_pos = vec_from_json(j.at("gnb_pos"));
  c.ue_marker_box = box_from_json(j.at("ue_marker"));
  c.extent = vec_from_json(j.at("extent"));
  c.fps = j.value("fps", 5u);
  for (const auto& jo : j.value("obstacles", nlohmann::json::array())) {
    ObstacleSpec o;
    o.id = jo.at("id").get<std::uint32_t>();
    o.initial_box = box_from_json(jo.at("box"));
    if (jo.contains("motion")) {
      for (const auto& jm : jo.at("motion")) {
        o.motion.push_back({jm.at("start_s").get<double>(), jm.at("stop_s").get<double>(),
                            vec_from_json(jm.at("velocity"))});
      }
    } else if (jo.contains("velocity")) {
      // single-segment shorthand
      o.motion.push_back({jo.value("start_s", 0.0), jo.value("stop_s", 1e9),
                          vec_from_json(jo.at("velocity"))});
    }
    c.obstacles.push_back(std::move(o));
  }
  c.validate();
  return c;
}

nlohmann::json scene_to_json(const SceneConfig& config) {
  nlohmann::json j;
  j["gnb_pos"] = vec_to_json(config.gnb_pos);
  j["ue_marker"] = box_to_json(config.ue_marker_box);
  j["extent"] = vec_to_json(config.extent);
  j["fps"] = config.fps;
  j["obstacles"] = nlohmann::json::array();
  for (const auto& o : config.obstacles) {
    nlohmann::json jo;
    jo["id"] = o.id;
    jo["box"] = box_to_json(o.initial_box);
    jo["motion"] = nlohmann::json::array();
    for (const auto& m : o.motion)
      jo["motion"].push_back({{"start_s", m.start_s},
                              {"stop_s", m.stop_s},
                              {"velocity", vec_to_json(m.velocity)}});
    j["obstacles"].push_back(std::move(jo));
  }
  return j;
}

void write_frame_csv_header(std::ostream& os) {
  os << "frame_index,time_s,entity,center_x,center_y,half_x,half_y\n";
}

void write_frame_csv(std::ostream& os, const Frame& frame) {
  char line[256];
  for (const auto& d : frame.detections) {
    std::snprintf(line, sizeof(line), "%llu,%.3f,%u,%.6f,%.6f,%.6f,%.6f\n",
                  static_cast<unsigned long long>(frame.frame_index), frame.time_s,
                  d.obstacle_id, d.box.center.x, d.box.center.y, d.box.half.x,
                  d.box.half.y);
    os << line;
  }
  if (frame.ue_marker) {
    std::snprintf(line, sizeof(line), "%llu,%.3f,ue,%.6f,%.6f,%.6f,%.6f\n",
                  static_cast<unsigned long long>(frame.frame_index), frame.time_s,
                  frame.ue_marker->center.x, frame.ue_marker->center.y,
                  frame.ue_marker->half.x, frame.ue_marker->half.y);
    os << line;
  }
}

}  // namespace riclab::scene
