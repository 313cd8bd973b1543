#pragma once

// Shared test utilities: random wire-message generators, the sampling
// oracle for segment/box intersection with its boundary-band adjudication,
// and small constructed scenes.

#include <random>
#include <vector>

#include "riclab/geometry.hpp"
#include "riclab/scene.hpp"
#include "riclab/wire.hpp"

namespace testutil {

using riclab::geom::Box2D;
using riclab::geom::Vec2;

// --- random wire messages ----------------------------------------------------

inline riclab::wire::SensingPayload random_payload(std::mt19937_64& rng,
                                                   riclab::wire::PayloadKind kind) {
  using namespace riclab::wire;
  std::uniform_real_distribution<double> coord(-100.0, 100.0);
  std::uniform_real_distribution<double> half(0.01, 10.0);
  std::uniform_int_distribution<std::uint32_t> u32(0, 0xFFFFFFFFu);
  std::uniform_int_distribution<std::uint64_t> u64(0, ~0ull);
  std::uniform_int_distribution<std::int32_t> i32(-1000000, 1000000);
  const Box2D box{{coord(rng), coord(rng)}, {half(rng), half(rng)}};
  switch (kind) {
    case PayloadKind::PriorBlockage:
      return PriorBlockage{u32(rng), box, u32(rng) % 100000 + 1, u64(rng), u32(rng)};
    case PayloadKind::Blockage:
      return Blockage{u32(rng), box, u64(rng), u32(rng)};
    case PayloadKind::PostBlockage:
      return PostBlockage{u32(rng), u64(rng), u32(rng)};
    case PayloadKind::SnrReport:
      return SnrReport{u32(rng), i32(rng), u64(rng)};
    case PayloadKind::SyntheticPad: {
      SyntheticPad pad;
      pad.pad.resize(u32(rng) % 2049);
      for (auto& b : pad.pad) b = static_cast<std::uint8_t>(u32(rng));
      return pad;
    }
  }
  return SyntheticPad{};
}

inline riclab::wire::MessageEnvelope random_envelope(std::mt19937_64& rng,
                                                     riclab::wire::PayloadKind kind) {
  std::uniform_int_distribution<std::uint32_t> u32(0, 0xFFFFFFFEu);
  std::uniform_int_distribution<std::uint64_t> u64(0, ~0ull);
  return riclab::wire::make_indication(u32(rng), u64(rng), u64(rng),
                                       random_payload(rng, kind));
}

// --- segment/box oracles --------------------------------------------------------

/// n points uniformly spaced on the closed segment; true iff any lies in the
/// closed box.
inline bool sampling_hit(Vec2 p0, Vec2 p1, const Box2D& box, int n = 1000) {
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / (n - 1);
    const Vec2 p{p0.x + (p1.x - p0.x) * t, p0.y + (p1.y - p0.y) * t};
    if (riclab::geom::contains(box, p)) return true;
  }
  return false;
}

inline double orient(Vec2 a, Vec2 b, Vec2 c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

inline bool point_on_segment(Vec2 p, Vec2 a, Vec2 b) {
  return orient(a, b, p) == 0.0 && p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
         p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y);
}

/// Closed segment-segment intersection via orientation signs.
inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double o1 = orient(a, b, c);
  const double o2 = orient(a, b, d);
  const double o3 = orient(c, d, a);
  const double o4 = orient(c, d, b);
  if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 &&
      o4 != 0)
    return true;
  return (o1 == 0 && point_on_segment(c, a, b)) || (o2 == 0 && point_on_segment(d, a, b)) ||
         (o3 == 0 && point_on_segment(a, c, d)) || (o4 == 0 && point_on_segment(b, c, d));
}

/// Independent combinatorial test: an endpoint inside the box, or the
/// segment crossing one of its four edges.
inline bool edge_oracle(Vec2 p0, Vec2 p1, const Box2D& box) {
  if (riclab::geom::contains(box, p0) || riclab::geom::contains(box, p1)) return true;
  const Vec2 c00{box.min_x(), box.min_y()};
  const Vec2 c10{box.max_x(), box.min_y()};
  const Vec2 c11{box.max_x(), box.max_y()};
  const Vec2 c01{box.min_x(), box.max_y()};
  return segments_intersect(p0, p1, c00, c10) || segments_intersect(p0, p1, c10, c11) ||
         segments_intersect(p0, p1, c11, c01) || segments_intersect(p0, p1, c01, c00);
}

inline Box2D resized(const Box2D& box, double delta) {
  return {box.center,
          {std::max(box.half.x + delta, 1e-12), std::max(box.half.y + delta, 1e-12)}};
}

/// The case sits within `band` of the box boundary: growing or shrinking the
/// box by the band flips the (independent) answer.
inline bool within_boundary_band(Vec2 p0, Vec2 p1, const Box2D& box, double band = 1e-6) {
  return edge_oracle(p0, p1, resized(box, band)) != edge_oracle(p0, p1, resized(box, -band));
}

// --- constructed scenes -------------------------------------------------------------

/// Compressed crossing for integration tests: same shape as the canonical
/// scenario (descend, hold, retreat) on a 4 s clock.
/// Closed form: Prior at frames 4-5, Blockage at frames 6-14, Post 15-17.
inline riclab::scene::SceneConfig mini_crossing_scene() {
  riclab::scene::SceneConfig scn;
  scn.gnb_pos = {0.0, 0.0};
  scn.ue_marker_box = {{10.0, 0.0}, {0.3, 0.3}};
  scn.extent = {30.0, 12.0};
  scn.fps = 5;
  riclab::scene::ObstacleSpec obstacle;
  obstacle.id = 1;
  obstacle.initial_box = {{10.0, 2.4}, {0.5, 0.5}};
  obstacle.motion = {{0.0, 1.6, {0.0, -1.5}}, {2.4, 4.0, {0.0, 1.5}}};
  scn.obstacles.push_back(obstacle);
  return scn;
}

}  // namespace testutil
