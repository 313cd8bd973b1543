#include <doctest.h>

#include <map>
#include <vector>

#include "helpers.hpp"
#include "riclab/cvf.hpp"
#include "riclab/usecase.hpp"

using namespace riclab::cvf;
using riclab::geom::Box2D;
using riclab::geom::Vec2;
using riclab::scene::SceneConfig;

namespace {

struct EventLog {
  std::vector<CvfEvent> events;
};

EventLog run_engine(const SceneConfig& scn, const CvfConfig& cfg, std::uint64_t frames) {
  CvfEngine engine(scn.gnb_pos, cfg);
  EventLog log;
  for (std::uint64_t k = 0; k < frames; ++k) {
    for (const auto& ev : engine.step(riclab::scene::generate_frame(scn, k)))
      log.events.push_back(ev);
  }
  return log;
}

/// Per-obstacle event kinds must match (Prior* Blockage* Post*)*, with no
/// Post unless a Blockage preceded it in the current cycle.
bool grammar_ok(const std::vector<CvfEvent>& events, std::uint32_t obstacle_id) {
  int state = 0;  // 0=clear/prior, 1=blocked, 2=post
  for (const auto& ev : events) {
    if (ev.obstacle_id != obstacle_id) continue;
    switch (ev.kind) {
      case EventKind::PriorBlockage:
        if (state == 1) return false;  // Blockage -> Prior without Post
        if (state == 2) return false;  // Post -> Prior without finishing
        state = 0;
        break;
      case EventKind::Blockage:
        if (state == 2) return false;  // must complete the Post run first
        state = 1;
        break;
      case EventKind::PostBlockage:
        if (state == 0) return false;  // Post without a Blockage
        state = 2;
        break;
    }
  }
  return true;
}

ObstacleTrack make_track(std::vector<std::pair<std::uint64_t, Vec2>> samples,
                         Vec2 half = {0.25, 0.25}, std::size_t window = 5) {
  ObstacleTrack track(1, window);
  for (const auto& [frame, center] : samples) track.observe(frame, {center, half});
  return track;
}

}  // namespace

TEST_SUITE("cvf") {

TEST_CASE("velocity from window endpoints") {
  const auto track = make_track({{0, {0.0, 0.0}}, {5, {1.0, 0.0}}});
  const auto v = estimate_velocity(track, 5);
  REQUIRE(v.has_value());
  CHECK(v->x == doctest::Approx(1.0));  // 1 m over 1 s
  CHECK(v->y == doctest::Approx(0.0));
}

TEST_CASE("velocity undefined below two samples") {
  const auto track = make_track({{0, {0.0, 0.0}}});
  CHECK_FALSE(estimate_velocity(track, 5).has_value());
  ObstacleTrack empty(1, 5);
  CHECK_FALSE(estimate_velocity(empty, 5).has_value());
}

TEST_CASE("velocity estimated from a noiseless scene is exact") {
  riclab::scene::SceneConfig scn;
  scn.gnb_pos = {0.0, 0.0};
  scn.ue_marker_box = {{0.0, -20.0}, {0.3, 0.3}};
  scn.extent = {100.0, 100.0};
  scn.fps = 5;
  scn.obstacles.push_back(riclab::scene::ObstacleSpec{1, {{2.0, 3.0}, {0.4, 0.4}}, {{0.0, 1e9, {0.4, -0.2}}}});

  ObstacleTrack track(1, 5);
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto f = riclab::scene::generate_frame(scn, k);
    track.observe(k, f.detections.at(0).box);
  }
  const auto v = estimate_velocity(track, scn.fps);
  REQUIRE(v.has_value());
  CHECK(v->x == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(v->y == doctest::Approx(-0.2).epsilon(1e-9));
}

TEST_CASE("window bounds the history length") {
  ObstacleTrack track(1, 3);
  for (std::uint64_t k = 0; k < 10; ++k)
    track.observe(k, {{static_cast<double>(k), 0.0}, {0.1, 0.1}});
  CHECK(track.size() == 3);
  CHECK(track.oldest().frame_index == 7);
  CHECK(track.latest().frame_index == 9);
}

TEST_CASE("prediction horizon: crossing beyond it yields none") {
  // Right edge 1 m from the los at 1 m/s: reach time 1 s > 600 ms horizon.
  CvfConfig cfg;  // fps 5, horizon 600 -> 3 future frames
  auto track = make_track({{0, {-1.45, 0.0}}, {1, {-1.25, 0.0}}});  // v = (1, 0)
  CHECK_FALSE(predict_prior(track, {0.0, -5.0}, {0.0, 5.0}, cfg).has_value());
}

TEST_CASE("prediction inside the horizon reports the first crossing frame") {
  // Right edge 0.2 m from the los at 1 m/s: first future frame (+200 ms)
  // already touches.
  CvfConfig cfg;
  auto track = make_track({{0, {-0.65, 0.0}}, {1, {-0.45, 0.0}}});
  const auto lead = predict_prior(track, {0.0, -5.0}, {0.0, 5.0}, cfg);
  REQUIRE(lead.has_value());
  CHECK(*lead == 200);
}

TEST_CASE("zero velocity off the los predicts nothing") {
  CvfConfig cfg;
  auto track = make_track({{0, {-2.0, 0.0}}, {1, {-2.0, 0.0}}});
  CHECK_FALSE(predict_prior(track, {0.0, -5.0}, {0.0, 5.0}, cfg).has_value());
}

TEST_CASE("canonical crossing: exact event table") {
  const auto spec = riclab::usecase::canonical_scenario();
  const auto log = run_engine(spec.scene, spec.cvf, 50);

  // Closed form at 5 fps, descent 1.5 m/s from y=4: the los (y <= 0.5) is
  // first touched by a predicted frame at t=2.4, so Prior fires from frame 9
  // (with 3-frame lead, 600 ms) and frame 10 (400 ms); the ue overlap
  // (y <= 0.8) holds from frame 11 (t=2.2) through frame 34 (t=6.8, on the
  // retreat leg); Post follows for post_hold_frames=3.
  std::vector<std::pair<std::uint64_t, EventKind>> expected;
  expected.push_back({9, EventKind::PriorBlockage});
  expected.push_back({10, EventKind::PriorBlockage});
  for (std::uint64_t k = 11; k <= 34; ++k) expected.push_back({k, EventKind::Blockage});
  for (std::uint64_t k = 35; k <= 37; ++k) expected.push_back({k, EventKind::PostBlockage});

  REQUIRE(log.events.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(log.events[i].frame_index == expected[i].first);
    CHECK(log.events[i].kind == expected[i].second);
  }
  CHECK(log.events[0].time_to_block_ms == 600);
  CHECK(log.events[1].time_to_block_ms == 400);

  // First Prior precedes first Blockage by exactly two frame periods.
  const std::uint64_t lead_ms = (11 - 9) * 200;
  CHECK(lead_ms >= 400);
  CHECK(lead_ms <= 600);
  CHECK(grammar_ok(log.events, 1));
}

TEST_CASE("mini crossing: exact event table") {
  const auto scn = testutil::mini_crossing_scene();
  CvfConfig cfg;
  const auto log = run_engine(scn, cfg, 20);
  std::vector<std::pair<std::uint64_t, EventKind>> expected;
  expected.push_back({4, EventKind::PriorBlockage});
  expected.push_back({5, EventKind::PriorBlockage});
  for (std::uint64_t k = 6; k <= 14; ++k) expected.push_back({k, EventKind::Blockage});
  for (std::uint64_t k = 15; k <= 17; ++k) expected.push_back({k, EventKind::PostBlockage});
  REQUIRE(log.events.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(log.events[i].frame_index == expected[i].first);
    CHECK(log.events[i].kind == expected[i].second);
  }
}

TEST_CASE("no obstacles, no events") {
  SceneConfig scn;
  scn.gnb_pos = {0.0, 0.0};
  scn.ue_marker_box = {{10.0, 0.0}, {0.3, 0.3}};
  scn.extent = {40.0, 10.0};
  scn.fps = 5;
  CHECK(run_engine(scn, CvfConfig{}, 20).events.empty());
}

TEST_CASE("static obstacle away from los and ue stays silent") {
  SceneConfig scn;
  scn.gnb_pos = {0.0, 0.0};
  scn.ue_marker_box = {{10.0, 0.0}, {0.3, 0.3}};
  scn.extent = {60.0, 60.0};
  scn.fps = 5;
  scn.obstacles.push_back(riclab::scene::ObstacleSpec{1, {{5.0, 5.0}, {0.5, 0.5}}, {}});
  // geometry oracle: its box never meets the los segment nor the ue box
  for (std::uint64_t k = 0; k < 20; ++k) CHECK_FALSE(riclab::scene::ground_truth_blocked(scn, k));
  CHECK(run_engine(scn, CvfConfig{}, 20).events.empty());
}

TEST_CASE("crossing far from the ue and los emits nothing") {
  SceneConfig scn;
  scn.gnb_pos = {0.0, 0.0};
  scn.ue_marker_box = {{10.0, 0.0}, {0.3, 0.3}};
  scn.extent = {60.0, 60.0};
  scn.fps = 5;
  scn.obstacles.push_back(riclab::scene::ObstacleSpec{1, {{20.0, 4.0}, {0.5, 0.5}}, {{0.0, 6.0, {0.0, -1.5}}}});
  for (std::uint64_t k = 0; k < 30; ++k) CHECK_FALSE(riclab::scene::ground_truth_blocked(scn, k));
  CHECK(run_engine(scn, CvfConfig{}, 30).events.empty());
}

TEST_CASE("out-of-order frames are a hard error") {
  const auto scn = testutil::mini_crossing_scene();
  CvfEngine engine(scn.gnb_pos, CvfConfig{});
  engine.step(riclab::scene::generate_frame(scn, 3));
  CHECK_THROWS_AS(engine.step(riclab::scene::generate_frame(scn, 3)), std::invalid_argument);
  CHECK_THROWS_AS(engine.step(riclab::scene::generate_frame(scn, 1)), std::invalid_argument);
}

TEST_CASE("prior is withdrawn when the obstacle turns away") {
  // Approaches the ue row, reverses at y=1.0 before any overlap.
  SceneConfig scn;
  scn.gnb_pos = {0.0, 0.0};
  scn.ue_marker_box = {{10.0, 0.0}, {0.3, 0.3}};
  scn.extent = {30.0, 12.0};
  scn.fps = 5;
  scn.obstacles.push_back(riclab::scene::ObstacleSpec{
      1, {{10.0, 2.5}, {0.5, 0.5}}, {{0.0, 1.0, {0.0, -1.5}}, {1.0, 2.0, {0.0, 1.5}}}});

  const auto log = run_engine(scn, CvfConfig{}, 20);
  REQUIRE(!log.events.empty());
  for (const auto& ev : log.events) CHECK(ev.kind == EventKind::PriorBlockage);
  // Prior fires at frames 4 and 5 (extrapolated crossing at t=1.33 within
  // the horizon), then the reversal clears the prediction.
  CHECK(log.events.front().frame_index == 4);
  CHECK(log.events.back().frame_index == 5);
  CHECK(grammar_ok(log.events, 1));
}

TEST_CASE("fast blockage skips the prior phase") {
  // 7.5 m/s: the second frame already overlaps the ue marker.
  SceneConfig scn;
  scn.gnb_pos = {0.0, 0.0};
  scn.ue_marker_box = {{10.0, 0.0}, {0.3, 0.3}};
  scn.extent = {30.0, 12.0};
  scn.fps = 5;
  scn.obstacles.push_back(riclab::scene::ObstacleSpec{1, {{10.0, 2.3}, {0.5, 0.5}}, {{0.0, 0.2, {0.0, -7.5}}}});

  const auto log = run_engine(scn, CvfConfig{}, 10);
  REQUIRE(!log.events.empty());
  CHECK(log.events.front().kind == EventKind::Blockage);
  CHECK(log.events.front().frame_index == 1);
  CHECK(grammar_ok(log.events, 1));
}

TEST_CASE("blockage events agree with the overlap oracle across a family") {
  // Sweep descent speeds and offsets; on every frame a Blockage event for
  // the obstacle must coincide with box-vs-last-known-marker overlap.
  for (const double speed : {0.75, 1.0, 1.5, 2.5}) {
    for (const double start_y : {2.0, 2.4, 3.1}) {
      SceneConfig scn;
      scn.gnb_pos = {0.0, 0.0};
      scn.ue_marker_box = {{10.0, 0.0}, {0.3, 0.3}};
      scn.extent = {30.0, 12.0};
      scn.fps = 5;
      const double cross_t = start_y / speed;  // reaches y=0
      scn.obstacles.push_back(riclab::scene::ObstacleSpec{
          1, {{10.0, start_y}, {0.5, 0.5}}, {{0.0, cross_t + 2.0, {0.0, -speed}}}});

      CvfEngine engine(scn.gnb_pos, CvfConfig{});
      const std::uint64_t frames = static_cast<std::uint64_t>((cross_t + 3.0) * scn.fps);
      std::vector<CvfEvent> events;
      for (std::uint64_t k = 0; k < frames; ++k) {
        const auto frame = riclab::scene::generate_frame(scn, k);
        const auto step_events = engine.step(frame);
        // one event per obstacle per frame at most
        CHECK(step_events.size() <= 1);
        const bool overlap = riclab::geom::boxes_overlap(
            riclab::geom::Box2D{riclab::scene::obstacle_center_at(scn.obstacles[0],
                                                                  frame.time_s),
                                scn.obstacles[0].initial_box.half},
            scn.ue_marker_box);
        const bool got_blockage =
            !step_events.empty() && step_events.front().kind == EventKind::Blockage;
        CHECK(got_blockage == overlap);
        for (const auto& ev : step_events) events.push_back(ev);
      }
      CHECK(grammar_ok(events, 1));

      // Lead-time soundness: the first Prior precedes the first Blockage by
      // at least one frame period and at most the horizon.
      std::optional<std::uint64_t> first_prior;
      std::optional<std::uint64_t> first_blockage;
      for (const auto& ev : events) {
        if (ev.kind == EventKind::PriorBlockage && !first_prior) first_prior = ev.frame_index;
        if (ev.kind == EventKind::Blockage && !first_blockage) first_blockage = ev.frame_index;
      }
      REQUIRE(first_blockage.has_value());
      if (first_prior) {
        CHECK(*first_prior < *first_blockage);
        CHECK((*first_blockage - *first_prior) * 200 <= 600 + 200);
      }
    }
  }
}

TEST_CASE("translation invariance of the event sequence") {
  const auto base_spec = riclab::usecase::canonical_scenario();
  const auto base = run_engine(base_spec.scene, base_spec.cvf, 50);
  for (const Vec2 offset : {Vec2{4.0, -3.0}, Vec2{-8.0, 2.0}}) {
    auto moved = base_spec.scene;
    moved.gnb_pos = moved.gnb_pos + offset;
    moved.ue_marker_box.center = moved.ue_marker_box.center + offset;
    for (auto& o : moved.obstacles) o.initial_box.center = o.initial_box.center + offset;
    const auto log = run_engine(moved, base_spec.cvf, 50);
    REQUIRE(log.events.size() == base.events.size());
    for (std::size_t i = 0; i < base.events.size(); ++i) {
      CHECK(log.events[i].kind == base.events[i].kind);
      CHECK(log.events[i].frame_index == base.events[i].frame_index);
      CHECK(log.events[i].time_to_block_ms == base.events[i].time_to_block_ms);
    }
  }
}

TEST_CASE("mid-path los crossing: asymmetric rule vs the los-as-blockage flag") {
  // Crosses the los at x=5, far from the UE box at x=10: under the default
  // rule this is never a Blockage (only predicted), under the flag the
  // crossing frames are.
  SceneConfig scn;
  scn.gnb_pos = {0.0, 0.0};
  scn.ue_marker_box = {{10.0, 0.0}, {0.3, 0.3}};
  scn.extent = {30.0, 12.0};
  scn.fps = 5;
  scn.obstacles.push_back(
      riclab::scene::ObstacleSpec{1, {{5.0, 2.4}, {0.5, 0.5}}, {{0.0, 2.4, {0.0, -1.5}}}});

  CvfConfig literal;
  const auto log_literal = run_engine(scn, literal, 20);
  // los touch band is |y| <= 0.5: frames 7..9. Predictions reach it from
  // frame 4 and stop seeing it at frame 9 (all lookahead positions are past
  // the band by then), so the literal rule emits Prior on frames 4..8 only.
  REQUIRE(log_literal.events.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(log_literal.events[i].kind == EventKind::PriorBlockage);
    CHECK(log_literal.events[i].frame_index == i + 4);
  }

  CvfConfig with_flag;
  with_flag.los_counts_as_blockage = true;
  const auto log_flag = run_engine(scn, with_flag, 20);
  REQUIRE(log_flag.events.size() == 9);
  for (std::size_t i = 0; i < 3; ++i) CHECK(log_flag.events[i].kind == EventKind::PriorBlockage);
  for (std::size_t i = 3; i < 6; ++i) {
    CHECK(log_flag.events[i].kind == EventKind::Blockage);
    CHECK(log_flag.events[i].frame_index == i + 4);  // frames 7..9
  }
  for (std::size_t i = 6; i < 9; ++i) CHECK(log_flag.events[i].kind == EventKind::PostBlockage);
  CHECK(grammar_ok(log_flag.events, 1));
}

TEST_CASE("config validation") {
  CvfConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.window_frames = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = CvfConfig{};
  cfg.horizon_ms = 100;  // below one frame period at 5 fps
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = CvfConfig{};
  CHECK(cfg.horizon_frames() == 3);
  cfg.horizon_ms = 601;
  CHECK(cfg.horizon_frames() == 4);
}

TEST_CASE("event csv format") {
  std::ostringstream os;
  write_event_csv_header(os);
  write_event_csv(os, {EventKind::PriorBlockage, 1, 9, {{10.0, 1.3}, {0.5, 0.5}}, 600}, 5);
  write_event_csv(os, {EventKind::Blockage, 1, 11, {{10.0, 0.7}, {0.5, 0.5}}, 0}, 5);
  const std::string csv = os.str();
  CHECK(csv.find("frame_index,time_s,obstacle_id,kind,time_to_block_ms\n") != std::string::npos);
  CHECK(csv.find("9,1.800,1,prior,600\n") != std::string::npos);
  CHECK(csv.find("11,2.200,1,blockage,0\n") != std::string::npos);
}

}  // TEST_SUITE
