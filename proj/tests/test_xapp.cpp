#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "helpers.hpp"
#include "riclab/agent.hpp"
#include "riclab/broker.hpp"
#include "riclab/clock.hpp"
#include "riclab/radio.hpp"
#include "riclab/scene.hpp"
#include "riclab/xapp.hpp"

using namespace riclab;
using xapp::CvfKind;
using xapp::ReceivedIndication;

namespace {

ReceivedIndication snr_at(std::uint64_t sample_ns, std::int32_t centi,
                          std::uint64_t recv_ns = 0) {
  return {recv_ns, 200, sample_ns, sample_ns, wire::SensingPayload{
                                                  wire::SnrReport{1, centi, sample_ns}}};
}

ReceivedIndication cvf_at(std::uint64_t frame, CvfKind kind, std::uint64_t recv_ns) {
  wire::SensingPayload payload;
  switch (kind) {
    case CvfKind::prior:
      payload = wire::PriorBlockage{1, {{10, 1}, {0.5, 0.5}}, 400, frame, 1};
      break;
    case CvfKind::blockage:
      payload = wire::Blockage{1, {{10, 0.5}, {0.5, 0.5}}, frame, 1};
      break;
    default:
      payload = wire::PostBlockage{1, frame, 1};
      break;
  }
  return {recv_ns, 100, frame, recv_ns, payload};
}

/// Deterministic offline rendition of the crossing use case: radio samples
/// from the sampler against scene ground truth, cvf messages from the
/// engine's event stream. No transport involved.
std::vector<ReceivedIndication> synthetic_usecase_stream(const scene::SceneConfig& scn,
                                                         const cvf::CvfConfig& cfg,
                                                         const radio::RadioConfig& rcfg,
                                                         double duration_s) {
  std::vector<ReceivedIndication> stream;
  radio::SnrSampler sampler(rcfg);
  const auto samples = radio::SnrSampler::sample_count(duration_s, rcfg.sample_period_ms);
  for (std::uint64_t k = 0; k < samples; ++k) {
    const std::uint64_t t_ns = sampler.nominal_time_ns(k);
    const bool blocked = scene::ground_truth_blocked_at(scn, static_cast<double>(t_ns) / 1e9);
    stream.push_back(snr_at(t_ns, sampler.sample(blocked), t_ns));
  }
  cvf::CvfEngine engine(scn.gnb_pos, cfg);
  const auto frames = static_cast<std::uint64_t>(duration_s * scn.fps + 1e-9);
  for (std::uint64_t k = 0; k < frames; ++k) {
    for (const auto& ev : engine.step(scene::generate_frame(scn, k))) {
      const auto kind = ev.kind == cvf::EventKind::PriorBlockage ? CvfKind::prior
                        : ev.kind == cvf::EventKind::Blockage    ? CvfKind::blockage
                                                                 : CvfKind::post;
      stream.push_back(cvf_at(ev.frame_index, kind, k * 200'000'000ull));
    }
  }
  std::stable_sort(stream.begin(), stream.end(),
                   [](const ReceivedIndication& a, const ReceivedIndication& b) {
                     return a.recv_ns < b.recv_ns;
                   });
  return stream;
}

}  // namespace

TEST_SUITE("xapp") {

TEST_CASE("fuse: 20 samples and one blockage message form one interval record") {
  std::vector<ReceivedIndication> stream;
  for (std::uint64_t k = 0; k < 20; ++k) stream.push_back(snr_at(k * 10'000'000ull, 2800));
  stream.push_back(cvf_at(0, CvfKind::blockage, 0));

  const auto timeline = xapp::fuse(stream, 200, 5);
  REQUIRE(timeline.intervals.size() == 1);
  CHECK(timeline.intervals[0].sample_count == 20);
  CHECK(timeline.intervals[0].mean_snr_db == doctest::Approx(28.0));
  CHECK(timeline.intervals[0].kind == CvfKind::blockage);
  CHECK(timeline.snr_samples == 20);
}

TEST_CASE("fuse: interval without a cvf message has kind none") {
  std::vector<ReceivedIndication> stream;
  for (std::uint64_t k = 0; k < 40; ++k) stream.push_back(snr_at(k * 10'000'000ull, 2800));
  stream.push_back(cvf_at(1, CvfKind::prior, 0));  // frame 1 -> interval 1 only

  const auto timeline = xapp::fuse(stream, 200, 5);
  REQUIRE(timeline.intervals.size() == 2);
  CHECK(timeline.intervals[0].kind == CvfKind::none);
  CHECK(timeline.intervals[1].kind == CvfKind::prior);
}

TEST_CASE("fuse: known per-interval means are reproduced exactly") {
  // interval 0: 20 samples at 30.00 dB; interval 1: 20 at 20.50 dB;
  // interval 2: a lone 25.25 dB sample.
  std::vector<ReceivedIndication> stream;
  for (std::uint64_t k = 0; k < 20; ++k) stream.push_back(snr_at(k * 10'000'000ull, 3000));
  for (std::uint64_t k = 20; k < 40; ++k) stream.push_back(snr_at(k * 10'000'000ull, 2050));
  stream.push_back(snr_at(410'000'000ull, 2525));

  const auto timeline = xapp::fuse(stream, 200, 5);
  REQUIRE(timeline.intervals.size() == 3);
  CHECK(timeline.intervals[0].mean_snr_db == doctest::Approx(30.0));
  CHECK(timeline.intervals[1].mean_snr_db == doctest::Approx(20.5));
  CHECK(timeline.intervals[2].mean_snr_db == doctest::Approx(25.25));
  CHECK(timeline.intervals[2].sample_count == 1);
}

TEST_CASE("fuse: every sample lands in exactly one interval") {
  std::mt19937_64 rng(5);
  std::vector<ReceivedIndication> stream;
  std::uniform_int_distribution<std::uint64_t> t(0, 9'999'999'999ull);
  for (int i = 0; i < 5000; ++i) stream.push_back(snr_at(t(rng), 2500));
  const auto timeline = xapp::fuse(stream, 200, 5);
  std::uint64_t total = 0;
  for (const auto& fi : timeline.intervals) total += fi.sample_count;
  CHECK(total == 5000);
  CHECK(timeline.snr_samples == 5000);
}

TEST_CASE("fuse: the latest cvf frame in an interval wins") {
  std::vector<ReceivedIndication> stream;
  stream.push_back(cvf_at(0, CvfKind::prior, 0));
  stream.push_back(cvf_at(0, CvfKind::blockage, 1));  // same frame: later arrival, same index
  const auto t1 = xapp::fuse(stream, 200, 5);
  CHECK(t1.intervals.at(0).kind == CvfKind::blockage);
}

TEST_CASE("detect_transitions: crossing stream brackets the blockage period") {
  std::vector<ReceivedIndication> stream;
  stream.push_back(cvf_at(4, CvfKind::prior, 800'000'000));
  stream.push_back(cvf_at(5, CvfKind::prior, 1'000'000'000));
  stream.push_back(cvf_at(6, CvfKind::blockage, 1'200'000'000));
  stream.push_back(cvf_at(7, CvfKind::blockage, 1'400'000'000));
  stream.push_back(cvf_at(8, CvfKind::post, 1'600'000'000));

  const auto log = xapp::detect_transitions(stream);
  REQUIRE(log.los_lost_ns.has_value());
  REQUIRE(log.los_return_ns.has_value());
  CHECK(*log.los_lost_ns == 1'200'000'000);
  CHECK(*log.los_return_ns == 1'600'000'000);
  CHECK(*log.los_return_ns > *log.los_lost_ns);
  REQUIRE(log.anticipation_ms.has_value());
  CHECK(*log.anticipation_ms == doctest::Approx(400.0));
}

TEST_CASE("detect_transitions: no events, all fields absent") {
  std::vector<ReceivedIndication> stream;
  for (std::uint64_t k = 0; k < 10; ++k) stream.push_back(snr_at(k * 10'000'000ull, 2800));
  const auto log = xapp::detect_transitions(stream);
  CHECK_FALSE(log.los_lost_ns.has_value());
  CHECK_FALSE(log.los_return_ns.has_value());
  CHECK_FALSE(log.anticipation_ms.has_value());
}

TEST_CASE("detect_transitions: blockage without prior leaves anticipation absent") {
  std::vector<ReceivedIndication> stream;
  stream.push_back(cvf_at(1, CvfKind::blockage, 200'000'000));
  stream.push_back(cvf_at(5, CvfKind::post, 1'000'000'000));
  const auto log = xapp::detect_transitions(stream);
  CHECK(log.los_lost_ns.has_value());
  CHECK(log.los_return_ns.has_value());
  CHECK_FALSE(log.anticipation_ms.has_value());
}

TEST_CASE("synthetic use case: snr means order correctly around the blockage") {
  const auto scn = testutil::mini_crossing_scene();
  radio::RadioConfig rcfg;
  rcfg.rng_seed = 42;
  const auto stream = synthetic_usecase_stream(scn, cvf::CvfConfig{}, rcfg, 4.0);
  const auto timeline = xapp::fuse(stream, 200, scn.fps);

  // Locate the blockage interval range from the fused kinds.
  std::optional<std::uint64_t> first_blk;
  std::optional<std::uint64_t> last_blk;
  for (const auto& fi : timeline.intervals) {
    if (fi.kind == CvfKind::blockage) {
      if (!first_blk) first_blk = fi.interval_index;
      last_blk = fi.interval_index;
    }
  }
  REQUIRE(first_blk.has_value());

  double pre = 0.0;
  int pre_n = 0;
  double blocked = 0.0;
  int blocked_n = 0;
  double post = 0.0;
  int post_n = 0;
  for (const auto& fi : timeline.intervals) {
    if (fi.sample_count == 0) continue;
    if (fi.interval_index < *first_blk) {
      pre += fi.mean_snr_db;
      pre_n++;
    } else if (fi.interval_index <= *last_blk) {
      blocked += fi.mean_snr_db;
      blocked_n++;
    } else {
      post += fi.mean_snr_db;
      post_n++;
    }
  }
  REQUIRE(pre_n > 0);
  REQUIRE(blocked_n > 0);
  REQUIRE(post_n > 0);
  CHECK(blocked / blocked_n < pre / pre_n - 5.0);
  CHECK(std::abs(post / post_n - pre / pre_n) < 2.0);
}

TEST_CASE("transition consistency against fused blockage intervals") {
  const auto scn = testutil::mini_crossing_scene();
  radio::RadioConfig rcfg;
  rcfg.rng_seed = 1;
  const auto stream = synthetic_usecase_stream(scn, cvf::CvfConfig{}, rcfg, 4.0);
  const auto timeline = xapp::fuse(stream, 200, scn.fps);
  const auto log = xapp::detect_transitions(stream);

  REQUIRE(log.los_lost_ns.has_value());
  REQUIRE(log.los_return_ns.has_value());
  CHECK(*log.los_return_ns > *log.los_lost_ns);

  // The fused blockage intervals are exactly frames 6..14 at the 200 ms
  // grid; prior intervals precede them, post intervals follow.
  for (const auto& fi : timeline.intervals) {
    if (fi.interval_index >= 6 && fi.interval_index <= 14)
      CHECK(fi.kind == CvfKind::blockage);
    else
      CHECK(fi.kind != CvfKind::blockage);
  }
}

TEST_CASE("fused csv schema") {
  std::vector<ReceivedIndication> stream;
  for (std::uint64_t k = 0; k < 20; ++k) stream.push_back(snr_at(k * 10'000'000ull, 2812));
  stream.push_back(cvf_at(0, CvfKind::prior, 0));
  std::ostringstream os;
  xapp::write_fused_csv(os, xapp::fuse(stream, 200, 5));
  CHECK(os.str() == "interval_index,t_start_s,mean_snr_db,cvf_kind\n"
                    "0,0.000,28.1200,prior\n");
}

TEST_CASE("live session: subscribing to both streams receives both") {
  broker::Broker broker{broker::BrokerConfig{}};
  broker.start();
  const net::Endpoint agent_ep{"127.0.0.1", broker.agent_port()};
  const net::Endpoint xapp_ep{"127.0.0.1", broker.xapp_port()};

  auto session = xapp::XappSession::connect(xapp_ep, 900);
  session.subscribe({{wire::kAnyAgent, wire::PayloadKind::PriorBlockage},
                     {wire::kAnyAgent, wire::PayloadKind::Blockage},
                     {wire::kAnyAgent, wire::PayloadKind::PostBlockage},
                     {wire::kAnyAgent, wire::PayloadKind::SnrReport}});

  std::vector<ReceivedIndication> got;
  std::thread rx([&] {
    session.run([&](const ReceivedIndication& ind) {
      got.push_back(ind);
      return true;
    });
  });

  const auto scn = testutil::mini_crossing_scene();
  radio::RadioConfig rcfg;
  rcfg.rng_seed = 3;
  std::thread cvf_thread([&] {
    agent::run_cvf_agent(scn, cvf::CvfConfig{}, {100, 1, 4.0, true}, agent_ep);
  });
  std::thread radio_thread([&] {
    agent::run_radio_agent(scn, rcfg, {200, 1, 4.0, true}, agent_ep);
  });
  cvf_thread.join();
  radio_thread.join();

  const std::uint64_t expected = 14 + 400;  // cvf events + snr samples
  const auto deadline = monotonic_ns() + 3'000'000'000ull;
  while (got.size() < expected && monotonic_ns() < deadline)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  session.stop();
  rx.join();

  CHECK(got.size() == expected);
  bool saw_cvf = false;
  bool saw_snr = false;
  for (const auto& ind : got) {
    saw_cvf |= std::holds_alternative<wire::Blockage>(ind.payload);
    saw_snr |= std::holds_alternative<wire::SnrReport>(ind.payload);
    CHECK(ind.recv_ns >= ind.send_ns);  // same monotonic clock
  }
  CHECK(saw_cvf);
  CHECK(saw_snr);

  session.close();
  broker.stop();
}

}  // TEST_SUITE
