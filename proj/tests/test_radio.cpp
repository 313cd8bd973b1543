#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "riclab/radio.hpp"

using namespace riclab::radio;

TEST_SUITE("radio") {

TEST_CASE("noiseless samples are exact two-level values") {
  RadioConfig cfg;
  cfg.noise_sigma_db = 0.0;
  NoiseRng rng(1);
  CHECK(sample_snr(cfg, false, rng) == 2800);
  CHECK(sample_snr(cfg, true, rng) == 1800);
}

TEST_CASE("fixed seed reproduces the stream bit for bit") {
  RadioConfig cfg;
  cfg.rng_seed = 7;
  SnrSampler a(cfg);
  SnrSampler b(cfg);
  for (int i = 0; i < 1000; ++i) CHECK(a.sample(i % 3 == 0) == b.sample(i % 3 == 0));
}

TEST_CASE("gaussian noise is standard within tolerance") {
  NoiseRng rng(123);
  const int n = 100000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.next_gaussian();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("blocked and unblocked means differ by the configured loss") {
  RadioConfig cfg;
  cfg.rng_seed = 42;
  SnrSampler sampler(cfg);
  const int n = 10000;
  double unblocked = 0.0;
  double blocked = 0.0;
  for (int i = 0; i < n; ++i) unblocked += sampler.sample(false) / 100.0;
  for (int i = 0; i < n; ++i) blocked += sampler.sample(true) / 100.0;
  const double diff = unblocked / n - blocked / n;
  CHECK(diff == doctest::Approx(10.0).epsilon(0.01));  // 10.0 +- 0.1 dB
}

TEST_CASE("separation exceeds 5 dB over 200 samples per state") {
  RadioConfig cfg;
  cfg.rng_seed = 7;
  SnrSampler sampler(cfg);
  double unblocked = 0.0;
  double blocked = 0.0;
  for (int i = 0; i < 200; ++i) unblocked += sampler.sample(false) / 100.0;
  for (int i = 0; i < 200; ++i) blocked += sampler.sample(true) / 100.0;
  CHECK(unblocked / 200 - blocked / 200 > 5.0);
}

TEST_CASE("cadence: floor(duration / period) samples") {
  CHECK(SnrSampler::sample_count(2.0, 10) == 200);
  CHECK(SnrSampler::sample_count(0.2, 10) == 20);  // 20 samples per 200 ms window
  CHECK(SnrSampler::sample_count(0.199, 10) == 19);
  CHECK(SnrSampler::sample_count(0.3, 10) == 30);
  CHECK(SnrSampler::sample_count(10.0, 10) == 1000);
}

TEST_CASE("nominal sample times sit on the period grid") {
  RadioConfig cfg;
  SnrSampler sampler(cfg);
  CHECK(sampler.nominal_time_ns(0) == 0);
  CHECK(sampler.nominal_time_ns(1) == 10'000'000ull);
  CHECK(sampler.nominal_time_ns(20) == 200'000'000ull);
}

TEST_CASE("validation rejects bad configs") {
  RadioConfig cfg;
  cfg.sample_period_ms = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RadioConfig{};
  cfg.noise_sigma_db = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RadioConfig{};
  cfg.blockage_loss_db = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_THROWS_AS(SnrSampler::sample_count(1.0, 0), std::invalid_argument);
}

}  // TEST_SUITE
