#pragma once

#include <cstdint>
#include <optional>

namespace riclab::radio {

struct RadioConfig {
  std::uint32_t sample_period_ms = 10;
  double snr_los_db = 28.0;
  double blockage_loss_db = 10.0;
  double noise_sigma_db = 1.5;
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws std::invalid_argument
};

/// splitmix64-driven Box-Muller gaussian stream. Self-contained so the
/// sample sequence depends only on the seed, not on the standard library's
/// distribution internals.
class NoiseRng {
 public:
  explicit NoiseRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  double next_gaussian();  // mean 0, sigma 1

 private:
  std::uint64_t state_;
  std::optional<double> spare_;
};

/// One SNR sample in centi-dB:
/// round(100 * (snr_los - (blocked ? blockage_loss : 0) + sigma * gauss)).
std::int32_t sample_snr(const RadioConfig& config, bool blocked, NoiseRng& rng);

/// Config + rng bundle producing the periodic stream.
class SnrSampler {
 public:
  explicit SnrSampler(RadioConfig config);

  std::int32_t sample(bool blocked) { return sample_snr(config_, blocked, rng_); }

  /// Nominal run-relative time of sample k.
  std::uint64_t nominal_time_ns(std::uint64_t k) const {
    return k * config_.sample_period_ms * 1'000'000ull;
  }

  /// Samples emitted by a run of the given duration: floor(T*1000/period).
  static std::uint64_t sample_count(double duration_s, std::uint32_t period_ms);

  const RadioConfig& config() const { return config_; }

 private:
  RadioConfig config_;
  NoiseRng rng_;
};

}  // namespace riclab::radio
