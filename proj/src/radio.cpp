#include "riclab/radio.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace riclab::radio {

void RadioConfig::validate() const {
  if (sample_period_ms < 1) throw std::invalid_argument("radio: sample period must be >= 1 ms");
  if (blockage_loss_db < 0.0) throw std::invalid_argument("radio: blockage loss must be >= 0");
  if (noise_sigma_db < 0.0) throw std::invalid_argument("radio: noise sigma must be >= 0");
}

std::uint64_t NoiseRng::next_u64() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double NoiseRng::next_gaussian() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  // Box-Muller on uniforms from the top 53 bits; u1 shifted away from 0.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) / 9007199254740993.0;
  const double u2 = static_cast<double>(next_u64() >> 11) / 9007199254740992.0;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::int32_t sample_snr(const RadioConfig& config, bool blocked, NoiseRng& rng) {
  double snr = config.snr_los_db - (blocked ? config.blockage_loss_db : 0.0);
  if (config.noise_sigma_db > 0.0) snr += config.noise_sigma_db * rng.next_gaussian();
  return static_cast<std::int32_t>(std::lround(snr * 100.0));
}

SnrSampler::SnrSampler(RadioConfig config) : config_(config), rng_(config.rng_seed) {
  config_.validate();
}

std::uint64_t SnrSampler::sample_count(double duration_s, std::uint32_t period_ms) {
  if (period_ms < 1) throw std::invalid_argument("radio: sample period must be >= 1 ms");
  // Tiny bias keeps exact multiples from flooring one short under fp error.
  return static_cast<std::uint64_t>(duration_s * 1000.0 / period_ms + 1e-9);
}

}  // namespace riclab::radio
