#pragma once

#include <cstdint>
#include <ctime>

namespace riclab {

/// Nanoseconds on the host-wide monotonic clock (CLOCK_MONOTONIC).
/// Comparable across processes on the same host, which is what the
/// send-to-receive latency path relies on.
inline std::uint64_t monotonic_ns() noexcept {
  timespec ts{};
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return static_cast<std::uint64_t>(ts.tv_sec) * 1'000'000'000ull +
         static_cast<std::uint64_t>(ts.tv_nsec);
}

/// Absolute-deadline sleep on the same clock as monotonic_ns().
void sleep_until_ns(std::uint64_t deadline_ns) noexcept;

}  // namespace riclab
