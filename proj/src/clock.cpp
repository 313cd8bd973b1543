#include "riclab/clock.hpp"

namespace riclab {

void sleep_until_ns(std::uint64_t deadline_ns) noexcept {
  timespec ts{};
  ts.tv_sec = static_cast<time_t>(deadline_ns / 1'000'000'000ull);
  ts.tv_nsec = static_cast<long>(deadline_ns % 1'000'000'000ull);
  while (clock_nanosleep(CLOCK_MONOTONIC, TIMER_ABSTIME, &ts, nullptr) != 0) {
    // retried on EINTR; any other failure degrades to a busy return
    if (monotonic_ns() >= deadline_ns) return;
  }
}

}  // namespace riclab
