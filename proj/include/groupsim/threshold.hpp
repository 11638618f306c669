#pragma once

#include <cstdint>

namespace groupsim {

struct ThresholdUpdate {
    std::int64_t raw = 0;      // before the floor at t_min; may be negative
    std::uint32_t clamped = 0; // final threshold
};

// Per-window adaptation of a worker's concurrency cap.
//
//   f(t, q) = |t - 2q|
//   q <  t : raw = f(t, q) - (t - q)
//   q >= t : raw = t - t/10       (overload counts as a full window)
//
// The result is floored at t_min (>= 1). With q == t every t <= 9 is a
// fixed point, and a fully loaded large t decays by t/10 per window.
ThresholdUpdate update_threshold(std::uint32_t t_old, std::uint64_t q_window,
                                 std::uint32_t t_min);

} // namespace groupsim
