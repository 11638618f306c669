#include "groupsim/threshold.hpp"

#include <cstdlib>

namespace groupsim {

ThresholdUpdate update_threshold(std::uint32_t t_old, std::uint64_t q_window,
                                 std::uint32_t t_min) {
    const std::int64_t t = static_cast<std::int64_t>(t_old);
    const std::int64_t q = q_window >= t_old ? t : static_cast<std::int64_t>(q_window);

    std::int64_t raw;
    if (q < t) {
        raw = std::llabs(t - 2 * q) - (t - q);
    } else {
        raw = t - t / 10;
    }

    ThresholdUpdate out;
    out.raw = raw;
    out.clamped = raw < static_cast<std::int64_t>(t_min)
                      ? t_min
                      : static_cast<std::uint32_t>(raw);
    return out;
}

} // namespace groupsim
