#pragma once

#include <cstdint>

namespace groupsim {

// Deterministic PRNG (splitmix64). The standard library engines are
// deterministic too, but the distributions are not specified bit-exactly
// across implementations, and replay identity depends on every draw, so the
// whole path is pinned here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        ++draws_;
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound), bound > 0. Fixed-width multiply-shift so the
    // mapping is identical on every platform.
    std::uint64_t bounded(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    // Number of draws consumed so far; equal draw counts on equal seeds is
    // a cheap replay invariant.
    std::uint64_t draws() const { return draws_; }

private:
    std::uint64_t state_;
    std::uint64_t draws_ = 0;
};

} // namespace groupsim
