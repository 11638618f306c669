#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace groupsim {

// Milliseconds of simulated time. No component of the simulator may read
// wall-clock time; every timestamp in the system is a VirtualTime.
using VirtualTime = std::uint64_t;

// Peer ids are scenario-assigned, unique and totally ordered. 0 is reserved
// as the "none" / kernel sentinel and never names a real peer.
using PeerId = std::uint32_t;
inline constexpr PeerId kNoPeer = 0;

// Group ids are allocated in creation order starting at 1. 0 means "none"
// (the parent of a root group).
using GroupId = std::uint32_t;
inline constexpr GroupId kNoGroup = 0;

using QueryId = std::uint64_t;
using EventSeq = std::uint64_t;

// Abstract unidirectional channel reference. Messages addressed to a pipe
// deliver only to its owner.
struct PipeRef {
    PeerId owner = kNoPeer;
    std::uint32_t pipe_id = 0;

    auto operator<=>(const PipeRef&) const = default;
};

// Exact rational, used wherever a probability or ratio must stay bit-exact
// (message loss, availability). Never converted to floating point inside
// the simulation.
struct Rational {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    auto operator<=>(const Rational&) const = default;
};

std::string format_rational(const Rational& r);

// Renders num/den as a fixed-point decimal string with `places` digits,
// round-half-up, using integer arithmetic only.
std::string rational_to_decimal(std::uint64_t num, std::uint64_t den, int places);

} // namespace groupsim
