#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "groupsim/network.hpp"
#include "groupsim/types.hpp"

namespace groupsim {

// Scenario documents are JSON. Parsing is strict: unknown keys are errors so
// a typo cannot silently change a run. Field semantics are documented in the
// README; serialize_scenario(parse_scenario(text)) round-trips by value.

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : ScenarioError {
    using ScenarioError::ScenarioError;
};

struct UnknownFieldError : ScenarioError {
    using ScenarioError::ScenarioError;
};

enum class RoleHint { None, Rendezvous, Worker, Client };

struct NetworkSpec {
    std::string name;
    LinkLatency latency;

    bool operator==(const NetworkSpec&) const = default;
};

struct PeerSpec {
    PeerId id = kNoPeer;
    std::string network;
    RoleHint role_hint = RoleHint::None;
    bool spare = false;

    bool operator==(const PeerSpec&) const = default;
};

struct ServiceTimeSpec {
    enum class Kind { Constant, Uniform };
    Kind kind = Kind::Constant;
    VirtualTime value = 40; // constant
    VirtualTime lo = 0;     // uniform, inclusive
    VirtualTime hi = 0;

    bool operator==(const ServiceTimeSpec&) const = default;
};

struct ServiceSpec {
    std::vector<std::string> category_path;
    std::string name;
    std::string query_format;
    std::vector<PeerId> workers;
    ServiceTimeSpec service_time;
    std::uint32_t t_initial = 10;
    std::uint32_t x = 2; // adaptation window, seconds
    std::uint32_t t_min = 1;

    bool operator==(const ServiceSpec&) const = default;
};

struct ArrivalSpec {
    enum class Kind { Periodic, Times };
    Kind kind = Kind::Periodic;
    VirtualTime period_ms = 1000;
    VirtualTime start_ms = 0;
    std::vector<VirtualTime> times;

    bool operator==(const ArrivalSpec&) const = default;
};

struct WorkloadSpec {
    PeerId client = kNoPeer;
    std::string service;
    ArrivalSpec arrival;
    std::uint32_t count = 1;

    bool operator==(const WorkloadSpec&) const = default;
};

struct TimelineEventSpec {
    enum class Action { KillPeer, RevivePeer, Partition, Heal, InjectLoad };
    VirtualTime at = 0;
    Action action = Action::Heal;
    PeerId peer = kNoPeer;                  // kill_peer, revive_peer
    std::vector<std::vector<PeerId>> sets;  // partition
    std::string service;                    // inject_load
    std::uint32_t multiplier = 1;           // inject_load
    VirtualTime duration_ms = 0;            // inject_load

    bool operator==(const TimelineEventSpec&) const = default;
};

struct ParamsSpec {
    std::uint32_t r_max = 16;
    VirtualTime heartbeat_period_ms = 500;
    std::uint32_t k = 3;
    VirtualTime exchange_period_ms = 1000;
    VirtualTime election_delay_ms = 200;
    VirtualTime rv_wait_timeout_ms = 3000; // 2 * k * heartbeat_period
    VirtualTime jitter_max_ms = 0;
    Rational loss_prob{0, 1};
    std::uint32_t spawn_slots = 3;
    bool consolidation = false;

    bool operator==(const ParamsSpec&) const = default;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    VirtualTime duration_ms = 20000;
    std::vector<NetworkSpec> networks;
    std::vector<PeerSpec> peers;
    std::vector<ServiceSpec> services;
    std::vector<WorkloadSpec> workload;
    std::vector<TimelineEventSpec> timeline;
    ParamsSpec params;

    bool operator==(const Scenario&) const = default;
};

// Syntax, types, and unknown-key checks only; referential rules live in
// validate_scenario.
Scenario parse_scenario_unchecked(const std::string& text);

// parse + validate; throws ParseError listing every violation.
Scenario parse_scenario(const std::string& text);

// Semantic rules; returns human-readable violations, empty when valid.
std::vector<std::string> validate_scenario(const Scenario& s);

// Canonical JSON with every field materialized, keys sorted, 2-space indent.
std::string serialize_scenario(const Scenario& s);

const char* role_hint_name(RoleHint hint);

} // namespace groupsim
