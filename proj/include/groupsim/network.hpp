#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "groupsim/rng.hpp"
#include "groupsim/types.hpp"

namespace groupsim {

// Locality of a peer pair, decided per message by the installed classifier.
enum class LinkClass {
    IntraSubgroup,
    InterSubgroup,
    InterNetwork,
};

// Base one-way delay per link class, all strictly positive milliseconds.
struct LinkLatency {
    std::uint32_t intra_subgroup = 2;
    std::uint32_t inter_subgroup = 5;
    std::uint32_t inter_network = 20;

    bool operator==(const LinkLatency&) const = default;
};

// Static topology plus the current partition state. Partitions are named
// peer sets; peers not listed in any set form one implicit remaining
// component. Two peers can exchange messages iff they are in the same
// component. The check happens at send time only: deliveries already in
// flight when a partition is applied still arrive.
class NetworkModel {
public:
    void add_network(const std::string& name, LinkLatency latency);
    // Throws if the network is unknown or the peer was already added.
    void add_peer(PeerId peer, const std::string& network);

    bool knows_peer(PeerId peer) const;

    // Replaces the partition state. Sets must be disjoint and non-empty and
    // may only name known peers; throws std::invalid_argument otherwise.
    // An empty list restores full connectivity.
    void set_partition(const std::vector<std::vector<PeerId>>& sets);

    // Component index of a peer; 0 is the implicit remaining component,
    // explicit sets are numbered from 1 in the order given.
    int component_of(PeerId peer) const;
    bool same_component(PeerId a, PeerId b) const;
    std::size_t partition_set_count() const { return partition_count_; }

    // Base latency for a pair. Within one network the sender's network
    // supplies the class latency; across networks the larger of the two
    // inter_network values applies (symmetric).
    std::uint32_t base_latency(PeerId from, PeerId to, LinkClass cls) const;

    bool same_network(PeerId a, PeerId b) const;

    Rational loss_prob;           // applied per message at send time
    std::uint32_t jitter_max = 0; // uniform [0, jitter_max] added per message

private:
    const LinkLatency& latency_of(PeerId peer) const;

    std::vector<LinkLatency> latencies_;
    std::map<std::string, std::size_t> network_index_;
    std::map<PeerId, std::size_t> peer_network_;
    std::map<PeerId, int> component_;
    std::size_t partition_count_ = 0;
};

} // namespace groupsim
