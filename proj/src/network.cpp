#include "groupsim/network.hpp"

#include <algorithm>
#include <stdexcept>

namespace groupsim {

void NetworkModel::add_network(const std::string& name, LinkLatency latency) {
    if (network_index_.count(name)) {
        throw std::invalid_argument("duplicate network " + name);
    }
    if (latency.intra_subgroup == 0 || latency.inter_subgroup == 0 || latency.inter_network == 0) {
        throw std::invalid_argument("link latencies must be positive");
    }
    network_index_[name] = latencies_.size();
    latencies_.push_back(latency);
}

void NetworkModel::add_peer(PeerId peer, const std::string& network) {
    auto it = network_index_.find(network);
    if (it == network_index_.end()) {
        throw std::invalid_argument("unknown network " + network);
    }
    if (!peer_network_.emplace(peer, it->second).second) {
        throw std::invalid_argument("duplicate peer " + std::to_string(peer));
    }
}

bool NetworkModel::knows_peer(PeerId peer) const {
    return peer_network_.count(peer) != 0;
}

void NetworkModel::set_partition(const std::vector<std::vector<PeerId>>& sets) {
    std::map<PeerId, int> assignment;
    int index = 1;
    for (const auto& set : sets) {
        if (set.empty()) {
            throw std::invalid_argument("empty partition set");
        }
        for (PeerId p : set) {
            if (!knows_peer(p)) {
                throw std::invalid_argument("partition names unknown peer " + std::to_string(p));
            }
            if (!assignment.emplace(p, index).second) {
                throw std::invalid_argument("overlapping partition sets at peer " + std::to_string(p));
            }
        }
        ++index;
    }
    component_ = std::move(assignment);
    partition_count_ = sets.size();
}

int NetworkModel::component_of(PeerId peer) const {
    auto it = component_.find(peer);
    return it == component_.end() ? 0 : it->second;
}

bool NetworkModel::same_component(PeerId a, PeerId b) const {
    return component_of(a) == component_of(b);
}

const LinkLatency& NetworkModel::latency_of(PeerId peer) const {
    auto it = peer_network_.find(peer);
    if (it == peer_network_.end()) {
        throw std::out_of_range("unknown peer " + std::to_string(peer));
    }
    return latencies_[it->second];
}

bool NetworkModel::same_network(PeerId a, PeerId b) const {
    auto ia = peer_network_.find(a);
    auto ib = peer_network_.find(b);
    if (ia == peer_network_.end() || ib == peer_network_.end()) {
        throw std::out_of_range("unknown peer");
    }
    return ia->second == ib->second;
}

std::uint32_t NetworkModel::base_latency(PeerId from, PeerId to, LinkClass cls) const {
    const LinkLatency& lf = latency_of(from);
    const LinkLatency& lt = latency_of(to);
    if (!same_network(from, to)) {
        return std::max(lf.inter_network, lt.inter_network);
    }
    switch (cls) {
    case LinkClass::IntraSubgroup: return lf.intra_subgroup;
    case LinkClass::InterSubgroup: return lf.inter_subgroup;
    case LinkClass::InterNetwork: return lf.inter_network;
    }
    return lf.inter_subgroup;
}

} // namespace groupsim
