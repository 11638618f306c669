#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "groupsim/types.hpp"

namespace groupsim {

// One schedulable worker as the scheduler currently sees it.
struct WorkerView {
    PeerId peer = kNoPeer;
    std::uint64_t scheduled = 0;
    std::uint64_t threshold = 1; // >= 1 by construction
    std::uint64_t network_delay = 0;
};

struct SubgroupView {
    GroupId subgroup = kNoGroup;
    std::vector<WorkerView> workers;
};

// Scheduler view of one service: every subgroup that has at least one
// schedulable worker, subgroups ordered by ascending id.
struct ServiceLoadView {
    std::vector<SubgroupView> subgroups;
};

// Step one: the subgroup minimizing aggregate scheduled / aggregate
// threshold. Ratios compare by integer cross-multiplication; ties go to the
// lowest subgroup id. Empty view -> nullopt.
std::optional<std::size_t> select_worker_group(const ServiceLoadView& view);

// Step two: within a subgroup, the worker minimizing scheduled / threshold
// among those with scheduled < threshold. Ratio ties go to the lowest
// network_delay, then the lowest peer id. All saturated -> nullopt.
std::optional<PeerId> select_worker(const std::vector<WorkerView>& workers);

} // namespace groupsim
