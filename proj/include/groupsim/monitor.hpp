#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "groupsim/messages.hpp"
#include "groupsim/trace.hpp"
#include "groupsim/types.hpp"

namespace groupsim {

// Monitoring instance co-located with the entry point on a service RV.
//
// Ingests worker heartbeats into the subgroup table, heartbeats the other
// RVs of the service, detects silent peers, and exchanges tables so every
// RV holds the whole service picture one slot behind.
class MonitorService {
public:
    struct Config {
        GroupId service = kNoGroup;
        GroupId subgroup = kNoGroup;
        PeerId self = kNoPeer;
        VirtualTime heartbeat_period = 500;
        std::uint32_t k = 3;
        VirtualTime exchange_period = 1000;
        std::uint32_t spawn_slots = 3;
        bool consolidation = false;
        std::uint32_t r_min = 2;
        std::uint32_t consolidation_slots = 3;
        std::uint32_t r_max = 16;
    };

    struct Deps {
        std::function<VirtualTime()> now;
        std::function<void(PeerId to, ProtocolMessage msg)> send;
        // Coordination-group membership as locally known, self included,
        // dead peers not filtered: sends to them must fail visibly.
        std::function<std::vector<PeerId>()> rv_peers;
        std::function<bool(PeerId)> is_registered;
        std::function<std::uint32_t(PeerId)> own_scheduled;
        std::function<std::vector<ScheduleEntry>()> schedule_snapshot;
        std::function<void(PeerId worker)> on_worker_failed;
        std::function<void(PeerId rv, VirtualTime last_seen)> on_rv_failed;
        std::function<void()> on_spawn_needed;
        std::function<void(GroupId sibling)> on_consolidate;
        std::function<void()> on_capacity_hint;
        TraceLog* trace = nullptr;
    };

    MonitorService(Config cfg, Deps deps);

    void record_heartbeat(const Heartbeat& hb);

    // Scan tick: heartbeat the peer RVs, then report every silent peer.
    // Returns the failed workers for inspection.
    std::vector<PeerId> scan();

    // Exchange tick: broadcast the synced table plus a schedule snapshot,
    // then evaluate the saturation and consolidation triggers.
    void exchange_tables();

    void handle_exchange(const TableExchangeMsg& msg);
    void handle_announce(const RvAnnounce& ann);

    // A worker that left the subgroup (promotion, migration) takes its row along.
    void drop_row(PeerId peer);

    // Scheduler view support. rows are keyed by subgroup; scheduled counts of
    // remote workers come from snapshots, never from exchanged row values.
    std::map<GroupId, const std::map<PeerId, MonitorRow>*> all_rows() const;
    std::uint32_t extra_scheduled(PeerId worker) const;
    std::vector<ScheduleEntry> snapshot_of(PeerId rv) const;

    const std::map<PeerId, MonitorRow>& own_rows() const { return own_rows_; }
    std::uint64_t slot() const { return slot_; }

private:
    struct RemoteTable {
        PeerId from = kNoPeer;
        std::uint64_t slot = 0;
        std::map<PeerId, MonitorRow> rows;
    };

    bool saturated() const;

    Config cfg_;
    Deps deps_;
    std::map<PeerId, MonitorRow> own_rows_;
    std::map<GroupId, RemoteTable> merged_;
    std::map<PeerId, std::vector<ScheduleEntry>> snapshots_;
    std::map<PeerId, VirtualTime> rv_last_;
    std::uint64_t slot_ = 0;
    std::uint32_t sat_streak_ = 0;
    std::uint32_t thin_streak_ = 0;
};

} // namespace groupsim
