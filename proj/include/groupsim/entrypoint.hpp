#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "groupsim/messages.hpp"
#include "groupsim/selection.hpp"
#include "groupsim/trace.hpp"
#include "groupsim/types.hpp"

namespace groupsim {

// Entry point instance co-located with the monitor on a service RV.
//
// Owns the schedule cache: every accepted query is either cached against a
// worker, parked in the pending queue, or tombstoned after its serviced
// notice. Scheduling is the two-step group-then-worker selection over the
// monitor's merged view; a query is left pending only when every known
// worker sits at its threshold.
class EntryPoint {
public:
    struct Config {
        GroupId service = kNoGroup;
        PeerId self = kNoPeer;
        std::string query_format;
    };

    struct Deps {
        std::function<VirtualTime()> now;
        std::function<void(PeerId to, ProtocolMessage msg)> send;
        std::function<std::vector<GroupId>()> live_subgroups;
        std::function<std::vector<PeerId>(GroupId)> registered_in;
        std::function<const std::map<PeerId, MonitorRow>*(GroupId)> rows_for;
        // Entries other coordinators hold on a worker, from their snapshots.
        std::function<std::uint32_t(PeerId)> extra_scheduled;
        TraceLog* trace = nullptr;
    };

    EntryPoint(Config cfg, Deps deps);

    void handle_submit(const QuerySubmit& sub, PeerId from);
    void handle_serviced(const QueryServiced& sv);
    void handle_busy(const BusyReply& busy);

    // Reschedules everything cached against the worker, oldest query first.
    void handle_worker_failure(PeerId worker);

    // Rebuild input after a takeover: entries already resolved here are
    // skipped, entries on vanished workers are rescheduled.
    void merge_entries(const std::vector<ScheduleEntry>& entries);

    // Dispatches pending queries in arrival order until one fails to place.
    void retry_pending();

    std::uint32_t own_scheduled(PeerId worker) const;
    std::vector<ScheduleEntry> snapshot() const;
    bool knows(QueryId query) const;
    std::size_t cache_size() const { return cache_.size(); }
    std::size_t pending_size() const { return pending_.size(); }

private:
    struct Pending {
        Query query;
        bool resched = false;
        PeerId prev = kNoPeer;
    };

    bool try_dispatch(const Query& q, bool resched, PeerId prev);
    ServiceLoadView build_view() const;
    bool worker_known(PeerId worker) const;
    void drop_submit(const Query& q, PeerId from, const char* reason);

    Config cfg_;
    Deps deps_;
    std::map<QueryId, ScheduleEntry> cache_;
    std::set<QueryId> tombstones_;
    std::deque<Pending> pending_;
};

} // namespace groupsim
