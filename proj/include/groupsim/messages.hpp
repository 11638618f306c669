#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "groupsim/types.hpp"

namespace groupsim {

struct Query {
    QueryId query_id = 0;
    PipeRef client_pipe;
    GroupId service_group = kNoGroup;
    std::string payload;
    VirtualTime submitted_at = 0;

    bool operator==(const Query&) const = default;
};

// One scheduling decision held by an entry point: which worker a query was
// handed to and when.
struct ScheduleEntry {
    Query query;
    PeerId worker = kNoPeer;
    VirtualTime assigned_at = 0;
};

// One monitored peer as seen by a monitoring instance. load mirrors
// queries_scheduled: heartbeats carry no processing state, so the scheduler
// view is the only load source.
struct MonitorRow {
    PeerId peer = kNoPeer;
    std::uint32_t load = 0;
    std::uint32_t queries_scheduled = 0;
    std::uint32_t network_delay = 0;
    VirtualTime last_heartbeat = 0;
    std::uint32_t threshold = 0;
};

// --- wire messages -------------------------------------------------------

struct QuerySubmit {
    Query query;
};

struct QueryForward {
    Query query;
    PeerId entry_rv = kNoPeer; // where the serviced notice must return
};

struct QueryServiced {
    QueryId query_id = 0;
    PeerId worker = kNoPeer;
};

struct QueryCancel {
    QueryId query_id = 0;
};

struct QueryReply {
    QueryId query_id = 0;
    std::string payload;
    PipeRef pipe;
};

// Defensive refusal when a forward arrives above the worker's own cap.
struct BusyReply {
    QueryId query_id = 0;
    PeerId worker = kNoPeer;
};

struct Heartbeat {
    PeerId from = kNoPeer;
    VirtualTime sent_at = 0;
    std::uint32_t threshold = 0;
    GroupId service = kNoGroup;
    bool rv_level = false; // true when RVs heartbeat each other
};

struct HeartbeatAck {
    PeerId rv = kNoPeer;
    GroupId service = kNoGroup;
};

struct TableExchangeMsg {
    PeerId from = kNoPeer;
    std::uint64_t slot = 0;
    GroupId service = kNoGroup;
    GroupId subgroup = kNoGroup;
    std::vector<MonitorRow> rows;
    std::vector<ScheduleEntry> schedule; // sender's schedule cache snapshot
};

// Failure detector verdict, delivered to every entry point so entries
// assigned across subgroups get rescheduled too.
struct WorkerFailed {
    GroupId service = kNoGroup;
    PeerId peer = kNoPeer;
};

// Order to a spare-pool peer to start a worker instance and register.
struct SpawnOrder {
    GroupId service = kNoGroup;
    PeerId rv = kNoPeer;
};

// Election winner announcing itself to the subgroup's workers.
struct RvAnnounce {
    GroupId service = kNoGroup;
    GroupId subgroup = kNoGroup;
    PeerId winner = kNoPeer;
    PeerId dead_rv = kNoPeer;
};

// Worker's in-progress report to a fresh RV (rebuild input).
struct WorkerReport {
    GroupId service = kNoGroup;
    PeerId worker = kNoPeer;
    std::vector<ScheduleEntry> in_flight;
};

struct RebuildRequest {
    GroupId service = kNoGroup;
    GroupId subgroup = kNoGroup;
    PeerId dead_rv = kNoPeer;
};

struct RebuildReply {
    GroupId service = kNoGroup;
    PeerId dead_rv = kNoPeer;
    std::vector<ScheduleEntry> entries;
};

// Broadcast when an election found no candidates; receivers reschedule
// everything they had assigned to the lost workers.
struct SubgroupDissolved {
    GroupId service = kNoGroup;
    GroupId subgroup = kNoGroup;
    std::vector<PeerId> workers;
};

// Consolidation: workers of an underused subgroup re-point to a sibling RV.
struct MigrateOrder {
    GroupId service = kNoGroup;
    PeerId new_rv = kNoPeer;
};

// Consolidation: retiring RV hands its schedule cache to the sibling.
struct HandoffEntries {
    GroupId service = kNoGroup;
    std::vector<ScheduleEntry> entries;
};

using ProtocolMessage = std::variant<
    QuerySubmit, QueryForward, QueryServiced, QueryCancel, QueryReply, BusyReply,
    Heartbeat, HeartbeatAck, TableExchangeMsg, WorkerFailed, SpawnOrder, RvAnnounce,
    WorkerReport, RebuildRequest, RebuildReply, SubgroupDissolved, MigrateOrder,
    HandoffEntries>;

const char* message_name(const ProtocolMessage& msg);

// --- kernel event payloads -----------------------------------------------

struct Delivery {
    PeerId from = kNoPeer;
    ProtocolMessage msg;
};

// Peer-targeted timers carry the peer's epoch; a kill or revive bumps the
// epoch so timers from a previous life are dropped on arrival.
struct TimerBootstrap {};

struct TimerWorkerStart {
    std::size_t service_index = 0;
};

struct TimerWorkerTick {
    GroupId service = kNoGroup;
    std::uint32_t epoch = 0;
};

struct TimerMonitorScan {
    GroupId service = kNoGroup;
    std::uint32_t epoch = 0;
};

struct TimerExchange {
    GroupId service = kNoGroup;
    std::uint32_t epoch = 0;
};

struct TimerCompletion {
    GroupId service = kNoGroup;
    QueryId query_id = 0;
    std::uint32_t epoch = 0;
};

struct TimerRvWait {
    GroupId service = kNoGroup;
    std::uint32_t episode = 0;
    std::uint32_t epoch = 0;
};

// Kernel-targeted: resolves an election after election_delay.
struct TimerElectionClaim {
    GroupId service = kNoGroup;
    GroupId subgroup = kNoGroup;
    std::uint64_t round = 0;
};

// Kernel-targeted: workload arrivals keep firing while a client is dead so
// a revived client resumes the remaining schedule.
struct TimerClientArrival {
    PeerId client = kNoPeer;
    std::size_t workload_index = 0;
    std::uint64_t shot = 0;
};

// Kernel-targeted: applies one scenario timeline action.
struct TimerTimeline {
    std::size_t index = 0;
};

using Payload = std::variant<
    Delivery, TimerBootstrap, TimerWorkerStart, TimerWorkerTick, TimerMonitorScan,
    TimerExchange, TimerCompletion, TimerRvWait, TimerElectionClaim,
    TimerClientArrival, TimerTimeline>;

} // namespace groupsim
