#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "groupsim/entrypoint.hpp"
#include "groupsim/kernel.hpp"
#include "groupsim/monitor.hpp"
#include "groupsim/overlay.hpp"
#include "groupsim/scenario.hpp"
#include "groupsim/trace.hpp"
#include "groupsim/worker.hpp"

namespace groupsim {

// Assembles a validated scenario into a running system: network and overlay,
// per-peer service instances, workload arrivals, and the fault timeline. One
// Simulation runs one scenario once; the trace is the complete record of the
// run.
//
// Event ordering at t=0 is fixed: timeline actions, then peer bootstraps
// (rendezvous hints first), then worker registrations, then workload
// arrivals. Timeline actions scheduled for a later instant likewise run
// before any protocol event of the same instant because their sequence
// numbers are assigned at setup.
class Simulation {
public:
    explicit Simulation(Scenario scenario);

    // Dep lambdas capture `this`; the object must stay put.
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    // Runs to the scenario duration, or to `until` when given.
    void run(std::optional<VirtualTime> until = std::nullopt);

    const TraceLog& trace() const { return trace_; }
    const Kernel& kernel() const { return kernel_; }
    Overlay& overlay() { return overlay_; }
    const Overlay& overlay() const { return overlay_; }
    const Scenario& scenario() const { return scenario_; }

    bool peer_alive(PeerId p) const;
    // Service group id created for the scenario's i-th service, if any yet.
    std::optional<GroupId> service_gid(std::size_t service_index) const;
    const EntryPoint* entry_point(PeerId p, GroupId service) const;
    const MonitorService* monitor(PeerId p, GroupId service) const;
    const WorkerService* worker(PeerId p, GroupId service) const;

private:
    // Role bundle of one peer for one service. A peer can hold all three
    // roles at once (service creator, election winner).
    struct ServiceInstance {
        GroupId subgroup = kNoGroup;
        std::unique_ptr<EntryPoint> ep;
        std::unique_ptr<MonitorService> monitor;
        std::unique_ptr<WorkerService> worker;
        // Cleared when the peer is promoted out of the worker role; ticks
        // stop, but in-flight completions still run to the finish.
        bool worker_active = false;
    };

    struct PeerState {
        PeerId id = kNoPeer;
        bool alive = true;
        bool bootstrapped = false;
        bool spare_used = false;
        std::uint32_t epoch = 0;
        GroupId root = kNoGroup;
        std::map<GroupId, ServiceInstance> services;
        // Cancels that arrived before their forward; the forward is dropped
        // with a cancelled record instead of being admitted.
        std::set<QueryId> cancel_tombstones;
        // Client-side reply dedup, kept across revives so a duplicate reply
        // to a past life still counts as a duplicate.
        std::set<QueryId> replies_seen;
        // Client's resolved service group per scenario service index.
        std::map<std::size_t, GroupId> resolved_service;
    };

    struct InjectWindow {
        std::string service;
        VirtualTime from = 0;
        VirtualTime to = 0;
        std::uint32_t multiplier = 1;
    };

    // --- setup -------------------------------------------------------------
    void build_network();
    void schedule_initial_events();

    // --- event dispatch ------------------------------------------------------
    void handle_event(const Event& ev);
    void on_delivery(PeerId target, const Delivery& d);
    void on_bootstrap(PeerId p);
    void on_worker_start(PeerId p, std::size_t service_index);
    void on_client_arrival(const TimerClientArrival& t);
    void on_timeline(std::size_t index);

    // --- message handlers (target peer alive) --------------------------------
    void deliver_submit(PeerId p, PeerId from, const QuerySubmit& msg);
    void deliver_forward(PeerId p, PeerId from, const QueryForward& msg);
    void deliver_reply(PeerId p, const QueryReply& msg);
    void deliver_serviced(PeerId p, PeerId from, const QueryServiced& msg);
    void deliver_busy(PeerId p, PeerId from, const BusyReply& msg);
    void deliver_spawn_order(PeerId p, const SpawnOrder& msg);
    void deliver_rebuild_request(PeerId p, PeerId from, const RebuildRequest& msg);
    void deliver_dissolved(PeerId p, const SubgroupDissolved& msg);
    void deliver_migrate(PeerId p, const MigrateOrder& msg);

    // --- protocol choreography ------------------------------------------------
    void start_ep_monitor(PeerId p, GroupId service, GroupId subgroup, bool trace_spawn);
    void start_worker_instance(PeerId p, GroupId service, GroupId subgroup, PeerId rv);
    void apply_placement(PeerId p, const Overlay::ServicePlacement& placement,
                         std::size_t service_index);
    void rv_silent(PeerId detector, GroupId service, PeerId dead_rv, VirtualTime last_seen);
    void self_promote(PeerId w, GroupId service);
    void resolve_election(GroupId service, GroupId subgroup, std::uint64_t round);
    void worker_failed_local(PeerId rv, GroupId service, PeerId worker);
    void spawn_needed(PeerId rv, GroupId service);
    void consolidate(PeerId rv, GroupId service, GroupId sibling);
    void kill_peer(PeerId p);
    void revive_peer(PeerId p);
    bool client_walk(PeerId c, std::size_t service_index, GroupId& gid, PeerId& rv);
    void submit_query(PeerId c, std::size_t service_index, GroupId gid, PeerId rv);

    // --- plumbing ----------------------------------------------------------------
    void send_from(PeerId from, PeerId to, ProtocolMessage msg);
    void drop_at_delivery(PeerId from, PeerId to, const ProtocolMessage& msg,
                          const char* reason, std::optional<QueryId> query);
    ServiceInstance* instance(PeerId p, GroupId service);
    EntryPoint* route_by_query(PeerId p, QueryId query);
    std::uint32_t epoch_of(PeerId p) const;
    VirtualTime draw_service_time(std::size_t service_index);
    std::uint32_t multiplier_at(const std::string& service_name, VirtualTime t) const;
    const ServiceSpec& spec_of(GroupId service) const;
    std::size_t index_of(GroupId service) const;

    Scenario scenario_;
    TraceLog trace_;
    Kernel kernel_;
    Overlay overlay_;
    std::map<PeerId, PeerState> peers_;
    std::map<std::string, std::size_t> service_index_;   // name -> services[i]
    std::map<GroupId, std::size_t> service_of_gid_;
    std::vector<InjectWindow> injects_;
    QueryId next_query_id_ = 1;
    std::map<QueryId, VirtualTime> submitted_at_;
};

} // namespace groupsim
