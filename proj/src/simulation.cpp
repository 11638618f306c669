#include "groupsim/simulation.hpp"

#include <algorithm>
#include <utility>

namespace groupsim {

namespace {

std::optional<QueryId> query_of(const ProtocolMessage& msg) {
    if (const auto* m = std::get_if<QuerySubmit>(&msg)) return m->query.query_id;
    if (const auto* m = std::get_if<QueryForward>(&msg)) return m->query.query_id;
    if (const auto* m = std::get_if<QueryServiced>(&msg)) return m->query_id;
    if (const auto* m = std::get_if<QueryCancel>(&msg)) return m->query_id;
    if (const auto* m = std::get_if<QueryReply>(&msg)) return m->query_id;
    if (const auto* m = std::get_if<BusyReply>(&msg)) return m->query_id;
    return std::nullopt;
}

} // namespace

Simulation::Simulation(Scenario scenario)
    : scenario_(std::move(scenario)),
      kernel_(scenario_.seed, NetworkModel{}),
      overlay_(Overlay::Deps{
          .alive =
              [this](PeerId p) {
                  auto it = peers_.find(p);
                  return it != peers_.end() && it->second.alive;
              },
          .component_of = [this](PeerId p) { return kernel_.network().component_of(p); },
          .now = [this] { return kernel_.now(); },
          .trace = &trace_,
          .r_max = scenario_.params.r_max,
      }) {
    build_network();
    kernel_.set_trace(&trace_);
    kernel_.set_handler([this](const Event& ev) { handle_event(ev); });
    kernel_.set_link_classifier([this](PeerId from, PeerId to) {
        return overlay_.same_worker_subgroup(from, to) ? LinkClass::IntraSubgroup
                                                       : LinkClass::InterSubgroup;
    });
    for (const PeerSpec& p : scenario_.peers) {
        PeerState ps;
        ps.id = p.id;
        peers_.emplace(p.id, std::move(ps));
    }
    for (std::size_t i = 0; i < scenario_.services.size(); ++i) {
        service_index_[scenario_.services[i].name] = i;
    }
    schedule_initial_events();
}

void Simulation::run(std::optional<VirtualTime> until) {
    kernel_.run_until(until.value_or(scenario_.duration_ms));
}

bool Simulation::peer_alive(PeerId p) const {
    auto it = peers_.find(p);
    return it != peers_.end() && it->second.alive;
}

std::optional<GroupId> Simulation::service_gid(std::size_t service_index) const {
    for (const auto& [gid, idx] : service_of_gid_) {
        if (idx == service_index) return gid;
    }
    return std::nullopt;
}

const EntryPoint* Simulation::entry_point(PeerId p, GroupId service) const {
    auto pit = peers_.find(p);
    if (pit == peers_.end()) return nullptr;
    auto sit = pit->second.services.find(service);
    return sit == pit->second.services.end() ? nullptr : sit->second.ep.get();
}

const MonitorService* Simulation::monitor(PeerId p, GroupId service) const {
    auto pit = peers_.find(p);
    if (pit == peers_.end()) return nullptr;
    auto sit = pit->second.services.find(service);
    return sit == pit->second.services.end() ? nullptr : sit->second.monitor.get();
}

const WorkerService* Simulation::worker(PeerId p, GroupId service) const {
    auto pit = peers_.find(p);
    if (pit == peers_.end()) return nullptr;
    auto sit = pit->second.services.find(service);
    return sit == pit->second.services.end() ? nullptr : sit->second.worker.get();
}

// --- setup -------------------------------------------------------------

void Simulation::build_network() {
    NetworkModel& net = kernel_.network();
    for (const NetworkSpec& n : scenario_.networks) {
        net.add_network(n.name, n.latency);
    }
    for (const PeerSpec& p : scenario_.peers) {
        net.add_peer(p.id, p.network);
    }
    net.loss_prob = scenario_.params.loss_prob;
    net.jitter_max = static_cast<std::uint32_t>(scenario_.params.jitter_max_ms);
}

void Simulation::schedule_initial_events() {
    for (std::size_t i = 0; i < scenario_.timeline.size(); ++i) {
        kernel_.schedule_event(scenario_.timeline[i].at, kNoPeer, TimerTimeline{i});
    }
    // Rendezvous-hinted peers bootstrap first so they found the roots other
    // peers join. Clients bootstrap lazily on their first arrival.
    for (const PeerSpec& p : scenario_.peers) {
        if (p.role_hint == RoleHint::Rendezvous) {
            kernel_.schedule_event(0, p.id, TimerBootstrap{});
        }
    }
    for (const PeerSpec& p : scenario_.peers) {
        if (p.role_hint != RoleHint::Rendezvous && p.role_hint != RoleHint::Client) {
            kernel_.schedule_event(0, p.id, TimerBootstrap{});
        }
    }
    for (std::size_t si = 0; si < scenario_.services.size(); ++si) {
        for (PeerId w : scenario_.services[si].workers) {
            kernel_.schedule_event(0, w, TimerWorkerStart{si});
        }
    }
    for (std::size_t wi = 0; wi < scenario_.workload.size(); ++wi) {
        const WorkloadSpec& w = scenario_.workload[wi];
        if (w.count == 0) continue;
        VirtualTime first = 0;
        if (w.arrival.kind == ArrivalSpec::Kind::Periodic) {
            first = w.arrival.start_ms;
        } else {
            if (w.arrival.times.empty()) continue;
            first = w.arrival.times[0];
        }
        kernel_.schedule_event(first, kNoPeer, TimerClientArrival{w.client, wi, 0});
    }
}

// --- event dispatch ------------------------------------------------------

void Simulation::handle_event(const Event& ev) {
    const Payload& pl = ev.payload;
    if (const auto* d = std::get_if<Delivery>(&pl)) {
        on_delivery(ev.target, *d);
        return;
    }
    if (std::get_if<TimerBootstrap>(&pl)) {
        on_bootstrap(ev.target);
        return;
    }
    if (const auto* t = std::get_if<TimerWorkerStart>(&pl)) {
        on_worker_start(ev.target, t->service_index);
        return;
    }
    if (const auto* t = std::get_if<TimerWorkerTick>(&pl)) {
        if (!peer_alive(ev.target) || t->epoch != epoch_of(ev.target)) return;
        ServiceInstance* inst = instance(ev.target, t->service);
        if (inst && inst->worker && inst->worker_active) inst->worker->on_tick();
        return;
    }
    if (const auto* t = std::get_if<TimerMonitorScan>(&pl)) {
        if (!peer_alive(ev.target) || t->epoch != epoch_of(ev.target)) return;
        ServiceInstance* inst = instance(ev.target, t->service);
        if (inst && inst->monitor) {
            inst->monitor->scan();
            kernel_.schedule_event(kernel_.now() + scenario_.params.heartbeat_period_ms,
                                   ev.target, TimerMonitorScan{t->service, t->epoch});
        }
        return;
    }
    if (const auto* t = std::get_if<TimerExchange>(&pl)) {
        if (!peer_alive(ev.target) || t->epoch != epoch_of(ev.target)) return;
        ServiceInstance* inst = instance(ev.target, t->service);
        if (inst && inst->monitor) {
            inst->monitor->exchange_tables();
            kernel_.schedule_event(kernel_.now() + scenario_.params.exchange_period_ms,
                                   ev.target, TimerExchange{t->service, t->epoch});
        }
        return;
    }
    if (const auto* t = std::get_if<TimerCompletion>(&pl)) {
        // Runs even for a promoted ex-worker: admitted queries finish.
        if (!peer_alive(ev.target) || t->epoch != epoch_of(ev.target)) return;
        ServiceInstance* inst = instance(ev.target, t->service);
        if (inst && inst->worker) inst->worker->on_completion(t->query_id);
        return;
    }
    if (const auto* t = std::get_if<TimerRvWait>(&pl)) {
        if (!peer_alive(ev.target) || t->epoch != epoch_of(ev.target)) return;
        ServiceInstance* inst = instance(ev.target, t->service);
        if (inst && inst->worker && inst->worker_active) {
            inst->worker->on_rv_wait(t->episode);
        }
        return;
    }
    if (const auto* t = std::get_if<TimerElectionClaim>(&pl)) {
        resolve_election(t->service, t->subgroup, t->round);
        return;
    }
    if (const auto* t = std::get_if<TimerClientArrival>(&pl)) {
        on_client_arrival(*t);
        return;
    }
    if (const auto* t = std::get_if<TimerTimeline>(&pl)) {
        on_timeline(t->index);
        return;
    }
}

void Simulation::on_delivery(PeerId target, const Delivery& d) {
    const ProtocolMessage& msg = d.msg;
    if (!peer_alive(target)) {
        drop_at_delivery(d.from, target, msg, "dead", query_of(msg));
        return;
    }
    if (const auto* m = std::get_if<QuerySubmit>(&msg)) {
        deliver_submit(target, d.from, *m);
        return;
    }
    if (const auto* m = std::get_if<QueryForward>(&msg)) {
        deliver_forward(target, d.from, *m);
        return;
    }
    if (const auto* m = std::get_if<QueryServiced>(&msg)) {
        deliver_serviced(target, d.from, *m);
        return;
    }
    if (const auto* m = std::get_if<QueryCancel>(&msg)) {
        PeerState& ps = peers_.at(target);
        ps.cancel_tombstones.insert(m->query_id);
        for (auto& [gid, inst] : ps.services) {
            if (inst.worker) inst.worker->handle_cancel(*m);
        }
        return;
    }
    if (const auto* m = std::get_if<QueryReply>(&msg)) {
        deliver_reply(target, *m);
        return;
    }
    if (const auto* m = std::get_if<BusyReply>(&msg)) {
        deliver_busy(target, d.from, *m);
        return;
    }
    if (const auto* m = std::get_if<Heartbeat>(&msg)) {
        ServiceInstance* inst = instance(target, m->service);
        if (inst && inst->monitor) {
            inst->monitor->record_heartbeat(*m);
        } else {
            drop_at_delivery(d.from, target, msg, "unknown", std::nullopt);
        }
        return;
    }
    if (const auto* m = std::get_if<HeartbeatAck>(&msg)) {
        ServiceInstance* inst = instance(target, m->service);
        if (inst && inst->worker) {
            inst->worker->handle_ack(*m);
        } else {
            drop_at_delivery(d.from, target, msg, "unknown", std::nullopt);
        }
        return;
    }
    if (const auto* m = std::get_if<TableExchangeMsg>(&msg)) {
        ServiceInstance* inst = instance(target, m->service);
        if (inst && inst->monitor) {
            inst->monitor->handle_exchange(*m);
        } else {
            drop_at_delivery(d.from, target, msg, "unknown", std::nullopt);
        }
        return;
    }
    if (const auto* m = std::get_if<WorkerFailed>(&msg)) {
        ServiceInstance* inst = instance(target, m->service);
        if (inst && inst->ep) {
            inst->ep->handle_worker_failure(m->peer);
        } else {
            drop_at_delivery(d.from, target, msg, "unknown", std::nullopt);
        }
        return;
    }
    if (const auto* m = std::get_if<SpawnOrder>(&msg)) {
        deliver_spawn_order(target, *m);
        return;
    }
    if (const auto* m = std::get_if<RvAnnounce>(&msg)) {
        ServiceInstance* inst = instance(target, m->service);
        if (!inst) {
            drop_at_delivery(d.from, target, msg, "unknown", std::nullopt);
            return;
        }
        // The dead RV may have carried a worker role; queries scheduled on it
        // will never finish there.
        if (inst->ep && m->dead_rv != kNoPeer) inst->ep->handle_worker_failure(m->dead_rv);
        if (inst->monitor) inst->monitor->handle_announce(*m);
        if (inst->worker) inst->worker->handle_announce(*m);
        return;
    }
    if (const auto* m = std::get_if<WorkerReport>(&msg)) {
        ServiceInstance* inst = instance(target, m->service);
        if (inst && inst->ep) {
            inst->ep->merge_entries(m->in_flight);
        } else {
            drop_at_delivery(d.from, target, msg, "unknown", std::nullopt);
        }
        return;
    }
    if (const auto* m = std::get_if<RebuildRequest>(&msg)) {
        deliver_rebuild_request(target, d.from, *m);
        return;
    }
    if (const auto* m = std::get_if<RebuildReply>(&msg)) {
        ServiceInstance* inst = instance(target, m->service);
        if (inst && inst->ep) {
            inst->ep->merge_entries(m->entries);
        } else {
            drop_at_delivery(d.from, target, msg, "unknown", std::nullopt);
        }
        return;
    }
    if (const auto* m = std::get_if<SubgroupDissolved>(&msg)) {
        deliver_dissolved(target, *m);
        return;
    }
    if (const auto* m = std::get_if<MigrateOrder>(&msg)) {
        deliver_migrate(target, *m);
        return;
    }
    if (const auto* m = std::get_if<HandoffEntries>(&msg)) {
        ServiceInstance* inst = instance(target, m->service);
        if (inst && inst->ep) {
            inst->ep->merge_entries(m->entries);
        } else {
            drop_at_delivery(d.from, target, msg, "unknown", std::nullopt);
        }
        return;
    }
}

void Simulation::on_bootstrap(PeerId p) {
    PeerState& ps = peers_.at(p);
    if (!ps.alive || ps.bootstrapped) return;
    Overlay::BootstrapResult res = overlay_.bootstrap_peer(p);
    ps.bootstrapped = true;
    ps.root = res.root;
}

void Simulation::on_worker_start(PeerId p, std::size_t service_index) {
    PeerState& ps = peers_.at(p);
    if (!ps.alive) return;
    if (!ps.bootstrapped) on_bootstrap(p);
    const ServiceSpec& spec = scenario_.services[service_index];
    Overlay::ServicePlacement placement = overlay_.ensure_group_path(
        p, spec.category_path, spec.name, spec.query_format, PipeRef{p, 1});
    apply_placement(p, placement, service_index);
}

void Simulation::on_client_arrival(const TimerClientArrival& t) {
    const WorkloadSpec& w = scenario_.workload[t.workload_index];
    // Chain the next shot first; a dead client keeps the chain alive so a
    // revived client resumes its schedule.
    std::uint64_t next = t.shot + 1;
    if (next < w.count) {
        if (w.arrival.kind == ArrivalSpec::Kind::Periodic) {
            kernel_.schedule_event(w.arrival.start_ms + next * w.arrival.period_ms, kNoPeer,
                                   TimerClientArrival{t.client, t.workload_index, next});
        } else if (next < w.arrival.times.size()) {
            kernel_.schedule_event(w.arrival.times[next], kNoPeer,
                                   TimerClientArrival{t.client, t.workload_index, next});
        }
    }
    PeerState& ps = peers_.at(t.client);
    if (!ps.alive) return;
    if (!ps.bootstrapped) on_bootstrap(t.client);
    std::size_t si = service_index_.at(w.service);
    GroupId gid = kNoGroup;
    PeerId rv = kNoPeer;
    if (!client_walk(t.client, si, gid, rv)) return;
    std::uint32_t m = multiplier_at(w.service, kernel_.now());
    for (std::uint32_t i = 0; i < m; ++i) {
        submit_query(t.client, si, gid, rv);
    }
}

void Simulation::on_timeline(std::size_t index) {
    const TimelineEventSpec& ev = scenario_.timeline[index];
    switch (ev.action) {
    case TimelineEventSpec::Action::KillPeer:
        kill_peer(ev.peer);
        break;
    case TimelineEventSpec::Action::RevivePeer:
        revive_peer(ev.peer);
        break;
    case TimelineEventSpec::Action::Partition: {
        kernel_.set_partition(ev.sets);
        overlay_.recompute_visibility();
        std::string sets;
        for (std::size_t s = 0; s < ev.sets.size(); ++s) {
            if (s != 0) sets += '|';
            for (std::size_t i = 0; i < ev.sets[s].size(); ++i) {
                if (i != 0) sets += ',';
                sets += std::to_string(ev.sets[s][i]);
            }
        }
        trace_.emit(kernel_.now(), TraceKind::partition, kNoPeer,
                    {{"sets", std::move(sets)}});
        break;
    }
    case TimelineEventSpec::Action::Heal:
        kernel_.set_partition({});
        overlay_.recompute_visibility();
        trace_.emit(kernel_.now(), TraceKind::heal, kNoPeer, {});
        break;
    case TimelineEventSpec::Action::InjectLoad:
        injects_.push_back({ev.service, ev.at, ev.at + ev.duration_ms, ev.multiplier});
        break;
    }
}

// --- message handlers -----------------------------------------------------

void Simulation::deliver_submit(PeerId p, PeerId from, const QuerySubmit& msg) {
    ServiceInstance* inst = instance(p, msg.query.service_group);
    if (!inst || !inst->ep) {
        drop_at_delivery(from, p, ProtocolMessage{msg}, "unknown", msg.query.query_id);
        return;
    }
    inst->ep->handle_submit(msg, from);
}

void Simulation::deliver_forward(PeerId p, PeerId from, const QueryForward& msg) {
    PeerState& ps = peers_.at(p);
    QueryId qid = msg.query.query_id;
    if (ps.cancel_tombstones.count(qid) != 0) {
        trace_.emit(kernel_.now(), TraceKind::cancelled, p, {{"query", qid}});
        return;
    }
    ServiceInstance* inst = instance(p, msg.query.service_group);
    if (!inst || !inst->worker) {
        drop_at_delivery(from, p, ProtocolMessage{msg}, "unknown", qid);
        return;
    }
    inst->worker->handle_forward(msg);
}

void Simulation::deliver_reply(PeerId p, const QueryReply& msg) {
    PeerState& ps = peers_.at(p);
    if (ps.replies_seen.insert(msg.query_id).second) {
        auto it = submitted_at_.find(msg.query_id);
        std::uint64_t latency = it == submitted_at_.end() ? 0 : kernel_.now() - it->second;
        trace_.emit(kernel_.now(), TraceKind::query_serviced, p,
                    {{"query", msg.query_id}, {"latency_ms", latency}});
    } else {
        trace_.emit(kernel_.now(), TraceKind::duplicate_reply, p, {{"query", msg.query_id}});
    }
}

void Simulation::deliver_serviced(PeerId p, PeerId from, const QueryServiced& msg) {
    EntryPoint* ep = route_by_query(p, msg.query_id);
    if (!ep) {
        drop_at_delivery(from, p, ProtocolMessage{msg}, "unknown", msg.query_id);
        return;
    }
    ep->handle_serviced(msg);
}

void Simulation::deliver_busy(PeerId p, PeerId from, const BusyReply& msg) {
    EntryPoint* ep = route_by_query(p, msg.query_id);
    if (!ep) {
        drop_at_delivery(from, p, ProtocolMessage{msg}, "unknown", msg.query_id);
        return;
    }
    ep->handle_busy(msg);
}

void Simulation::deliver_spawn_order(PeerId p, const SpawnOrder& msg) {
    auto idx = service_of_gid_.find(msg.service);
    if (idx == service_of_gid_.end()) return;
    std::size_t si = idx->second;
    ServiceInstance* existing = instance(p, msg.service);
    if (existing && existing->worker && existing->worker_active) return;
    PeerState& ps = peers_.at(p);
    if (!ps.bootstrapped) on_bootstrap(p);
    const ServiceSpec& spec = scenario_.services[si];
    Overlay::ServicePlacement placement = overlay_.ensure_group_path(
        p, spec.category_path, spec.name, spec.query_format, PipeRef{p, 1});
    trace_.emit(kernel_.now(), TraceKind::spawn, p,
                {{"service", std::uint64_t{placement.service}},
                 {"kind", std::string("worker")},
                 {"host", std::uint64_t{p}}});
    apply_placement(p, placement, si);
}

void Simulation::deliver_rebuild_request(PeerId p, PeerId from, const RebuildRequest& msg) {
    ServiceInstance* inst = instance(p, msg.service);
    if (!inst || !inst->monitor) {
        drop_at_delivery(from, p, ProtocolMessage{msg}, "unknown", std::nullopt);
        return;
    }
    send_from(p, from, RebuildReply{msg.service, msg.dead_rv,
                                    inst->monitor->snapshot_of(msg.dead_rv)});
}

void Simulation::deliver_dissolved(PeerId p, const SubgroupDissolved& msg) {
    ServiceInstance* inst = instance(p, msg.service);
    if (!inst || !inst->ep) return;
    for (PeerId w : msg.workers) {
        inst->ep->handle_worker_failure(w);
    }
}

void Simulation::deliver_migrate(PeerId p, const MigrateOrder& msg) {
    ServiceInstance* inst = instance(p, msg.service);
    if (!inst || !inst->worker) return;
    if (auto sg = overlay_.subgroup_of_worker(p, msg.service)) inst->subgroup = *sg;
    inst->worker->set_rv(msg.new_rv);
}

// --- protocol choreography --------------------------------------------------

void Simulation::start_ep_monitor(PeerId p, GroupId service, GroupId subgroup,
                                  bool trace_spawn) {
    PeerState& ps = peers_.at(p);
    ServiceInstance& inst = ps.services[service];
    if (inst.ep && inst.monitor && inst.subgroup == subgroup) return;
    inst.subgroup = subgroup;
    const ServiceSpec& spec = spec_of(service);
    const ParamsSpec& prm = scenario_.params;

    EntryPoint::Config ecfg;
    ecfg.service = service;
    ecfg.self = p;
    ecfg.query_format = spec.query_format;
    // Dep lambdas resolve the instance at call time: the entry point and the
    // monitor reference each other, and either can be replaced later.
    EntryPoint::Deps ed;
    ed.now = [this] { return kernel_.now(); };
    ed.send = [this, p](PeerId to, ProtocolMessage m) { send_from(p, to, std::move(m)); };
    ed.live_subgroups = [this, service] { return overlay_.service_subgroups(service); };
    ed.registered_in = [this, service](GroupId sg) {
        std::vector<PeerId> out;
        if (!overlay_.has_group(sg)) return out;
        std::set<PeerId> acc;
        for (const auto& [rv, table] : overlay_.group(sg).tables) {
            acc.insert(table.registered.begin(), table.registered.end());
        }
        out.assign(acc.begin(), acc.end());
        return out;
    };
    ed.rows_for = [this, p, service](GroupId sg) -> const std::map<PeerId, MonitorRow>* {
        ServiceInstance* self = instance(p, service);
        if (!self || !self->monitor) return nullptr;
        auto rows = self->monitor->all_rows();
        auto it = rows.find(sg);
        return it == rows.end() ? nullptr : it->second;
    };
    ed.extra_scheduled = [this, p, service](PeerId w) -> std::uint32_t {
        ServiceInstance* self = instance(p, service);
        return self && self->monitor ? self->monitor->extra_scheduled(w) : 0;
    };
    ed.trace = &trace_;
    inst.ep = std::make_unique<EntryPoint>(ecfg, std::move(ed));

    MonitorService::Config mcfg;
    mcfg.service = service;
    mcfg.subgroup = subgroup;
    mcfg.self = p;
    mcfg.heartbeat_period = prm.heartbeat_period_ms;
    mcfg.k = prm.k;
    mcfg.exchange_period = prm.exchange_period_ms;
    mcfg.spawn_slots = prm.spawn_slots;
    mcfg.consolidation = prm.consolidation;
    mcfg.r_max = prm.r_max;
    MonitorService::Deps md;
    md.now = [this] { return kernel_.now(); };
    md.send = [this, p](PeerId to, ProtocolMessage m) { send_from(p, to, std::move(m)); };
    md.rv_peers = [this, service] {
        std::vector<PeerId> out;
        if (!overlay_.has_group(service)) return out;
        GroupId rvg = overlay_.group(service).rv_group;
        if (rvg == kNoGroup || !overlay_.has_group(rvg)) return out;
        const auto& members = overlay_.group(rvg).members;
        out.assign(members.begin(), members.end());
        return out;
    };
    md.is_registered = [this, p, service](PeerId w) {
        ServiceInstance* self = instance(p, service);
        if (!self || !overlay_.has_group(self->subgroup)) return false;
        const GroupRecord& sg = overlay_.group(self->subgroup);
        auto it = sg.tables.find(p);
        return it != sg.tables.end() && it->second.registered.count(w) != 0;
    };
    md.own_scheduled = [this, p, service](PeerId w) -> std::uint32_t {
        ServiceInstance* self = instance(p, service);
        return self && self->ep ? self->ep->own_scheduled(w) : 0;
    };
    md.schedule_snapshot = [this, p, service] {
        ServiceInstance* self = instance(p, service);
        return self && self->ep ? self->ep->snapshot() : std::vector<ScheduleEntry>{};
    };
    md.on_worker_failed = [this, p, service](PeerId w) { worker_failed_local(p, service, w); };
    md.on_rv_failed = [this, p, service](PeerId rv, VirtualTime last) {
        rv_silent(p, service, rv, last);
    };
    md.on_spawn_needed = [this, p, service] { spawn_needed(p, service); };
    md.on_consolidate = [this, p, service](GroupId sibling) { consolidate(p, service, sibling); };
    md.on_capacity_hint = [this, p, service] {
        ServiceInstance* self = instance(p, service);
        if (self && self->ep) self->ep->retry_pending();
    };
    md.trace = &trace_;
    inst.monitor = std::make_unique<MonitorService>(mcfg, std::move(md));

    if (trace_spawn) {
        trace_.emit(kernel_.now(), TraceKind::spawn, p,
                    {{"service", std::uint64_t{service}},
                     {"kind", std::string("entry_point")},
                     {"host", std::uint64_t{p}}});
        trace_.emit(kernel_.now(), TraceKind::spawn, p,
                    {{"service", std::uint64_t{service}},
                     {"kind", std::string("monitoring")},
                     {"host", std::uint64_t{p}}});
    }
    kernel_.schedule_event(kernel_.now() + prm.heartbeat_period_ms, p,
                           TimerMonitorScan{service, ps.epoch});
    kernel_.schedule_event(kernel_.now() + prm.exchange_period_ms, p,
                           TimerExchange{service, ps.epoch});
}

void Simulation::start_worker_instance(PeerId p, GroupId service, GroupId subgroup, PeerId rv) {
    PeerState& ps = peers_.at(p);
    ServiceInstance& inst = ps.services[service];
    if (inst.worker && inst.worker_active) return;
    // The monitor owns the subgroup field when both roles share the entry.
    if (!inst.monitor) inst.subgroup = subgroup;
    std::size_t si = index_of(service);
    const ServiceSpec& spec = scenario_.services[si];
    const ParamsSpec& prm = scenario_.params;

    WorkerService::Config cfg;
    cfg.service = service;
    cfg.self = p;
    cfg.rv = rv;
    cfg.t_initial = spec.t_initial;
    cfg.t_min = spec.t_min;
    cfg.window_ms = VirtualTime{spec.x} * 1000;
    cfg.heartbeat_period = prm.heartbeat_period_ms;
    cfg.k = prm.k;
    cfg.rv_wait_timeout = prm.rv_wait_timeout_ms;
    WorkerService::Deps wd;
    wd.now = [this] { return kernel_.now(); };
    wd.service_time = [this, si] { return draw_service_time(si); };
    wd.send = [this, p](PeerId to, ProtocolMessage m) { send_from(p, to, std::move(m)); };
    wd.schedule_tick = [this, p, service](VirtualTime at) {
        kernel_.schedule_event(at, p, TimerWorkerTick{service, epoch_of(p)});
    };
    wd.schedule_completion = [this, p, service](VirtualTime at, QueryId q) {
        kernel_.schedule_event(at, p, TimerCompletion{service, q, epoch_of(p)});
    };
    wd.schedule_rv_wait = [this, p, service](VirtualTime at, std::uint64_t episode) {
        kernel_.schedule_event(
            at, p,
            TimerRvWait{service, static_cast<std::uint32_t>(episode), epoch_of(p)});
    };
    wd.on_self_promote = [this, p, service] { self_promote(p, service); };
    wd.trace = &trace_;
    inst.worker = std::make_unique<WorkerService>(cfg, std::move(wd));
    inst.worker_active = true;
    inst.worker->start();
}

void Simulation::apply_placement(PeerId p, const Overlay::ServicePlacement& placement,
                                 std::size_t service_index) {
    service_of_gid_.insert_or_assign(placement.service, service_index);
    if (placement.created_service) {
        // Creator holds all three roles until the group grows.
        start_ep_monitor(p, placement.service, placement.subgroup, false);
        start_worker_instance(p, placement.service, placement.subgroup, placement.rv);
        return;
    }
    if (placement.split) {
        // The promoted peer stops working and heads the new subgroup; its row
        // leaves the old table so the old monitor does not declare it dead.
        if (placement.split_old_rv != kNoPeer) {
            ServiceInstance* old_inst = instance(placement.split_old_rv, placement.service);
            if (old_inst && old_inst->monitor) {
                old_inst->monitor->drop_row(placement.split_new_rv);
            }
        }
        ServiceInstance* promoted = instance(placement.split_new_rv, placement.service);
        if (promoted) promoted->worker_active = false;
        start_ep_monitor(placement.split_new_rv, placement.service,
                         placement.split_new_subgroup, false);
    } else if (placement.rv == p) {
        // No reachable sibling RV: the worker anchors a fresh subgroup itself.
        start_ep_monitor(p, placement.service, placement.subgroup, false);
    }
    start_worker_instance(p, placement.service, placement.subgroup, placement.rv);
}

void Simulation::rv_silent(PeerId detector, GroupId service, PeerId dead_rv,
                           VirtualTime last_seen) {
    auto sg = overlay_.subgroup_of_rv(dead_rv, service);
    if (!sg) return; // already re-elected or stripped
    trace_.emit(kernel_.now(), TraceKind::failure_detected, detector,
                {{"peer", std::uint64_t{dead_rv}},
                 {"group", std::uint64_t{*sg}},
                 {"last", last_seen}});
    if (auto round = overlay_.start_election(*sg)) {
        kernel_.schedule_event(kernel_.now() + scenario_.params.election_delay_ms, kNoPeer,
                               TimerElectionClaim{service, *sg, *round});
    }
}

void Simulation::self_promote(PeerId w, GroupId service) {
    auto sg = overlay_.subgroup_of_worker(w, service);
    if (!sg) return;
    // The worker already waited out the announce timeout; resolve in place.
    if (auto round = overlay_.start_election(*sg)) {
        resolve_election(service, *sg, *round);
    }
}

void Simulation::resolve_election(GroupId service, GroupId subgroup, std::uint64_t round) {
    Overlay::ElectionOutcome out = overlay_.finalize_election(subgroup, round);
    if (out.stale) return;
    if (out.dissolved) {
        if (out.workers.empty()) return;
        std::vector<PeerId> rvs = overlay_.service_rvs(service);
        if (rvs.empty()) return;
        PeerId low = rvs.front();
        for (PeerId rv : rvs) {
            send_from(low, rv, SubgroupDissolved{service, subgroup, out.workers});
        }
        return;
    }
    PeerId winner = out.winner;
    start_ep_monitor(winner, service, subgroup, true);
    // Rebuild requests must reach the surviving RVs before the announce does:
    // handle_announce discards the dead RV's schedule snapshot, which is
    // exactly what the reply carries. Same-instant sends deliver in send order.
    for (PeerId rv : overlay_.service_rvs(service)) {
        if (rv != winner) send_from(winner, rv, RebuildRequest{service, subgroup, out.dead_rv});
    }
    // The winner keeps its worker role; the announce below retargets it like
    // the other members.
    std::set<PeerId> audience(out.workers.begin(), out.workers.end());
    if (overlay_.has_group(service)) {
        GroupId rvg = overlay_.group(service).rv_group;
        if (rvg != kNoGroup && overlay_.has_group(rvg)) {
            const auto& members = overlay_.group(rvg).members;
            audience.insert(members.begin(), members.end());
        }
    }
    for (PeerId to : audience) {
        send_from(winner, to, RvAnnounce{service, subgroup, winner, out.dead_rv});
    }
}

void Simulation::worker_failed_local(PeerId rv, GroupId service, PeerId worker) {
    ServiceInstance* inst = instance(rv, service);
    if (!inst) return;
    if (overlay_.has_group(inst->subgroup)) {
        overlay_.remove_dead_worker(inst->subgroup, worker);
    }
    if (inst->ep) inst->ep->handle_worker_failure(worker);
}

void Simulation::spawn_needed(PeerId rv, GroupId service) {
    PeerId host = kNoPeer;
    for (const PeerSpec& spec : scenario_.peers) {
        if (!spec.spare) continue;
        PeerState& ps = peers_.at(spec.id);
        if (!ps.alive || ps.spare_used || !ps.bootstrapped) continue;
        if (!kernel_.network().same_component(rv, spec.id)) continue;
        host = spec.id;
        break;
    }
    if (host == kNoPeer) {
        trace_.emit(kernel_.now(), TraceKind::spawn, rv,
                    {{"service", std::uint64_t{service}},
                     {"kind", std::string("worker")},
                     {"host", std::uint64_t{0}}});
        return;
    }
    // Marked at order time so back-to-back scans do not pick the same spare.
    peers_.at(host).spare_used = true;
    send_from(rv, host, SpawnOrder{service, rv});
}

void Simulation::consolidate(PeerId rv, GroupId service, GroupId sibling) {
    ServiceInstance* inst = instance(rv, service);
    if (!inst || !inst->monitor || !overlay_.has_group(sibling)) return;
    const GroupRecord& sib = overlay_.group(sibling);
    if (sib.rv_peers.empty()) return;
    PeerId into_rv = *sib.rv_peers.begin();
    GroupId from_sg = inst->subgroup;
    std::vector<PeerId> moved = overlay_.merge_subgroup_into(from_sg, sibling);
    std::vector<ScheduleEntry> entries =
        inst->ep ? inst->ep->snapshot() : std::vector<ScheduleEntry>{};
    for (PeerId w : moved) {
        if (w != rv) send_from(rv, w, MigrateOrder{service, into_rv});
    }
    send_from(rv, into_rv, HandoffEntries{service, std::move(entries)});
    // Retire to a plain worker under the sibling's RV.
    inst->ep.reset();
    inst->monitor.reset();
    inst->subgroup = sibling;
    if (inst->worker) {
        inst->worker->set_rv(into_rv);
        inst->worker_active = true;
    } else {
        start_worker_instance(rv, service, sibling, into_rv);
    }
}

void Simulation::kill_peer(PeerId p) {
    PeerState& ps = peers_.at(p);
    if (!ps.alive) return;
    ps.alive = false;
    ++ps.epoch;
    ps.services.clear();
    ps.cancel_tombstones.clear();
    // replies_seen survives: a reply for a past life still dedups.
}

void Simulation::revive_peer(PeerId p) {
    PeerState& ps = peers_.at(p);
    if (ps.alive) return;
    ps.alive = true;
    ++ps.epoch;
    ps.bootstrapped = false;
    ps.root = kNoGroup;
    ps.spare_used = false;
    ps.resolved_service.clear();
    // Stale roles from the previous life go away before the re-bootstrap;
    // subgroups left headless get elections now.
    for (GroupId sg : overlay_.strip_peer(p)) {
        GroupId svc = overlay_.group(sg).parent;
        if (auto round = overlay_.start_election(sg)) {
            kernel_.schedule_event(kernel_.now() + scenario_.params.election_delay_ms, kNoPeer,
                                   TimerElectionClaim{svc, sg, *round});
        }
    }
    kernel_.schedule_event(kernel_.now(), p, TimerBootstrap{});
    for (std::size_t si = 0; si < scenario_.services.size(); ++si) {
        const auto& workers = scenario_.services[si].workers;
        if (std::find(workers.begin(), workers.end(), p) != workers.end()) {
            kernel_.schedule_event(kernel_.now(), p, TimerWorkerStart{si});
        }
    }
}

bool Simulation::client_walk(PeerId c, std::size_t service_index, GroupId& gid, PeerId& rv) {
    const ServiceSpec& spec = scenario_.services[service_index];
    PeerState& ps = peers_.at(c);
    auto resolved = ps.resolved_service.find(service_index);
    if (resolved != ps.resolved_service.end() && overlay_.has_group(resolved->second)) {
        if (auto assigned = overlay_.assign_entry_rv(c, resolved->second)) {
            gid = resolved->second;
            rv = *assigned;
            return true;
        }
        ps.resolved_service.erase(resolved);
    }
    if (ps.root == kNoGroup) return false;
    GroupId scope = ps.root;
    for (const std::string& name : spec.category_path) {
        auto disc = overlay_.discover_advertisements(c, scope);
        if (disc.error != Overlay::DiscoverError::None) return false;
        GroupId next = kNoGroup;
        for (const Advertisement& ad : disc.ads) {
            if (ad.kind == GroupKind::Category && ad.name == name) {
                next = ad.group_id;
                break;
            }
        }
        if (next == kNoGroup) return false;
        if (overlay_.join_group(c, next).error != Overlay::JoinError::None) return false;
        scope = next;
    }
    auto disc = overlay_.discover_advertisements(c, scope);
    if (disc.error != Overlay::DiscoverError::None) return false;
    GroupId svc = kNoGroup;
    for (const Advertisement& ad : disc.ads) {
        if (ad.kind == GroupKind::Service && ad.name == spec.name) {
            svc = ad.group_id;
            break;
        }
    }
    if (svc == kNoGroup) return false;
    Overlay::JoinResult join = overlay_.join_group(c, svc);
    if (join.error != Overlay::JoinError::None || join.rv == kNoPeer) return false;
    ps.resolved_service[service_index] = svc;
    gid = svc;
    rv = join.rv;
    return true;
}

void Simulation::submit_query(PeerId c, std::size_t service_index, GroupId gid, PeerId rv) {
    const ServiceSpec& spec = scenario_.services[service_index];
    QueryId qid = next_query_id_++;
    Query q;
    q.query_id = qid;
    q.client_pipe = PipeRef{c, 1};
    q.service_group = gid;
    q.payload = spec.query_format + ":" + std::to_string(qid);
    q.submitted_at = kernel_.now();
    submitted_at_[qid] = q.submitted_at;
    trace_.emit(kernel_.now(), TraceKind::query_submitted, c,
                {{"query", qid}, {"service", std::uint64_t{gid}}});
    send_from(c, rv, QuerySubmit{std::move(q)});
}

// --- plumbing ----------------------------------------------------------------

void Simulation::send_from(PeerId from, PeerId to, ProtocolMessage msg) {
    auto it = peers_.find(from);
    if (it == peers_.end() || !it->second.alive) return;
    kernel_.send_message(from, to, std::move(msg));
}

void Simulation::drop_at_delivery(PeerId from, PeerId to, const ProtocolMessage& msg,
                                  const char* reason, std::optional<QueryId> query) {
    std::vector<TraceField> d{{"from", std::uint64_t{from}},
                              {"to", std::uint64_t{to}},
                              {"msg", std::string(message_name(msg))},
                              {"reason", std::string(reason)}};
    if (query) d.push_back({"query", *query});
    trace_.emit(kernel_.now(), TraceKind::msg_dropped, to, std::move(d));
}

Simulation::ServiceInstance* Simulation::instance(PeerId p, GroupId service) {
    auto pit = peers_.find(p);
    if (pit == peers_.end()) return nullptr;
    auto sit = pit->second.services.find(service);
    return sit == pit->second.services.end() ? nullptr : &sit->second;
}

EntryPoint* Simulation::route_by_query(PeerId p, QueryId query) {
    PeerState& ps = peers_.at(p);
    EntryPoint* fallback = nullptr;
    for (auto& [gid, inst] : ps.services) {
        if (!inst.ep) continue;
        if (!fallback) fallback = inst.ep.get();
        if (inst.ep->knows(query)) return inst.ep.get();
    }
    // Unknown query: let the first entry point record the late arrival.
    return fallback;
}

std::uint32_t Simulation::epoch_of(PeerId p) const {
    return peers_.at(p).epoch;
}

VirtualTime Simulation::draw_service_time(std::size_t service_index) {
    const ServiceTimeSpec& st = scenario_.services[service_index].service_time;
    if (st.kind == ServiceTimeSpec::Kind::Constant) return st.value;
    return st.lo + kernel_.rng().bounded(st.hi - st.lo + 1);
}

std::uint32_t Simulation::multiplier_at(const std::string& service_name, VirtualTime t) const {
    std::uint64_t m = 1;
    for (const InjectWindow& w : injects_) {
        if (w.service == service_name && t >= w.from && t < w.to) m *= w.multiplier;
    }
    return static_cast<std::uint32_t>(m);
}

const ServiceSpec& Simulation::spec_of(GroupId service) const {
    return scenario_.services[index_of(service)];
}

std::size_t Simulation::index_of(GroupId service) const {
    return service_of_gid_.at(service);
}

} // namespace groupsim
