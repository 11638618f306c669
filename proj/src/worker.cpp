#include "groupsim/worker.hpp"

#include <algorithm>
#include <utility>

#include "groupsim/threshold.hpp"

namespace groupsim {

WorkerService::WorkerService(Config cfg, Deps deps)
    : cfg_(cfg),
      deps_(std::move(deps)),
      threshold_(std::max(cfg.t_initial, cfg.t_min)),
      rv_(cfg.rv) {}

void WorkerService::start() {
    VirtualTime now = deps_.now();
    window_next_ = now + cfg_.window_ms;
    last_ack_ = now;
    on_tick();
}

void WorkerService::close_windows(VirtualTime now) {
    while (now >= window_next_) {
        ThresholdUpdate up = update_threshold(threshold_, q_count_, cfg_.t_min);
        if (deps_.trace) {
            deps_.trace->emit(now, TraceKind::threshold_update, cfg_.self,
                              {{"service", std::uint64_t{cfg_.service}},
                               {"t_old", std::uint64_t{threshold_}},
                               {"qx", std::uint64_t{q_count_}},
                               {"raw", std::int64_t{up.raw}},
                               {"clamped", std::uint64_t{up.clamped}}});
        }
        threshold_ = up.clamped;
        q_count_ = 0;
        window_next_ += cfg_.window_ms;
    }
}

void WorkerService::on_tick() {
    VirtualTime now = deps_.now();
    close_windows(now);

    // Loss check precedes the heartbeat so the detection-tick heartbeat is
    // already cached instead of sent into the void.
    if (!rv_lost_ && now - last_ack_ > VirtualTime{cfg_.k} * cfg_.heartbeat_period) {
        rv_lost_ = true;
        ++episode_;
        deps_.schedule_rv_wait(now + cfg_.rv_wait_timeout, episode_);
    }

    Heartbeat hb;
    hb.from = cfg_.self;
    hb.sent_at = now;
    hb.threshold = threshold_;
    hb.service = cfg_.service;
    hb.rv_level = false;
    if (deps_.trace) {
        deps_.trace->emit(now, TraceKind::heartbeat, cfg_.self,
                          {{"service", std::uint64_t{cfg_.service}},
                           {"to", std::uint64_t{rv_}},
                           {"threshold", std::uint64_t{threshold_}},
                           {"level", std::uint64_t{0}}});
    }
    send_or_cache(rv_, ProtocolMessage{hb});

    deps_.schedule_tick(now + cfg_.heartbeat_period);
}

void WorkerService::handle_forward(const QueryForward& fwd) {
    if (in_flight_.count(fwd.query.query_id) > 0) {
        return; // duplicate delivery, already in progress
    }
    VirtualTime now = deps_.now();
    if (in_flight_.size() < threshold_) {
        InFlight inf;
        inf.query = fwd.query;
        inf.entry_rv = fwd.entry_rv;
        inf.arrived = now;
        in_flight_.emplace(fwd.query.query_id, std::move(inf));
        deps_.schedule_completion(now + deps_.service_time(), fwd.query.query_id);
    } else {
        send_or_cache(fwd.entry_rv,
                      ProtocolMessage{BusyReply{fwd.query.query_id, cfg_.self}});
    }
}

void WorkerService::on_completion(QueryId query) {
    auto it = in_flight_.find(query);
    if (it == in_flight_.end()) {
        return;
    }
    VirtualTime now = deps_.now();
    InFlight inf = std::move(it->second);
    in_flight_.erase(it);

    if (inf.cancelled) {
        if (deps_.trace) {
            deps_.trace->emit(now, TraceKind::cancelled, cfg_.self,
                              {{"query", std::uint64_t{query}}});
        }
        return;
    }

    // The client reply rides the pipe and never waits on the coordinator.
    QueryReply reply;
    reply.query_id = query;
    reply.payload = inf.query.payload;
    reply.pipe = inf.query.client_pipe;
    deps_.send(inf.query.client_pipe.owner, ProtocolMessage{std::move(reply)});

    send_or_cache(inf.entry_rv, ProtocolMessage{QueryServiced{query, cfg_.self}});
    ++q_count_;
}

void WorkerService::handle_cancel(const QueryCancel& cancel) {
    auto it = in_flight_.find(cancel.query_id);
    if (it != in_flight_.end()) {
        it->second.cancelled = true;
    }
}

void WorkerService::handle_ack(const HeartbeatAck&) {
    last_ack_ = deps_.now();
    if (rv_lost_) {
        rv_lost_ = false;
        flush_outbox();
    }
}

void WorkerService::handle_announce(const RvAnnounce& ann) {
    if (ann.service != cfg_.service) {
        return;
    }

    // Entries the dead coordinator was tracking move to the winner, both in
    // our bookkeeping and via a rebuild report.
    std::vector<ScheduleEntry> moved;
    for (auto& [qid, inf] : in_flight_) {
        if (inf.entry_rv != ann.dead_rv) {
            continue;
        }
        if (!inf.cancelled) {
            moved.push_back(ScheduleEntry{inf.query, cfg_.self, inf.arrived});
        }
        inf.entry_rv = ann.winner;
    }

    if (ann.dead_rv == rv_ || ann.winner == cfg_.self) {
        rv_ = ann.winner;
        rv_lost_ = false;
        last_ack_ = deps_.now();
        flush_outbox();
    }

    if (!moved.empty()) {
        deps_.send(ann.winner,
                   ProtocolMessage{WorkerReport{cfg_.service, cfg_.self, std::move(moved)}});
    }
}

void WorkerService::on_rv_wait(std::uint64_t episode) {
    if (rv_lost_ && episode == episode_) {
        deps_.on_self_promote();
    }
}

std::vector<ScheduleEntry> WorkerService::entries_for_rv(PeerId rv) const {
    std::vector<ScheduleEntry> out;
    for (const auto& [qid, inf] : in_flight_) {
        if (inf.entry_rv == rv && !inf.cancelled) {
            out.push_back(ScheduleEntry{inf.query, cfg_.self, inf.arrived});
        }
    }
    return out;
}

void WorkerService::send_or_cache(PeerId to, ProtocolMessage msg) {
    if (rv_lost_ && to == rv_) {
        outbox_.push_back(std::move(msg));
    } else {
        deps_.send(to, std::move(msg));
    }
}

void WorkerService::flush_outbox() {
    std::deque<ProtocolMessage> held;
    held.swap(outbox_);
    for (auto& msg : held) {
        deps_.send(rv_, std::move(msg));
    }
}

} // namespace groupsim
