#include "groupsim/entrypoint.hpp"

#include <algorithm>
#include <utility>

namespace groupsim {

EntryPoint::EntryPoint(Config cfg, Deps deps)
    : cfg_(std::move(cfg)), deps_(std::move(deps)) {}

void EntryPoint::drop_submit(const Query& q, PeerId from, const char* reason) {
    if (deps_.trace) {
        deps_.trace->emit(deps_.now(), TraceKind::msg_dropped, cfg_.self,
                          {{"from", std::uint64_t{from}},
                           {"to", std::uint64_t{cfg_.self}},
                           {"msg", std::string{"query_submit"}},
                           {"reason", std::string{reason}},
                           {"query", std::uint64_t{q.query_id}}});
    }
}

void EntryPoint::handle_submit(const QuerySubmit& sub, PeerId from) {
    const Query& q = sub.query;
    if (!q.payload.starts_with(cfg_.query_format + ":")) {
        drop_submit(q, from, "malformed");
        return;
    }
    if (knows(q.query_id)) {
        drop_submit(q, from, "duplicate");
        return;
    }
    if (!try_dispatch(q, false, kNoPeer)) {
        pending_.push_back(Pending{q, false, kNoPeer});
    }
}

void EntryPoint::handle_serviced(const QueryServiced& sv) {
    auto it = cache_.find(sv.query_id);
    if (it == cache_.end()) {
        // finished before the takeover handed us the entry, or already
        // resolved; remember it so a future merge cannot resurrect it
        tombstones_.insert(sv.query_id);
        if (deps_.trace) {
            deps_.trace->emit(deps_.now(), TraceKind::late_serviced_ignored, cfg_.self,
                              {{"query", std::uint64_t{sv.query_id}},
                               {"worker", std::uint64_t{sv.worker}}});
        }
        return;
    }
    ScheduleEntry entry = it->second;
    cache_.erase(it);
    tombstones_.insert(sv.query_id);
    if (entry.worker != sv.worker) {
        // an older assignment won the race; recall the current one
        deps_.send(entry.worker, ProtocolMessage{QueryCancel{sv.query_id}});
        if (deps_.trace) {
            deps_.trace->emit(deps_.now(), TraceKind::query_cancelled, cfg_.self,
                              {{"query", std::uint64_t{sv.query_id}},
                               {"worker", std::uint64_t{entry.worker}}});
        }
    }
    retry_pending();
}

void EntryPoint::handle_busy(const BusyReply& busy) {
    auto it = cache_.find(busy.query_id);
    if (it == cache_.end() || it->second.worker != busy.worker) {
        return; // stale bounce
    }
    Query q = it->second.query;
    cache_.erase(it);
    pending_.push_front(Pending{q, true, busy.worker});
    retry_pending();
}

void EntryPoint::handle_worker_failure(PeerId worker) {
    std::vector<Query> moved;
    for (auto it = cache_.begin(); it != cache_.end();) {
        if (it->second.worker == worker) {
            moved.push_back(it->second.query);
            it = cache_.erase(it);
        } else {
            ++it;
        }
    }
    for (const Query& q : moved) {
        if (!try_dispatch(q, true, worker)) {
            pending_.push_back(Pending{q, true, worker});
        }
    }
}

void EntryPoint::merge_entries(const std::vector<ScheduleEntry>& entries) {
    for (const ScheduleEntry& e : entries) {
        if (knows(e.query.query_id)) {
            continue;
        }
        if (worker_known(e.worker)) {
            cache_[e.query.query_id] = e;
        } else if (!try_dispatch(e.query, true, e.worker)) {
            pending_.push_back(Pending{e.query, true, e.worker});
        }
    }
    retry_pending();
}

void EntryPoint::retry_pending() {
    while (!pending_.empty()) {
        Pending p = pending_.front();
        if (!try_dispatch(p.query, p.resched, p.prev)) {
            break;
        }
        pending_.pop_front();
    }
}

bool EntryPoint::try_dispatch(const Query& q, bool resched, PeerId prev) {
    ServiceLoadView view = build_view();
    auto group = select_worker_group(view);
    if (!group) {
        return false;
    }
    const SubgroupView& sg = view.subgroups[*group];
    auto worker = select_worker(sg.workers);
    if (!worker) {
        // the least-loaded group is saturated, hence so is everything else
        return false;
    }
    const WorkerView* wv = nullptr;
    for (const WorkerView& candidate : sg.workers) {
        if (candidate.peer == *worker) {
            wv = &candidate;
            break;
        }
    }

    VirtualTime now = deps_.now();
    cache_[q.query_id] = ScheduleEntry{q, *worker, now};
    deps_.send(*worker, ProtocolMessage{QueryForward{q, cfg_.self}});
    if (deps_.trace) {
        if (resched) {
            deps_.trace->emit(now, TraceKind::query_rescheduled, cfg_.self,
                              {{"query", std::uint64_t{q.query_id}},
                               {"worker", std::uint64_t{*worker}},
                               {"prev", std::uint64_t{prev}},
                               {"group", std::uint64_t{sg.subgroup}},
                               {"view_scheduled", std::uint64_t{wv->scheduled}},
                               {"view_threshold", std::uint64_t{wv->threshold}}});
        } else {
            deps_.trace->emit(now, TraceKind::query_scheduled, cfg_.self,
                              {{"query", std::uint64_t{q.query_id}},
                               {"worker", std::uint64_t{*worker}},
                               {"group", std::uint64_t{sg.subgroup}},
                               {"view_scheduled", std::uint64_t{wv->scheduled}},
                               {"view_threshold", std::uint64_t{wv->threshold}}});
        }
    }
    return true;
}

ServiceLoadView EntryPoint::build_view() const {
    ServiceLoadView view;
    for (GroupId sg : deps_.live_subgroups()) {
        const auto* rows = deps_.rows_for(sg);
        if (rows == nullptr) {
            continue;
        }
        SubgroupView sv;
        sv.subgroup = sg;
        for (PeerId w : deps_.registered_in(sg)) {
            auto it = rows->find(w);
            if (it == rows->end()) {
                continue; // no heartbeat seen yet: not schedulable
            }
            WorkerView wv;
            wv.peer = w;
            wv.scheduled = own_scheduled(w) + deps_.extra_scheduled(w);
            wv.threshold = it->second.threshold;
            wv.network_delay = it->second.network_delay;
            sv.workers.push_back(wv);
        }
        if (!sv.workers.empty()) {
            view.subgroups.push_back(std::move(sv));
        }
    }
    return view;
}

bool EntryPoint::worker_known(PeerId worker) const {
    if (worker == kNoPeer) {
        return false;
    }
    for (GroupId sg : deps_.live_subgroups()) {
        const auto* rows = deps_.rows_for(sg);
        if (rows != nullptr && rows->count(worker) > 0) {
            return true;
        }
    }
    return false;
}

std::uint32_t EntryPoint::own_scheduled(PeerId worker) const {
    std::uint32_t n = 0;
    for (const auto& [id, entry] : cache_) {
        if (entry.worker == worker) {
            ++n;
        }
    }
    return n;
}

std::vector<ScheduleEntry> EntryPoint::snapshot() const {
    std::vector<ScheduleEntry> out;
    out.reserve(cache_.size());
    for (const auto& [id, entry] : cache_) {
        out.push_back(entry);
    }
    return out;
}

bool EntryPoint::knows(QueryId query) const {
    if (cache_.count(query) > 0 || tombstones_.count(query) > 0) {
        return true;
    }
    return std::any_of(pending_.begin(), pending_.end(),
                       [&](const Pending& p) { return p.query.query_id == query; });
}

} // namespace groupsim
