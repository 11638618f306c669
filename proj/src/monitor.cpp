#include "groupsim/monitor.hpp"

#include <algorithm>
#include <utility>

namespace groupsim {

MonitorService::MonitorService(Config cfg, Deps deps)
    : cfg_(cfg), deps_(std::move(deps)) {}

void MonitorService::record_heartbeat(const Heartbeat& hb) {
    VirtualTime now = deps_.now();

    if (hb.rv_level) {
        if (hb.from != cfg_.self) {
            rv_last_[hb.from] = now;
        }
        return;
    }

    if (!deps_.is_registered(hb.from)) {
        // legitimate during re-registration churn, dropped but visible
        if (deps_.trace) {
            deps_.trace->emit(now, TraceKind::msg_dropped, cfg_.self,
                              {{"from", std::uint64_t{hb.from}},
                               {"to", std::uint64_t{cfg_.self}},
                               {"msg", std::string{"heartbeat"}},
                               {"reason", std::string{"unknown"}}});
        }
        return;
    }

    MonitorRow& row = own_rows_[hb.from];
    row.peer = hb.from;
    row.queries_scheduled = deps_.own_scheduled(hb.from);
    row.load = row.queries_scheduled;
    row.network_delay = static_cast<std::uint32_t>(now - hb.sent_at);
    row.last_heartbeat = now;
    row.threshold = hb.threshold;

    deps_.send(hb.from, ProtocolMessage{HeartbeatAck{cfg_.self, cfg_.service}});
    if (deps_.on_capacity_hint) {
        deps_.on_capacity_hint(); // fresh threshold may unblock pending work
    }
}

std::vector<PeerId> MonitorService::scan() {
    VirtualTime now = deps_.now();
    VirtualTime limit = VirtualTime{cfg_.k} * cfg_.heartbeat_period;

    std::vector<PeerId> peers = deps_.rv_peers();
    for (PeerId rv : peers) {
        if (rv == cfg_.self) {
            continue;
        }
        Heartbeat hb;
        hb.from = cfg_.self;
        hb.sent_at = now;
        hb.threshold = 0;
        hb.service = cfg_.service;
        hb.rv_level = true;
        if (deps_.trace) {
            deps_.trace->emit(now, TraceKind::heartbeat, cfg_.self,
                              {{"service", std::uint64_t{cfg_.service}},
                               {"to", std::uint64_t{rv}},
                               {"threshold", std::uint64_t{0}},
                               {"level", std::uint64_t{1}}});
        }
        deps_.send(rv, ProtocolMessage{hb});
    }

    std::vector<PeerId> failed;
    for (const auto& [peer, row] : own_rows_) {
        if (now - row.last_heartbeat > limit) {
            failed.push_back(peer);
        }
    }
    for (PeerId peer : failed) {
        VirtualTime last = own_rows_[peer].last_heartbeat;
        own_rows_.erase(peer);
        if (deps_.trace) {
            deps_.trace->emit(now, TraceKind::failure_detected, cfg_.self,
                              {{"peer", std::uint64_t{peer}},
                               {"group", std::uint64_t{cfg_.subgroup}},
                               {"last", std::uint64_t{last}}});
        }
        for (PeerId rv : peers) {
            if (rv != cfg_.self) {
                deps_.send(rv, ProtocolMessage{WorkerFailed{cfg_.service, peer}});
            }
        }
        deps_.on_worker_failed(peer);
    }

    std::vector<std::pair<PeerId, VirtualTime>> silent_rvs;
    for (const auto& [rv, last] : rv_last_) {
        if (now - last > limit) {
            silent_rvs.emplace_back(rv, last);
        }
    }
    for (const auto& [rv, last] : silent_rvs) {
        rv_last_.erase(rv);
        deps_.on_rv_failed(rv, last);
    }

    return failed;
}

void MonitorService::exchange_tables() {
    VirtualTime now = deps_.now();
    ++slot_;

    for (auto& [peer, row] : own_rows_) {
        row.queries_scheduled = deps_.own_scheduled(peer);
        row.load = row.queries_scheduled;
    }

    TableExchangeMsg msg;
    msg.from = cfg_.self;
    msg.slot = slot_;
    msg.service = cfg_.service;
    msg.subgroup = cfg_.subgroup;
    for (const auto& [peer, row] : own_rows_) {
        msg.rows.push_back(row);
    }
    msg.schedule = deps_.schedule_snapshot();

    if (deps_.trace) {
        deps_.trace->emit(now, TraceKind::table_exchange, cfg_.self,
                          {{"slot", std::uint64_t{slot_}},
                           {"group", std::uint64_t{cfg_.subgroup}},
                           {"rows", std::uint64_t{msg.rows.size()}}});
    }
    for (PeerId rv : deps_.rv_peers()) {
        if (rv != cfg_.self) {
            deps_.send(rv, ProtocolMessage{msg});
        }
    }

    if (saturated()) {
        ++sat_streak_;
    } else {
        sat_streak_ = 0;
    }
    if (sat_streak_ >= cfg_.spawn_slots) {
        sat_streak_ = 0;
        // spawning is owned by the lowest RV so a shared view yields one order
        std::vector<PeerId> peers = deps_.rv_peers();
        if (!peers.empty() && cfg_.self == *std::min_element(peers.begin(), peers.end()) &&
            deps_.on_spawn_needed) {
            deps_.on_spawn_needed();
        }
    }

    if (cfg_.consolidation) {
        GroupId target = kNoGroup;
        if (own_rows_.size() < cfg_.r_min) {
            for (const auto& [sg, remote] : merged_) {
                if (remote.rows.size() + own_rows_.size() <= cfg_.r_max) {
                    target = sg;
                    break;
                }
            }
        }
        if (target != kNoGroup) {
            ++thin_streak_;
        } else {
            thin_streak_ = 0;
        }
        if (thin_streak_ >= cfg_.consolidation_slots && target != kNoGroup &&
            deps_.on_consolidate) {
            thin_streak_ = 0;
            deps_.on_consolidate(target);
        }
    }
}

void MonitorService::handle_exchange(const TableExchangeMsg& msg) {
    if (msg.service != cfg_.service || msg.subgroup == cfg_.subgroup) {
        return;
    }
    auto it = merged_.find(msg.subgroup);
    if (it != merged_.end() && it->second.from == msg.from && msg.slot <= it->second.slot) {
        return; // stale slot
    }
    RemoteTable table;
    table.from = msg.from;
    table.slot = msg.slot;
    for (const MonitorRow& row : msg.rows) {
        table.rows[row.peer] = row;
    }
    merged_[msg.subgroup] = std::move(table);
    snapshots_[msg.from] = msg.schedule;
    if (deps_.on_capacity_hint) {
        deps_.on_capacity_hint();
    }
}

void MonitorService::handle_announce(const RvAnnounce& ann) {
    if (ann.service != cfg_.service) {
        return;
    }
    rv_last_.erase(ann.dead_rv);
    snapshots_.erase(ann.dead_rv);
    merged_.erase(ann.subgroup); // the winner's next exchange refills it
    if (ann.winner != cfg_.self) {
        rv_last_[ann.winner] = deps_.now();
    }
}

void MonitorService::drop_row(PeerId peer) {
    own_rows_.erase(peer);
}

std::map<GroupId, const std::map<PeerId, MonitorRow>*> MonitorService::all_rows() const {
    std::map<GroupId, const std::map<PeerId, MonitorRow>*> out;
    out[cfg_.subgroup] = &own_rows_;
    for (const auto& [sg, remote] : merged_) {
        out[sg] = &remote.rows;
    }
    return out;
}

std::uint32_t MonitorService::extra_scheduled(PeerId worker) const {
    std::uint32_t n = 0;
    for (const auto& [rv, entries] : snapshots_) {
        for (const ScheduleEntry& e : entries) {
            if (e.worker == worker) {
                ++n;
            }
        }
    }
    return n;
}

std::vector<ScheduleEntry> MonitorService::snapshot_of(PeerId rv) const {
    auto it = snapshots_.find(rv);
    return it == snapshots_.end() ? std::vector<ScheduleEntry>{} : it->second;
}

bool MonitorService::saturated() const {
    std::size_t rows = own_rows_.size();
    for (const auto& [peer, row] : own_rows_) {
        if (row.queries_scheduled < row.threshold) {
            return false;
        }
    }
    for (const auto& [sg, remote] : merged_) {
        rows += remote.rows.size();
        for (const auto& [peer, row] : remote.rows) {
            if (row.queries_scheduled < row.threshold) {
                return false;
            }
        }
    }
    return rows > 0;
}

} // namespace groupsim
