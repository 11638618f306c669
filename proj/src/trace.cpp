#include "groupsim/trace.hpp"

#include <stdexcept>

namespace groupsim {

const char* to_string(TraceKind kind) {
    switch (kind) {
    case TraceKind::peer_bootstrap: return "peer_bootstrap";
    case TraceKind::group_created: return "group_created";
    case TraceKind::joined: return "joined";
    case TraceKind::registered: return "registered";
    case TraceKind::rv_split: return "rv_split";
    case TraceKind::election: return "election";
    case TraceKind::query_submitted: return "query_submitted";
    case TraceKind::query_scheduled: return "query_scheduled";
    case TraceKind::query_rescheduled: return "query_rescheduled";
    case TraceKind::query_serviced: return "query_serviced";
    case TraceKind::query_cancelled: return "query_cancelled";
    case TraceKind::duplicate_reply: return "duplicate_reply";
    case TraceKind::heartbeat: return "heartbeat";
    case TraceKind::failure_detected: return "failure_detected";
    case TraceKind::table_exchange: return "table_exchange";
    case TraceKind::spawn: return "spawn";
    case TraceKind::msg_dropped: return "msg_dropped";
    case TraceKind::threshold_update: return "threshold_update";
    case TraceKind::partition: return "partition";
    case TraceKind::heal: return "heal";
    case TraceKind::late_serviced_ignored: return "late_serviced_ignored";
    case TraceKind::cancelled: return "cancelled";
    }
    return "unknown";
}

void TraceLog::emit(VirtualTime t, TraceKind ev, PeerId actor, std::vector<TraceField> d) {
    if (t < last_t_) {
        throw std::logic_error("trace time went backwards");
    }
    last_t_ = t;
    records_.push_back(TraceRecord{t, next_seq_++, ev, actor, std::move(d)});
}

namespace {

void append_value(std::string& out, const TraceValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) {
        out += std::to_string(*i);
    } else if (const auto* u = std::get_if<std::uint64_t>(&v)) {
        out += std::to_string(*u);
    } else {
        out += std::get<std::string>(v);
    }
}

} // namespace

std::string serialize_record(const TraceRecord& rec) {
    std::string line;
    line.reserve(64 + rec.d.size() * 16);
    line += "t=";
    line += std::to_string(rec.t);
    line += " seq=";
    line += std::to_string(rec.seq);
    line += " ev=";
    line += to_string(rec.ev);
    line += " actor=";
    line += std::to_string(rec.actor);
    for (const auto& f : rec.d) {
        line += ' ';
        line += f.key;
        line += '=';
        append_value(line, f.value);
    }
    return line;
}

std::string serialize_trace(const std::vector<TraceRecord>& records) {
    std::string out = kTraceHeader;
    out += '\n';
    for (const auto& rec : records) {
        out += serialize_record(rec);
        out += '\n';
    }
    return out;
}

} // namespace groupsim
