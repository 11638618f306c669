#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "groupsim/types.hpp"

namespace groupsim {

// Closed set of observable simulation events. Everything a test or the
// metrics pass needs to know about a run is expressed through these records;
// there is no side channel.
enum class TraceKind {
    peer_bootstrap,
    group_created,
    joined,
    registered,
    rv_split,
    election,
    query_submitted,
    query_scheduled,
    query_rescheduled,
    query_serviced,
    query_cancelled,
    duplicate_reply,
    heartbeat,
    failure_detected,
    table_exchange,
    spawn,
    msg_dropped,
    threshold_update,
    partition,
    heal,
    late_serviced_ignored,
    cancelled,
};

const char* to_string(TraceKind kind);

// Field values are integers or short label strings drawn from closed sets
// (group kinds, drop reasons, ...). Labels never contain spaces so the line
// format stays unambiguous.
using TraceValue = std::variant<std::int64_t, std::uint64_t, std::string>;

struct TraceField {
    std::string key;
    TraceValue value;

    bool operator==(const TraceField&) const = default;
};

struct TraceRecord {
    VirtualTime t = 0;
    std::uint64_t seq = 0;
    TraceKind ev = TraceKind::peer_bootstrap;
    PeerId actor = kNoPeer;
    std::vector<TraceField> d;

    bool operator==(const TraceRecord&) const = default;
};

// Append-only record stream. Records are strictly ascending in (t, seq);
// seq is a per-run counter independent of the kernel's event sequence.
class TraceLog {
public:
    void emit(VirtualTime t, TraceKind ev, PeerId actor, std::vector<TraceField> d);

    const std::vector<TraceRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

private:
    std::vector<TraceRecord> records_;
    std::uint64_t next_seq_ = 0;
    VirtualTime last_t_ = 0;
};

// Line-delimited text form. First line is "format=1"; each record is one
// line of key=value pairs in the fixed order t, seq, ev, actor, then the
// record's own fields in emission order. Byte-identical across replays of
// the same seed.
std::string serialize_trace(const std::vector<TraceRecord>& records);

std::string serialize_record(const TraceRecord& rec);

inline constexpr const char* kTraceHeader = "format=1";

} // namespace groupsim
