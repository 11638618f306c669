#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "groupsim/trace.hpp"
#include "groupsim/types.hpp"

namespace groupsim {

struct MalformedTrace : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Post-run aggregate. Counts are record counts; availability is kept as an
// exact rational (serviced/submitted, 0/1 when nothing was submitted) and
// only rendered as a decimal in the report text.
struct MetricsReport {
    std::uint64_t queries_submitted = 0;
    std::uint64_t queries_serviced = 0;
    std::uint64_t duplicate_replies = 0;
    std::uint64_t rescheduled = 0;
    std::uint64_t elections = 0;
    std::uint64_t rv_splits = 0;
    std::uint64_t messages_sent = 0;
    std::uint64_t messages_dropped = 0;
    Rational availability{0, 1};
    // submit to first reply, over queries that got one
    std::uint64_t latency_sum_ms = 0;
    std::uint64_t latency_count = 0;
    std::uint64_t latency_p50_ms = 0;
    std::uint64_t latency_p95_ms = 0;
    std::uint64_t latency_max_ms = 0;
    std::uint64_t pending_depth_max = 0;

    bool operator==(const MetricsReport&) const = default;
};

// Aggregates a finished run's records. messages_sent comes from the kernel
// counter; it has no trace record of its own. Throws MalformedTrace when
// (t, seq) ever goes backwards.
MetricsReport summarize(const std::vector<TraceRecord>& records, std::uint64_t messages_sent);

// Checks every query id against submitted -> scheduled -> (rescheduled)* ->
// serviced | cancelled. A cancel after serviced is the recall of a stale
// twin assignment and is allowed. Returns human-readable violations.
std::vector<std::string> validate_query_states(const std::vector<TraceRecord>& records);

// "format=1" line, header row, one data row.
std::string metrics_csv(const MetricsReport& r);

// key=value lines for the end-of-run console summary.
std::string metrics_summary(const MetricsReport& r);

// Writes content to path, throws IoError when the file cannot be written.
void write_text_file(const std::string& path, const std::string& content);

// Trace serialization plus report CSV in one call.
void write_outputs(const std::vector<TraceRecord>& records, const MetricsReport& report,
                   const std::string& trace_path, const std::string& csv_path);

} // namespace groupsim
