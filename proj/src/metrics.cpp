#include "groupsim/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>

namespace groupsim {

namespace {

std::optional<std::uint64_t> field_u64(const TraceRecord& r, const char* key) {
    for (const TraceField& f : r.d) {
        if (f.key != key) continue;
        if (const auto* u = std::get_if<std::uint64_t>(&f.value)) return *u;
        if (const auto* i = std::get_if<std::int64_t>(&f.value)) {
            if (*i >= 0) return static_cast<std::uint64_t>(*i);
        }
        return std::nullopt;
    }
    return std::nullopt;
}

// nearest-rank percentile over an ascending vector: rank = ceil(q * n)
std::uint64_t percentile(const std::vector<std::uint64_t>& sorted, std::uint64_t q_num,
                         std::uint64_t q_den) {
    if (sorted.empty()) return 0;
    std::uint64_t n = sorted.size();
    std::uint64_t rank = (q_num * n + q_den - 1) / q_den;
    if (rank == 0) rank = 1;
    return sorted[rank - 1];
}

} // namespace

MetricsReport summarize(const std::vector<TraceRecord>& records, std::uint64_t messages_sent) {
    MetricsReport rep;
    rep.messages_sent = messages_sent;

    std::map<std::uint64_t, VirtualTime> submitted_at;
    std::set<std::uint64_t> open; // submitted, no terminal record yet
    std::vector<std::uint64_t> latencies;
    std::uint64_t depth_max = 0;

    const TraceRecord* prev = nullptr;
    for (const TraceRecord& r : records) {
        if (prev != nullptr) {
            if (r.t < prev->t || r.seq <= prev->seq) {
                throw MalformedTrace("trace records out of order at t=" + std::to_string(r.t) +
                                     " seq=" + std::to_string(r.seq));
            }
            if (r.t != prev->t) {
                depth_max = std::max<std::uint64_t>(depth_max, open.size());
            }
        }
        prev = &r;

        switch (r.ev) {
        case TraceKind::query_submitted:
            ++rep.queries_submitted;
            if (auto q = field_u64(r, "query")) {
                submitted_at.emplace(*q, r.t);
                open.insert(*q);
            }
            break;
        case TraceKind::query_serviced:
            ++rep.queries_serviced;
            if (auto q = field_u64(r, "query")) {
                open.erase(*q);
                auto it = submitted_at.find(*q);
                if (it != submitted_at.end()) {
                    latencies.push_back(r.t - it->second);
                }
            }
            break;
        case TraceKind::query_cancelled:
            if (auto q = field_u64(r, "query")) open.erase(*q);
            break;
        case TraceKind::query_rescheduled:
            ++rep.rescheduled;
            break;
        case TraceKind::duplicate_reply:
            ++rep.duplicate_replies;
            break;
        case TraceKind::election:
            ++rep.elections;
            break;
        case TraceKind::rv_split:
            ++rep.rv_splits;
            break;
        case TraceKind::msg_dropped:
            ++rep.messages_dropped;
            break;
        default:
            break;
        }
    }
    depth_max = std::max<std::uint64_t>(depth_max, open.size());
    rep.pending_depth_max = depth_max;

    if (rep.queries_submitted == 0) {
        rep.availability = Rational{0, 1};
    } else {
        rep.availability = Rational{rep.queries_serviced, rep.queries_submitted};
    }

    std::sort(latencies.begin(), latencies.end());
    rep.latency_count = latencies.size();
    for (std::uint64_t l : latencies) rep.latency_sum_ms += l;
    rep.latency_p50_ms = percentile(latencies, 50, 100);
    rep.latency_p95_ms = percentile(latencies, 95, 100);
    rep.latency_max_ms = latencies.empty() ? 0 : latencies.back();
    return rep;
}

std::vector<std::string> validate_query_states(const std::vector<TraceRecord>& records) {
    enum class St { Submitted, Scheduled, Serviced, Cancelled };
    std::map<std::uint64_t, St> st;
    std::vector<std::string> out;
    auto complain = [&](const TraceRecord& r, std::uint64_t q, const char* what) {
        out.push_back("query " + std::to_string(q) + " " + what + " at t=" +
                      std::to_string(r.t) + " seq=" + std::to_string(r.seq));
    };

    for (const TraceRecord& r : records) {
        std::optional<std::uint64_t> qf = field_u64(r, "query");
        if (!qf) continue;
        std::uint64_t q = *qf;
        auto it = st.find(q);
        switch (r.ev) {
        case TraceKind::query_submitted:
            if (it != st.end()) {
                complain(r, q, "submitted twice");
            } else {
                st[q] = St::Submitted;
            }
            break;
        case TraceKind::query_scheduled:
            if (it == st.end() || it->second != St::Submitted) {
                complain(r, q, "scheduled outside submitted state");
            } else {
                it->second = St::Scheduled;
            }
            break;
        case TraceKind::query_rescheduled:
            if (it == st.end() || it->second != St::Scheduled) {
                complain(r, q, "rescheduled while not scheduled");
            }
            break;
        case TraceKind::query_serviced:
            if (it == st.end() || it->second != St::Scheduled) {
                complain(r, q, "serviced while not scheduled");
            } else {
                it->second = St::Serviced;
            }
            break;
        case TraceKind::query_cancelled:
            // cancel after serviced recalls the stale twin of a resolved query
            if (it == st.end() ||
                (it->second != St::Scheduled && it->second != St::Serviced)) {
                complain(r, q, "cancelled while neither scheduled nor serviced");
            } else if (it->second == St::Scheduled) {
                it->second = St::Cancelled;
            }
            break;
        case TraceKind::duplicate_reply:
            if (it == st.end() || it->second != St::Serviced) {
                complain(r, q, "duplicate reply before first reply");
            }
            break;
        default:
            break;
        }
    }
    return out;
}

std::string metrics_csv(const MetricsReport& r) {
    std::string out = "format=1\n";
    out +=
        "queries_submitted,queries_serviced,duplicate_replies,rescheduled,elections,"
        "rv_splits,messages_sent,messages_dropped,availability_num,availability_den,"
        "availability,latency_mean_ms,latency_p50_ms,latency_p95_ms,latency_max_ms,"
        "pending_depth_max\n";
    out += std::to_string(r.queries_submitted) + ',';
    out += std::to_string(r.queries_serviced) + ',';
    out += std::to_string(r.duplicate_replies) + ',';
    out += std::to_string(r.rescheduled) + ',';
    out += std::to_string(r.elections) + ',';
    out += std::to_string(r.rv_splits) + ',';
    out += std::to_string(r.messages_sent) + ',';
    out += std::to_string(r.messages_dropped) + ',';
    out += std::to_string(r.availability.num) + ',';
    out += std::to_string(r.availability.den) + ',';
    out += rational_to_decimal(r.availability.num, r.availability.den, 6) + ',';
    out += rational_to_decimal(r.latency_sum_ms, std::max<std::uint64_t>(r.latency_count, 1), 3) +
           ',';
    out += std::to_string(r.latency_p50_ms) + ',';
    out += std::to_string(r.latency_p95_ms) + ',';
    out += std::to_string(r.latency_max_ms) + ',';
    out += std::to_string(r.pending_depth_max) + '\n';
    return out;
}

std::string metrics_summary(const MetricsReport& r) {
    std::string out;
    out += "queries_submitted=" + std::to_string(r.queries_submitted) + '\n';
    out += "queries_serviced=" + std::to_string(r.queries_serviced) + '\n';
    out += "duplicate_replies=" + std::to_string(r.duplicate_replies) + '\n';
    out += "rescheduled=" + std::to_string(r.rescheduled) + '\n';
    out += "elections=" + std::to_string(r.elections) + '\n';
    out += "rv_splits=" + std::to_string(r.rv_splits) + '\n';
    out += "messages_sent=" + std::to_string(r.messages_sent) + '\n';
    out += "messages_dropped=" + std::to_string(r.messages_dropped) + '\n';
    out += "availability=" + rational_to_decimal(r.availability.num, r.availability.den, 6) +
           " (" + format_rational(r.availability) + ")\n";
    out += "latency_mean_ms=" +
           rational_to_decimal(r.latency_sum_ms, std::max<std::uint64_t>(r.latency_count, 1), 3) +
           '\n';
    out += "latency_p50_ms=" + std::to_string(r.latency_p50_ms) + '\n';
    out += "latency_p95_ms=" + std::to_string(r.latency_p95_ms) + '\n';
    out += "latency_max_ms=" + std::to_string(r.latency_max_ms) + '\n';
    out += "pending_depth_max=" + std::to_string(r.pending_depth_max) + '\n';
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
        throw IoError("write failed for " + path);
    }
}

void write_outputs(const std::vector<TraceRecord>& records, const MetricsReport& report,
                   const std::string& trace_path, const std::string& csv_path) {
    write_text_file(trace_path, serialize_trace(records));
    write_text_file(csv_path, metrics_csv(report));
}

} // namespace groupsim
