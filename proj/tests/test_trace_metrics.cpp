#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "groupsim/metrics.hpp"
#include "groupsim/replay.hpp"
#include "groupsim/scenario.hpp"
#include "groupsim/trace.hpp"

using namespace groupsim;

namespace {

TraceRecord rec(VirtualTime t, std::uint64_t seq, TraceKind ev, PeerId actor,
                std::vector<TraceField> d = {}) {
    return TraceRecord{t, seq, ev, actor, std::move(d)};
}

// submitted -> scheduled -> serviced for `n` queries, one per millisecond
std::vector<TraceRecord> clean_run(std::uint64_t n) {
    std::vector<TraceRecord> rs;
    std::uint64_t seq = 0;
    for (std::uint64_t q = 1; q <= n; ++q) {
        VirtualTime t0 = q * 10;
        rs.push_back(rec(t0, ++seq, TraceKind::query_submitted, 2, {{"query", q}}));
        rs.push_back(rec(t0 + 2, ++seq, TraceKind::query_scheduled, 10,
                         {{"query", q}, {"worker", std::uint64_t{11}}}));
        rs.push_back(rec(t0 + 6, ++seq, TraceKind::query_serviced, 2, {{"query", q}}));
    }
    return rs;
}

} // namespace

TEST_CASE("clean ten-query trace yields availability one and no recovery counts") {
    auto rs = clean_run(10);
    MetricsReport r = summarize(rs, 123);
    CHECK(r.queries_submitted == 10);
    CHECK(r.queries_serviced == 10);
    CHECK(r.availability == Rational{10, 10});
    CHECK(r.rescheduled == 0);
    CHECK(r.duplicate_replies == 0);
    CHECK(r.elections == 0);
    CHECK(r.rv_splits == 0);
    CHECK(r.messages_sent == 123);
    CHECK(r.messages_dropped == 0);
    // every query took 6 ms end to end
    CHECK(r.latency_count == 10);
    CHECK(r.latency_sum_ms == 60);
    CHECK(r.latency_p50_ms == 6);
    CHECK(r.latency_p95_ms == 6);
    CHECK(r.latency_max_ms == 6);
    CHECK(validate_query_states(rs).empty());
}

TEST_CASE("duplicate reply counts separately and leaves availability untouched") {
    auto rs = clean_run(3);
    std::uint64_t seq = rs.back().seq;
    rs.push_back(rec(100, ++seq, TraceKind::duplicate_reply, 2, {{"query", std::uint64_t{2}}}));
    MetricsReport r = summarize(rs, 0);
    CHECK(r.queries_submitted == 3);
    CHECK(r.queries_serviced == 3);
    CHECK(r.duplicate_replies == 1);
    CHECK(r.availability == Rational{3, 3});
    CHECK(validate_query_states(rs).empty());
}

TEST_CASE("empty trace summarizes to the all-zero report") {
    MetricsReport r = summarize({}, 0);
    CHECK(r == MetricsReport{});
    CHECK(r.availability == Rational{0, 1});
    CHECK(metrics_csv(r).find("0,0,0,0,0,0,0,0,0,1,0.000000,0.000,0,0,0,0") !=
          std::string::npos);
}

TEST_CASE("out-of-order records are rejected") {
    std::vector<TraceRecord> rs;
    rs.push_back(rec(10, 1, TraceKind::heartbeat, 5));
    rs.push_back(rec(9, 2, TraceKind::heartbeat, 5));
    CHECK_THROWS_AS(summarize(rs, 0), MalformedTrace);

    rs.clear();
    rs.push_back(rec(10, 2, TraceKind::heartbeat, 5));
    rs.push_back(rec(10, 2, TraceKind::heartbeat, 6));
    CHECK_THROWS_AS(summarize(rs, 0), MalformedTrace);
}

TEST_CASE("state machine violations are reported per query") {
    std::vector<TraceRecord> rs;
    // scheduled with no submitted
    rs.push_back(rec(1, 1, TraceKind::query_scheduled, 10,
                     {{"query", std::uint64_t{7}}, {"worker", std::uint64_t{11}}}));
    // serviced with no scheduling
    rs.push_back(rec(2, 2, TraceKind::query_submitted, 2, {{"query", std::uint64_t{8}}}));
    rs.push_back(rec(3, 3, TraceKind::query_serviced, 2, {{"query", std::uint64_t{8}}}));
    // double submit
    rs.push_back(rec(4, 4, TraceKind::query_submitted, 2, {{"query", std::uint64_t{9}}}));
    rs.push_back(rec(5, 5, TraceKind::query_submitted, 2, {{"query", std::uint64_t{9}}}));
    auto violations = validate_query_states(rs);
    REQUIRE(violations.size() == 3);
    CHECK(violations[0].find("query 7 scheduled outside submitted state") != std::string::npos);
    CHECK(violations[1].find("query 8 serviced while not scheduled") != std::string::npos);
    CHECK(violations[2].find("query 9 submitted twice") != std::string::npos);
}

TEST_CASE("cancel after serviced is the recall of a stale twin, not a violation") {
    auto rs = clean_run(1);
    std::uint64_t seq = rs.back().seq;
    rs.push_back(rec(50, ++seq, TraceKind::query_cancelled, 10,
                     {{"query", std::uint64_t{1}}, {"worker", std::uint64_t{12}}}));
    CHECK(validate_query_states(rs).empty());
}

TEST_CASE("pending depth peaks at the largest backlog across time steps") {
    std::vector<TraceRecord> rs;
    rs.push_back(rec(1, 1, TraceKind::query_submitted, 2, {{"query", std::uint64_t{1}}}));
    rs.push_back(rec(2, 2, TraceKind::query_submitted, 2, {{"query", std::uint64_t{2}}}));
    rs.push_back(rec(3, 3, TraceKind::query_submitted, 2, {{"query", std::uint64_t{3}}}));
    rs.push_back(rec(4, 4, TraceKind::query_serviced, 2, {{"query", std::uint64_t{1}}}));
    rs.push_back(rec(4, 5, TraceKind::query_serviced, 2, {{"query", std::uint64_t{2}}}));
    rs.push_back(rec(5, 6, TraceKind::query_serviced, 2, {{"query", std::uint64_t{3}}}));
    MetricsReport r = summarize(rs, 0);
    CHECK(r.pending_depth_max == 3);

    // a submit and its reply inside one instant never shows as backlog depth 1
    std::vector<TraceRecord> quick;
    quick.push_back(rec(1, 1, TraceKind::query_submitted, 2, {{"query", std::uint64_t{1}}}));
    quick.push_back(rec(1, 2, TraceKind::query_serviced, 2, {{"query", std::uint64_t{1}}}));
    CHECK(summarize(quick, 0).pending_depth_max == 0);
}

TEST_CASE("latency percentiles use nearest rank") {
    std::vector<TraceRecord> rs;
    std::uint64_t seq = 0;
    // latencies 10,20,...,100
    for (std::uint64_t q = 1; q <= 10; ++q) {
        rs.push_back(rec(q * 1000, ++seq, TraceKind::query_submitted, 2, {{"query", q}}));
        rs.push_back(rec(q * 1000 + 1, ++seq, TraceKind::query_scheduled, 10,
                         {{"query", q}, {"worker", std::uint64_t{11}}}));
        rs.push_back(
            rec(q * 1000 + q * 10, ++seq, TraceKind::query_serviced, 2, {{"query", q}}));
    }
    MetricsReport r = summarize(rs, 0);
    CHECK(r.latency_p50_ms == 50);  // rank ceil(0.5*10)=5
    CHECK(r.latency_p95_ms == 100); // rank ceil(0.95*10)=10
    CHECK(r.latency_max_ms == 100);
    CHECK(r.latency_sum_ms == 550);
    // mean 55.000, half-up at three places
    CHECK(metrics_csv(r).find(",55.000,") != std::string::npos);
}

TEST_CASE("csv is three lines with the documented header") {
    MetricsReport r = summarize(clean_run(2), 9);
    std::string csv = metrics_csv(r);
    CHECK(csv.rfind("format=1\n", 0) == 0);
    CHECK(csv.find("queries_submitted,queries_serviced,duplicate_replies,rescheduled,"
                   "elections,rv_splits,messages_sent,messages_dropped,availability_num,"
                   "availability_den,availability,latency_mean_ms,latency_p50_ms,"
                   "latency_p95_ms,latency_max_ms,pending_depth_max\n") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("2,2,0,0,0,0,9,0,2,2,1.000000,") != std::string::npos);
}

TEST_CASE("summary text renders the exact rational beside the decimal") {
    auto rs = clean_run(4);
    rs.pop_back(); // last query loses its reply
    MetricsReport r = summarize(rs, 0);
    std::string s = metrics_summary(r);
    CHECK(s.find("availability=0.750000 (3/4)") != std::string::npos);
    CHECK(s.find("queries_submitted=4") != std::string::npos);
    CHECK(s.find("latency_mean_ms=6.000") != std::string::npos);
}

TEST_CASE("replay check accepts deterministic producers and pinpoints rogue ones") {
    ReplayResult ok = replay_check(3, [](int) { return std::string("a\nb\nc\n"); });
    CHECK(ok.identical);
    CHECK(ok.runs == 3);

    // the third run reads something run-dependent (the negative control)
    ReplayResult bad = replay_check(3, [](int i) {
        return i < 3 ? std::string("a\nb\nc\n") : std::string("a\nX\nc\n");
    });
    CHECK_FALSE(bad.identical);
    REQUIRE(bad.divergence.has_value());
    CHECK(bad.divergence->run == 3);
    CHECK(bad.divergence->line == 2);
    CHECK(bad.divergence->expected == "b");
    CHECK(bad.divergence->actual == "X");

    // a truncated run diverges at the missing line
    ReplayResult trunc = replay_check(2, [](int i) {
        return i == 1 ? std::string("a\nb\n") : std::string("a\n");
    });
    CHECK_FALSE(trunc.identical);
    REQUIRE(trunc.divergence.has_value());
    CHECK(trunc.divergence->line == 2);
    CHECK(trunc.divergence->actual == "<missing>");

    CHECK_THROWS_AS(replay_check(1, [](int) { return std::string(); }),
                    std::invalid_argument);
}

TEST_CASE("scenario replay is byte identical across runs") {
    const char* doc = R"({
      "name": "replay-probe",
      "seed": 99,
      "duration_ms": 6000,
      "networks": [{"name": "lan"}],
      "peers": [
        {"id": 1, "network": "lan", "role_hint": "rendezvous"},
        {"id": 2, "network": "lan", "role_hint": "client"},
        {"id": 10, "network": "lan", "role_hint": "worker"},
        {"id": 11, "network": "lan", "role_hint": "worker"}
      ],
      "services": [{
        "category_path": ["apps"],
        "name": "echo",
        "query_format": "fmt0",
        "workers": [10, 11],
        "service_time": {"uniform": [10, 90]}
      }],
      "workload": [{
        "client": 2,
        "service": "echo",
        "arrival": {"period_ms": 300},
        "count": 10
      }]
    })";
    Scenario s = parse_scenario(doc);
    ReplayResult res = replay_check(s, 3);
    CHECK(res.identical);

    RunOutputs out = run_scenario(s);
    CHECK(out.report.queries_submitted == 10);
    CHECK(out.report.queries_serviced == 10);
    // seed override changes the run, until caps it
    RunOutputs other = run_scenario(s, 100);
    CHECK(other.trace_text != out.trace_text);
    RunOutputs capped = run_scenario(s, std::nullopt, VirtualTime{1000});
    CHECK(capped.report.queries_submitted < 10);
}
