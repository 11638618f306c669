#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <utility>
#include <vector>

#include "groupsim/trace.hpp"
#include "groupsim/worker.hpp"

using namespace groupsim;

namespace {

struct Env {
    VirtualTime now = 0;
    VirtualTime service_time = 40;
    std::vector<std::pair<PeerId, ProtocolMessage>> sent;
    std::vector<VirtualTime> ticks;
    std::vector<std::pair<VirtualTime, QueryId>> completions;
    std::vector<std::pair<VirtualTime, std::uint64_t>> waits;
    int promotions = 0;
    TraceLog trace;

    WorkerService::Deps deps() {
        WorkerService::Deps d;
        d.now = [this] { return now; };
        d.service_time = [this] { return service_time; };
        d.send = [this](PeerId to, ProtocolMessage msg) {
            sent.emplace_back(to, std::move(msg));
        };
        d.schedule_tick = [this](VirtualTime at) { ticks.push_back(at); };
        d.schedule_completion = [this](VirtualTime at, QueryId q) {
            completions.emplace_back(at, q);
        };
        d.schedule_rv_wait = [this](VirtualTime at, std::uint64_t ep) {
            waits.emplace_back(at, ep);
        };
        d.on_self_promote = [this] { ++promotions; };
        d.trace = &trace;
        return d;
    }

    static WorkerService::Config config() {
        WorkerService::Config cfg;
        cfg.service = 5;
        cfg.self = 10;
        cfg.rv = 4;
        cfg.t_initial = 10;
        cfg.window_ms = 2000;
        cfg.heartbeat_period = 500;
        cfg.k = 3;
        cfg.rv_wait_timeout = 3000;
        return cfg;
    }
};

QueryForward forward(QueryId id, PeerId entry_rv = 4, PeerId client = 90) {
    Query q;
    q.query_id = id;
    q.client_pipe = PipeRef{client, static_cast<std::uint32_t>(id)};
    q.service_group = 5;
    q.payload = "fmt:data";
    q.submitted_at = 0;
    return QueryForward{q, entry_rv};
}

std::vector<int> trace_kinds_of(const TraceLog& log, TraceKind kind) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < log.records().size(); ++i) {
        if (log.records()[i].ev == kind) {
            idx.push_back(static_cast<int>(i));
        }
    }
    return idx;
}

} // namespace

TEST_CASE("start sends a heartbeat and schedules the next tick") {
    Env env;
    env.now = 100;
    WorkerService w(Env::config(), env.deps());
    w.start();

    REQUIRE(env.sent.size() == 1);
    CHECK(env.sent[0].first == 4);
    const auto* hb = std::get_if<Heartbeat>(&env.sent[0].second);
    REQUIRE(hb != nullptr);
    CHECK(hb->from == 10);
    CHECK(hb->sent_at == 100);
    CHECK(hb->threshold == 10);
    CHECK(hb->service == 5);
    CHECK_FALSE(hb->rv_level);

    REQUIRE(env.ticks.size() == 1);
    CHECK(env.ticks[0] == 600);
    CHECK(trace_kinds_of(env.trace, TraceKind::heartbeat).size() == 1);
    CHECK(trace_kinds_of(env.trace, TraceKind::threshold_update).empty());
}

TEST_CASE("admission schedules completion after the drawn service time") {
    Env env;
    env.now = 100;
    WorkerService w(Env::config(), env.deps());
    w.start();

    w.handle_forward(forward(7));
    REQUIRE(env.completions.size() == 1);
    CHECK(env.completions[0] == std::pair<VirtualTime, QueryId>{140, 7});
    CHECK(w.in_flight() == 1);

    SUBCASE("completion replies to the client pipe and notifies the coordinator") {
        env.sent.clear();
        env.now = 140;
        w.on_completion(7);
        REQUIRE(env.sent.size() == 2);
        CHECK(env.sent[0].first == 90);
        const auto* reply = std::get_if<QueryReply>(&env.sent[0].second);
        REQUIRE(reply != nullptr);
        CHECK(reply->query_id == 7);
        CHECK(reply->pipe == PipeRef{90, 7});
        CHECK(env.sent[1].first == 4);
        const auto* sv = std::get_if<QueryServiced>(&env.sent[1].second);
        REQUIRE(sv != nullptr);
        CHECK(sv->query_id == 7);
        CHECK(sv->worker == 10);
        CHECK(w.in_flight() == 0);
    }

    SUBCASE("duplicate forward of an in-flight query is ignored") {
        env.sent.clear();
        w.handle_forward(forward(7));
        CHECK(env.sent.empty());
        CHECK(env.completions.size() == 1);
        CHECK(w.in_flight() == 1);
    }
}

TEST_CASE("forwards beyond the threshold bounce back busy") {
    Env env;
    auto cfg = Env::config();
    cfg.t_initial = 2;
    WorkerService w(cfg, env.deps());
    w.start();

    w.handle_forward(forward(1));
    w.handle_forward(forward(2));
    env.sent.clear();
    w.handle_forward(forward(3, 4));

    CHECK(w.in_flight() == 2);
    CHECK(env.completions.size() == 2);
    REQUIRE(env.sent.size() == 1);
    CHECK(env.sent[0].first == 4);
    const auto* busy = std::get_if<BusyReply>(&env.sent[0].second);
    REQUIRE(busy != nullptr);
    CHECK(busy->query_id == 3);
    CHECK(busy->worker == 10);
}

TEST_CASE("cancelled queries complete silently") {
    Env env;
    WorkerService w(Env::config(), env.deps());
    w.start();

    w.handle_forward(forward(9));
    w.handle_cancel(QueryCancel{9});
    env.sent.clear();
    env.now = 40;
    w.on_completion(9);

    CHECK(env.sent.empty());
    CHECK(w.in_flight() == 0);
    auto cancelled = trace_kinds_of(env.trace, TraceKind::cancelled);
    REQUIRE(cancelled.size() == 1);

    // the slot freed by a cancelled query does not count as processed work
    env.now = 2000;
    w.on_tick();
    auto updates = trace_kinds_of(env.trace, TraceKind::threshold_update);
    REQUIRE(updates.size() == 1);
    const auto& rec = env.trace.records()[updates[0]];
    bool saw_qx0 = false;
    for (const auto& [k, v] : rec.d) {
        if (k == "qx") {
            saw_qx0 = (std::get<std::uint64_t>(v) == 0);
        }
    }
    CHECK(saw_qx0);
}

TEST_CASE("window close applies the threshold update") {
    Env env;
    WorkerService w(Env::config(), env.deps());
    w.start();

    // three completions inside the window
    for (QueryId q : {1, 2, 3}) {
        w.handle_forward(forward(q));
        w.on_completion(q);
    }

    env.now = 500;
    w.on_tick();
    CHECK(trace_kinds_of(env.trace, TraceKind::threshold_update).empty());
    CHECK(w.threshold() == 10);

    env.now = 2000;
    w.on_tick();
    auto updates = trace_kinds_of(env.trace, TraceKind::threshold_update);
    REQUIRE(updates.size() == 1);
    // (10, 3): |10-6| - (10-3) = -3, clamped to 1
    CHECK(w.threshold() == 1);
    const auto& rec = env.trace.records()[updates[0]];
    std::int64_t raw = 99;
    std::uint64_t clamped = 99;
    for (const auto& [k, v] : rec.d) {
        if (k == "raw") raw = std::get<std::int64_t>(v);
        if (k == "clamped") clamped = std::get<std::uint64_t>(v);
    }
    CHECK(raw == -3);
    CHECK(clamped == 1);
}

TEST_CASE("silent coordinator triggers loss handling") {
    Env env;
    WorkerService w(Env::config(), env.deps());
    w.start();

    // acks come back for a while
    env.now = 504;
    w.handle_ack(HeartbeatAck{4, 5});
    env.now = 1000;
    w.on_tick();
    CHECK_FALSE(w.rv_lost());

    // silence: ticks continue, no acks
    env.now = 1500;
    w.on_tick();
    env.now = 2000;
    w.on_tick();
    CHECK_FALSE(w.rv_lost()); // gap 1496 <= 1500
    env.now = 2500;
    w.on_tick();
    CHECK(w.rv_lost()); // gap 1996 > 1500
    REQUIRE(env.waits.size() == 1);
    CHECK(env.waits[0] == std::pair<VirtualTime, std::uint64_t>{5500, 1});

    // heartbeats and serviced notices now cache instead of sending
    std::size_t wire_before = env.sent.size();
    env.now = 3000;
    w.on_tick();
    CHECK(env.sent.size() == wire_before);
    CHECK(w.outbox_size() == 2); // detection-tick heartbeat + this one

    w.handle_forward(forward(21));
    env.now = 3040;
    w.on_completion(21);
    // client reply still goes out; the serviced notice is held
    CHECK(env.sent.size() == wire_before + 1);
    CHECK(std::get_if<QueryReply>(&env.sent.back().second) != nullptr);
    CHECK(w.outbox_size() == 3);

    SUBCASE("late ack reconnects and flushes in FIFO order") {
        env.sent.clear();
        env.now = 3100;
        w.handle_ack(HeartbeatAck{4, 5});
        CHECK_FALSE(w.rv_lost());
        CHECK(w.outbox_size() == 0);
        REQUIRE(env.sent.size() == 3);
        CHECK(env.sent[0].first == 4);
        CHECK(std::get_if<Heartbeat>(&env.sent[0].second) != nullptr);
        CHECK(std::get_if<Heartbeat>(&env.sent[1].second) != nullptr);
        const auto* sv = std::get_if<QueryServiced>(&env.sent[2].second);
        REQUIRE(sv != nullptr);
        CHECK(sv->query_id == 21);

        // timeout firing later is stale
        env.now = 5500;
        w.on_rv_wait(1);
        CHECK(env.promotions == 0);
    }

    SUBCASE("election announce retargets and flushes to the winner") {
        env.sent.clear();
        env.now = 3200;
        w.handle_forward(forward(22, 4)); // still tracked by the dead coordinator
        w.handle_announce(RvAnnounce{5, 6, 11, 4});

        CHECK(w.rv() == 11);
        CHECK_FALSE(w.rv_lost());
        CHECK(w.outbox_size() == 0);

        // flushed messages plus one rebuild report, all to the winner
        REQUIRE(env.sent.size() == 4);
        for (const auto& [to, msg] : env.sent) {
            CHECK(to == 11);
        }
        const auto* rep = std::get_if<WorkerReport>(&env.sent.back().second);
        REQUIRE(rep != nullptr);
        CHECK(rep->worker == 10);
        REQUIRE(rep->in_flight.size() == 1);
        CHECK(rep->in_flight[0].query.query_id == 22);

        // future serviced notices go to the new coordinator
        env.sent.clear();
        env.now = 3240;
        w.on_completion(22);
        REQUIRE(env.sent.size() == 2);
        CHECK(env.sent[1].first == 11);
        CHECK(std::get_if<QueryServiced>(&env.sent[1].second) != nullptr);

        env.now = 5500;
        w.on_rv_wait(1);
        CHECK(env.promotions == 0);
    }

    SUBCASE("timeout with no rescue self-promotes exactly once per episode") {
        env.now = 5500;
        w.on_rv_wait(0); // stale episode
        CHECK(env.promotions == 0);
        w.on_rv_wait(1);
        CHECK(env.promotions == 1);
    }
}

TEST_CASE("announce for another subgroup only moves orphaned entries") {
    Env env;
    WorkerService w(Env::config(), env.deps());
    w.start();

    w.handle_forward(forward(31, 4));  // tracked by our own coordinator
    w.handle_forward(forward(32, 8));  // tracked by a remote entry point
    env.sent.clear();

    w.handle_announce(RvAnnounce{5, 7, 9, 8});
    CHECK(w.rv() == 4); // our coordinator is untouched
    REQUIRE(env.sent.size() == 1);
    CHECK(env.sent[0].first == 9);
    const auto* rep = std::get_if<WorkerReport>(&env.sent[0].second);
    REQUIRE(rep != nullptr);
    REQUIRE(rep->in_flight.size() == 1);
    CHECK(rep->in_flight[0].query.query_id == 32);

    // the serviced notice for the moved entry goes to the announce winner
    env.sent.clear();
    w.on_completion(32);
    CHECK(env.sent[1].first == 9);

    // announce for a different service entirely is ignored
    env.sent.clear();
    w.handle_announce(RvAnnounce{77, 7, 9, 4});
    CHECK(env.sent.empty());
    CHECK(w.rv() == 4);
}
