#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "groupsim/kernel.hpp"
#include "groupsim/rng.hpp"
#include "groupsim/trace.hpp"

#include <stdexcept>
#include <string>
#include <vector>

using namespace groupsim;

namespace {

NetworkModel two_networks() {
    NetworkModel net;
    net.add_network("alpha", LinkLatency{2, 5, 20});
    net.add_network("beta", LinkLatency{2, 5, 30});
    net.add_peer(1, "alpha");
    net.add_peer(2, "alpha");
    net.add_peer(3, "beta");
    return net;
}

} // namespace

TEST_CASE("splitmix64 reference outputs") {
    // published test vector for seed 0
    Rng rng(0);
    CHECK(rng.next_u64() == 0xe220a8397b1dcdafULL);
    CHECK(rng.next_u64() == 0x6e789e6aa1b965f4ULL);
    CHECK(rng.next_u64() == 0x06c45d188009454fULL);
    CHECK(rng.draws() == 3);
}

TEST_CASE("bounded draw stays in range and is seed-stable") {
    Rng a(99), b(99);
    for (int i = 0; i < 1000; ++i) {
        std::uint64_t x = a.bounded(7);
        CHECK(x < 7);
        CHECK(x == b.bounded(7));
    }
}

TEST_CASE("events run in (at, seq) order with same-time cascade") {
    Kernel k(1, two_networks());
    std::vector<std::pair<VirtualTime, EventSeq>> seen;
    k.set_handler([&](const Event& ev) {
        seen.push_back({ev.at, ev.seq});
        if (seen.size() == 1) {
            // scheduled mid-run at the current instant: must still run
            // inside this run_until call, after already-queued same-t events
            k.schedule_event(k.now(), 9, TimerBootstrap{});
        }
    });
    k.schedule_event(5, 1, TimerBootstrap{});
    k.schedule_event(3, 1, TimerBootstrap{});
    k.schedule_event(5, 2, TimerBootstrap{});
    k.schedule_event(3, 2, TimerBootstrap{});

    std::size_t n = k.run_until(10);
    CHECK(n == 5);
    REQUIRE(seen.size() == 5);
    for (std::size_t i = 1; i < seen.size(); ++i) {
        bool ascending = seen[i - 1].first < seen[i].first ||
                         (seen[i - 1].first == seen[i].first &&
                          seen[i - 1].second < seen[i].second);
        CHECK(ascending);
    }
    // the cascade event was scheduled while processing t=3 and ran at t=3
    CHECK(seen[1].first == 3);
}

TEST_CASE("run_until clock semantics") {
    Kernel k(1, two_networks());
    int fired = 0;
    k.set_handler([&](const Event&) { ++fired; });

    SUBCASE("empty queue fast-forwards to t_end") {
        CHECK(k.run_until(100) == 0);
        CHECK(k.now() == 100);
    }

    SUBCASE("clock rests at the last processed event") {
        k.schedule_event(1, 1, TimerBootstrap{});
        k.schedule_event(2, 1, TimerBootstrap{});
        k.schedule_event(3, 1, TimerBootstrap{});
        CHECK(k.run_until(2) == 2);
        CHECK(k.now() == 2);
        CHECK(fired == 2);
        CHECK(k.queued_events() == 1);
    }

    SUBCASE("draining the queue lets the clock reach t_end") {
        k.schedule_event(4, 1, TimerBootstrap{});
        CHECK(k.run_until(50) == 1);
        CHECK(k.now() == 50);
    }
}

TEST_CASE("scheduling in the past throws, at == now is fine") {
    Kernel k(1, two_networks());
    k.schedule_event(0, 1, TimerBootstrap{});
    CHECK(k.schedule_event(0, 1, TimerBootstrap{}) == 1); // seq continues
    k.run_until(10);
    k.schedule_event(10, 1, TimerBootstrap{});
    CHECK_THROWS_AS(k.schedule_event(9, 1, TimerBootstrap{}), std::invalid_argument);
}

TEST_CASE("delivery latency follows link class and network pair") {
    Kernel k(1, two_networks());
    std::vector<VirtualTime> arrivals;
    k.set_handler([&](const Event& ev) {
        if (std::holds_alternative<Delivery>(ev.payload)) {
            arrivals.push_back(ev.at);
        }
    });

    SUBCASE("intra-subgroup class") {
        k.set_link_classifier([](PeerId, PeerId) { return LinkClass::IntraSubgroup; });
        CHECK(k.send_message(1, 2, QueryCancel{7}));
        k.run_until(100);
        REQUIRE(arrivals.size() == 1);
        CHECK(arrivals[0] == 2);
    }

    SUBCASE("default class is inter-subgroup") {
        CHECK(k.send_message(1, 2, QueryCancel{7}));
        k.run_until(100);
        REQUIRE(arrivals.size() == 1);
        CHECK(arrivals[0] == 5);
    }

    SUBCASE("cross-network takes the larger inter_network value") {
        k.set_link_classifier([](PeerId, PeerId) { return LinkClass::InterNetwork; });
        CHECK(k.send_message(1, 3, QueryCancel{7})); // alpha(20) -> beta(30)
        k.run_until(100);
        REQUIRE(arrivals.size() == 1);
        CHECK(arrivals[0] == 30);
    }

    SUBCASE("unknown peer throws") {
        CHECK_THROWS_AS(k.send_message(1, 99, QueryCancel{7}), std::out_of_range);
    }
}

TEST_CASE("partitions block sends but not in-flight deliveries") {
    Kernel k(1, two_networks());
    TraceLog trace;
    k.set_trace(&trace);
    int delivered = 0;
    k.set_handler([&](const Event& ev) {
        if (std::holds_alternative<Delivery>(ev.payload)) {
            ++delivered;
        }
    });

    CHECK(k.send_message(1, 3, QueryCancel{1})); // in flight before the cut
    k.set_partition({{1, 2}, {3}});
    CHECK(!k.send_message(1, 3, QueryCancel{2})); // blocked at send time
    CHECK(k.send_message(1, 2, QueryCancel{3}));  // same set still fine

    k.run_until(1000);
    CHECK(delivered == 2);
    CHECK(k.messages_sent() == 3);
    CHECK(k.messages_dropped() == 1);

    REQUIRE(trace.size() == 1);
    const TraceRecord& rec = trace.records()[0];
    CHECK(rec.ev == TraceKind::msg_dropped);
    CHECK(serialize_record(rec) ==
          "t=0 seq=0 ev=msg_dropped actor=1 from=1 to=3 msg=query_cancel reason=partition");

    // heal restores connectivity
    k.set_partition({});
    CHECK(k.send_message(1, 3, QueryCancel{4}));
}

TEST_CASE("message loss") {
    SUBCASE("certain loss drops everything with a reason") {
        NetworkModel net = two_networks();
        net.loss_prob = Rational{1, 1};
        Kernel k(1, net);
        TraceLog trace;
        k.set_trace(&trace);
        for (int i = 0; i < 10; ++i) {
            CHECK(!k.send_message(1, 2, QueryCancel{0}));
        }
        CHECK(k.messages_dropped() == 10);
        CHECK(trace.records()[0].d.back().value == TraceValue{std::string("loss")});
        // num >= den needs no draw
        CHECK(k.rng().draws() == 0);
    }

    SUBCASE("zero loss consumes no draws") {
        Kernel k(1, two_networks());
        for (int i = 0; i < 10; ++i) {
            CHECK(k.send_message(1, 2, QueryCancel{0}));
        }
        CHECK(k.rng().draws() == 0);
    }

    SUBCASE("fractional loss drops roughly its share") {
        NetworkModel net = two_networks();
        net.loss_prob = Rational{1, 4};
        Kernel k(7, net);
        for (int i = 0; i < 2000; ++i) {
            k.send_message(1, 2, QueryCancel{0});
            k.run_until(k.now() + 50); // drain so the queue stays small
        }
        CHECK(k.messages_dropped() > 380);
        CHECK(k.messages_dropped() < 620);
    }
}

TEST_CASE("jitter widens latency deterministically") {
    NetworkModel net = two_networks();
    net.jitter_max = 3;

    auto arrivals_for_seed = [&](std::uint64_t seed) {
        Kernel k(seed, net);
        std::vector<VirtualTime> arrivals;
        k.set_handler([&](const Event& ev) {
            if (std::holds_alternative<Delivery>(ev.payload)) {
                arrivals.push_back(ev.at);
            }
        });
        for (int i = 0; i < 50; ++i) {
            k.send_message(1, 2, QueryCancel{0});
        }
        k.run_until(1000);
        return arrivals;
    };

    auto a = arrivals_for_seed(42);
    auto b = arrivals_for_seed(42);
    CHECK(a == b);
    for (VirtualTime t : a) {
        CHECK(t >= 5);
        CHECK(t <= 8);
    }
    CHECK(a != arrivals_for_seed(43));
}

TEST_CASE("trace records refuse time regressions and order by seq") {
    TraceLog trace;
    trace.emit(5, TraceKind::heartbeat, 1, {});
    trace.emit(5, TraceKind::heartbeat, 2, {});
    trace.emit(6, TraceKind::heartbeat, 3, {});
    CHECK(trace.records()[0].seq < trace.records()[1].seq);
    CHECK_THROWS_AS(trace.emit(4, TraceKind::heartbeat, 4, {}), std::logic_error);
}

TEST_CASE("trace serialization is stable") {
    TraceLog trace;
    trace.emit(0, TraceKind::partition, 0, {{"sets", std::uint64_t{2}}});
    trace.emit(3, TraceKind::threshold_update, 12,
               {{"t_old", std::uint64_t{10}},
                {"qx", std::uint64_t{4}},
                {"raw", std::int64_t{-4}},
                {"clamped", std::uint64_t{1}}});
    std::string text = serialize_trace(trace.records());
    CHECK(text ==
          "format=1\n"
          "t=0 seq=0 ev=partition actor=0 sets=2\n"
          "t=3 seq=1 ev=threshold_update actor=12 t_old=10 qx=4 raw=-4 clamped=1\n");
}
