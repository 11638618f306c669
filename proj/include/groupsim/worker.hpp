#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <vector>

#include "groupsim/messages.hpp"
#include "groupsim/trace.hpp"
#include "groupsim/types.hpp"

namespace groupsim {

// Worker service instance for one (peer, service) pair.
//
// Owns the adaptive admission threshold, the in-flight query set, and the
// outbox that preserves coordinator-bound messages across an RV outage.
// All timing is injected: the host schedules ticks, completions, and the
// self-promotion wait through the callbacks in Deps.
class WorkerService {
public:
    struct Config {
        GroupId service = kNoGroup;
        PeerId self = kNoPeer;
        PeerId rv = kNoPeer;
        std::uint32_t t_initial = 10;
        std::uint32_t t_min = 1;
        VirtualTime window_ms = 2000;
        VirtualTime heartbeat_period = 500;
        std::uint32_t k = 3;
        VirtualTime rv_wait_timeout = 3000;
    };

    struct Deps {
        std::function<VirtualTime()> now;
        // One draw per admission. Constant distributions must not consume
        // randomness, so the draw happens only on the accepted path.
        std::function<VirtualTime()> service_time;
        std::function<void(PeerId to, ProtocolMessage msg)> send;
        std::function<void(VirtualTime at)> schedule_tick;
        std::function<void(VirtualTime at, QueryId query)> schedule_completion;
        std::function<void(VirtualTime at, std::uint64_t episode)> schedule_rv_wait;
        std::function<void()> on_self_promote;
        TraceLog* trace = nullptr;
    };

    WorkerService(Config cfg, Deps deps);

    // First tick runs immediately; the admission window opens here.
    void start();

    void on_tick();
    void handle_forward(const QueryForward& fwd);
    void on_completion(QueryId query);
    void handle_cancel(const QueryCancel& cancel);
    void handle_ack(const HeartbeatAck& ack);
    void handle_announce(const RvAnnounce& ann);
    void on_rv_wait(std::uint64_t episode);

    // Non-cancelled in-flight entries tracked by the given coordinator, for
    // rebuild reports after its death.
    std::vector<ScheduleEntry> entries_for_rv(PeerId rv) const;

    std::uint32_t threshold() const { return threshold_; }
    std::size_t in_flight() const { return in_flight_.size(); }
    std::size_t outbox_size() const { return outbox_.size(); }
    bool rv_lost() const { return rv_lost_; }
    PeerId rv() const { return rv_; }
    void set_rv(PeerId rv) { rv_ = rv; }

private:
    struct InFlight {
        Query query;
        PeerId entry_rv = kNoPeer;
        bool cancelled = false;
        VirtualTime arrived = 0;
    };

    // Messages bound for the coordinator are held while the link is down and
    // replayed in FIFO order on reconnect; everything else sends direct.
    void send_or_cache(PeerId to, ProtocolMessage msg);
    void flush_outbox();
    void close_windows(VirtualTime now);

    Config cfg_;
    Deps deps_;
    std::uint32_t threshold_;
    std::uint32_t q_count_ = 0;
    VirtualTime window_next_ = 0;
    VirtualTime last_ack_ = 0;
    bool rv_lost_ = false;
    std::uint64_t episode_ = 0;
    PeerId rv_ = kNoPeer;
    std::map<QueryId, InFlight> in_flight_;
    std::deque<ProtocolMessage> outbox_;
};

} // namespace groupsim
