#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "groupsim/messages.hpp"
#include "groupsim/network.hpp"
#include "groupsim/rng.hpp"
#include "groupsim/trace.hpp"
#include "groupsim/types.hpp"

namespace groupsim {

struct Event {
    VirtualTime at = 0;
    EventSeq seq = 0;       // assigned at scheduling time, globally unique
    PeerId target = kNoPeer; // kNoPeer targets the kernel itself
    Payload payload;
};

// Deterministic discrete-event core. Events are processed in strict (at, seq)
// order; seq is assigned when an event is scheduled, so two events at the
// same instant run in scheduling order. All randomness flows through the
// single seeded Rng and virtual time only moves inside run_until.
class Kernel {
public:
    using Handler = std::function<void(const Event&)>;
    using LinkClassifier = std::function<LinkClass(PeerId from, PeerId to)>;

    Kernel(std::uint64_t seed, NetworkModel network);

    VirtualTime now() const { return now_; }
    Rng& rng() { return rng_; }
    NetworkModel& network() { return network_; }
    const NetworkModel& network() const { return network_; }

    void set_handler(Handler handler) { handler_ = std::move(handler); }
    void set_link_classifier(LinkClassifier fn) { classify_ = std::move(fn); }
    void set_trace(TraceLog* trace) { trace_ = trace; }

    // Throws std::invalid_argument when at < now().
    EventSeq schedule_event(VirtualTime at, PeerId target, Payload payload);

    // Processes every queued event with at <= t_end and returns the count.
    // The clock rests at the last processed event, or at t_end when the
    // queue drained completely; it is never forced past pending events.
    std::size_t run_until(VirtualTime t_end);

    // Applies partition and loss at send time, then schedules a Delivery at
    // now + base latency + jitter. Returns false when the message was
    // dropped (a msg_dropped record is emitted). Throws on unknown peers.
    bool send_message(PeerId from, PeerId to, ProtocolMessage msg);

    // Forwards to the network model; the partition check applies only to
    // sends after this call, never to deliveries already queued.
    void set_partition(const std::vector<std::vector<PeerId>>& sets);

    std::uint64_t messages_sent() const { return messages_sent_; }
    std::uint64_t messages_dropped() const { return messages_dropped_; }
    std::size_t queued_events() const { return queue_.size(); }

private:
    struct EventAfter {
        bool operator()(const Event& a, const Event& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.seq > b.seq;
        }
    };

    VirtualTime now_ = 0;
    EventSeq next_seq_ = 0;
    Rng rng_;
    NetworkModel network_;
    Handler handler_;
    LinkClassifier classify_;
    TraceLog* trace_ = nullptr;
    std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
    std::uint64_t messages_sent_ = 0;
    std::uint64_t messages_dropped_ = 0;
};

} // namespace groupsim
