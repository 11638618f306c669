#include "groupsim/kernel.hpp"

#include <stdexcept>
#include <utility>

namespace groupsim {

Kernel::Kernel(std::uint64_t seed, NetworkModel network)
    : rng_(seed), network_(std::move(network)) {}

EventSeq Kernel::schedule_event(VirtualTime at, PeerId target, Payload payload) {
    if (at < now_) {
        throw std::invalid_argument("schedule_event: at " + std::to_string(at) +
                                    " is before now " + std::to_string(now_));
    }
    EventSeq seq = next_seq_++;
    queue_.push(Event{at, seq, target, std::move(payload)});
    return seq;
}

std::size_t Kernel::run_until(VirtualTime t_end) {
    std::size_t processed = 0;
    while (!queue_.empty() && queue_.top().at <= t_end) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = std::max(now_, ev.at);
        if (handler_) {
            handler_(ev);
        }
        ++processed;
    }
    if (queue_.empty() && t_end > now_) {
        now_ = t_end;
    }
    return processed;
}

bool Kernel::send_message(PeerId from, PeerId to, ProtocolMessage msg) {
    if (!network_.knows_peer(from) || !network_.knows_peer(to)) {
        throw std::out_of_range("send_message: unknown peer");
    }
    ++messages_sent_;
    auto drop = [&](const char* reason) {
        ++messages_dropped_;
        if (trace_) {
            trace_->emit(now_, TraceKind::msg_dropped, from,
                         {{"from", std::uint64_t{from}},
                          {"to", std::uint64_t{to}},
                          {"msg", std::string(message_name(msg))},
                          {"reason", std::string(reason)}});
        }
        return false;
    };
    if (!network_.same_component(from, to)) {
        return drop("partition");
    }
    const Rational& loss = network_.loss_prob;
    if (loss.num > 0) {
        if (loss.num >= loss.den || rng_.bounded(loss.den) < loss.num) {
            return drop("loss");
        }
    }
    LinkClass cls = classify_ ? classify_(from, to) : LinkClass::InterSubgroup;
    VirtualTime latency = network_.base_latency(from, to, cls);
    if (network_.jitter_max > 0) {
        latency += rng_.bounded(std::uint64_t{network_.jitter_max} + 1);
    }
    schedule_event(now_ + latency, to, Delivery{from, std::move(msg)});
    return true;
}

void Kernel::set_partition(const std::vector<std::vector<PeerId>>& sets) {
    network_.set_partition(sets);
}

} // namespace groupsim
