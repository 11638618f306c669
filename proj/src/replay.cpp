#include "groupsim/replay.hpp"

#include <stdexcept>

#include "groupsim/simulation.hpp"

namespace groupsim {

namespace {

// First line where the texts differ, 1-based; nullopt when identical.
// A missing line (shorter text) counts as divergent.
std::optional<std::size_t> first_divergent_line(const std::string& a, const std::string& b,
                                                std::string& line_a, std::string& line_b) {
    std::size_t ia = 0;
    std::size_t ib = 0;
    std::size_t line = 1;
    while (ia < a.size() || ib < b.size()) {
        std::size_t ea = a.find('\n', ia);
        std::size_t eb = b.find('\n', ib);
        line_a = ia < a.size() ? a.substr(ia, (ea == std::string::npos ? a.size() : ea) - ia)
                               : std::string("<missing>");
        line_b = ib < b.size() ? b.substr(ib, (eb == std::string::npos ? b.size() : eb) - ib)
                               : std::string("<missing>");
        if (line_a != line_b || (ia >= a.size()) != (ib >= b.size())) {
            return line;
        }
        ia = ea == std::string::npos ? a.size() : ea + 1;
        ib = eb == std::string::npos ? b.size() : eb + 1;
        ++line;
    }
    return std::nullopt;
}

} // namespace

RunOutputs run_scenario(const Scenario& s, std::optional<std::uint64_t> seed_override,
                        std::optional<VirtualTime> until) {
    Scenario copy = s;
    if (seed_override) copy.seed = *seed_override;
    Simulation sim(std::move(copy));
    sim.run(until);
    RunOutputs out;
    out.trace_text = serialize_trace(sim.trace().records());
    out.report = summarize(sim.trace().records(), sim.kernel().messages_sent());
    out.metrics_text = metrics_csv(out.report);
    return out;
}

ReplayResult replay_check(int runs, const std::function<std::string(int)>& produce) {
    if (runs < 2) {
        throw std::invalid_argument("replay_check needs at least 2 runs");
    }
    ReplayResult res;
    res.runs = runs;
    std::string baseline = produce(1);
    for (int i = 2; i <= runs; ++i) {
        std::string text = produce(i);
        if (text == baseline) continue;
        std::string la;
        std::string lb;
        auto line = first_divergent_line(baseline, text, la, lb);
        res.identical = false;
        res.divergence = ReplayDivergence{i, line.value_or(0), la, lb};
        return res;
    }
    return res;
}

ReplayResult replay_check(const Scenario& s, int runs) {
    return replay_check(runs, [&](int) {
        RunOutputs out = run_scenario(s);
        return out.trace_text + out.metrics_text;
    });
}

} // namespace groupsim
