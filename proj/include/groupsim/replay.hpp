#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "groupsim/metrics.hpp"
#include "groupsim/scenario.hpp"

namespace groupsim {

// Everything one run produces, in the exact bytes the CLI would write.
struct RunOutputs {
    std::string trace_text;
    std::string metrics_text;
    MetricsReport report;
};

// Builds a Simulation and runs it once. The scenario's seed can be
// overridden without mutating the caller's copy.
RunOutputs run_scenario(const Scenario& s,
                        std::optional<std::uint64_t> seed_override = std::nullopt,
                        std::optional<VirtualTime> until = std::nullopt);

struct ReplayDivergence {
    int run = 0;           // diverging run index, 1-based; compared against run 1
    std::size_t line = 0;  // 1-based first divergent line
    std::string expected;  // run 1's line
    std::string actual;    // diverging run's line
};

struct ReplayResult {
    int runs = 0;
    bool identical = true;
    std::optional<ReplayDivergence> divergence;
};

// Calls produce(i) for i in [1, runs] and compares the texts byte-wise
// against the first run. Throws std::invalid_argument when runs < 2.
ReplayResult replay_check(int runs, const std::function<std::string(int)>& produce);

// Replay of a full scenario: compares trace bytes followed by metrics bytes.
ReplayResult replay_check(const Scenario& s, int runs);

} // namespace groupsim
