#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "groupsim/metrics.hpp"
#include "groupsim/replay.hpp"
#include "groupsim/scenario.hpp"

namespace {

// Exit codes are a stable contract: 0 success, 1 runtime or IO failure,
// 2 scenario validation or usage failure.
constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kValidationError = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw groupsim::IoError("cannot read " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in.good() && !in.eof()) {
        throw groupsim::IoError("read failed for " + path);
    }
    return buf.str();
}

std::string derived_path(const std::string& scenario_path, const char* suffix) {
    std::filesystem::path p(scenario_path);
    p.replace_extension();
    return p.string() + suffix;
}

int cmd_run(const std::string& scenario_path, std::optional<std::uint64_t> seed,
            std::optional<std::uint64_t> until, std::string trace_out,
            std::string metrics_out, bool quiet) {
    std::string text;
    try {
        text = read_file(scenario_path);
    } catch (const groupsim::IoError& e) {
        std::cerr << e.what() << "\n";
        return kRuntimeError;
    }
    groupsim::Scenario scenario;
    try {
        scenario = groupsim::parse_scenario(text);
    } catch (const groupsim::ScenarioError& e) {
        std::cerr << e.what() << "\n";
        return kValidationError;
    }
    if (trace_out.empty()) trace_out = derived_path(scenario_path, ".trace");
    if (metrics_out.empty()) metrics_out = derived_path(scenario_path, ".metrics.csv");

    try {
        groupsim::RunOutputs out = groupsim::run_scenario(scenario, seed, until);
        groupsim::write_text_file(trace_out, out.trace_text);
        groupsim::write_text_file(metrics_out, out.metrics_text);
        if (!quiet) {
            std::cout << groupsim::metrics_summary(out.report);
        }
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kRuntimeError;
    }
    return kOk;
}

int cmd_validate(const std::string& scenario_path) {
    std::string text;
    try {
        text = read_file(scenario_path);
    } catch (const groupsim::IoError& e) {
        std::cerr << e.what() << "\n";
        return kRuntimeError;
    }
    try {
        groupsim::parse_scenario(text);
    } catch (const groupsim::ScenarioError& e) {
        std::cerr << e.what() << "\n";
        return kValidationError;
    }
    return kOk;
}

int cmd_replay_check(const std::string& scenario_path, std::optional<std::uint64_t> seed,
                     int runs) {
    if (runs < 2) {
        std::cerr << "replay-check needs --runs of at least 2\n";
        return kValidationError;
    }
    std::string text;
    try {
        text = read_file(scenario_path);
    } catch (const groupsim::IoError& e) {
        std::cerr << e.what() << "\n";
        return kRuntimeError;
    }
    groupsim::Scenario scenario;
    try {
        scenario = groupsim::parse_scenario(text);
    } catch (const groupsim::ScenarioError& e) {
        std::cerr << e.what() << "\n";
        return kValidationError;
    }
    if (seed) scenario.seed = *seed;

    groupsim::ReplayResult res = groupsim::replay_check(scenario, runs);
    if (res.identical) {
        std::cout << "identical across " << res.runs << " runs\n";
        return kOk;
    }
    const groupsim::ReplayDivergence& d = *res.divergence;
    std::cout << "run " << d.run << " diverges from run 1 at line " << d.line << "\n";
    std::cout << "run 1: " << d.expected << "\n";
    std::cout << "run " << d.run << ": " << d.actual << "\n";
    return kRuntimeError;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic discrete-event simulator for peer-group services"};
    app.require_subcommand(1);

    std::string run_path;
    std::optional<std::uint64_t> run_seed;
    std::optional<std::uint64_t> run_until;
    std::string trace_out;
    std::string metrics_out;
    bool quiet = false;
    CLI::App* run = app.add_subcommand("run", "run a scenario, write trace and metrics");
    run->add_option("scenario", run_path, "scenario JSON file")->required();
    run->add_option("--seed", run_seed, "override the scenario seed");
    run->add_option("--until", run_until, "stop at this virtual time (ms)");
    run->add_option("--trace", trace_out, "trace output path (default: <scenario>.trace)");
    run->add_option("--metrics", metrics_out,
                    "metrics output path (default: <scenario>.metrics.csv)");
    run->add_flag("--quiet", quiet, "suppress the console summary");

    std::string validate_path;
    CLI::App* validate = app.add_subcommand("validate", "parse and validate a scenario");
    validate->add_option("scenario", validate_path, "scenario JSON file")->required();

    std::string replay_path;
    std::optional<std::uint64_t> replay_seed;
    int runs = 3;
    CLI::App* replay =
        app.add_subcommand("replay-check", "run repeatedly and compare output bytes");
    replay->add_option("scenario", replay_path, "scenario JSON file")->required();
    replay->add_option("--seed", replay_seed, "override the scenario seed");
    replay->add_option("--runs", runs, "number of runs to compare (>= 2)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        // CLI11's own exit codes collapse onto the usage contract; --help
        // stays a success
        return code == 0 ? kOk : kValidationError;
    }

    if (run->parsed()) {
        return cmd_run(run_path, run_seed, run_until, trace_out, metrics_out, quiet);
    }
    if (validate->parsed()) {
        return cmd_validate(validate_path);
    }
    return cmd_replay_check(replay_path, replay_seed, runs);
}
