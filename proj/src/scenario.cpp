#include "groupsim/scenario.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace groupsim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& ctx, const std::string& what) {
    throw ParseError(ctx + ": " + what);
}

void check_keys(const json& obj, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
                return key == a;
            }) == allowed.end()) {
            throw UnknownFieldError(ctx + ": unknown field \"" + key + "\"");
        }
    }
}

const json& get(const json& obj, const char* key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        fail(ctx, std::string{"missing required field \""} + key + "\"");
    }
    return *it;
}

std::uint64_t as_uint(const json& v, const std::string& ctx) {
    if (!v.is_number_unsigned()) {
        fail(ctx, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

std::string as_string(const json& v, const std::string& ctx) {
    if (!v.is_string()) {
        fail(ctx, "expected a string");
    }
    return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& ctx) {
    if (!v.is_boolean()) {
        fail(ctx, "expected a boolean");
    }
    return v.get<bool>();
}

const json& as_array(const json& v, const std::string& ctx) {
    if (!v.is_array()) {
        fail(ctx, "expected an array");
    }
    return v;
}

const json& as_object(const json& v, const std::string& ctx) {
    if (!v.is_object()) {
        fail(ctx, "expected an object");
    }
    return v;
}

std::string at(const std::string& ctx, const char* key) {
    return ctx + "." + key;
}

std::string idx(const std::string& ctx, std::size_t i) {
    return ctx + "[" + std::to_string(i) + "]";
}

Rational parse_fraction(const std::string& text, const std::string& ctx) {
    auto slash = text.find('/');
    if (slash == std::string::npos || slash == 0 || slash + 1 >= text.size()) {
        fail(ctx, "expected \"num/den\"");
    }
    Rational r;
    try {
        std::size_t used = 0;
        r.num = std::stoull(text.substr(0, slash), &used);
        if (used != slash) {
            fail(ctx, "expected \"num/den\"");
        }
        std::string den = text.substr(slash + 1);
        r.den = std::stoull(den, &used);
        if (used != den.size()) {
            fail(ctx, "expected \"num/den\"");
        }
    } catch (const std::logic_error&) {
        fail(ctx, "expected \"num/den\"");
    }
    return r;
}

LinkLatency parse_latency(const json& v, const std::string& ctx) {
    as_object(v, ctx);
    check_keys(v, ctx, {"intra_subgroup", "inter_subgroup", "inter_network"});
    LinkLatency lat;
    if (v.contains("intra_subgroup")) {
        lat.intra_subgroup =
            static_cast<std::uint32_t>(as_uint(v["intra_subgroup"], at(ctx, "intra_subgroup")));
    }
    if (v.contains("inter_subgroup")) {
        lat.inter_subgroup =
            static_cast<std::uint32_t>(as_uint(v["inter_subgroup"], at(ctx, "inter_subgroup")));
    }
    if (v.contains("inter_network")) {
        lat.inter_network =
            static_cast<std::uint32_t>(as_uint(v["inter_network"], at(ctx, "inter_network")));
    }
    return lat;
}

RoleHint parse_role(const std::string& text, const std::string& ctx) {
    if (text == "none") return RoleHint::None;
    if (text == "rendezvous") return RoleHint::Rendezvous;
    if (text == "worker") return RoleHint::Worker;
    if (text == "client") return RoleHint::Client;
    fail(ctx, "unknown role hint \"" + text + "\"");
}

ServiceTimeSpec parse_service_time(const json& v, const std::string& ctx) {
    as_object(v, ctx);
    check_keys(v, ctx, {"constant", "uniform"});
    ServiceTimeSpec st;
    bool has_constant = v.contains("constant");
    bool has_uniform = v.contains("uniform");
    if (has_constant == has_uniform) {
        fail(ctx, "expected exactly one of \"constant\" or \"uniform\"");
    }
    if (has_constant) {
        st.kind = ServiceTimeSpec::Kind::Constant;
        st.value = as_uint(v["constant"], at(ctx, "constant"));
    } else {
        const json& u = as_array(v["uniform"], at(ctx, "uniform"));
        if (u.size() != 2) {
            fail(at(ctx, "uniform"), "expected [lo, hi]");
        }
        st.kind = ServiceTimeSpec::Kind::Uniform;
        st.lo = as_uint(u[0], at(ctx, "uniform"));
        st.hi = as_uint(u[1], at(ctx, "uniform"));
    }
    return st;
}

ArrivalSpec parse_arrival(const json& v, const std::string& ctx) {
    as_object(v, ctx);
    check_keys(v, ctx, {"period_ms", "start_ms", "times"});
    ArrivalSpec ar;
    if (v.contains("times")) {
        if (v.contains("period_ms") || v.contains("start_ms")) {
            fail(ctx, "\"times\" excludes \"period_ms\"/\"start_ms\"");
        }
        ar.kind = ArrivalSpec::Kind::Times;
        ar.period_ms = 0;
        for (std::size_t i = 0; i < v["times"].size(); ++i) {
            ar.times.push_back(as_uint(v["times"][i], idx(at(ctx, "times"), i)));
        }
    } else {
        ar.kind = ArrivalSpec::Kind::Periodic;
        ar.period_ms = as_uint(get(v, "period_ms", ctx), at(ctx, "period_ms"));
        if (v.contains("start_ms")) {
            ar.start_ms = as_uint(v["start_ms"], at(ctx, "start_ms"));
        }
    }
    return ar;
}

TimelineEventSpec parse_timeline_event(const json& v, const std::string& ctx) {
    as_object(v, ctx);
    TimelineEventSpec ev;
    ev.at = as_uint(get(v, "at", ctx), at(ctx, "at"));
    std::string action = as_string(get(v, "action", ctx), at(ctx, "action"));
    if (action == "kill_peer" || action == "revive_peer") {
        check_keys(v, ctx, {"at", "action", "peer"});
        ev.action = action == "kill_peer" ? TimelineEventSpec::Action::KillPeer
                                          : TimelineEventSpec::Action::RevivePeer;
        ev.peer = as_uint(get(v, "peer", ctx), at(ctx, "peer"));
    } else if (action == "partition") {
        check_keys(v, ctx, {"at", "action", "sets"});
        ev.action = TimelineEventSpec::Action::Partition;
        const json& sets = as_array(get(v, "sets", ctx), at(ctx, "sets"));
        for (std::size_t i = 0; i < sets.size(); ++i) {
            const json& set = as_array(sets[i], idx(at(ctx, "sets"), i));
            std::vector<PeerId> ids;
            for (std::size_t j = 0; j < set.size(); ++j) {
                ids.push_back(as_uint(set[j], idx(idx(at(ctx, "sets"), i), j)));
            }
            ev.sets.push_back(std::move(ids));
        }
    } else if (action == "heal") {
        check_keys(v, ctx, {"at", "action"});
        ev.action = TimelineEventSpec::Action::Heal;
    } else if (action == "inject_load") {
        check_keys(v, ctx, {"at", "action", "service", "multiplier", "duration_ms"});
        ev.action = TimelineEventSpec::Action::InjectLoad;
        ev.service = as_string(get(v, "service", ctx), at(ctx, "service"));
        if (v.contains("multiplier")) {
            ev.multiplier = static_cast<std::uint32_t>(
                as_uint(v["multiplier"], at(ctx, "multiplier")));
        }
        ev.duration_ms = as_uint(get(v, "duration_ms", ctx), at(ctx, "duration_ms"));
    } else {
        fail(at(ctx, "action"), "unknown action \"" + action + "\"");
    }
    return ev;
}

ParamsSpec parse_params(const json& v, const std::string& ctx) {
    as_object(v, ctx);
    check_keys(v, ctx,
               {"r_max", "heartbeat_period_ms", "k", "exchange_period_ms", "election_delay_ms",
                "rv_wait_timeout_ms", "jitter_max_ms", "loss_prob", "spawn_slots",
                "consolidation"});
    ParamsSpec p;
    if (v.contains("r_max")) {
        p.r_max = static_cast<std::uint32_t>(as_uint(v["r_max"], at(ctx, "r_max")));
    }
    if (v.contains("heartbeat_period_ms")) {
        p.heartbeat_period_ms = as_uint(v["heartbeat_period_ms"], at(ctx, "heartbeat_period_ms"));
    }
    if (v.contains("k")) {
        p.k = static_cast<std::uint32_t>(as_uint(v["k"], at(ctx, "k")));
    }
    if (v.contains("exchange_period_ms")) {
        p.exchange_period_ms = as_uint(v["exchange_period_ms"], at(ctx, "exchange_period_ms"));
    }
    if (v.contains("election_delay_ms")) {
        p.election_delay_ms = as_uint(v["election_delay_ms"], at(ctx, "election_delay_ms"));
    }
    if (v.contains("rv_wait_timeout_ms")) {
        p.rv_wait_timeout_ms = as_uint(v["rv_wait_timeout_ms"], at(ctx, "rv_wait_timeout_ms"));
    }
    if (v.contains("jitter_max_ms")) {
        p.jitter_max_ms = as_uint(v["jitter_max_ms"], at(ctx, "jitter_max_ms"));
    }
    if (v.contains("loss_prob")) {
        p.loss_prob = parse_fraction(as_string(v["loss_prob"], at(ctx, "loss_prob")),
                                     at(ctx, "loss_prob"));
    }
    if (v.contains("spawn_slots")) {
        p.spawn_slots = static_cast<std::uint32_t>(as_uint(v["spawn_slots"], at(ctx, "spawn_slots")));
    }
    if (v.contains("consolidation")) {
        p.consolidation = as_bool(v["consolidation"], at(ctx, "consolidation"));
    }
    return p;
}

} // namespace

Scenario parse_scenario_unchecked(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string{"invalid JSON: "} + e.what());
    }
    const std::string ctx = "scenario";
    as_object(doc, ctx);
    check_keys(doc, ctx,
               {"name", "seed", "duration_ms", "networks", "peers", "services", "workload",
                "timeline", "params"});

    Scenario s;
    s.name = as_string(get(doc, "name", ctx), at(ctx, "name"));
    if (doc.contains("seed")) {
        s.seed = as_uint(doc["seed"], at(ctx, "seed"));
    }
    if (doc.contains("duration_ms")) {
        s.duration_ms = as_uint(doc["duration_ms"], at(ctx, "duration_ms"));
    }

    const json& networks = as_array(get(doc, "networks", ctx), at(ctx, "networks"));
    for (std::size_t i = 0; i < networks.size(); ++i) {
        std::string nctx = idx(at(ctx, "networks"), i);
        const json& n = as_object(networks[i], nctx);
        check_keys(n, nctx, {"name", "latency"});
        NetworkSpec spec;
        spec.name = as_string(get(n, "name", nctx), at(nctx, "name"));
        if (n.contains("latency")) {
            spec.latency = parse_latency(n["latency"], at(nctx, "latency"));
        }
        s.networks.push_back(std::move(spec));
    }

    const json& peers = as_array(get(doc, "peers", ctx), at(ctx, "peers"));
    for (std::size_t i = 0; i < peers.size(); ++i) {
        std::string pctx = idx(at(ctx, "peers"), i);
        const json& p = as_object(peers[i], pctx);
        check_keys(p, pctx, {"id", "network", "role_hint", "spare"});
        PeerSpec spec;
        spec.id = as_uint(get(p, "id", pctx), at(pctx, "id"));
        spec.network = as_string(get(p, "network", pctx), at(pctx, "network"));
        if (p.contains("role_hint")) {
            spec.role_hint =
                parse_role(as_string(p["role_hint"], at(pctx, "role_hint")), at(pctx, "role_hint"));
        }
        if (p.contains("spare")) {
            spec.spare = as_bool(p["spare"], at(pctx, "spare"));
        }
        s.peers.push_back(std::move(spec));
    }

    if (doc.contains("services")) {
        const json& services = as_array(doc["services"], at(ctx, "services"));
        for (std::size_t i = 0; i < services.size(); ++i) {
            std::string sctx = idx(at(ctx, "services"), i);
            const json& sv = as_object(services[i], sctx);
            check_keys(sv, sctx,
                       {"category_path", "name", "query_format", "workers", "service_time",
                        "t_initial", "x", "t_min"});
            ServiceSpec spec;
            const json& path = as_array(get(sv, "category_path", sctx), at(sctx, "category_path"));
            for (std::size_t j = 0; j < path.size(); ++j) {
                spec.category_path.push_back(
                    as_string(path[j], idx(at(sctx, "category_path"), j)));
            }
            spec.name = as_string(get(sv, "name", sctx), at(sctx, "name"));
            spec.query_format = as_string(get(sv, "query_format", sctx), at(sctx, "query_format"));
            const json& workers = as_array(get(sv, "workers", sctx), at(sctx, "workers"));
            for (std::size_t j = 0; j < workers.size(); ++j) {
                spec.workers.push_back(as_uint(workers[j], idx(at(sctx, "workers"), j)));
            }
            spec.service_time =
                parse_service_time(get(sv, "service_time", sctx), at(sctx, "service_time"));
            if (sv.contains("t_initial")) {
                spec.t_initial =
                    static_cast<std::uint32_t>(as_uint(sv["t_initial"], at(sctx, "t_initial")));
            }
            if (sv.contains("x")) {
                spec.x = static_cast<std::uint32_t>(as_uint(sv["x"], at(sctx, "x")));
            }
            if (sv.contains("t_min")) {
                spec.t_min = static_cast<std::uint32_t>(as_uint(sv["t_min"], at(sctx, "t_min")));
            }
            s.services.push_back(std::move(spec));
        }
    }

    if (doc.contains("workload")) {
        const json& workload = as_array(doc["workload"], at(ctx, "workload"));
        for (std::size_t i = 0; i < workload.size(); ++i) {
            std::string wctx = idx(at(ctx, "workload"), i);
            const json& w = as_object(workload[i], wctx);
            check_keys(w, wctx, {"client", "service", "arrival", "count"});
            WorkloadSpec spec;
            spec.client = as_uint(get(w, "client", wctx), at(wctx, "client"));
            spec.service = as_string(get(w, "service", wctx), at(wctx, "service"));
            spec.arrival = parse_arrival(get(w, "arrival", wctx), at(wctx, "arrival"));
            spec.count = static_cast<std::uint32_t>(as_uint(get(w, "count", wctx), at(wctx, "count")));
            s.workload.push_back(std::move(spec));
        }
    }

    if (doc.contains("timeline")) {
        const json& timeline = as_array(doc["timeline"], at(ctx, "timeline"));
        for (std::size_t i = 0; i < timeline.size(); ++i) {
            s.timeline.push_back(
                parse_timeline_event(timeline[i], idx(at(ctx, "timeline"), i)));
        }
    }

    if (doc.contains("params")) {
        s.params = parse_params(doc["params"], at(ctx, "params"));
    }

    return s;
}

Scenario parse_scenario(const std::string& text) {
    Scenario s = parse_scenario_unchecked(text);
    std::vector<std::string> violations = validate_scenario(s);
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << "invalid scenario:";
        for (const std::string& v : violations) {
            msg << "\n  " << v;
        }
        throw ParseError(msg.str());
    }
    return s;
}

std::vector<std::string> validate_scenario(const Scenario& s) {
    std::vector<std::string> out;
    auto violation = [&out](const std::string& text) { out.push_back(text); };

    if (s.name.empty()) {
        violation("empty scenario name");
    }
    if (s.duration_ms == 0) {
        violation("duration_ms must be positive");
    }
    if (s.networks.empty()) {
        violation("no networks declared");
    }
    std::set<std::string> network_names;
    for (const NetworkSpec& n : s.networks) {
        if (n.name.empty()) {
            violation("empty network name");
        }
        if (!network_names.insert(n.name).second) {
            violation("duplicate network \"" + n.name + "\"");
        }
    }

    if (s.peers.empty()) {
        violation("no peers declared");
    }
    std::set<PeerId> peer_ids;
    for (const PeerSpec& p : s.peers) {
        if (p.id == kNoPeer) {
            violation("peer id 0 is reserved");
            continue;
        }
        if (!peer_ids.insert(p.id).second) {
            violation("duplicate peer id " + std::to_string(p.id));
        }
        if (network_names.count(p.network) == 0) {
            violation("peer " + std::to_string(p.id) + " references undeclared network \"" +
                      p.network + "\"");
        }
    }

    std::set<std::string> service_names;
    for (const ServiceSpec& sv : s.services) {
        std::string label = sv.name.empty() ? "(unnamed)" : sv.name;
        if (sv.name.empty()) {
            violation("empty service name");
        } else if (!service_names.insert(sv.name).second) {
            violation("duplicate service \"" + sv.name + "\"");
        }
        if (sv.query_format.empty()) {
            violation("service \"" + label + "\" has an empty query_format");
        }
        for (const std::string& c : sv.category_path) {
            if (c.empty()) {
                violation("service \"" + label + "\" has an empty category name");
            }
        }
        if (sv.workers.empty()) {
            violation("service \"" + label + "\" needs at least one worker");
        }
        std::set<PeerId> seen;
        for (PeerId w : sv.workers) {
            if (peer_ids.count(w) == 0) {
                violation("service \"" + label + "\" worker " + std::to_string(w) +
                          " is not a declared peer");
            }
            if (!seen.insert(w).second) {
                violation("service \"" + label + "\" lists worker " + std::to_string(w) +
                          " twice");
            }
        }
        if (sv.t_min == 0) {
            violation("service \"" + label + "\" t_min must be >= 1");
        }
        if (sv.t_initial < sv.t_min) {
            violation("service \"" + label + "\" t_initial below t_min");
        }
        if (sv.x == 0) {
            violation("service \"" + label + "\" window x must be >= 1 second");
        }
        if (sv.service_time.kind == ServiceTimeSpec::Kind::Constant) {
            if (sv.service_time.value == 0) {
                violation("service \"" + label + "\" service_time must be positive");
            }
        } else {
            if (sv.service_time.lo == 0) {
                violation("service \"" + label + "\" service_time must be positive");
            }
            if (sv.service_time.lo > sv.service_time.hi) {
                violation("service \"" + label + "\" uniform service_time has lo > hi");
            }
        }
    }

    for (std::size_t i = 0; i < s.workload.size(); ++i) {
        const WorkloadSpec& w = s.workload[i];
        std::string label = "workload[" + std::to_string(i) + "]";
        if (peer_ids.count(w.client) == 0) {
            violation(label + " client " + std::to_string(w.client) + " is not a declared peer");
        }
        if (service_names.count(w.service) == 0) {
            violation(label + " references undeclared service \"" + w.service + "\"");
        }
        if (w.count == 0) {
            violation(label + " count must be >= 1");
        }
        if (w.arrival.kind == ArrivalSpec::Kind::Periodic) {
            if (w.arrival.period_ms == 0) {
                violation(label + " arrival period must be >= 1 ms");
            }
        } else {
            if (w.arrival.times.size() != w.count) {
                violation(label + " fixed schedule length differs from count");
            }
            for (std::size_t j = 1; j < w.arrival.times.size(); ++j) {
                if (w.arrival.times[j] < w.arrival.times[j - 1]) {
                    violation(label + " fixed schedule times decrease");
                    break;
                }
            }
        }
    }

    VirtualTime prev_at = 0;
    for (std::size_t i = 0; i < s.timeline.size(); ++i) {
        const TimelineEventSpec& ev = s.timeline[i];
        std::string label = "timeline[" + std::to_string(i) + "]";
        if (ev.at < prev_at) {
            violation(label + " times decrease");
        }
        prev_at = ev.at;
        switch (ev.action) {
        case TimelineEventSpec::Action::KillPeer:
        case TimelineEventSpec::Action::RevivePeer:
            if (peer_ids.count(ev.peer) == 0) {
                violation(label + " references undeclared peer " + std::to_string(ev.peer));
            }
            break;
        case TimelineEventSpec::Action::Partition: {
            std::set<PeerId> seen;
            if (ev.sets.empty()) {
                violation(label + " partition needs at least one set");
            }
            for (const auto& set : ev.sets) {
                if (set.empty()) {
                    violation(label + " partition set is empty");
                }
                for (PeerId p : set) {
                    if (peer_ids.count(p) == 0) {
                        violation(label + " references undeclared peer " + std::to_string(p));
                    }
                    if (!seen.insert(p).second) {
                        violation(label + " lists peer " + std::to_string(p) +
                                  " in two partition sets");
                    }
                }
            }
            break;
        }
        case TimelineEventSpec::Action::Heal:
            break;
        case TimelineEventSpec::Action::InjectLoad:
            if (service_names.count(ev.service) == 0) {
                violation(label + " references undeclared service \"" + ev.service + "\"");
            }
            if (ev.multiplier == 0) {
                violation(label + " multiplier must be >= 1");
            }
            if (ev.duration_ms == 0) {
                violation(label + " duration_ms must be >= 1");
            }
            break;
        }
    }

    const ParamsSpec& p = s.params;
    if (p.r_max == 0) {
        violation("params.r_max must be >= 1");
    }
    if (p.heartbeat_period_ms == 0) {
        violation("params.heartbeat_period_ms must be >= 1");
    }
    if (p.k == 0) {
        violation("params.k must be >= 1");
    }
    if (p.exchange_period_ms == 0) {
        violation("params.exchange_period_ms must be >= 1");
    }
    if (p.spawn_slots == 0) {
        violation("params.spawn_slots must be >= 1");
    }
    if (p.loss_prob.den == 0) {
        violation("params.loss_prob has a zero denominator");
    } else if (p.loss_prob.num > p.loss_prob.den) {
        violation("params.loss_prob above one");
    }

    return out;
}

std::string serialize_scenario(const Scenario& s) {
    json doc;
    doc["name"] = s.name;
    doc["seed"] = s.seed;
    doc["duration_ms"] = s.duration_ms;

    doc["networks"] = json::array();
    for (const NetworkSpec& n : s.networks) {
        json j;
        j["name"] = n.name;
        j["latency"] = {{"intra_subgroup", n.latency.intra_subgroup},
                        {"inter_subgroup", n.latency.inter_subgroup},
                        {"inter_network", n.latency.inter_network}};
        doc["networks"].push_back(std::move(j));
    }

    doc["peers"] = json::array();
    for (const PeerSpec& p : s.peers) {
        json j;
        j["id"] = p.id;
        j["network"] = p.network;
        j["role_hint"] = role_hint_name(p.role_hint);
        j["spare"] = p.spare;
        doc["peers"].push_back(std::move(j));
    }

    doc["services"] = json::array();
    for (const ServiceSpec& sv : s.services) {
        json j;
        j["category_path"] = sv.category_path;
        j["name"] = sv.name;
        j["query_format"] = sv.query_format;
        j["workers"] = sv.workers;
        if (sv.service_time.kind == ServiceTimeSpec::Kind::Constant) {
            j["service_time"] = {{"constant", sv.service_time.value}};
        } else {
            j["service_time"] = {
                {"uniform", json::array({sv.service_time.lo, sv.service_time.hi})}};
        }
        j["t_initial"] = sv.t_initial;
        j["x"] = sv.x;
        j["t_min"] = sv.t_min;
        doc["services"].push_back(std::move(j));
    }

    doc["workload"] = json::array();
    for (const WorkloadSpec& w : s.workload) {
        json j;
        j["client"] = w.client;
        j["service"] = w.service;
        if (w.arrival.kind == ArrivalSpec::Kind::Periodic) {
            j["arrival"] = {{"period_ms", w.arrival.period_ms}, {"start_ms", w.arrival.start_ms}};
        } else {
            j["arrival"] = {{"times", w.arrival.times}};
        }
        j["count"] = w.count;
        doc["workload"].push_back(std::move(j));
    }

    doc["timeline"] = json::array();
    for (const TimelineEventSpec& ev : s.timeline) {
        json j;
        j["at"] = ev.at;
        switch (ev.action) {
        case TimelineEventSpec::Action::KillPeer:
            j["action"] = "kill_peer";
            j["peer"] = ev.peer;
            break;
        case TimelineEventSpec::Action::RevivePeer:
            j["action"] = "revive_peer";
            j["peer"] = ev.peer;
            break;
        case TimelineEventSpec::Action::Partition:
            j["action"] = "partition";
            j["sets"] = ev.sets;
            break;
        case TimelineEventSpec::Action::Heal:
            j["action"] = "heal";
            break;
        case TimelineEventSpec::Action::InjectLoad:
            j["action"] = "inject_load";
            j["service"] = ev.service;
            j["multiplier"] = ev.multiplier;
            j["duration_ms"] = ev.duration_ms;
            break;
        }
        doc["timeline"].push_back(std::move(j));
    }

    doc["params"] = {{"r_max", s.params.r_max},
                     {"heartbeat_period_ms", s.params.heartbeat_period_ms},
                     {"k", s.params.k},
                     {"exchange_period_ms", s.params.exchange_period_ms},
                     {"election_delay_ms", s.params.election_delay_ms},
                     {"rv_wait_timeout_ms", s.params.rv_wait_timeout_ms},
                     {"jitter_max_ms", s.params.jitter_max_ms},
                     {"loss_prob", format_rational(s.params.loss_prob)},
                     {"spawn_slots", s.params.spawn_slots},
                     {"consolidation", s.params.consolidation}};

    return doc.dump(2) + "\n";
}

const char* role_hint_name(RoleHint hint) {
    switch (hint) {
    case RoleHint::None: return "none";
    case RoleHint::Rendezvous: return "rendezvous";
    case RoleHint::Worker: return "worker";
    case RoleHint::Client: return "client";
    }
    return "none";
}

} // namespace groupsim
