#include "groupsim/overlay.hpp"

#include <algorithm>
#include <stdexcept>

namespace groupsim {

const char* to_string(GroupKind kind) {
    switch (kind) {
    case GroupKind::Root: return "root";
    case GroupKind::Category: return "category";
    case GroupKind::Service: return "service";
    case GroupKind::WorkerSubgroup: return "worker_subgroup";
    case GroupKind::RvGroup: return "rv_group";
    }
    return "unknown";
}

Overlay::Overlay(Deps deps) : deps_(std::move(deps)) {
    if (!deps_.alive || !deps_.component_of || !deps_.now) {
        throw std::invalid_argument("overlay dependencies incomplete");
    }
}

const GroupRecord& Overlay::group(GroupId g) const {
    auto it = groups_.find(g);
    if (it == groups_.end()) {
        throw std::out_of_range("unknown group " + std::to_string(g));
    }
    return it->second;
}

GroupRecord& Overlay::group_mut(GroupId g) {
    auto it = groups_.find(g);
    if (it == groups_.end()) {
        throw std::out_of_range("unknown group " + std::to_string(g));
    }
    return it->second;
}

GroupId Overlay::new_group(GroupKind kind, std::string name, GroupId parent, PeerId creator) {
    GroupId id = next_group_id_++;
    GroupRecord g;
    g.id = id;
    g.kind = kind;
    g.name = std::move(name);
    g.parent = parent;
    g.created_at = deps_.now();
    groups_.emplace(id, std::move(g));
    if (parent != kNoGroup) {
        group_mut(parent).children.push_back(id);
    }
    emit_created(groups_.at(id), creator);
    return id;
}

void Overlay::emit_created(const GroupRecord& g, PeerId actor) {
    if (deps_.trace) {
        deps_.trace->emit(deps_.now(), TraceKind::group_created, actor,
                          {{"group", std::uint64_t{g.id}},
                           {"kind", std::string(to_string(g.kind))},
                           {"parent", std::uint64_t{g.parent}},
                           {"name", g.name}});
    }
}

void Overlay::emit_registered(GroupId group, PeerId rv, PeerId peer, std::size_t table_size) {
    if (deps_.trace) {
        deps_.trace->emit(deps_.now(), TraceKind::registered, peer,
                          {{"group", std::uint64_t{group}},
                           {"rv", std::uint64_t{rv}},
                           {"table_size", std::uint64_t{table_size}}});
    }
}

bool Overlay::present_in_component(const GroupRecord& g, int component) const {
    if (g.dissolved) {
        return false;
    }
    for (PeerId rv : g.rv_peers) {
        if (deps_.alive(rv) && deps_.component_of(rv) == component) {
            return true;
        }
    }
    for (PeerId m : g.members) {
        if (deps_.alive(m) && deps_.component_of(m) == component) {
            return true;
        }
    }
    return false;
}

std::vector<std::string> Overlay::name_path(GroupId g) const {
    std::vector<std::string> path;
    GroupId cur = g;
    while (cur != kNoGroup) {
        const GroupRecord& rec = group(cur);
        if (rec.kind == GroupKind::Root) {
            break;
        }
        path.push_back(rec.name);
        cur = rec.parent;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::vector<GroupId> Overlay::equivalence_class(GroupId g, int component) const {
    const GroupRecord& base = group(g);
    std::vector<GroupId> out;
    if (base.kind == GroupKind::Root) {
        for (const auto& [id, rec] : groups_) {
            if (rec.kind == GroupKind::Root && present_in_component(rec, component)) {
                out.push_back(id);
            }
        }
    } else if (base.kind == GroupKind::Category) {
        const auto want = name_path(g);
        for (const auto& [id, rec] : groups_) {
            if (rec.kind == GroupKind::Category && present_in_component(rec, component) &&
                name_path(id) == want) {
                out.push_back(id);
            }
        }
    } else if (present_in_component(base, component)) {
        out.push_back(g);
    }
    return out;
}

bool Overlay::member_of_class(PeerId peer, GroupId g) const {
    for (GroupId id : equivalence_class(g, deps_.component_of(peer))) {
        if (group(id).members.count(peer)) {
            return true;
        }
    }
    return false;
}

bool Overlay::is_member(PeerId peer, GroupId g) const {
    return group(g).members.count(peer) != 0;
}

bool Overlay::visible(PeerId viewer, GroupId g) const {
    return present_in_component(group(g), deps_.component_of(viewer));
}

Overlay::BootstrapResult Overlay::bootstrap_peer(PeerId peer) {
    const int comp = deps_.component_of(peer);
    // lowest-id root group with a reachable alive RV answers first
    for (auto& [id, rec] : groups_) {
        if (rec.kind != GroupKind::Root || rec.dissolved) {
            continue;
        }
        bool reachable = false;
        for (PeerId rv : rec.rv_peers) {
            if (deps_.alive(rv) && deps_.component_of(rv) == comp) {
                reachable = true;
                break;
            }
        }
        if (!reachable) {
            continue;
        }
        rec.members.insert(peer);
        PeerId rv = attach_to_group(peer, rec);
        if (deps_.trace) {
            deps_.trace->emit(deps_.now(), TraceKind::peer_bootstrap, peer,
                              {{"outcome", std::string("joined_root")},
                               {"root", std::uint64_t{id}},
                               {"rv", std::uint64_t{rv}}});
        }
        return BootstrapResult{false, id, rv};
    }
    GroupId root = new_group(GroupKind::Root, "root", kNoGroup, peer);
    GroupRecord& rec = group_mut(root);
    rec.rv_peers.insert(peer);
    rec.members.insert(peer);
    rec.tables[peer] = RegistrationTable{peer, {}, {}};
    if (deps_.trace) {
        deps_.trace->emit(deps_.now(), TraceKind::peer_bootstrap, peer,
                          {{"outcome", std::string("created_root")},
                           {"root", std::uint64_t{root}},
                           {"rv", std::uint64_t{peer}}});
    }
    return BootstrapResult{true, root, peer};
}

PeerId Overlay::attach_to_group(PeerId peer, GroupRecord& g) {
    const int comp = deps_.component_of(peer);
    for (const auto& [rv, table] : g.tables) {
        if (table.registered.count(peer)) {
            return rv; // already attached
        }
    }
    // least-loaded reachable RV with room, ties to the lowest id
    PeerId best = kNoPeer;
    std::size_t best_load = 0;
    PeerId fallback = kNoPeer; // least-loaded reachable RV even when full
    std::size_t fallback_load = 0;
    for (const auto& [rv, table] : g.tables) {
        if (!deps_.alive(rv) || deps_.component_of(rv) != comp) {
            continue;
        }
        if (fallback == kNoPeer || table.registered.size() < fallback_load) {
            fallback = rv;
            fallback_load = table.registered.size();
        }
        if (table.registered.size() >= deps_.root_capacity) {
            continue;
        }
        if (best == kNoPeer || table.registered.size() < best_load) {
            best = rv;
            best_load = table.registered.size();
        }
    }
    if (best == kNoPeer) {
        if (fallback == kNoPeer) {
            throw std::logic_error("attach_to_group: no reachable rv");
        }
        // every table is at capacity: promote the lowest registered
        // non-RV peer to an additional RV of the same group
        RegistrationTable& full = g.tables.at(fallback);
        PeerId promote = kNoPeer;
        for (PeerId cand : full.registered) {
            if (deps_.alive(cand) && !g.rv_peers.count(cand)) {
                promote = cand;
                break;
            }
        }
        if (promote == kNoPeer) {
            throw std::logic_error("attach_to_group: no promotable peer");
        }
        g.rv_peers.insert(promote);
        g.tables[promote] = RegistrationTable{promote, {}, {}};
        if (deps_.trace) {
            deps_.trace->emit(deps_.now(), TraceKind::rv_split, fallback,
                              {{"group", std::uint64_t{g.id}},
                               {"old_rv", std::uint64_t{fallback}},
                               {"new_rv", std::uint64_t{promote}},
                               {"old_group", std::uint64_t{g.id}},
                               {"new_group", std::uint64_t{g.id}}});
        }
        best = promote;
    }
    RegistrationTable& table = g.tables.at(best);
    table.registered.insert(peer);
    emit_registered(g.id, best, peer, table.registered.size());
    return best;
}

Overlay::ServicePlacement Overlay::ensure_group_path(PeerId worker,
                                                     const std::vector<std::string>& path,
                                                     const std::string& service_name,
                                                     const std::string& query_format,
                                                     PipeRef worker_pipe) {
    const int comp = deps_.component_of(worker);

    // the worker's own root anchors any group it has to create
    GroupId anchor = kNoGroup;
    for (const auto& [id, rec] : groups_) {
        if (rec.kind == GroupKind::Root && !rec.dissolved && rec.members.count(worker)) {
            anchor = id;
            break;
        }
    }
    if (anchor == kNoGroup) {
        throw std::logic_error("ensure_group_path before bootstrap");
    }

    std::vector<GroupId> level = equivalence_class(anchor, comp);
    if (level.empty()) {
        level.push_back(anchor);
    }
    GroupId create_under = anchor;

    for (const std::string& name : path) {
        GroupId found = kNoGroup;
        for (GroupId gid : level) {
            for (GroupId child : group(gid).children) {
                const GroupRecord& c = group(child);
                if (c.kind == GroupKind::Category && c.name == name &&
                    present_in_component(c, comp)) {
                    found = child;
                    break;
                }
            }
            if (found != kNoGroup) {
                break;
            }
        }
        if (found == kNoGroup) {
            found = new_group(GroupKind::Category, name, create_under, worker);
            GroupRecord& c = group_mut(found);
            c.rv_peers.insert(worker);
            c.members.insert(worker);
            c.tables[worker] = RegistrationTable{worker, {}, {}};
        } else if (!group(found).members.count(worker)) {
            GroupRecord& c = group_mut(found);
            c.members.insert(worker);
            PeerId rv = attach_to_group(worker, c);
            if (deps_.trace) {
                deps_.trace->emit(deps_.now(), TraceKind::joined, worker,
                                  {{"group", std::uint64_t{found}},
                                   {"rv", std::uint64_t{rv}}});
            }
        }
        level = equivalence_class(found, comp);
        if (level.empty()) {
            level.push_back(found);
        }
        create_under = found;
    }

    // locate or create the service under the final category level
    GroupId service = kNoGroup;
    for (GroupId gid : level) {
        for (GroupId child : group(gid).children) {
            const GroupRecord& c = group(child);
            if (c.kind == GroupKind::Service && c.name == service_name &&
                present_in_component(c, comp)) {
                service = child;
                break;
            }
        }
        if (service != kNoGroup) {
            break;
        }
    }

    ServicePlacement out;
    if (service == kNoGroup) {
        service = new_group(GroupKind::Service, service_name, create_under, worker);
        GroupRecord& s = group_mut(service);
        s.query_format = query_format;
        s.members.insert(worker);
        s.rv_peers.insert(worker);

        GroupId sg = new_group(GroupKind::WorkerSubgroup, "sg1", service, worker);
        GroupId rvg = new_group(GroupKind::RvGroup, "rvs", service, worker);
        GroupRecord& s2 = group_mut(service);
        s2.worker_subgroups.push_back(sg);
        s2.rv_group = rvg;

        GroupRecord& sgr = group_mut(sg);
        sgr.rv_peers.insert(worker);
        sgr.members.insert(worker);
        sgr.tables[worker] = RegistrationTable{worker, {worker}, {{worker, worker_pipe}}};
        emit_registered(sg, worker, worker, 1);

        GroupRecord& rvr = group_mut(rvg);
        rvr.members.insert(worker);
        rvr.rv_peers.insert(worker);

        out.service = service;
        out.subgroup = sg;
        out.rv_group = rvg;
        out.rv = worker;
        out.created_service = true;
        return out;
    }

    GroupRecord& s = group_mut(service);
    s.members.insert(worker);
    out.service = service;
    out.rv_group = s.rv_group;

    // lowest-id live subgroup with room; when all are full the registration
    // goes to the lowest-id live subgroup and splits there
    GroupId target = kNoGroup;
    GroupId target_any = kNoGroup;
    PeerId target_rv = kNoPeer;
    PeerId target_any_rv = kNoPeer;
    for (GroupId sg : s.worker_subgroups) {
        const GroupRecord& rec = group(sg);
        if (rec.dissolved) {
            continue;
        }
        for (PeerId rv : rec.rv_peers) {
            if (!deps_.alive(rv) || deps_.component_of(rv) != comp) {
                continue;
            }
            if (rec.tables.count(rv) && rec.tables.at(rv).registered.count(worker)) {
                // already registered here
                out.subgroup = sg;
                out.rv = rv;
                return out;
            }
            if (target_any == kNoGroup) {
                target_any = sg;
                target_any_rv = rv;
            }
            if (target == kNoGroup && rec.tables.count(rv) &&
                rec.tables.at(rv).registered.size() < deps_.r_max) {
                target = sg;
                target_rv = rv;
            }
            break;
        }
    }
    if (target == kNoGroup) {
        target = target_any;
        target_rv = target_any_rv;
    }
    if (target == kNoGroup) {
        // service exists but no subgroup RV is reachable: start a fresh
        // subgroup, mirroring the creation path
        GroupId sg = new_group(GroupKind::WorkerSubgroup,
                               "sg" + std::to_string(s.worker_subgroups.size() + 1),
                               service, worker);
        GroupRecord& s2 = group_mut(service);
        s2.worker_subgroups.push_back(sg);
        s2.rv_peers.insert(worker);
        GroupRecord& sgr = group_mut(sg);
        sgr.rv_peers.insert(worker);
        sgr.members.insert(worker);
        sgr.tables[worker] = RegistrationTable{worker, {worker}, {{worker, worker_pipe}}};
        emit_registered(sg, worker, worker, 1);
        GroupRecord& rvr = group_mut(s2.rv_group);
        rvr.members.insert(worker);
        rvr.rv_peers.insert(worker);
        out.subgroup = sg;
        out.rv = worker;
        return out;
    }

    RegisterResult reg = register_with_rv(worker, target_rv, target, worker_pipe);
    out.subgroup = reg.subgroup;
    out.rv = reg.rv;
    out.split = reg.split;
    out.split_new_subgroup = reg.new_subgroup;
    out.split_new_rv = reg.new_rv;
    out.split_old_rv = reg.split ? target_rv : kNoPeer;
    return out;
}

Overlay::JoinResult Overlay::join_group(PeerId peer, GroupId gid) {
    GroupRecord& g = group_mut(gid);
    const int comp = deps_.component_of(peer);

    bool reachable_rv = false;
    for (PeerId rv : g.rv_peers) {
        if (deps_.alive(rv) && deps_.component_of(rv) == comp) {
            reachable_rv = true;
            break;
        }
    }
    if (g.dissolved || !reachable_rv) {
        return JoinResult{JoinError::GroupNotVisible, kNoPeer};
    }
    if (g.parent != kNoGroup && !member_of_class(peer, g.parent)) {
        return JoinResult{JoinError::ParentNotJoined, kNoPeer};
    }

    PeerId rv = kNoPeer;
    bool changed = false;
    switch (g.kind) {
    case GroupKind::Root:
    case GroupKind::Category: {
        bool added = g.members.insert(peer).second;
        bool attached_before = false;
        for (const auto& [r, table] : g.tables) {
            if (table.registered.count(peer)) {
                attached_before = true;
                break;
            }
        }
        rv = attach_to_group(peer, g);
        changed = added || !attached_before;
        break;
    }
    case GroupKind::Service: {
        auto prev = current_entry_rv(peer, gid);
        auto assigned = assign_entry_rv(peer, gid);
        if (!assigned) {
            return JoinResult{JoinError::GroupNotVisible, kNoPeer};
        }
        bool added = g.members.insert(peer).second;
        rv = *assigned;
        changed = added || !prev || *prev != rv;
        break;
    }
    case GroupKind::WorkerSubgroup:
    case GroupKind::RvGroup: {
        changed = g.members.insert(peer).second;
        rv = *g.rv_peers.begin();
        break;
    }
    }

    if (changed && deps_.trace) {
        deps_.trace->emit(deps_.now(), TraceKind::joined, peer,
                          {{"group", std::uint64_t{gid}}, {"rv", std::uint64_t{rv}}});
    }
    return JoinResult{JoinError::None, rv};
}

Overlay::DiscoverResult Overlay::discover_advertisements(PeerId peer, GroupId scope) const {
    const GroupRecord& g = group(scope);
    (void)g;
    if (!member_of_class(peer, scope)) {
        return DiscoverResult{DiscoverError::NotAMember, {}};
    }
    const int comp = deps_.component_of(peer);

    std::vector<GroupId> candidates;
    for (GroupId gid : equivalence_class(scope, comp)) {
        for (GroupId child : group(gid).children) {
            const GroupRecord& c = group(child);
            if (c.dissolved || !present_in_component(c, comp)) {
                continue;
            }
            candidates.push_back(child);
        }
    }
    std::sort(candidates.begin(), candidates.end());

    DiscoverResult out;
    std::set<std::string> seen_categories;
    for (GroupId gid : candidates) {
        const GroupRecord& c = group(gid);
        if (c.kind == GroupKind::Category) {
            if (!seen_categories.insert(c.name).second) {
                continue; // merged into the lower-id advertisement
            }
        }
        Advertisement ad;
        ad.group_id = gid;
        ad.kind = c.kind;
        ad.name = c.name;
        ad.query_format = c.query_format;
        ad.published_at = c.created_at;
        out.ads.push_back(std::move(ad));
    }
    return out;
}

Overlay::RegisterResult Overlay::register_with_rv(PeerId worker, PeerId rv, GroupId subgroup,
                                                  PipeRef pipe) {
    GroupRecord& g = group_mut(subgroup);
    if (g.kind != GroupKind::WorkerSubgroup) {
        throw std::invalid_argument("register_with_rv: not a worker subgroup");
    }
    RegisterResult out;
    if (!deps_.alive(rv) || !g.rv_peers.count(rv)) {
        out.outcome = RegisterResult::Outcome::RvDead;
        return out;
    }
    RegistrationTable& table = g.tables[rv];
    table.rv = rv;

    if (table.registered.count(worker)) {
        table.pipes[worker] = pipe;
        out.outcome = RegisterResult::Outcome::Accepted;
        out.subgroup = subgroup;
        out.rv = rv;
        return out;
    }

    GroupId service = g.parent;
    if (table.registered.size() < deps_.r_max) {
        table.registered.insert(worker);
        table.pipes[worker] = pipe;
        g.members.insert(worker);
        group_mut(service).members.insert(worker);
        emit_registered(subgroup, rv, worker, table.registered.size());
        out.outcome = RegisterResult::Outcome::Accepted;
        out.subgroup = subgroup;
        out.rv = rv;
        return out;
    }

    // capacity reached: promote the lowest registered alive non-RV worker
    PeerId promote = kNoPeer;
    for (PeerId cand : table.registered) {
        if (cand != rv && deps_.alive(cand) && !g.rv_peers.count(cand)) {
            promote = cand;
            break;
        }
    }
    GroupRecord& svc = group_mut(service);
    GroupId sg = new_group(GroupKind::WorkerSubgroup,
                           "sg" + std::to_string(svc.worker_subgroups.size() + 1),
                           service, promote == kNoPeer ? worker : promote);
    GroupRecord& g2 = group_mut(subgroup); // re-fetch, map may have rebalanced
    GroupRecord& sgr = group_mut(sg);
    GroupRecord& svc2 = group_mut(service);
    svc2.worker_subgroups.push_back(sg);

    PeerId new_rv;
    if (promote != kNoPeer) {
        new_rv = promote;
        g2.tables.at(rv).registered.erase(promote);
        g2.tables.at(rv).pipes.erase(promote);
        g2.members.erase(promote);
        sgr.rv_peers.insert(promote);
        sgr.members.insert(promote);
        sgr.tables[promote] = RegistrationTable{promote, {}, {}};
    } else {
        // nothing promotable (everything else is dead): the registering
        // worker anchors the new subgroup itself
        new_rv = worker;
        sgr.rv_peers.insert(worker);
        sgr.tables[worker] = RegistrationTable{worker, {}, {}};
    }
    GroupRecord& rvg = group_mut(svc2.rv_group);
    rvg.members.insert(new_rv);
    rvg.rv_peers.insert(new_rv);
    svc2.rv_peers.insert(new_rv);

    if (deps_.trace) {
        deps_.trace->emit(deps_.now(), TraceKind::rv_split, rv,
                          {{"group", std::uint64_t{service}},
                           {"old_rv", std::uint64_t{rv}},
                           {"new_rv", std::uint64_t{new_rv}},
                           {"old_group", std::uint64_t{subgroup}},
                           {"new_group", std::uint64_t{sg}}});
    }

    RegistrationTable& fresh = sgr.tables.at(new_rv);
    fresh.registered.insert(worker);
    fresh.pipes[worker] = pipe;
    sgr.members.insert(worker);
    svc2.members.insert(worker);
    emit_registered(sg, new_rv, worker, fresh.registered.size());

    out.outcome = RegisterResult::Outcome::Redirected;
    out.subgroup = sg;
    out.rv = new_rv;
    out.split = true;
    out.new_subgroup = sg;
    out.new_rv = new_rv;
    return out;
}

std::optional<std::uint64_t> Overlay::start_election(GroupId subgroup) {
    GroupRecord& g = group_mut(subgroup);
    if (g.dissolved || g.election_in_progress) {
        return std::nullopt;
    }
    g.election_in_progress = true;
    return ++g.election_round;
}

Overlay::ElectionOutcome Overlay::finalize_election(GroupId subgroup, std::uint64_t round) {
    GroupRecord& g = group_mut(subgroup);
    ElectionOutcome out;
    if (!g.election_in_progress || g.election_round != round) {
        out.stale = true;
        return out;
    }
    g.election_in_progress = false;

    out.dead_rv = g.rv_peers.empty() ? kNoPeer : *g.rv_peers.begin();

    PeerId winner = kNoPeer;
    for (PeerId m : g.members) {
        if (deps_.alive(m)) {
            winner = m;
            break;
        }
    }

    GroupId service = g.parent;
    GroupRecord& svc = group_mut(service);

    // previous RVs leave the coordination group either way
    for (PeerId r : g.rv_peers) {
        svc.rv_peers.erase(r);
        if (svc.rv_group != kNoGroup) {
            GroupRecord& rvg = group_mut(svc.rv_group);
            rvg.members.erase(r);
            rvg.rv_peers.erase(r);
        }
    }

    if (winner == kNoPeer) {
        // collect everything that was ever registered here for rescheduling
        std::set<PeerId> lost(g.members.begin(), g.members.end());
        for (const auto& [r, table] : g.tables) {
            lost.insert(r);
            lost.insert(table.registered.begin(), table.registered.end());
        }
        g.dissolved = true;
        g.rv_peers.clear();
        g.tables.clear();
        out.dissolved = true;
        out.workers.assign(lost.begin(), lost.end());
        return out;
    }

    // alive members re-register under the winner; known pipes carry over
    std::map<PeerId, PipeRef> pipes;
    for (const auto& [r, table] : g.tables) {
        for (const auto& [p, pipe] : table.pipes) {
            pipes[p] = pipe;
        }
    }
    std::set<PeerId> alive_members;
    for (PeerId m : g.members) {
        if (deps_.alive(m)) {
            alive_members.insert(m);
        }
    }
    g.members = alive_members;
    g.rv_peers = {winner};
    g.tables.clear();
    RegistrationTable& table = g.tables[winner];
    table.rv = winner;
    for (PeerId m : alive_members) {
        table.registered.insert(m);
        if (auto it = pipes.find(m); it != pipes.end()) {
            table.pipes[m] = it->second;
        }
        emit_registered(subgroup, winner, m, table.registered.size());
    }

    svc.rv_peers.insert(winner);
    if (svc.rv_group != kNoGroup) {
        GroupRecord& rvg = group_mut(svc.rv_group);
        rvg.members.insert(winner);
        rvg.rv_peers.insert(winner);
    }

    if (deps_.trace) {
        deps_.trace->emit(deps_.now(), TraceKind::election, winner,
                          {{"service", std::uint64_t{service}},
                           {"subgroup", std::uint64_t{subgroup}},
                           {"winner", std::uint64_t{winner}}});
    }

    out.winner = winner;
    out.workers.assign(alive_members.begin(), alive_members.end());
    return out;
}

void Overlay::remove_dead_worker(GroupId subgroup, PeerId worker) {
    GroupRecord& g = group_mut(subgroup);
    for (auto& [rv, table] : g.tables) {
        table.registered.erase(worker);
        table.pipes.erase(worker);
    }
    g.members.erase(worker);
}

std::vector<GroupId> Overlay::strip_peer(PeerId peer) {
    std::vector<GroupId> need_election;
    for (auto& [id, g] : groups_) {
        bool touched = g.members.erase(peer) != 0;
        touched |= g.rv_peers.erase(peer) != 0;
        touched |= g.tables.erase(peer) != 0;
        for (auto& [rv, table] : g.tables) {
            touched |= table.registered.erase(peer) != 0;
            table.pipes.erase(peer);
        }
        g.client_assignment.erase(peer);
        for (auto it = g.client_assignment.begin(); it != g.client_assignment.end();) {
            if (it->second == peer) {
                it = g.client_assignment.erase(it);
            } else {
                ++it;
            }
        }
        if (touched && g.kind == GroupKind::WorkerSubgroup && !g.dissolved &&
            g.rv_peers.empty()) {
            bool any_alive = false;
            for (PeerId m : g.members) {
                if (deps_.alive(m)) {
                    any_alive = true;
                    break;
                }
            }
            if (any_alive) {
                need_election.push_back(id);
            } else {
                g.dissolved = true;
            }
        }
    }
    return need_election;
}

void Overlay::recompute_visibility() {
    for (auto& [id, g] : groups_) {
        if (g.kind != GroupKind::Service) {
            continue;
        }
        for (auto it = g.client_assignment.begin(); it != g.client_assignment.end();) {
            PeerId client = it->first;
            PeerId rv = it->second;
            if (!deps_.alive(rv) ||
                deps_.component_of(client) != deps_.component_of(rv)) {
                it = g.client_assignment.erase(it);
            } else {
                ++it;
            }
        }
    }
}

std::vector<PeerId> Overlay::merge_subgroup_into(GroupId from_subgroup, GroupId into_subgroup) {
    GroupRecord& from = group_mut(from_subgroup);
    GroupRecord& into = group_mut(into_subgroup);
    if (from.parent != into.parent) {
        throw std::invalid_argument("merge across services");
    }
    PeerId into_rv = kNoPeer;
    for (PeerId rv : into.rv_peers) {
        if (deps_.alive(rv)) {
            into_rv = rv;
            break;
        }
    }
    if (into_rv == kNoPeer) {
        throw std::logic_error("merge target has no alive rv");
    }

    std::set<PeerId> moving;
    for (const auto& [rv, table] : from.tables) {
        for (PeerId w : table.registered) {
            if (deps_.alive(w)) {
                moving.insert(w);
            }
        }
    }
    for (PeerId rv : from.rv_peers) {
        if (deps_.alive(rv)) {
            moving.insert(rv); // retiring RV re-registers as a plain worker
        }
    }

    std::map<PeerId, PipeRef> pipes;
    for (const auto& [rv, table] : from.tables) {
        for (const auto& [p, pipe] : table.pipes) {
            pipes[p] = pipe;
        }
    }

    GroupRecord& svc = group_mut(from.parent);
    for (PeerId r : from.rv_peers) {
        svc.rv_peers.erase(r);
        if (svc.rv_group != kNoGroup) {
            GroupRecord& rvg = group_mut(svc.rv_group);
            rvg.members.erase(r);
            rvg.rv_peers.erase(r);
        }
    }
    from.dissolved = true;
    from.rv_peers.clear();
    from.tables.clear();
    from.members.clear();

    RegistrationTable& table = into.tables.at(into_rv);
    for (PeerId w : moving) {
        into.members.insert(w);
        if (table.registered.insert(w).second) {
            if (auto it = pipes.find(w); it != pipes.end()) {
                table.pipes[w] = it->second;
            }
            emit_registered(into_subgroup, into_rv, w, table.registered.size());
        }
    }
    return std::vector<PeerId>(moving.begin(), moving.end());
}

bool Overlay::same_worker_subgroup(PeerId a, PeerId b) const {
    for (const auto& [id, g] : groups_) {
        if (g.kind != GroupKind::WorkerSubgroup || g.dissolved) {
            continue;
        }
        bool has_a = g.members.count(a) || g.rv_peers.count(a);
        bool has_b = g.members.count(b) || g.rv_peers.count(b);
        if (has_a && has_b) {
            return true;
        }
    }
    return false;
}

std::optional<GroupId> Overlay::subgroup_of_rv(PeerId rv, GroupId service) const {
    for (GroupId sg : group(service).worker_subgroups) {
        const GroupRecord& g = group(sg);
        if (!g.dissolved && g.rv_peers.count(rv)) {
            return sg;
        }
    }
    return std::nullopt;
}

std::optional<GroupId> Overlay::subgroup_of_worker(PeerId worker, GroupId service) const {
    for (GroupId sg : group(service).worker_subgroups) {
        const GroupRecord& g = group(sg);
        if (g.dissolved) {
            continue;
        }
        for (const auto& [rv, table] : g.tables) {
            if (table.registered.count(worker)) {
                return sg;
            }
        }
    }
    return std::nullopt;
}

std::vector<PeerId> Overlay::service_rvs(GroupId service) const {
    std::vector<PeerId> out;
    const GroupRecord& svc = group(service);
    if (svc.rv_group == kNoGroup) {
        return out;
    }
    for (PeerId rv : group(svc.rv_group).members) {
        if (deps_.alive(rv)) {
            out.push_back(rv);
        }
    }
    return out;
}

std::vector<GroupId> Overlay::service_subgroups(GroupId service) const {
    std::vector<GroupId> out;
    for (GroupId sg : group(service).worker_subgroups) {
        if (!group(sg).dissolved) {
            out.push_back(sg);
        }
    }
    return out;
}

std::optional<GroupId> Overlay::find_service(PeerId viewer,
                                             const std::vector<std::string>& path,
                                             const std::string& service_name) const {
    const int comp = deps_.component_of(viewer);
    std::vector<GroupId> level;
    for (const auto& [id, rec] : groups_) {
        if (rec.kind == GroupKind::Root && present_in_component(rec, comp) &&
            rec.members.count(viewer)) {
            level = equivalence_class(id, comp);
            break;
        }
    }
    if (level.empty()) {
        return std::nullopt;
    }
    for (const std::string& name : path) {
        GroupId found = kNoGroup;
        for (GroupId gid : level) {
            for (GroupId child : group(gid).children) {
                const GroupRecord& c = group(child);
                if (c.kind == GroupKind::Category && c.name == name &&
                    present_in_component(c, comp)) {
                    found = child;
                    break;
                }
            }
            if (found != kNoGroup) {
                break;
            }
        }
        if (found == kNoGroup) {
            return std::nullopt;
        }
        level = equivalence_class(found, comp);
    }
    GroupId best = kNoGroup;
    for (GroupId gid : level) {
        for (GroupId child : group(gid).children) {
            const GroupRecord& c = group(child);
            if (c.kind == GroupKind::Service && c.name == service_name &&
                present_in_component(c, comp)) {
                if (best == kNoGroup || child < best) {
                    best = child;
                }
            }
        }
    }
    if (best == kNoGroup) {
        return std::nullopt;
    }
    return best;
}

std::optional<PeerId> Overlay::current_entry_rv(PeerId client, GroupId service) const {
    const GroupRecord& svc = group(service);
    auto it = svc.client_assignment.find(client);
    if (it == svc.client_assignment.end()) {
        return std::nullopt;
    }
    PeerId rv = it->second;
    if (!deps_.alive(rv) || deps_.component_of(rv) != deps_.component_of(client)) {
        return std::nullopt;
    }
    if (svc.rv_group != kNoGroup && !group(svc.rv_group).members.count(rv)) {
        return std::nullopt;
    }
    return rv;
}

std::optional<PeerId> Overlay::assign_entry_rv(PeerId client, GroupId service) {
    if (auto cur = current_entry_rv(client, service)) {
        return cur;
    }
    GroupRecord& svc = group_mut(service);
    if (svc.rv_group == kNoGroup) {
        return std::nullopt;
    }
    const int comp = deps_.component_of(client);

    std::map<PeerId, std::size_t> load;
    for (const auto& [c, rv] : svc.client_assignment) {
        ++load[rv];
    }
    PeerId best = kNoPeer;
    std::size_t best_load = 0;
    for (PeerId rv : group(svc.rv_group).members) {
        if (!deps_.alive(rv) || deps_.component_of(rv) != comp) {
            continue;
        }
        std::size_t l = load.count(rv) ? load.at(rv) : 0;
        if (best == kNoPeer || l < best_load) {
            best = rv;
            best_load = l;
        }
    }
    if (best == kNoPeer) {
        return std::nullopt;
    }
    svc.client_assignment[client] = best;
    return best;
}

} // namespace groupsim
