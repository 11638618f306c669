#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "groupsim/overlay.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

using namespace groupsim;

namespace {

// Mutable world the overlay reads through its dependency hooks.
struct World {
    std::set<PeerId> dead;
    std::map<PeerId, int> component;
    VirtualTime now = 0;
    TraceLog trace;

    Overlay::Deps deps(std::uint32_t r_max = 16, std::uint32_t root_capacity = 16) {
        return Overlay::Deps{
            [this](PeerId p) { return !dead.count(p); },
            [this](PeerId p) {
                auto it = component.find(p);
                return it == component.end() ? 0 : it->second;
            },
            [this] { return now; },
            &trace,
            r_max,
            root_capacity,
        };
    }

    std::size_t count(TraceKind kind) const {
        std::size_t n = 0;
        for (const auto& rec : trace.records()) {
            if (rec.ev == kind) {
                ++n;
            }
        }
        return n;
    }
};

PipeRef pipe(PeerId owner) { return PipeRef{owner, 1}; }

} // namespace

TEST_CASE("bootstrap creates a root once and joins afterwards") {
    World w;
    Overlay ov(w.deps());

    auto first = ov.bootstrap_peer(1);
    CHECK(first.created_root);
    CHECK(first.rv == 1);

    auto second = ov.bootstrap_peer(2);
    CHECK(!second.created_root);
    CHECK(second.root == first.root);
    CHECK(second.rv == 1);
    CHECK(ov.is_member(2, first.root));

    // re-bootstrap is idempotent
    auto again = ov.bootstrap_peer(2);
    CHECK(!again.created_root);
    CHECK(again.rv == 1);

    CHECK(w.count(TraceKind::group_created) == 1);
    CHECK(w.count(TraceKind::peer_bootstrap) == 3);
}

TEST_CASE("isolated components bootstrap separate roots") {
    World w;
    w.component = {{1, 1}, {2, 2}};
    Overlay ov(w.deps());

    auto a = ov.bootstrap_peer(1);
    auto b = ov.bootstrap_peer(2);
    CHECK(a.created_root);
    CHECK(b.created_root);
    CHECK(a.root != b.root);

    // healed: a third peer joins the lowest-id root
    w.component.clear();
    auto c = ov.bootstrap_peer(3);
    CHECK(!c.created_root);
    CHECK(c.root == a.root);
}

TEST_CASE("ensure_group_path builds the tree and is idempotent") {
    World w;
    Overlay ov(w.deps());
    ov.bootstrap_peer(10);
    ov.bootstrap_peer(11);

    auto p = ov.ensure_group_path(10, {"gaming", "console"}, "match", "q1", pipe(10));
    CHECK(p.created_service);
    CHECK(p.rv == 10);
    REQUIRE(ov.has_group(p.service));
    const GroupRecord& svc = ov.group(p.service);
    CHECK(svc.kind == GroupKind::Service);
    CHECK(svc.query_format == "q1");
    CHECK(ov.group(svc.parent).name == "console");
    CHECK(ov.group(ov.group(svc.parent).parent).name == "gaming");
    CHECK(svc.worker_subgroups.size() == 1);
    CHECK(svc.rv_group != kNoGroup);
    CHECK(ov.group(p.subgroup).rv_peers == std::set<PeerId>{10});
    // creator is RV and registered worker at once
    CHECK(ov.group(p.subgroup).tables.at(10).registered.count(10));

    // same path again from the creator: nothing new
    std::size_t groups_before = ov.groups().size();
    auto p2 = ov.ensure_group_path(10, {"gaming", "console"}, "match", "q1", pipe(10));
    CHECK(!p2.created_service);
    CHECK(p2.service == p.service);
    CHECK(p2.rv == 10);
    CHECK(ov.groups().size() == groups_before);

    // a second worker lands in the existing subgroup
    auto p3 = ov.ensure_group_path(11, {"gaming", "console"}, "match", "q1", pipe(11));
    CHECK(!p3.created_service);
    CHECK(p3.subgroup == p.subgroup);
    CHECK(ov.group(p.subgroup).tables.at(10).registered ==
          std::set<PeerId>{10, 11});
}

TEST_CASE("join walk enforces visibility and parent membership") {
    World w;
    Overlay ov(w.deps());
    ov.bootstrap_peer(10);
    auto p = ov.ensure_group_path(10, {"apps"}, "db", "sql", pipe(10));
    GroupId category = ov.group(p.service).parent;

    ov.bootstrap_peer(5); // client
    // skipping the category: not a member of the service's parent class
    auto bad = ov.join_group(5, p.service);
    CHECK(bad.error == Overlay::JoinError::ParentNotJoined);

    auto jc = ov.join_group(5, category);
    CHECK(jc.error == Overlay::JoinError::None);
    CHECK(jc.rv == 10);
    auto js = ov.join_group(5, p.service);
    CHECK(js.error == Overlay::JoinError::None);
    CHECK(js.rv == 10);
    CHECK(ov.current_entry_rv(5, p.service) == 10);

    // a peer in another component cannot see the group
    w.component[6] = 3;
    ov.bootstrap_peer(6);
    auto cross = ov.join_group(6, category);
    CHECK(cross.error == Overlay::JoinError::GroupNotVisible);
}

TEST_CASE("discovery is scoped to direct children") {
    World w;
    Overlay ov(w.deps());
    auto boot = ov.bootstrap_peer(10);
    ov.ensure_group_path(10, {"gaming", "console"}, "match", "q1", pipe(10));
    ov.ensure_group_path(10, {"db"}, "sql", "q2", pipe(10));

    auto root_ads = ov.discover_advertisements(10, boot.root);
    REQUIRE(root_ads.error == Overlay::DiscoverError::None);
    REQUIRE(root_ads.ads.size() == 2);
    CHECK(root_ads.ads[0].name == "gaming");
    CHECK(root_ads.ads[1].name == "db");

    // grandchildren stay hidden; service ads carry the query format
    GroupId gaming = root_ads.ads[0].group_id;
    auto gaming_ads = ov.discover_advertisements(10, gaming);
    REQUIRE(gaming_ads.ads.size() == 1);
    CHECK(gaming_ads.ads[0].name == "console");
    auto console_ads = ov.discover_advertisements(10, gaming_ads.ads[0].group_id);
    REQUIRE(console_ads.ads.size() == 1);
    CHECK(console_ads.ads[0].kind == GroupKind::Service);
    CHECK(console_ads.ads[0].query_format == "q1");

    // non-members are refused
    ov.bootstrap_peer(5);
    CHECK(ov.discover_advertisements(5, gaming).error ==
          Overlay::DiscoverError::NotAMember);
}

TEST_CASE("merge makes both sides discoverable, split restores isolation") {
    World w;
    w.component = {{1, 1}, {2, 2}, {5, 1}};
    Overlay ov(w.deps());

    auto root_a = ov.bootstrap_peer(1);
    auto root_b = ov.bootstrap_peer(2);
    auto svc_a = ov.ensure_group_path(1, {"apps"}, "svc_a", "qa", pipe(1));
    auto svc_b = ov.ensure_group_path(2, {"apps"}, "svc_b", "qb", pipe(2));
    GroupId cat_a = ov.group(svc_a.service).parent;
    GroupId cat_b = ov.group(svc_b.service).parent;
    CHECK(cat_a != cat_b);

    ov.bootstrap_peer(5);
    ov.join_group(5, cat_a);
    auto before = ov.discover_advertisements(5, cat_a);
    REQUIRE(before.ads.size() == 1);
    CHECK(before.ads[0].name == "svc_a");
    CHECK(!ov.find_service(5, {"apps"}, "svc_b").has_value());

    // heal: same-name categories act as one class, services list side by side
    w.component.clear();
    auto merged = ov.discover_advertisements(5, cat_a);
    REQUIRE(merged.ads.size() == 2);
    CHECK(merged.ads[0].name == "svc_a");
    CHECK(merged.ads[1].name == "svc_b");
    CHECK(ov.find_service(5, {"apps"}, "svc_b") == svc_b.service);

    // root-level discovery merges the two "apps" categories into one ad
    auto root_ads = ov.discover_advertisements(5, root_a.root);
    REQUIRE(root_ads.ads.size() == 1);
    CHECK(root_ads.ads[0].group_id == std::min(cat_a, cat_b));

    // split again
    w.component = {{1, 1}, {2, 2}, {5, 1}};
    auto after = ov.discover_advertisements(5, cat_a);
    REQUIRE(after.ads.size() == 1);
    CHECK(after.ads[0].name == "svc_a");
    CHECK(!ov.find_service(5, {"apps"}, "svc_b").has_value());
    (void)root_b;
}

TEST_CASE("registration splits the subgroup at capacity") {
    World w;
    Overlay ov(w.deps(2));
    ov.bootstrap_peer(10);
    ov.bootstrap_peer(11);
    ov.bootstrap_peer(12);

    auto p = ov.ensure_group_path(10, {"apps"}, "db", "sql", pipe(10));
    auto r11 = ov.register_with_rv(11, 10, p.subgroup, pipe(11));
    CHECK(r11.outcome == Overlay::RegisterResult::Outcome::Accepted);

    // table now {10, 11} == R_max; the third registration promotes 11
    // (lowest registered non-RV) and lands in the new subgroup
    auto r12 = ov.register_with_rv(12, 10, p.subgroup, pipe(12));
    CHECK(r12.outcome == Overlay::RegisterResult::Outcome::Redirected);
    CHECK(r12.split);
    CHECK(r12.new_rv == 11);
    CHECK(r12.new_subgroup != p.subgroup);
    CHECK(r12.rv == 11);

    const GroupRecord& old_sg = ov.group(p.subgroup);
    const GroupRecord& new_sg = ov.group(r12.new_subgroup);
    CHECK(old_sg.tables.at(10).registered == std::set<PeerId>{10});
    CHECK(new_sg.tables.at(11).registered == std::set<PeerId>{12});
    CHECK(new_sg.rv_peers == std::set<PeerId>{11});
    // both RVs sit in the coordination group now
    CHECK(ov.service_rvs(p.service) == std::vector<PeerId>{10, 11});
    CHECK(w.count(TraceKind::rv_split) == 1);

    // capacity invariant over every registered record
    for (const auto& rec : w.trace.records()) {
        if (rec.ev == TraceKind::registered) {
            for (const auto& f : rec.d) {
                if (f.key == "table_size") {
                    CHECK(std::get<std::uint64_t>(f.value) <= 2);
                }
            }
        }
    }

    // registering with a dead RV is refused
    w.dead.insert(11);
    auto dead = ov.register_with_rv(12, 11, r12.new_subgroup, pipe(12));
    CHECK(dead.outcome == Overlay::RegisterResult::Outcome::RvDead);
}

TEST_CASE("root tables split by adding an RV to the same group") {
    World w;
    Overlay ov(w.deps(16, 2));
    auto boot = ov.bootstrap_peer(1);
    ov.bootstrap_peer(2); // table {2}
    ov.bootstrap_peer(3); // table {2,3} full
    auto b4 = ov.bootstrap_peer(4);

    const GroupRecord& root = ov.group(boot.root);
    CHECK(root.rv_peers.size() == 2);
    CHECK(b4.rv == 2); // lowest registered non-RV got promoted
    CHECK(root.tables.at(2).registered == std::set<PeerId>{4});
    CHECK(w.count(TraceKind::rv_split) == 1);
    // still one root group
    std::size_t roots = 0;
    for (const auto& [id, g] : ov.groups()) {
        if (g.kind == GroupKind::Root) {
            ++roots;
        }
    }
    CHECK(roots == 1);
}

TEST_CASE("election picks the lowest alive member") {
    World w;
    Overlay ov(w.deps());
    ov.bootstrap_peer(3);
    ov.bootstrap_peer(7);
    ov.bootstrap_peer(9);
    auto p = ov.ensure_group_path(7, {"apps"}, "db", "sql", pipe(7));
    ov.register_with_rv(3, 7, p.subgroup, pipe(3));
    ov.register_with_rv(9, 7, p.subgroup, pipe(9));

    w.dead.insert(7);
    auto round = ov.start_election(p.subgroup);
    REQUIRE(round.has_value());
    // second trigger while in progress is deduplicated
    CHECK(!ov.start_election(p.subgroup).has_value());

    auto out = ov.finalize_election(p.subgroup, *round);
    CHECK(!out.stale);
    CHECK(!out.dissolved);
    CHECK(out.winner == 3);
    CHECK(out.dead_rv == 7);
    CHECK(out.workers == std::vector<PeerId>{3, 9});
    CHECK(ov.group(p.subgroup).rv_peers == std::set<PeerId>{3});
    CHECK(ov.group(p.subgroup).tables.at(3).registered == std::set<PeerId>{3, 9});
    CHECK(ov.service_rvs(p.service) == std::vector<PeerId>{3});
    CHECK(w.count(TraceKind::election) == 1);

    // a stale claim from the finished round is void
    auto stale = ov.finalize_election(p.subgroup, *round);
    CHECK(stale.stale);
}

TEST_CASE("election with no candidates dissolves the subgroup") {
    World w;
    Overlay ov(w.deps());
    ov.bootstrap_peer(7);
    ov.bootstrap_peer(8);
    auto p = ov.ensure_group_path(7, {"apps"}, "db", "sql", pipe(7));
    ov.register_with_rv(8, 7, p.subgroup, pipe(8));

    w.dead.insert(7);
    w.dead.insert(8);
    auto round = ov.start_election(p.subgroup);
    auto out = ov.finalize_election(p.subgroup, *round);
    CHECK(out.dissolved);
    CHECK(out.winner == kNoPeer);
    CHECK(out.workers == std::vector<PeerId>{7, 8});
    CHECK(ov.group(p.subgroup).dissolved);
    CHECK(ov.service_rvs(p.service).empty());
    CHECK(ov.service_subgroups(p.service).empty());
}

TEST_CASE("strip_peer flags rv-less subgroups and supports revival") {
    World w;
    Overlay ov(w.deps());
    ov.bootstrap_peer(1);
    ov.bootstrap_peer(10);
    ov.bootstrap_peer(11);
    auto p = ov.ensure_group_path(10, {"apps"}, "db", "sql", pipe(10));
    ov.register_with_rv(11, 10, p.subgroup, pipe(11));

    // revive flow: 10 loses every role, its subgroup needs an election
    auto elections = ov.strip_peer(10);
    CHECK(elections == std::vector<GroupId>{p.subgroup});
    CHECK(!ov.group(p.subgroup).rv_peers.count(10));
    CHECK(!ov.is_member(10, p.service));

    // fresh bootstrap joins instead of creating
    auto boot = ov.bootstrap_peer(10);
    CHECK(!boot.created_root);

    // stripping the last member dissolves the subgroup outright
    w.dead.insert(11);
    auto none = ov.strip_peer(11);
    CHECK(none.empty());
    CHECK(ov.group(p.subgroup).dissolved);
}

TEST_CASE("entry rv assignment balances clients and survives reassignment") {
    World w;
    Overlay ov(w.deps(2));
    ov.bootstrap_peer(10);
    ov.bootstrap_peer(11);
    ov.bootstrap_peer(12);
    auto p = ov.ensure_group_path(10, {"apps"}, "db", "sql", pipe(10));
    ov.register_with_rv(11, 10, p.subgroup, pipe(11));
    ov.register_with_rv(12, 10, p.subgroup, pipe(12)); // split -> RVs {10, 11}

    CHECK(ov.assign_entry_rv(100, p.service) == 10);
    CHECK(ov.assign_entry_rv(101, p.service) == 11); // least loaded
    CHECK(ov.assign_entry_rv(100, p.service) == 10); // sticky

    w.dead.insert(10);
    CHECK(!ov.current_entry_rv(100, p.service).has_value());
    CHECK(ov.assign_entry_rv(100, p.service) == 11);
}

TEST_CASE("consolidation merges a subgroup into its sibling") {
    World w;
    Overlay ov(w.deps(2));
    ov.bootstrap_peer(10);
    ov.bootstrap_peer(11);
    ov.bootstrap_peer(12);
    auto p = ov.ensure_group_path(10, {"apps"}, "db", "sql", pipe(10));
    ov.register_with_rv(11, 10, p.subgroup, pipe(11));
    auto r12 = ov.register_with_rv(12, 10, p.subgroup, pipe(12));
    REQUIRE(r12.split);

    // old subgroup kept {10}; merge the new one {rv 11, worker 12} back in
    // fails capacity-wise (2 movers, 1 slot); merge old into new instead
    auto moved = ov.merge_subgroup_into(p.subgroup, r12.new_subgroup);
    CHECK(moved == std::vector<PeerId>{10});
    CHECK(ov.group(p.subgroup).dissolved);
    CHECK(ov.group(r12.new_subgroup).tables.at(11).registered ==
          std::set<PeerId>{10, 12});
    CHECK(ov.service_rvs(p.service) == std::vector<PeerId>{11});
    CHECK(ov.service_subgroups(p.service) ==
          std::vector<GroupId>{r12.new_subgroup});
}
