#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "groupsim/trace.hpp"
#include "groupsim/types.hpp"

namespace groupsim {

enum class GroupKind {
    Root,
    Category,
    Service,
    WorkerSubgroup,
    RvGroup, // per-service coordination group containing the subgroup RVs
};

const char* to_string(GroupKind kind);

struct Advertisement {
    GroupId group_id = kNoGroup;
    GroupKind kind = GroupKind::Category;
    std::string name;
    std::string query_format; // services only
    VirtualTime published_at = 0;
};

// Per-RV registration bookkeeping. registered is an ordered set so the
// lowest peer is always the promotion candidate; |registered| never
// exceeds the configured capacity.
struct RegistrationTable {
    PeerId rv = kNoPeer;
    std::set<PeerId> registered;
    std::map<PeerId, PipeRef> pipes;
};

struct GroupRecord {
    GroupId id = kNoGroup;
    GroupKind kind = GroupKind::Root;
    std::string name;
    GroupId parent = kNoGroup;
    std::vector<GroupId> children; // creation order
    std::set<PeerId> rv_peers;
    std::set<PeerId> members;
    std::string query_format; // Service kind only
    VirtualTime created_at = 0;

    // Root / Category / WorkerSubgroup: one table per RV.
    std::map<PeerId, RegistrationTable> tables;
    // Service kind: which entry RV each client is currently attached to.
    std::map<PeerId, PeerId> client_assignment;

    bool election_in_progress = false;
    std::uint64_t election_round = 0;
    bool dissolved = false;

    // Service kind structure links.
    GroupId rv_group = kNoGroup;
    std::vector<GroupId> worker_subgroups;
};

// Global group tree plus the visibility rules layered on top of the network
// partition state. All operations are synchronous state transitions; the
// simulation invokes them from kernel event handlers. There is no hidden
// cross-partition side channel: every visibility decision goes through the
// injected component_of.
class Overlay {
public:
    struct Deps {
        std::function<bool(PeerId)> alive;
        std::function<int(PeerId)> component_of;
        std::function<VirtualTime()> now;
        TraceLog* trace = nullptr;
        std::uint32_t r_max = 16;
        // Capacity of root and category tables. Same split rule as worker
        // subgroups, but scenario r_max overrides target worker registration
        // only, so directory tables keep the structural default.
        std::uint32_t root_capacity = 16;
    };

    explicit Overlay(Deps deps);

    // --- bootstrap and tree construction ---------------------------------

    struct BootstrapResult {
        bool created_root = false;
        GroupId root = kNoGroup;
        PeerId rv = kNoPeer; // root RV the peer registered with (self if created)
    };
    // Joins a root group reachable in the peer's partition component, or
    // creates one and becomes its RV.
    BootstrapResult bootstrap_peer(PeerId peer);

    struct ServicePlacement {
        GroupId service = kNoGroup;
        GroupId subgroup = kNoGroup;
        GroupId rv_group = kNoGroup;
        PeerId rv = kNoPeer;       // RV of the subgroup the worker registered in
        bool created_service = false;
        bool split = false;        // registration triggered a subgroup split
        GroupId split_new_subgroup = kNoGroup;
        PeerId split_new_rv = kNoPeer;
        PeerId split_old_rv = kNoPeer;
    };
    // Walks/creates Categories along path, then the Service with its
    // WorkerSubgroup and coordination group, and registers the worker.
    // Requires a completed bootstrap.
    ServicePlacement ensure_group_path(PeerId worker,
                                       const std::vector<std::string>& path,
                                       const std::string& service_name,
                                       const std::string& query_format,
                                       PipeRef worker_pipe);

    // --- membership and discovery ----------------------------------------

    enum class JoinError { None, GroupNotVisible, ParentNotJoined };
    struct JoinResult {
        JoinError error = JoinError::None;
        PeerId rv = kNoPeer;
    };
    JoinResult join_group(PeerId peer, GroupId group);

    enum class DiscoverError { None, NotAMember };
    struct DiscoverResult {
        DiscoverError error = DiscoverError::None;
        std::vector<Advertisement> ads; // ascending group_id
    };
    // Direct children of scope only. Categories with the same name path in
    // the viewer's component collapse into one advertisement (the lowest
    // group id represents the class); services are always listed singly.
    DiscoverResult discover_advertisements(PeerId peer, GroupId scope) const;

    // --- worker registration ----------------------------------------------

    struct RegisterResult {
        enum class Outcome { Accepted, Redirected, RvDead };
        Outcome outcome = Outcome::Accepted;
        GroupId subgroup = kNoGroup;
        PeerId rv = kNoPeer;
        bool split = false;
        GroupId new_subgroup = kNoGroup;
        PeerId new_rv = kNoPeer;
    };
    // Registers with the RV of a worker subgroup. At capacity the lowest
    // registered non-RV worker is promoted to RV of a fresh sibling
    // subgroup and the registration lands there.
    RegisterResult register_with_rv(PeerId worker, PeerId rv, GroupId subgroup,
                                    PipeRef pipe);

    // --- elections ---------------------------------------------------------

    // Marks an election in progress. Returns the round to claim with, or
    // nullopt when one is already running or the subgroup is dissolved.
    std::optional<std::uint64_t> start_election(GroupId subgroup);

    struct ElectionOutcome {
        bool stale = false;     // round mismatch, claim is void
        bool dissolved = false; // no candidates; subgroup removed from service
        PeerId winner = kNoPeer;
        PeerId dead_rv = kNoPeer;
        std::vector<PeerId> workers; // alive members re-registered under winner
    };
    // Resolves an election: the lowest alive member becomes the subgroup's
    // RV, joins the coordination group, and every alive member is
    // re-registered under it. With no alive members the subgroup dissolves.
    ElectionOutcome finalize_election(GroupId subgroup, std::uint64_t round);

    // --- failure / lifecycle edits -----------------------------------------

    // Deregisters a failed worker from its subgroup table.
    void remove_dead_worker(GroupId subgroup, PeerId worker);

    // Removes every role and membership of the peer (revive path). Returns
    // the worker subgroups left without an RV but with alive members; the
    // caller is expected to start elections there.
    std::vector<GroupId> strip_peer(PeerId peer);

    // Clears service client assignments that now cross partition
    // components, so clients re-attach on their next walk.
    void recompute_visibility();

    // Consolidation support: moves every worker of `from_subgroup` plus its
    // retiring RV into `into_subgroup`, then dissolves `from_subgroup`.
    std::vector<PeerId> merge_subgroup_into(GroupId from_subgroup, GroupId into_subgroup);

    // --- queries ------------------------------------------------------------

    bool has_group(GroupId g) const { return groups_.count(g) != 0; }
    const GroupRecord& group(GroupId g) const;
    GroupRecord& group_mut(GroupId g);
    bool is_member(PeerId peer, GroupId g) const;
    bool visible(PeerId viewer, GroupId g) const;
    bool same_worker_subgroup(PeerId a, PeerId b) const;
    std::optional<GroupId> subgroup_of_rv(PeerId rv, GroupId service) const;
    std::optional<GroupId> subgroup_of_worker(PeerId worker, GroupId service) const;
    // Alive coordination-group members of a service, ascending.
    std::vector<PeerId> service_rvs(GroupId service) const;
    std::vector<GroupId> service_subgroups(GroupId service) const;
    std::optional<GroupId> find_service(PeerId viewer,
                                        const std::vector<std::string>& path,
                                        const std::string& service_name) const;
    const std::map<GroupId, GroupRecord>& groups() const { return groups_; }

    // Entry RV assignment for a client on a service group; reuses a valid
    // existing assignment, otherwise picks the least-loaded reachable RV.
    std::optional<PeerId> assign_entry_rv(PeerId client, GroupId service);
    std::optional<PeerId> current_entry_rv(PeerId client, GroupId service) const;

private:
    GroupId new_group(GroupKind kind, std::string name, GroupId parent, PeerId creator);
    void emit_created(const GroupRecord& g, PeerId actor);
    void emit_registered(GroupId group, PeerId rv, PeerId peer, std::size_t table_size);
    bool present_in_component(const GroupRecord& g, int component) const;
    std::vector<GroupId> equivalence_class(GroupId g, int component) const;
    std::vector<std::string> name_path(GroupId g) const;
    bool member_of_class(PeerId peer, GroupId g) const;
    // Registration into a root/category table, splitting by adding an RV to
    // the same group when every table is at capacity.
    PeerId attach_to_group(PeerId peer, GroupRecord& g);

    Deps deps_;
    std::map<GroupId, GroupRecord> groups_;
    GroupId next_group_id_ = 1;
};

} // namespace groupsim
