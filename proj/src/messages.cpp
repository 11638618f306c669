#include "groupsim/messages.hpp"

namespace groupsim {

namespace {

struct NameVisitor {
    const char* operator()(const QuerySubmit&) const { return "query_submit"; }
    const char* operator()(const QueryForward&) const { return "query_forward"; }
    const char* operator()(const QueryServiced&) const { return "query_serviced"; }
    const char* operator()(const QueryCancel&) const { return "query_cancel"; }
    const char* operator()(const QueryReply&) const { return "query_reply"; }
    const char* operator()(const BusyReply&) const { return "busy"; }
    const char* operator()(const Heartbeat&) const { return "heartbeat"; }
    const char* operator()(const HeartbeatAck&) const { return "heartbeat_ack"; }
    const char* operator()(const TableExchangeMsg&) const { return "table_exchange"; }
    const char* operator()(const WorkerFailed&) const { return "worker_failed"; }
    const char* operator()(const SpawnOrder&) const { return "spawn_order"; }
    const char* operator()(const RvAnnounce&) const { return "rv_announce"; }
    const char* operator()(const WorkerReport&) const { return "worker_report"; }
    const char* operator()(const RebuildRequest&) const { return "rebuild_request"; }
    const char* operator()(const RebuildReply&) const { return "rebuild_reply"; }
    const char* operator()(const SubgroupDissolved&) const { return "subgroup_dissolved"; }
    const char* operator()(const MigrateOrder&) const { return "migrate_order"; }
    const char* operator()(const HandoffEntries&) const { return "handoff_entries"; }
};

} // namespace

const char* message_name(const ProtocolMessage& msg) {
    return std::visit(NameVisitor{}, msg);
}

} // namespace groupsim
