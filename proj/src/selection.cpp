#include "groupsim/selection.hpp"

namespace groupsim {

namespace {

// a/b < c/d without leaving integers. Operands stay far below 2^32 at the
// scales this simulator runs, so the products fit comfortably.
bool ratio_less(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    return a * d < c * b;
}

} // namespace

std::optional<std::size_t> select_worker_group(const ServiceLoadView& view) {
    std::optional<std::size_t> best;
    std::uint64_t best_sched = 0;
    std::uint64_t best_thresh = 1;
    for (std::size_t i = 0; i < view.subgroups.size(); ++i) {
        const SubgroupView& sg = view.subgroups[i];
        if (sg.workers.empty()) {
            continue;
        }
        std::uint64_t sched = 0;
        std::uint64_t thresh = 0;
        for (const WorkerView& w : sg.workers) {
            sched += w.scheduled;
            thresh += w.threshold;
        }
        if (!best || ratio_less(sched, thresh, best_sched, best_thresh)) {
            best = i;
            best_sched = sched;
            best_thresh = thresh;
        } else if (!ratio_less(best_sched, best_thresh, sched, thresh) &&
                   sg.subgroup < view.subgroups[*best].subgroup) {
            // exact ratio tie goes to the lower subgroup id
            best = i;
            best_sched = sched;
            best_thresh = thresh;
        }
    }
    return best;
}

std::optional<PeerId> select_worker(const std::vector<WorkerView>& workers) {
    const WorkerView* best = nullptr;
    for (const WorkerView& w : workers) {
        if (w.scheduled >= w.threshold) {
            continue;
        }
        if (!best) {
            best = &w;
            continue;
        }
        if (ratio_less(w.scheduled, w.threshold, best->scheduled, best->threshold)) {
            best = &w;
        } else if (!ratio_less(best->scheduled, best->threshold, w.scheduled, w.threshold)) {
            // exact ratio tie
            if (w.network_delay < best->network_delay ||
                (w.network_delay == best->network_delay && w.peer < best->peer)) {
                best = &w;
            }
        }
    }
    if (!best) {
        return std::nullopt;
    }
    return best->peer;
}

} // namespace groupsim
