#pragma once

#include <optional>

#include "navkit/episode_sim.hpp"
#include "navkit/nav_graph.hpp"
#include "navkit/traj_sampler.hpp"

namespace navkit {

struct ExpertContext {
    const NavGraph* graph = nullptr;
    Trajectory gt;
    bool gt_is_shortest = false;

    static ExpertContext make(const NavGraph& graph, const Trajectory& gt);
};

// Expert-action oracle. Holds the per-episode match-index memory so that a
// ground-truth trajectory revisiting a node is followed monotonically.
class Expert {
public:
    explicit Expert(const ExpertContext& ctx) : ctx_(&ctx) {}

    // Next node id, or kStopAction for STOP.
    // (a) on the GT trajectory: the next GT node, or STOP at its end;
    // (b) off GT and GT is a shortest path: first step of the recalculated
    //     shortest path to the goal, STOP at the goal;
    // (c) off GT otherwise: first step of the shortest path to the closest
    //     GT node (ties toward the largest GT index).
    NodeId expert_action(const EpisodeState& state);

private:
    const ExpertContext* ctx_;
    std::optional<int> last_match_;
};

// Applies expert actions through the simulator until STOP (or the step cap).
EpisodeTrace expert_rollout(const ExpertContext& ctx, const Simulator& sim,
                            const EpisodeState& start_state);

}  // namespace navkit
