#include "navkit/dagger_expert.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace navkit {

ExpertContext ExpertContext::make(const NavGraph& graph, const Trajectory& gt) {
    validate_trajectory(gt, graph);
    ExpertContext ctx;
    ctx.graph = &graph;
    ctx.gt = gt;
    auto sp = graph_shortest_path(graph, gt.nodes.front(), gt.nodes.back());
    if (!sp) throw std::invalid_argument("ExpertContext: GT endpoints disconnected");
    ctx.gt_is_shortest = std::abs(gt.length_m - sp->length) <= 1e-6;
    return ctx;
}

NodeId Expert::expert_action(const EpisodeState& state) {
    if (state.done) throw std::logic_error("expert_action: episode is done");
    const auto& gt = ctx_->gt.nodes;
    const NavGraph& graph = *ctx_->graph;

    // Case (a): current node on GT. Match monotonically past the last match.
    int match = -1;
    int from = last_match_ ? *last_match_ + 1 : 0;
    for (int k = from; k < static_cast<int>(gt.size()); ++k) {
        if (gt[k] == state.current_node) {
            match = k;
            break;
        }
    }
    if (match < 0 && last_match_) {
        for (int k = 0; k < static_cast<int>(gt.size()); ++k) {
            if (gt[k] == state.current_node) {
                match = k;
                break;
            }
        }
    }
    if (match >= 0) {
        last_match_ = match;
        if (match + 1 < static_cast<int>(gt.size())) return gt[match + 1];
        return kStopAction;
    }

    if (ctx_->gt_is_shortest) {
        // Case (b): recalculated shortest path to the goal.
        NodeId goal = gt.back();
        if (state.current_node == goal) return kStopAction;
        auto sp = graph_shortest_path(graph, state.current_node, goal);
        if (!sp) throw std::runtime_error("expert_action: goal unreachable");
        return sp->nodes[1];
    }

    // Case (c): shortest path back to the closest GT node, ties toward the
    // largest GT index.
    double best = std::numeric_limits<double>::infinity();
    int best_k = -1;
    std::optional<ShortestPath> best_path;
    for (int k = 0; k < static_cast<int>(gt.size()); ++k) {
        auto sp = graph_shortest_path(graph, state.current_node, gt[k]);
        if (!sp) continue;
        if (sp->length < best - 1e-12 || (sp->length <= best + 1e-12 && k > best_k)) {
            best = sp->length;
            best_k = k;
            best_path = sp;
        }
    }
    if (!best_path) throw std::runtime_error("expert_action: no GT node reachable");
    return best_path->nodes[1];
}

EpisodeTrace expert_rollout(const ExpertContext& ctx, const Simulator& sim,
                            const EpisodeState& start_state) {
    Expert expert(ctx);
    EpisodeState state = start_state;
    EpisodeTrace trace;
    trace.env_id = state.env_id;
    trace.headings.push_back(state.heading);
    while (!state.done) {
        NodeId action = expert.expert_action(state);
        trace.actions.push_back(action);
        auto cands = sim.candidates(state);
        const ActionCandidate* chosen = nullptr;
        for (const auto& c : cands) {
            if (c.target == action) {
                chosen = &c;
                break;
            }
        }
        if (!chosen) throw std::logic_error("expert_rollout: expert action not in candidates");
        state = sim.step(state, *chosen);
        if (!state.done) trace.headings.push_back(state.heading);
    }
    trace.trace = state.trace;
    trace.done_reason = state.done_reason == EpisodeState::DoneReason::stop ? "stop" : "cap";
    return trace;
}

}  // namespace navkit
