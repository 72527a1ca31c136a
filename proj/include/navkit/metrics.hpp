#pragma once

#include <map>
#include <optional>
#include <vector>

#include "navkit/nav_graph.hpp"

namespace navkit {

inline constexpr double kSuccessThresholdM = 3.0;

struct EvalResult {
    double ne_m = 0.0;
    bool success = false;
    double spl = 0.0;
    double ndtw = 0.0;
    double sdtw = 0.0;
    std::optional<int> first_error_step;
};

// Graph shortest-path distance between two nodes. Throws when disconnected.
double navigation_error(const NavGraph& graph, NodeId final_node, NodeId goal);

// Strict comparison: NE < threshold.
bool success(double ne_m, double threshold = kSuccessThresholdM);

// success ? shortest / max(shortest, traveled) : 0. The 0/0 success case is 1.
double spl(bool succeeded, double shortest_len, double traveled_len);

// DTW over graph geodesic node costs, boundary aligned, standard three-move
// recurrence.
double dtw(const std::vector<NodeId>& pred, const std::vector<NodeId>& ref, const NavGraph& graph);

// exp(-DTW / (|ref| * threshold)).
double ndtw(const std::vector<NodeId>& pred, const std::vector<NodeId>& ref, const NavGraph& graph,
            double threshold = kSuccessThresholdM);

double sdtw(const std::vector<NodeId>& pred, const std::vector<NodeId>& ref, const NavGraph& graph,
            double threshold = kSuccessThresholdM);

// Smallest t with pred[t] != ref[t]; a length mismatch counts at the shorter
// length; nullopt when identical.
std::optional<int> first_error_step(const std::vector<NodeId>& pred,
                                    const std::vector<NodeId>& ref);

EvalResult evaluate_episode(const std::vector<NodeId>& pred, const std::vector<NodeId>& ref,
                            const NavGraph& graph);

// Batch evaluation; serial and OpenMP variants produce identical results.
struct Episode {
    const std::vector<NodeId>* pred;
    const std::vector<NodeId>* ref;
    const NavGraph* graph;
};

std::vector<EvalResult> evaluate_episodes_serial(const std::vector<Episode>& episodes);
std::vector<EvalResult> evaluate_episodes(const std::vector<Episode>& episodes, int threads = 0);

struct Aggregate {
    size_t count = 0;
    double mean_ne_m = 0.0;
    double sr_percent = 0.0;
    double mean_spl = 0.0;
    double mean_ndtw = 0.0;
    double mean_sdtw = 0.0;
    std::map<int, int> first_error_histogram;  // step index -> count
};

Aggregate aggregate(const std::vector<EvalResult>& results);

}  // namespace navkit
