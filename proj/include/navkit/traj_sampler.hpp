#pragma once

#include <optional>
#include <string>
#include <vector>

#include "navkit/nav_graph.hpp"
#include "navkit/env_synth.hpp"
#include "navkit/rng.hpp"

namespace navkit {

struct Trajectory {
    std::string env_id;
    std::vector<NodeId> nodes;
    double length_m = 0.0;
    bool pre_explore = false;

    int steps() const { return static_cast<int>(nodes.size()) - 1; }
};

// Throws unless consecutive nodes are adjacent and length_m matches the
// edge sum within 1e-9.
void validate_trajectory(const Trajectory& traj, const NavGraph& graph);

struct SampleConfig {
    int waypoints = 3;
    double max_length_m = 40.0;
    int max_steps = 16;
    int per_env_cap = 3000;
    uint64_t seed = 0;
};

struct TspResult {
    std::vector<NodeId> order;
    double length = 0.0;
};

// Open-path TSP over graph shortest-path lengths: exact enumeration for up
// to 6 waypoints, Held-Karp for 7..12. Lexicographic tie-break on the id
// sequence.
TspResult tsp_order(const NavGraph& graph, const std::vector<NodeId>& waypoints);

// One draw: uniform waypoints without replacement, TSP ordering, shortest
// paths concatenated with duplicate junction nodes merged. nullopt when the
// path breaks the 40 m / 16 step limits (rejection is a normal outcome).
std::optional<Trajectory> sample_trajectory(const NavGraph& graph, const std::string& env_id,
                                            const SampleConfig& config, Rng& rng);

struct EnvGraph {
    std::string env_id;
    const NavGraph* graph = nullptr;
    Split split = Split::train;
};

// Up to per_env_cap accepted trajectories per environment, environments
// processed in id order with per-environment derived seeds.
std::vector<Trajectory> sample_dataset(std::vector<EnvGraph> envs, const SampleConfig& config);

// sample_dataset restricted to val_unseen/test splits; output tagged
// pre_explore.
std::vector<Trajectory> pre_exploration_sample(std::vector<EnvGraph> envs,
                                               const SampleConfig& config);

struct TrajectoryStats {
    size_t count = 0;
    double mean_steps = 0.0;
    double mean_length_m = 0.0;
};

TrajectoryStats trajectory_stats(const std::vector<Trajectory>& trajs);

std::string trajectories_to_jsonl(const std::vector<Trajectory>& trajs);
std::vector<Trajectory> trajectories_from_jsonl(const std::string& text);

}  // namespace navkit
