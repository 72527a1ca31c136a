// Serial vs OpenMP comparison for the parallel kernels: lambda grid search
// over precomputed pair stats and batch episode evaluation.

#include <chrono>
#include <cstdio>
#include <memory>
#include <vector>

#include "navkit/env_synth.hpp"
#include "navkit/graph_builder.hpp"
#include "navkit/metrics.hpp"
#include "navkit/rng.hpp"
#include "navkit/traj_sampler.hpp"

using namespace navkit;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

}  // namespace

int main() {
    EnvParams params;
    params.room_rows = 3;
    params.room_cols = 3;
    std::vector<Environment> envs;
    for (int i = 0; i < 4; ++i) envs.push_back(generate_environment(1000 + i, params));

    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<PairStats>> stats_serial;
    for (const auto& env : envs) {
        OracleEdgeProbability p(env, 0.3, derive_seed(9, "edge-noise", env.id));
        stats_serial.push_back(compute_pair_stats(env, p, 1));
    }
    double serial_stats_ms = ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<PairStats>> stats_parallel;
    for (const auto& env : envs) {
        OracleEdgeProbability p(env, 0.3, derive_seed(9, "edge-noise", env.id));
        stats_parallel.push_back(compute_pair_stats(env, p, 0));
    }
    double parallel_stats_ms = ms_since(t0);

    auto grid = default_lambda_grid();
    t0 = std::chrono::steady_clock::now();
    auto serial = grid_search_serial(stats_serial, grid, grid);
    double serial_grid_ms = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto parallel = grid_search_parallel(stats_parallel, grid, grid, 0);
    double parallel_grid_ms = ms_since(t0);

    std::printf("pair stats:  serial %8.1f ms   parallel %8.1f ms   speedup %.2fx\n",
                serial_stats_ms, parallel_stats_ms, serial_stats_ms / parallel_stats_ms);
    std::printf("grid search: serial %8.1f ms   parallel %8.1f ms   speedup %.2fx\n",
                serial_grid_ms, parallel_grid_ms, serial_grid_ms / parallel_grid_ms);
    std::printf("argmax agreement: %s (lambda_d %.1f lambda_p %.1f, f1 %.4f)\n",
                serial.params.lambda_d == parallel.params.lambda_d &&
                        serial.params.lambda_p == parallel.params.lambda_p
                    ? "yes"
                    : "NO",
                parallel.params.lambda_d, parallel.params.lambda_p, parallel.quality.f1);

    // Batch metrics on sampled trajectory pairs.
    const NavGraph& graph = envs[0].reference_graph;
    SampleConfig sc;
    sc.per_env_cap = 200;
    sc.seed = 7;
    std::vector<EnvGraph> eg{{envs[0].id, &graph, Split::train}};
    auto trajs = sample_dataset(eg, sc);
    std::vector<Episode> episodes;
    for (size_t i = 0; i + 1 < trajs.size(); i += 2) {
        episodes.push_back({&trajs[i].nodes, &trajs[i + 1].nodes, &graph});
    }
    t0 = std::chrono::steady_clock::now();
    auto r_serial = evaluate_episodes_serial(episodes);
    double serial_eval_ms = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto r_parallel = evaluate_episodes(episodes, 0);
    double parallel_eval_ms = ms_since(t0);
    bool same = true;
    for (size_t i = 0; i < r_serial.size(); ++i) {
        same = same && r_serial[i].ndtw == r_parallel[i].ndtw && r_serial[i].ne_m == r_parallel[i].ne_m;
    }
    std::printf("batch eval (%zu episodes): serial %8.1f ms   parallel %8.1f ms   speedup %.2fx   equal %s\n",
                episodes.size(), serial_eval_ms, parallel_eval_ms,
                serial_eval_ms / parallel_eval_ms, same ? "yes" : "NO");
    return same ? 0 : 1;
}
