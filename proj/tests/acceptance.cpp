// Acceptance gate: ten end-to-end checks against independent oracles, one
// pass/fail line each. Tolerances are pinned in the code next to each check.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "navkit/dagger_expert.hpp"
#include "navkit/env_synth.hpp"
#include "navkit/graph_builder.hpp"
#include "navkit/il_pipeline.hpp"
#include "navkit/metrics.hpp"
#include "navkit/pipeline.hpp"
#include "navkit/traj_sampler.hpp"

using namespace navkit;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

std::set<std::pair<NodeId, NodeId>> edge_set(const NavGraph& g) {
    std::set<std::pair<NodeId, NodeId>> s;
    for (const auto& e : g.edges()) s.insert({e.a, e.b});
    return s;
}

// ---------------------------------------------------------------------------
// 1. Edge rule: exact agreement with a direct re-evaluation of the boolean
//    expression on 1e5 random tuples, < 1 s.
void check_edge_rule() {
    auto start = std::chrono::steady_clock::now();
    Rng rng(1001);
    for (int i = 0; i < 100000; ++i) {
        EdgeRuleParams params;
        params.lambda_d = rng.uniform(0.0, 3.0);
        params.lambda_p = rng.uniform(0.0, 3.0);
        bool reachable = rng.uniform() < 0.9;
        double g = rng.uniform(0.0, 12.0);
        double s = rng.uniform(0.05, 5.0);
        double p = rng.uniform(0.0, 1.0);
        double zi = rng.uniform(-2.0, 6.0), zj = rng.uniform(-2.0, 6.0);
        std::optional<double> gv = reachable ? std::optional<double>(g) : std::nullopt;
        bool expected = reachable && s <= 3.5 && std::abs(zi - zj) <= 3.0 &&
                        params.lambda_d * (g / s) - params.lambda_p * p <= 1.0;
        require(edge_rule(params, gv, s, p, zi, zj) == expected, "rule mismatch at tuple");
    }
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                    .count();
    require(ms < 1000.0, "edge rule too slow: " + std::to_string(ms) + " ms");
}

// ---------------------------------------------------------------------------
// 2. Graph construction: for 20 environments with the noise-free oracle and
//    fitted lambdas, the built pair-rule edge set equals the reference edge
//    set (F1 = 1.0) and every built graph is connected; < 30 s.
void check_graph_construction() {
    auto start = std::chrono::steady_clock::now();
    for (uint64_t seed = 100; seed < 120; ++seed) {
        Environment env = generate_environment(seed, EnvParams{});
        OracleEdgeProbability provider(env, 0.0, seed);
        auto fit = grid_search({&env}, {&provider}, default_lambda_grid(), default_lambda_grid());
        require(fit.quality.f1 == 1.0, "fit F1 != 1.0 for seed " + std::to_string(seed));
        NavGraph built = build_graph(env, provider, fit.params);
        require(edge_set(built) == edge_set(env.reference_graph),
                "edge set mismatch for seed " + std::to_string(seed));
        require(is_connected(built), "built graph disconnected for seed " + std::to_string(seed));
    }
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                    .count();
    require(ms < 30000.0, "graph construction too slow: " + std::to_string(ms) + " ms");
}

// ---------------------------------------------------------------------------
// 3. Grid search: noise-free fit reaches F1 = 1.0; under sigma = 0.3 the
//    returned lambdas are identical to an independent full enumeration of the
//    grid (zero tolerance on the argmax identity).
void check_grid_search() {
    std::vector<Environment> envs;
    for (uint64_t s = 200; s < 203; ++s) envs.push_back(generate_environment(s, EnvParams{}));

    {
        OracleEdgeProbability clean(envs[0], 0.0, 7);
        auto fit = grid_search({&envs[0]}, {&clean}, default_lambda_grid(), default_lambda_grid());
        require(fit.quality.f1 == 1.0, "noise-free grid search F1 != 1.0");
    }

    std::vector<std::unique_ptr<OracleEdgeProbability>> noisy;
    std::vector<std::vector<PairStats>> stats;
    std::vector<const Environment*> env_ptrs;
    std::vector<const EdgeProbabilityProvider*> providers;
    for (const auto& env : envs) {
        noisy.push_back(std::make_unique<OracleEdgeProbability>(env, 0.3, env.seed));
        stats.push_back(compute_pair_stats(env, *noisy.back()));
        env_ptrs.push_back(&env);
        providers.push_back(noisy.back().get());
    }
    auto got = grid_search(env_ptrs, providers, default_lambda_grid(), default_lambda_grid());

    // Independent enumeration over the full grid with the documented
    // tie-break (smaller lambda_d, then smaller lambda_p).
    EdgeRuleParams best;
    double best_f1 = -1.0;
    for (double ld : default_lambda_grid()) {
        for (double lp : default_lambda_grid()) {
            EdgeRuleParams params;
            params.lambda_d = ld;
            params.lambda_p = lp;
            long tp = 0, fp = 0, fn = 0;
            for (const auto& env_stats : stats) {
                auto edges = pair_rule_edges(env_stats, params);
                std::set<std::pair<NodeId, NodeId>> pred(edges.begin(), edges.end());
                for (const auto& ps : env_stats) {
                    bool hit = pred.count({std::min(ps.i, ps.j), std::max(ps.i, ps.j)}) > 0;
                    if (ps.is_reference && hit) tp++;
                    if (!ps.is_reference && hit) fp++;
                    if (ps.is_reference && !hit) fn++;
                }
            }
            double f1 = quality_from_counts(tp, fp, fn).f1;
            if (f1 > best_f1) {
                best_f1 = f1;
                best = params;
            }
        }
    }
    require(got.params.lambda_d == best.lambda_d && got.params.lambda_p == best.lambda_p,
            "noisy grid search argmax differs from full enumeration");
    require(got.quality.f1 == best_f1, "noisy grid search F1 differs from full enumeration");
}

// ---------------------------------------------------------------------------
// 4. TSP: exact agreement with all-permutation enumeration on 500 instances
//    with up to 6 waypoints, and on 50 instances with 7..9 waypoints.
void check_tsp() {
    Rng rng(4004);
    for (int trial = 0; trial < 500; ++trial) {
        NavGraph g = oracle::random_graph(rng, 16);
        oracle::FloydWarshall fw(g);
        int k = 2 + static_cast<int>(rng.uniform_int(5));  // 2..6
        std::set<NodeId> w;
        while (static_cast<int>(w.size()) < k) w.insert(static_cast<NodeId>(rng.uniform_int(16)));
        std::vector<NodeId> waypoints(w.begin(), w.end());
        auto got = tsp_order(g, waypoints);
        auto expect = oracle::tsp_permutations(fw, waypoints);
        require(std::abs(got.length - expect.length) <= 1e-9, "tsp cost mismatch (<=6 waypoints)");
        require(got.order == expect.order, "tsp order mismatch (<=6 waypoints)");
    }
    for (int trial = 0; trial < 50; ++trial) {
        NavGraph g = oracle::random_graph(rng, 20);
        oracle::FloydWarshall fw(g);
        int k = 7 + static_cast<int>(rng.uniform_int(3));  // 7..9
        std::set<NodeId> w;
        while (static_cast<int>(w.size()) < k) w.insert(static_cast<NodeId>(rng.uniform_int(20)));
        std::vector<NodeId> waypoints(w.begin(), w.end());
        auto got = tsp_order(g, waypoints);
        auto expect = oracle::tsp_permutations(fw, waypoints);
        require(std::abs(got.length - expect.length) <= 1e-9, "tsp cost mismatch (7..9 waypoints)");
    }
}

// ---------------------------------------------------------------------------
// 5. Sampling constraints: over at least 1e4 accepted trajectories, zero
//    violations of length <= 40 m, steps <= 16, and per-env cap <= 3000.
void check_sampling() {
    std::vector<Environment> envs;
    std::vector<NavGraph> graphs;
    std::vector<EnvGraph> eg;
    for (uint64_t s = 300; s < 305; ++s) {
        EnvParams p;
        p.room_rows = 2;
        p.room_cols = 3;
        envs.push_back(generate_environment(s, p));
        graphs.push_back(envs.back().reference_graph);
    }
    for (size_t i = 0; i < envs.size(); ++i) eg.push_back({envs[i].id, &graphs[i], Split::train});

    SampleConfig cfg;
    cfg.per_env_cap = 3000;
    cfg.seed = 500;
    auto dataset = sample_dataset(eg, cfg);
    std::map<std::string, int> per_env;
    long accepted = static_cast<long>(dataset.size());
    for (const auto& t : dataset) {
        require(t.length_m <= 40.0, "trajectory longer than 40 m");
        require(t.steps() <= 16, "trajectory longer than 16 steps");
        per_env[t.env_id]++;
    }
    for (const auto& [id, n] : per_env) require(n <= 3000, "per-env cap exceeded");

    // Top up with direct draws if the capped dataset is below 1e4.
    Rng rng(501);
    size_t which = 0;
    while (accepted < 10000) {
        auto t = sample_trajectory(graphs[which % graphs.size()], "extra", cfg, rng);
        which++;
        if (!t) continue;
        require(t->length_m <= 40.0, "trajectory longer than 40 m");
        require(t->steps() <= 16, "trajectory longer than 16 steps");
        accepted++;
    }
    require(accepted >= 10000, "fewer than 1e4 accepted trajectories");
}

// ---------------------------------------------------------------------------
// 6. Shortest paths and the expert: graph_shortest_path equals Floyd-Warshall
//    on 100 random graphs up to 50 nodes; expert_action equals a brute-force
//    oracle on 1e3 random (graph, gt, state) triples; expert rollouts from
//    the GT start reproduce GT verbatim on every sampled trajectory.
NodeId oracle_expert(const oracle::FloydWarshall& fw, const NavGraph& g, const Trajectory& gt,
                     NodeId current) {
    const auto& nodes = gt.nodes;
    for (size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k] == current) {
            return k + 1 < nodes.size() ? nodes[k + 1] : kStopAction;
        }
    }
    bool gt_shortest = std::abs(gt.length_m - fw.d(nodes.front(), nodes.back())) <= 1e-6;
    if (gt_shortest) {
        if (current == nodes.back()) return kStopAction;
        return fw.lex_path(g, current, nodes.back())[1];
    }
    double best = oracle::kInf;
    int best_k = -1;
    for (int k = 0; k < static_cast<int>(nodes.size()); ++k) {
        double d = fw.d(current, nodes[k]);
        if (d < best - 1e-12 || (d <= best + 1e-12 && k > best_k)) {
            best = d;
            best_k = k;
        }
    }
    return fw.lex_path(g, current, nodes[best_k])[1];
}

void check_shortest_paths_and_expert() {
    Rng rng(6006);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 5 + static_cast<int>(rng.uniform_int(46));  // 5..50
        NavGraph g = oracle::random_graph(rng, n, 0.15);
        oracle::FloydWarshall fw(g);
        for (int q = 0; q < 5; ++q) {
            NodeId a = static_cast<NodeId>(rng.uniform_int(n));
            NodeId b = static_cast<NodeId>(rng.uniform_int(n));
            auto sp = graph_shortest_path(g, a, b);
            require(sp.has_value(), "shortest path missing on a connected graph");
            require(std::abs(sp->length - fw.d(a, b)) <= 1e-9 * (1.0 + fw.d(a, b)),
                    "shortest path length mismatch");
            require(sp->nodes == fw.lex_path(g, a, b), "shortest path sequence mismatch");
        }
    }

    int checked = 0;
    while (checked < 1000) {
        NavGraph g = oracle::random_graph(rng, 20);
        oracle::FloydWarshall fw(g);
        NodeId a = static_cast<NodeId>(rng.uniform_int(20));
        NodeId b = static_cast<NodeId>(rng.uniform_int(20));
        if (a == b) continue;
        auto base = fw.lex_path(g, a, b);
        if (base.size() < 2) continue;
        Trajectory gt;
        gt.env_id = "t";
        gt.nodes = base;
        if (rng.uniform() < 0.5) {
            NodeId last = base.back();
            const auto& nbrs = g.neighbors(last);
            gt.nodes.push_back(nbrs[rng.uniform_int(nbrs.size())]);
            gt.nodes.push_back(last);
        }
        gt.length_m = 0.0;
        for (size_t i = 0; i + 1 < gt.nodes.size(); ++i) {
            gt.length_m += euclidean(g.node(gt.nodes[i]).position, g.node(gt.nodes[i + 1]).position);
        }
        auto ctx = ExpertContext::make(g, gt);
        Expert expert(ctx);
        EpisodeState state;
        state.env_id = "t";
        state.current_node = static_cast<NodeId>(rng.uniform_int(20));
        state.trace = {state.current_node};
        state.max_steps = 100;
        require(expert.expert_action(state) == oracle_expert(fw, g, gt, state.current_node),
                "expert action differs from the brute-force oracle");
        checked++;
    }

    Environment env = generate_environment(6, EnvParams{});
    FeatureStore fs(static_cast<int>(env.reference_graph.nodes().size()), 8);
    Simulator sim(env.reference_graph, fs);
    SampleConfig cfg;
    cfg.per_env_cap = 300;
    cfg.seed = 66;
    auto trajs = sample_dataset({{env.id, &env.reference_graph, Split::train}}, cfg);
    require(!trajs.empty(), "no sampled trajectories to roll out");
    for (const auto& t : trajs) {
        auto ctx = ExpertContext::make(env.reference_graph, t);
        auto trace = expert_rollout(ctx, sim, sim.reset(t, 0.0));
        require(trace.trace == t.nodes, "expert rollout does not reproduce GT");
        require(trace.done_reason == "stop", "expert rollout did not stop");
    }
}

// ---------------------------------------------------------------------------
// 7. Metrics: NDTW equals the exhaustive alignment oracle on 200 random path
//    pairs within 1e-9; identities on pred == ref; strict 3 m success
//    threshold; SPL/SDTW pointwise inequalities on every evaluated episode.
void check_metrics() {
    Rng rng(7007);
    NavGraph g = oracle::random_graph(rng, 15);
    oracle::FloydWarshall fw(g);
    auto walk = [&](int len) {
        std::vector<NodeId> path{g.nodes()[rng.uniform_int(g.nodes().size())].id};
        while (static_cast<int>(path.size()) < len) {
            const auto& nbrs = g.neighbors(path.back());
            path.push_back(nbrs[rng.uniform_int(nbrs.size())]);
        }
        return path;
    };
    for (int trial = 0; trial < 200; ++trial) {
        auto pred = walk(1 + static_cast<int>(rng.uniform_int(10)));
        auto ref = walk(1 + static_cast<int>(rng.uniform_int(10)));
        std::vector<std::vector<double>> cost(pred.size(), std::vector<double>(ref.size()));
        for (size_t i = 0; i < pred.size(); ++i) {
            for (size_t j = 0; j < ref.size(); ++j) cost[i][j] = fw.d(pred[i], ref[j]);
        }
        double d = oracle::dtw_exhaustive(cost);
        double expect = std::exp(-d / (static_cast<double>(ref.size()) * 3.0));
        require(std::abs(ndtw(pred, ref, g) - expect) <= 1e-9, "ndtw differs from the oracle");

        auto r = evaluate_episode(pred, ref, g);
        require(r.spl <= (r.success ? 1.0 : 0.0) + 1e-12, "SPL > SR pointwise");
        require(r.sdtw <= std::min(r.success ? 1.0 : 0.0, r.ndtw) + 1e-12,
                "SDTW > min(SR, NDTW) pointwise");
        if (pred == ref) {
            require(r.ndtw == 1.0 && r.sdtw == 1.0 && r.ne_m == 0.0, "identity metrics off");
        }
    }
    require(success(2.999999) && !success(3.0), "success threshold is not strict at 3 m");
}

// ---------------------------------------------------------------------------
// 8. Label construction: empirical mask rate within +-0.01 of 0.15 over 1e5
//    tokens; progress classes exactly floor(20t/T); every emitted example
//    passes the bucket-consistency invariant.
void check_labels() {
    Rng rng(8008);
    std::vector<int> tokens(1000, 3);
    long masked = 0, total = 0;
    for (int rep = 0; rep < 100; ++rep) {
        auto m = mask_instruction(tokens, 0.15, rng);
        masked += static_cast<long>(m.targets.size());
        total += static_cast<long>(tokens.size());
    }
    double rate = static_cast<double>(masked) / static_cast<double>(total);
    require(std::abs(rate - 0.15) <= 0.01, "mask rate " + std::to_string(rate) + " off 0.15");

    Environment env = generate_environment(8, EnvParams{});
    FeatureStore fs = generate_features(env, 8, 16);
    Simulator sim(env.reference_graph, fs);
    SampleConfig cfg;
    cfg.per_env_cap = 40;
    cfg.seed = 88;
    auto trajs = sample_dataset({{env.id, &env.reference_graph, Split::train}}, cfg);
    require(!trajs.empty(), "no trajectories for label checks");
    int idx = 0;
    for (const auto& t : trajs) {
        EpisodeSpec e;
        e.env_id = env.id;
        e.gt = t;
        e.init_heading = bearing(env.reference_graph.node(t.nodes[0]).position,
                                 env.reference_graph.node(t.nodes[1]).position);
        e.instruction = synthesize_instruction(t, env.reference_graph, e.init_heading,
                                               env.id + "/" + std::to_string(idx++));
        auto examples = emit_step_examples(e, sim, 0.15, 8);
        require(static_cast<int>(examples.size()) == t.steps() + 1, "example count != steps + 1");
        for (const auto& ex : examples) {
            require(ex.progress_class ==
                        std::min(kProgressClasses * ex.t / ex.total_steps, kProgressClasses - 1),
                    "progress class != floor(20t/T)");
            require(ex.constrained_idx >= 0 &&
                        ex.constrained_idx < static_cast<int>(ex.candidates.size()),
                    "constrained label out of range");
            require(ex.unconstrained_bucket == ex.candidates[ex.constrained_idx].rel_bucket,
                    "bucket-consistency invariant violated");
        }
    }
}

// ---------------------------------------------------------------------------
// 9. Learning, directional: on a fixed benchmark of 10 environments and 200
//    instructions, (i) BC success rate exceeds a random policy by >= 20
//    points; (ii) with perturbed starts, one aggregation round is at least as
//    good as BC; (iii) the analytic training gradient matches central finite
//    differences within 1e-4 relative where the gradient is significant.
struct Bench {
    std::vector<Environment> envs;
    std::vector<FeatureStore> features;
    std::vector<std::unique_ptr<Simulator>> sims;
    std::vector<EpisodeSpec> episodes;        // 200, start on GT
    std::vector<const Simulator*> ep_sims;    // parallel to episodes
    std::vector<EpisodeSpec> perturbed;       // starts moved one node off GT
    std::vector<const Simulator*> pe_sims;
};

Bench make_bench() {
    Bench b;
    constexpr int kFeatureDim = 16;
    for (uint64_t s = 900; s < 910; ++s) {
        b.envs.push_back(generate_environment(s, EnvParams{}));
        b.features.push_back(generate_features(b.envs.back(), s, kFeatureDim));
    }
    for (size_t i = 0; i < b.envs.size(); ++i) {
        b.sims.push_back(
            std::make_unique<Simulator>(b.envs[i].reference_graph, b.features[i]));
    }
    Rng rng(909);
    for (size_t i = 0; i < b.envs.size(); ++i) {
        const NavGraph& g = b.envs[i].reference_graph;
        SampleConfig cfg;
        cfg.per_env_cap = 20;
        cfg.seed = 900 + i;
        auto trajs = sample_dataset({{b.envs[i].id, &g, Split::train}}, cfg);
        require(trajs.size() == 20, "benchmark env yielded fewer than 20 trajectories");
        for (size_t k = 0; k < trajs.size(); ++k) {
            const Trajectory& t = trajs[k];
            EpisodeSpec e;
            e.env_id = b.envs[i].id;
            e.gt = t;
            e.init_heading = bearing(g.node(t.nodes[0]).position, g.node(t.nodes[1]).position);
            e.instruction = synthesize_instruction(t, g, e.init_heading,
                                                   e.env_id + "/" + std::to_string(k));
            b.episodes.push_back(e);
            b.ep_sims.push_back(b.sims[i].get());

            // Perturbed start: prepend a neighbor of the start node.
            const auto& nbrs = g.neighbors(t.nodes[0]);
            NodeId nb = nbrs[rng.uniform_int(nbrs.size())];
            if (nb == t.nodes[1] && nbrs.size() > 1) {
                nb = nbrs[(std::find(nbrs.begin(), nbrs.end(), nb) - nbrs.begin() + 1) %
                          nbrs.size()];
            }
            Trajectory pt;
            pt.env_id = t.env_id;
            pt.nodes = t.nodes;
            pt.nodes.insert(pt.nodes.begin(), nb);
            pt.length_m = t.length_m + euclidean(g.node(nb).position, g.node(t.nodes[0]).position);
            EpisodeSpec pe;
            pe.env_id = e.env_id;
            pe.gt = pt;
            pe.init_heading = bearing(g.node(nb).position, g.node(t.nodes[0]).position);
            pe.instruction = synthesize_instruction(pt, g, pe.init_heading,
                                                    e.env_id + "/p" + std::to_string(k));
            b.perturbed.push_back(pe);
            b.pe_sims.push_back(b.sims[i].get());
        }
    }
    require(b.episodes.size() == 200, "benchmark does not have 200 instructions");
    return b;
}

double random_policy_sr(const Bench& b) {
    std::vector<EvalResult> results;
    for (size_t e = 0; e < b.episodes.size(); ++e) {
        const auto& ep = b.episodes[e];
        const Simulator& sim = *b.ep_sims[e];
        Rng rng(derive_seed(424242, "random-policy", ep.instruction.id));
        EpisodeState state = sim.reset(ep.gt, ep.init_heading);
        while (!state.done) {
            auto cands = sim.candidates(state);
            state = sim.step(state, cands[rng.uniform_int(cands.size())]);
        }
        results.push_back(evaluate_episode(state.trace, ep.gt.nodes, sim.graph()));
    }
    return aggregate(results).sr_percent;
}

void check_learning() {
    auto start = std::chrono::steady_clock::now();
    Bench b = make_bench();

    std::vector<StepExample> dataset;
    for (size_t e = 0; e < b.episodes.size(); ++e) {
        auto ex = emit_step_examples(b.episodes[e], *b.ep_sims[e]);
        dataset.insert(dataset.end(), ex.begin(), ex.end());
    }

    TrainConfig cfg;
    cfg.embed_dim = 16;
    cfg.epochs = 15;
    cfg.seed = 99;
    auto bc = train_bc(dataset, 16, cfg);

    double random_sr = random_policy_sr(b);
    double bc_sr = evaluate_policy(bc.policy, b.episodes, b.ep_sims).sr_percent;
    require(bc_sr >= random_sr + 20.0, "BC SR " + std::to_string(bc_sr) +
                                           " not >= random SR " + std::to_string(random_sr) +
                                           " + 20 points");

    // One aggregation round on the perturbed-start episodes.
    auto grown = dagger_iteration(bc.policy, b.perturbed, b.pe_sims, dataset);
    TrainConfig dcfg = cfg;
    dcfg.epochs = 8;
    auto dagger = train_bc(grown, 16, dcfg, &bc.policy);
    double bc_p_sr = evaluate_policy(bc.policy, b.perturbed, b.pe_sims).sr_percent;
    double dagger_p_sr = evaluate_policy(dagger.policy, b.perturbed, b.pe_sims).sr_percent;
    require(dagger_p_sr >= bc_p_sr, "aggregated SR " + std::to_string(dagger_p_sr) +
                                        " below BC SR " + std::to_string(bc_p_sr) +
                                        " on perturbed starts");

    // Gradient check on a mixed batch.
    std::vector<const StepExample*> batch;
    for (size_t i = 0; i < dataset.size() && batch.size() < 16; i += 37) batch.push_back(&dataset[i]);
    LinearPolicy probe(16, 12, 3);
    TrainConfig gcfg;
    gcfg.embed_dim = 12;
    PolicyGradients grads;
    policy_loss(probe, batch, gcfg, &grads);
    Rng rng(31);
    auto fd_block = [&](std::vector<double>& param, const std::vector<double>& grad) {
        for (int s = 0; s < 10; ++s) {
            size_t i = rng.uniform_int(param.size());
            double h = 1e-6, keep = param[i];
            param[i] = keep + h;
            double up = policy_loss(probe, batch, gcfg, nullptr).total;
            param[i] = keep - h;
            double down = policy_loss(probe, batch, gcfg, nullptr).total;
            param[i] = keep;
            double fd = (up - down) / (2 * h);
            // 1e-4 relative; the 1e-2 floor keeps finite-difference roundoff
            // from dominating near-zero entries.
            double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-2});
            require(std::abs(fd - grad[i]) / denom < 1e-4, "gradient mismatch vs finite differences");
        }
    };
    fd_block(probe.w_, grads.w);
    fd_block(probe.u_, grads.u);
    fd_block(probe.p_, grads.p);
    fd_block(probe.embed_, grads.embed);

    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                    .count();
    require(ms < 600000.0, "learning benchmark too slow: " + std::to_string(ms) + " ms");
}

// ---------------------------------------------------------------------------
// 10. Determinism: the full pipeline run twice with the same config produces
//     byte-identical datasets, policies, and reports (timestamps excluded).
void check_determinism() {
    const char* config_text = R"({
        "seed": 77,
        "stages": "all",
        "envs": {"count": 3, "train": 2, "feature_dim": 16},
        "sample": {"per_env_cap": 6, "eval_per_env": 3},
        "train": {"embed_dim": 8, "epochs": 3, "dagger_rounds": 1, "dagger_epochs": 2},
        "threads": 2
    })";
    RunConfig cfg = parse_config(config_text);
    auto run_once = [&](const std::string& dir) {
        fs::remove_all(dir);
        setenv("NAVKIT_OUT_ROOT", dir.c_str(), 1);
        auto m = run_pipeline(cfg);
        unsetenv("NAVKIT_OUT_ROOT");
        return m;
    };
    auto d1 = (fs::temp_directory_path() / "navkit_accept_a").string();
    auto d2 = (fs::temp_directory_path() / "navkit_accept_b").string();
    run_once(d1);
    run_once(d2);

    size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(d1)) {
        if (!entry.is_regular_file()) continue;
        auto rel = fs::relative(entry.path(), d1);
        if (rel.filename() == "manifest.json") continue;  // carries durations
        auto other = fs::path(d2) / rel;
        require(fs::exists(other), "missing output in second run: " + rel.string());
        std::ifstream a(entry.path(), std::ios::binary), c(other, std::ios::binary);
        std::stringstream sa, sc;
        sa << a.rdbuf();
        sc << c.rdbuf();
        require(sa.str() == sc.str(), "output differs between runs: " + rel.string());
        compared++;
    }
    require(compared > 10, "too few outputs compared");
    fs::remove_all(d1);
    fs::remove_all(d2);
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<void()> fn;
    };
    const std::vector<Criterion> criteria = {
        {"edge rule agrees with direct re-evaluation on 1e5 tuples (< 1 s)", check_edge_rule},
        {"fitted graphs equal the reference edge set and are connected (20 envs, < 30 s)",
         check_graph_construction},
        {"grid search: F1 = 1.0 noise-free; noisy argmax equals full enumeration",
         check_grid_search},
        {"tsp matches permutation enumeration (500 small + 50 medium instances)", check_tsp},
        {"sampled trajectories: 1e4+ draws, zero 40 m / 16 step / 3000 cap violations",
         check_sampling},
        {"shortest paths and expert actions match brute-force oracles; rollouts reproduce GT",
         check_shortest_paths_and_expert},
        {"metrics match the exhaustive alignment oracle and pointwise invariants",
         check_metrics},
        {"mask rate within 0.01 of 0.15; progress and bucket labels exact", check_labels},
        {"BC beats random by 20+ SR points; aggregation round >= BC on perturbed starts;"
         " gradients match finite differences",
         check_learning},
        {"end-to-end pipeline is byte-identical across two runs", check_determinism},
    };

    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        auto start = std::chrono::steady_clock::now();
        std::string verdict = "PASS";
        std::string detail;
        try {
            criteria[i].fn();
        } catch (const std::exception& e) {
            verdict = "FAIL";
            detail = e.what();
            failures++;
        }
        double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        std::printf("[%s] %2zu. %s (%.0f ms)%s%s\n", verdict.c_str(), i + 1, criteria[i].name, ms,
                    detail.empty() ? "" : " -- ", detail.c_str());
    }
    if (failures) std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    else std::printf("all %zu criteria passed\n", criteria.size());
    return failures == 0 ? 0 : 1;
}
