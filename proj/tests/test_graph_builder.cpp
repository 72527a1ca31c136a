#include <doctest.h>

#include <cmath>
#include <memory>
#include <set>
#include <stdexcept>

#include "navkit/env_synth.hpp"
#include "navkit/graph_builder.hpp"
#include "navkit/rng.hpp"

using namespace navkit;

namespace {

Environment small_env(uint64_t seed = 3) {
    EnvParams p;
    return generate_environment(seed, p);
}

std::set<std::pair<NodeId, NodeId>> edge_set(const NavGraph& g) {
    std::set<std::pair<NodeId, NodeId>> s;
    for (const auto& e : g.edges()) s.insert({e.a, e.b});
    return s;
}

}  // namespace

TEST_CASE("edge rule spec cases") {
    EdgeRuleParams p;
    p.lambda_d = 1.0;
    p.lambda_p = 0.0;
    CHECK(edge_rule(p, 2.0, 2.0, 0.5, 0.0, 0.0));  // g=s -> 1 <= 1, boundary

    CHECK_FALSE(edge_rule(p, 3.6, 3.6, 1.0, 0.0, 0.0));  // s = 3.6 > 3.5 gate

    p.lambda_d = 2.0;
    p.lambda_p = 1.0;
    CHECK_FALSE(edge_rule(p, 1.2, 1.0, 0.9, 0.0, 0.0));  // 2.4 - 0.9 = 1.5 > 1

    CHECK_FALSE(edge_rule(p, std::nullopt, 1.0, 0.9, 0.0, 0.0));  // unreachable
    CHECK_FALSE(edge_rule(p, 1.0, 1.0, 1.0, 0.0, 4.0));           // dz gate
    CHECK_THROWS_AS(edge_rule(p, 1.0, 0.0, 0.5, 0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(edge_rule(p, 1.0, 1.0, 1.5, 0.0, 0.0), std::domain_error);
}

TEST_CASE("edge rule agrees with a direct re-evaluation on random tuples") {
    Rng rng(19);
    EdgeRuleParams p;
    for (int i = 0; i < 20000; ++i) {
        p.lambda_d = rng.uniform(0.0, 3.0);
        p.lambda_p = rng.uniform(0.0, 3.0);
        double s = rng.uniform(0.1, 4.0);
        double g = s * rng.uniform(1.0, 2.0);
        double prob = rng.uniform(0.0, 1.0);
        double zi = rng.uniform(-2.0, 2.0), zj = rng.uniform(-2.0, 2.0);
        bool expect = (p.lambda_d * g / s - p.lambda_p * prob <= 1.0) && (s <= 3.5) &&
                      (std::abs(zi - zj) <= 3.0);
        CHECK(edge_rule(p, g, s, prob, zi, zj) == expect);
    }
}

TEST_CASE("pair stats cover all pairs with reference flags") {
    Environment env = small_env();
    OracleEdgeProbability provider(env, 0.0, 0);
    auto stats = compute_pair_stats(env, provider);
    size_t n = env.panos.size();
    CHECK(stats.size() == n * (n - 1) / 2);
    auto ref = edge_set(env.reference_graph);
    for (const auto& st : stats) {
        CHECK(st.i < st.j);
        CHECK(st.s == doctest::Approx(
                          euclidean(env.reference_graph.node(st.i).position,
                                    env.reference_graph.node(st.j).position)));
        CHECK(st.is_reference == (ref.count({st.i, st.j}) > 0));
        CHECK(st.p == doctest::Approx(st.is_reference ? 0.9 : 0.1));
        if (std::isfinite(st.g)) CHECK(st.g >= 0.0);
    }
}

TEST_CASE("pair stats identical across thread counts") {
    Environment env = small_env(8);
    OracleEdgeProbability provider(env, 0.3, 4);
    auto serial = compute_pair_stats(env, provider, 1);
    auto parallel = compute_pair_stats(env, provider, 0);
    REQUIRE(serial.size() == parallel.size());
    for (size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].i == parallel[i].i);
        CHECK(serial[i].g == parallel[i].g);
        CHECK(serial[i].p == parallel[i].p);
    }
}

TEST_CASE("build_graph with fitted params recovers the reference graph") {
    for (uint64_t seed = 30; seed < 35; ++seed) {
        Environment env = small_env(seed);
        OracleEdgeProbability provider(env, 0.0, 1);
        auto stats = compute_pair_stats(env, provider);
        auto grid = default_lambda_grid();
        auto fitted = grid_search({&env}, {&provider}, grid, grid);
        CHECK(fitted.quality.f1 == 1.0);
        NavGraph built = build_graph(env, provider, fitted.params);
        CHECK(edge_set(built) == edge_set(env.reference_graph));
        CHECK(is_connected(built));
    }
}

TEST_CASE("huge lambda_d yields exactly the MST") {
    Environment env = small_env();
    OracleEdgeProbability provider(env, 0.0, 1);
    EdgeRuleParams p;
    p.lambda_d = 1e9;
    p.lambda_p = 0.0;
    NavGraph built = build_graph(env, provider, p);
    CHECK(built.edges().size() == built.nodes().size() - 1);
    CHECK(is_connected(built));
}

TEST_CASE("grid search serial equals parallel and beats (0,0) under noise") {
    std::vector<Environment> envs;
    std::vector<std::unique_ptr<OracleEdgeProbability>> providers;
    for (uint64_t s = 40; s < 43; ++s) envs.push_back(small_env(s));
    std::vector<std::vector<PairStats>> stats;
    for (const auto& env : envs) {
        OracleEdgeProbability provider(env, 0.3, derive_seed(1, "noise", env.id));
        stats.push_back(compute_pair_stats(env, provider));
    }
    auto grid = default_lambda_grid();
    auto serial = grid_search_serial(stats, grid, grid);
    auto parallel = grid_search_parallel(stats, grid, grid, 0);
    CHECK(serial.params.lambda_d == parallel.params.lambda_d);
    CHECK(serial.params.lambda_p == parallel.params.lambda_p);
    CHECK(serial.quality.f1 == parallel.quality.f1);
    CHECK(serial.quality.f1 < 1.0);

    // F1 at the argmax is at least the F1 at (0, 0), which the grid contains.
    GridSearchResult origin = grid_search_serial(stats, {0.0}, {0.0});
    CHECK(serial.quality.f1 >= origin.quality.f1);
}

TEST_CASE("grid of one point returns that point") {
    Environment env = small_env();
    OracleEdgeProbability provider(env, 0.0, 1);
    auto stats = compute_pair_stats(env, provider);
    auto r = grid_search_serial({stats}, {1.7}, {0.4});
    CHECK(r.params.lambda_d == 1.7);
    CHECK(r.params.lambda_p == 0.4);
}

TEST_CASE("grid search tie-break prefers smaller lambda_d then lambda_p") {
    // A single always-true pair makes every grid point score identically.
    PairStats st;
    st.i = 0;
    st.j = 1;
    st.g = 1.0;
    st.s = 1.0;
    st.p = 1.0;
    st.is_reference = true;
    auto r = grid_search_serial({{st}}, {0.5, 0.0, 1.0}, {0.7, 0.0});
    CHECK(r.params.lambda_d == 0.0);
    CHECK(r.params.lambda_p == 0.0);
    CHECK(r.quality.f1 == 1.0);
}

TEST_CASE("graph quality conventions") {
    Environment env = small_env();
    const NavGraph& ref = env.reference_graph;
    auto q = graph_quality(ref, ref);
    CHECK(q.precision == 1.0);
    CHECK(q.recall == 1.0);
    CHECK(q.f1 == 1.0);

    std::vector<PanoNode> nodes = ref.nodes();
    NavGraph empty(nodes, {});
    auto qe = graph_quality(empty, ref);
    CHECK(qe.recall == 0.0);
    CHECK(qe.precision == 0.0);  // 0/0 convention
    CHECK(qe.f1 == 0.0);

    NavGraph other({{100, {0, 0, 0}}}, {});
    CHECK_THROWS_AS(graph_quality(other, ref), std::invalid_argument);
}

TEST_CASE("graph quality equals brute-force pair counts") {
    Rng rng(55);
    std::vector<PanoNode> nodes;
    for (int i = 0; i < 10; ++i) {
        nodes.push_back({i, {rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0), 0.0}});
    }
    auto random_edges = [&]() {
        std::vector<std::pair<NodeId, NodeId>> e;
        for (int i = 0; i < 10; ++i) {
            for (int j = i + 1; j < 10; ++j) {
                if (rng.uniform() < 0.3) e.emplace_back(i, j);
            }
        }
        return e;
    };
    for (int trial = 0; trial < 20; ++trial) {
        NavGraph pred(nodes, random_edges());
        NavGraph ref(nodes, random_edges());
        auto ps = edge_set(pred), rs = edge_set(ref);
        long tp = 0, fp = 0, fn = 0;
        for (const auto& e : ps) (rs.count(e) ? tp : fp)++;
        for (const auto& e : rs) fn += ps.count(e) ? 0 : 1;
        auto q = graph_quality(pred, ref);
        CHECK(q.tp == tp);
        CHECK(q.fp == fp);
        CHECK(q.fn == fn);
        double prec = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
        double rec = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
        CHECK(q.precision == doctest::Approx(prec));
        CHECK(q.recall == doctest::Approx(rec));
    }
}
