#include "navkit/graph_builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace navkit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

int resolve_threads(int threads) {
#ifdef _OPENMP
    return threads > 0 ? threads : omp_get_max_threads();
#else
    (void)threads;
    return 1;
#endif
}
}  // namespace

bool edge_rule(const EdgeRuleParams& params, std::optional<double> g, double s, double p,
               double z_i, double z_j) {
    if (s == 0.0) throw std::domain_error("edge_rule: coincident panos (s == 0)");
    if (p < 0.0 || p > 1.0) throw std::domain_error("edge_rule: p outside [0,1]");
    if (!g.has_value() || !std::isfinite(*g)) return false;
    if (s > params.max_euclidean) return false;
    if (std::abs(z_i - z_j) > params.max_dz) return false;
    return params.lambda_d * (*g / s) - params.lambda_p * p <= 1.0;
}

std::vector<PairStats> compute_pair_stats(const Environment& env,
                                          const EdgeProbabilityProvider& provider, int threads) {
    const auto& panos = env.panos;
    const int n = static_cast<int>(panos.size());
    const int w = env.grid.width;

    // One geodesic field per pano; pairs read from the source with smaller index.
    std::vector<std::vector<double>> fields(n);
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
    for (int i = 0; i < n; ++i) {
        fields[i] = geodesic_field(env.grid, panos[i].position.x, panos[i].position.y);
    }

    std::vector<PairStats> stats;
    stats.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            PairStats ps;
            ps.i = panos[i].id;
            ps.j = panos[j].id;
            ps.s = euclidean(panos[i].position, panos[j].position);
            ps.dz = std::abs(panos[i].position.z - panos[j].position.z);
            ps.g = fields[i][static_cast<size_t>(env.grid.cell_y(panos[j].position.y)) * w +
                             env.grid.cell_x(panos[j].position.x)];
            ps.p = provider.probability(ps.i, ps.j);
            ps.is_reference = env.reference_graph.has_edge(ps.i, ps.j);
            stats.push_back(ps);
        }
    }
    return stats;
}

std::vector<std::pair<NodeId, NodeId>> pair_rule_edges(const std::vector<PairStats>& stats,
                                                       const EdgeRuleParams& params) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (const auto& ps : stats) {
        std::optional<double> g = ps.g == kInf ? std::nullopt : std::optional<double>(ps.g);
        EdgeRuleParams local = params;
        if (edge_rule(local, g, ps.s, ps.p, 0.0, ps.dz)) edges.emplace_back(ps.i, ps.j);
    }
    return edges;
}

NavGraph build_graph(const Environment& env, const EdgeProbabilityProvider& provider,
                     const EdgeRuleParams& params, int threads) {
    if (env.panos.empty()) throw std::invalid_argument("build_graph: environment has no panos");
    auto stats = compute_pair_stats(env, provider, threads);

    // Panos with no reachable partner make the environment invalid.
    std::map<NodeId, bool> reachable;
    for (const auto& p : env.panos) reachable[p.id] = env.panos.size() == 1;
    for (const auto& ps : stats) {
        if (ps.g < kInf) reachable[ps.i] = reachable[ps.j] = true;
    }
    for (const auto& [id, ok] : reachable) {
        if (!ok) {
            throw std::runtime_error("build_graph: pano " + std::to_string(id) +
                                     " is geodesically unreachable from all others");
        }
    }

    auto edges = pair_rule_edges(stats, params);

    std::vector<NodeId> ids;
    for (const auto& p : env.panos) ids.push_back(p.id);
    // Candidate pairs obey the hard navigability gates (euclidean and
    // vertical limits); the clamped rule value is the spanning weight.
    std::vector<WeightedEdge> candidates;
    for (const auto& ps : stats) {
        if (ps.g == kInf || ps.s > params.max_euclidean || ps.dz > params.max_dz) continue;
        double w = params.lambda_d * (ps.g / ps.s) - params.lambda_p * ps.p;
        candidates.push_back({ps.i, ps.j, std::max(w, 0.0)});
    }
    if (!env.panos.empty()) {
        for (const auto& e : minimum_spanning_tree(ids, candidates)) {
            if (std::none_of(edges.begin(), edges.end(), [&](const auto& x) {
                    return (x.first == e.a && x.second == e.b) || (x.first == e.b && x.second == e.a);
                })) {
                edges.emplace_back(e.a, e.b);
            }
        }
    }
    return NavGraph(env.panos, edges);
}

GraphQuality quality_from_counts(long tp, long fp, long fn) {
    GraphQuality q;
    q.tp = tp;
    q.fp = fp;
    q.fn = fn;
    q.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    q.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    q.f1 = q.precision + q.recall > 0 ? 2.0 * q.precision * q.recall / (q.precision + q.recall) : 0.0;
    return q;
}

GraphQuality graph_quality(const NavGraph& pred, const NavGraph& ref) {
    std::set<NodeId> pn, rn;
    for (const auto& n : pred.nodes()) pn.insert(n.id);
    for (const auto& n : ref.nodes()) rn.insert(n.id);
    if (pn != rn) throw std::invalid_argument("graph_quality: node sets differ");
    std::set<std::pair<NodeId, NodeId>> pe, re;
    for (const auto& e : pred.edges()) pe.insert({e.a, e.b});
    for (const auto& e : ref.edges()) re.insert({e.a, e.b});
    long tp = 0, fp = 0, fn = 0;
    for (const auto& e : pe) (re.count(e) ? tp : fp)++;
    for (const auto& e : re) {
        if (!pe.count(e)) fn++;
    }
    return quality_from_counts(tp, fp, fn);
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 30; ++i) grid.push_back(i * 0.1);
    return grid;
}

namespace {

GraphQuality score_point(const std::vector<std::vector<PairStats>>& env_stats, double ld, double lp) {
    long tp = 0, fp = 0, fn = 0;
    EdgeRuleParams params;
    params.lambda_d = ld;
    params.lambda_p = lp;
    for (const auto& stats : env_stats) {
        for (const auto& ps : stats) {
            std::optional<double> g = ps.g == kInf ? std::nullopt : std::optional<double>(ps.g);
            bool pred = edge_rule(params, g, ps.s, ps.p, 0.0, ps.dz);
            if (pred && ps.is_reference) tp++;
            else if (pred) fp++;
            else if (ps.is_reference) fn++;
        }
    }
    return quality_from_counts(tp, fp, fn);
}

}  // namespace

GridSearchResult grid_search_serial(const std::vector<std::vector<PairStats>>& env_stats,
                                    const std::vector<double>& lambda_d_grid,
                                    const std::vector<double>& lambda_p_grid) {
    if (lambda_d_grid.empty() || lambda_p_grid.empty()) {
        throw std::invalid_argument("grid_search: empty lambda grid");
    }
    std::vector<double> ld_grid = lambda_d_grid, lp_grid = lambda_p_grid;
    std::sort(ld_grid.begin(), ld_grid.end());
    std::sort(lp_grid.begin(), lp_grid.end());
    GridSearchResult best;
    bool have = false;
    for (double ld : ld_grid) {
        for (double lp : lp_grid) {
            GraphQuality q = score_point(env_stats, ld, lp);
            // Strict improvement only, scanning smaller lambdas first, so the
            // tie-break is (smaller lambda_d, then smaller lambda_p).
            if (!have || q.f1 > best.quality.f1) {
                have = true;
                best.params.lambda_d = ld;
                best.params.lambda_p = lp;
                best.quality = q;
            }
        }
    }
    return best;
}

GridSearchResult grid_search_parallel(const std::vector<std::vector<PairStats>>& env_stats,
                                      const std::vector<double>& lambda_d_grid,
                                      const std::vector<double>& lambda_p_grid, int threads) {
    if (lambda_d_grid.empty() || lambda_p_grid.empty()) {
        throw std::invalid_argument("grid_search: empty lambda grid");
    }
    std::vector<double> ld_sorted = lambda_d_grid, lp_sorted = lambda_p_grid;
    std::sort(ld_sorted.begin(), ld_sorted.end());
    std::sort(lp_sorted.begin(), lp_sorted.end());
    const int nd = static_cast<int>(ld_sorted.size());
    const int np = static_cast<int>(lp_sorted.size());
    std::vector<GraphQuality> scores(static_cast<size_t>(nd) * np);
#pragma omp parallel for collapse(2) schedule(dynamic) num_threads(resolve_threads(threads))
    for (int i = 0; i < nd; ++i) {
        for (int j = 0; j < np; ++j) {
            scores[static_cast<size_t>(i) * np + j] =
                score_point(env_stats, ld_sorted[i], lp_sorted[j]);
        }
    }
    // Deterministic serial argmax over integer-count scores.
    GridSearchResult best;
    bool have = false;
    for (int i = 0; i < nd; ++i) {
        for (int j = 0; j < np; ++j) {
            const auto& q = scores[static_cast<size_t>(i) * np + j];
            if (!have || q.f1 > best.quality.f1) {
                have = true;
                best.params.lambda_d = ld_sorted[i];
                best.params.lambda_p = lp_sorted[j];
                best.quality = q;
            }
        }
    }
    return best;
}

GridSearchResult grid_search(const std::vector<const Environment*>& envs,
                             const std::vector<const EdgeProbabilityProvider*>& providers,
                             const std::vector<double>& lambda_d_grid,
                             const std::vector<double>& lambda_p_grid, int threads) {
    if (envs.empty() || envs.size() != providers.size()) {
        throw std::invalid_argument("grid_search: need matching environments and providers");
    }
    std::vector<std::vector<PairStats>> env_stats;
    env_stats.reserve(envs.size());
    for (size_t i = 0; i < envs.size(); ++i) {
        env_stats.push_back(compute_pair_stats(*envs[i], *providers[i], threads));
    }
    return grid_search_parallel(env_stats, lambda_d_grid, lambda_p_grid, threads);
}

}  // namespace navkit
