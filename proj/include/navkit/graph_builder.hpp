#pragma once

#include <vector>

#include "navkit/env_synth.hpp"
#include "navkit/nav_graph.hpp"

namespace navkit {

struct EdgeRuleParams {
    double lambda_d = 0.0;
    double lambda_p = 0.0;
    double max_euclidean = 3.5;
    double max_dz = 3.0;
};

struct GraphQuality {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    long tp = 0, fp = 0, fn = 0;
};

// The pair rule: lambda_d * g/s - lambda_p * p <= 1, with the 3.5 m
// euclidean and 3 m vertical gates. g_unreachable (nullopt) means false.
// s == 0 (coincident panos) is a domain error.
bool edge_rule(const EdgeRuleParams& params, std::optional<double> g, double s, double p,
               double z_i, double z_j);

// Precomputed per-pair inputs to the rule, shared by build_graph and the
// lambda grid search so geodesics are computed once per environment.
struct PairStats {
    NodeId i = 0, j = 0;
    double g = 0.0;         // infinity when unreachable
    double s = 0.0;
    double p = 0.0;
    double dz = 0.0;
    bool is_reference = false;
};

std::vector<PairStats> compute_pair_stats(const Environment& env,
                                          const EdgeProbabilityProvider& provider,
                                          int threads = 0);

// Pair-rule edges unioned with the MST over reachable candidate pairs that
// pass the euclidean/vertical gates (weight max(0, lambda_d*g/s -
// lambda_p*p)). Always connected. Throws if some pano is unreachable from
// every other.
NavGraph build_graph(const Environment& env, const EdgeProbabilityProvider& provider,
                     const EdgeRuleParams& params, int threads = 0);

// Pair-rule edge set alone (no MST union), exposed for scoring.
std::vector<std::pair<NodeId, NodeId>> pair_rule_edges(const std::vector<PairStats>& stats,
                                                       const EdgeRuleParams& params);

struct GridSearchResult {
    EdgeRuleParams params;
    GraphQuality quality;
};

std::vector<double> default_lambda_grid();  // 0, 0.1, ..., 3.0

// Maximizes pooled F1 of the pair rule against reference edges over the
// supplied environments. Ties break toward smaller lambda_d then lambda_p.
// threads = 0 means all cores; the result is independent of thread count.
GridSearchResult grid_search(const std::vector<const Environment*>& envs,
                             const std::vector<const EdgeProbabilityProvider*>& providers,
                             const std::vector<double>& lambda_d_grid,
                             const std::vector<double>& lambda_p_grid, int threads = 0);

// Serial reference implementation, kept for testing the parallel path.
GridSearchResult grid_search_serial(const std::vector<std::vector<PairStats>>& env_stats,
                                    const std::vector<double>& lambda_d_grid,
                                    const std::vector<double>& lambda_p_grid);

GridSearchResult grid_search_parallel(const std::vector<std::vector<PairStats>>& env_stats,
                                      const std::vector<double>& lambda_d_grid,
                                      const std::vector<double>& lambda_p_grid, int threads = 0);

// Precision/recall/F1 over unordered edge pairs. Node sets must match.
GraphQuality graph_quality(const NavGraph& pred, const NavGraph& ref);

GraphQuality quality_from_counts(long tp, long fp, long fn);

}  // namespace navkit
