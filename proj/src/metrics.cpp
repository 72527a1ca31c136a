#include "navkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace navkit {

double navigation_error(const NavGraph& graph, NodeId final_node, NodeId goal) {
    auto sp = graph_shortest_path(graph, final_node, goal);
    if (!sp) throw std::runtime_error("navigation_error: goal unreachable");
    return sp->length;
}

bool success(double ne_m, double threshold) {
    if (ne_m < 0) throw std::domain_error("success: negative navigation error");
    return ne_m < threshold;
}

double spl(bool succeeded, double shortest_len, double traveled_len) {
    if (shortest_len < 0 || traveled_len < 0) throw std::domain_error("spl: negative length");
    if (!succeeded) return 0.0;
    double denom = std::max(shortest_len, traveled_len);
    if (denom == 0.0) return 1.0;
    return shortest_len / denom;
}

namespace {

// Pairwise geodesic costs pred x ref via one Dijkstra per ref node.
std::vector<std::vector<double>> node_costs(const std::vector<NodeId>& pred,
                                            const std::vector<NodeId>& ref,
                                            const NavGraph& graph) {
    std::vector<std::vector<double>> cost(pred.size(), std::vector<double>(ref.size()));
    for (size_t j = 0; j < ref.size(); ++j) {
        for (size_t i = 0; i < pred.size(); ++i) {
            cost[i][j] = navigation_error(graph, pred[i], ref[j]);
        }
    }
    return cost;
}

}  // namespace

double dtw(const std::vector<NodeId>& pred, const std::vector<NodeId>& ref, const NavGraph& graph) {
    if (pred.empty() || ref.empty()) throw std::invalid_argument("dtw: empty path");
    auto cost = node_costs(pred, ref, graph);
    const size_t n = pred.size(), m = ref.size();
    std::vector<std::vector<double>> dp(n, std::vector<double>(m));
    dp[0][0] = cost[0][0];
    for (size_t i = 1; i < n; ++i) dp[i][0] = dp[i - 1][0] + cost[i][0];
    for (size_t j = 1; j < m; ++j) dp[0][j] = dp[0][j - 1] + cost[0][j];
    for (size_t i = 1; i < n; ++i) {
        for (size_t j = 1; j < m; ++j) {
            dp[i][j] = cost[i][j] + std::min({dp[i - 1][j], dp[i][j - 1], dp[i - 1][j - 1]});
        }
    }
    return dp[n - 1][m - 1];
}

double ndtw(const std::vector<NodeId>& pred, const std::vector<NodeId>& ref, const NavGraph& graph,
            double threshold) {
    return std::exp(-dtw(pred, ref, graph) / (static_cast<double>(ref.size()) * threshold));
}

double sdtw(const std::vector<NodeId>& pred, const std::vector<NodeId>& ref, const NavGraph& graph,
            double threshold) {
    double ne = navigation_error(graph, pred.back(), ref.back());
    return success(ne, threshold) ? ndtw(pred, ref, graph, threshold) : 0.0;
}

std::optional<int> first_error_step(const std::vector<NodeId>& pred,
                                    const std::vector<NodeId>& ref) {
    size_t n = std::min(pred.size(), ref.size());
    for (size_t t = 0; t < n; ++t) {
        if (pred[t] != ref[t]) return static_cast<int>(t);
    }
    if (pred.size() != ref.size()) return static_cast<int>(n);
    return std::nullopt;
}

EvalResult evaluate_episode(const std::vector<NodeId>& pred, const std::vector<NodeId>& ref,
                            const NavGraph& graph) {
    if (pred.empty() || ref.empty()) throw std::invalid_argument("evaluate_episode: empty path");
    EvalResult r;
    r.ne_m = navigation_error(graph, pred.back(), ref.back());
    r.success = success(r.ne_m);
    double traveled = 0.0;
    for (size_t i = 0; i + 1 < pred.size(); ++i) {
        traveled += euclidean(graph.node(pred[i]).position, graph.node(pred[i + 1]).position);
    }
    double shortest = navigation_error(graph, pred.front(), ref.back());
    r.spl = spl(r.success, shortest, traveled);
    r.ndtw = ndtw(pred, ref, graph);
    r.sdtw = r.success ? r.ndtw : 0.0;
    r.first_error_step = first_error_step(pred, ref);
    return r;
}

std::vector<EvalResult> evaluate_episodes_serial(const std::vector<Episode>& episodes) {
    std::vector<EvalResult> out(episodes.size());
    for (size_t i = 0; i < episodes.size(); ++i) {
        out[i] = evaluate_episode(*episodes[i].pred, *episodes[i].ref, *episodes[i].graph);
    }
    return out;
}

std::vector<EvalResult> evaluate_episodes(const std::vector<Episode>& episodes, int threads) {
#ifdef _OPENMP
    int n = threads > 0 ? threads : omp_get_max_threads();
#else
    int n = 1;
    (void)threads;
#endif
    std::vector<EvalResult> out(episodes.size());
#pragma omp parallel for schedule(dynamic) num_threads(n)
    for (long i = 0; i < static_cast<long>(episodes.size()); ++i) {
        out[i] = evaluate_episode(*episodes[i].pred, *episodes[i].ref, *episodes[i].graph);
    }
    return out;
}

Aggregate aggregate(const std::vector<EvalResult>& results) {
    if (results.empty()) throw std::invalid_argument("aggregate: no results");
    Aggregate a;
    a.count = results.size();
    for (const auto& r : results) {
        a.mean_ne_m += r.ne_m;
        a.sr_percent += r.success ? 100.0 : 0.0;
        a.mean_spl += r.spl;
        a.mean_ndtw += r.ndtw;
        a.mean_sdtw += r.sdtw;
        if (r.first_error_step) a.first_error_histogram[*r.first_error_step]++;
    }
    double n = static_cast<double>(a.count);
    a.mean_ne_m /= n;
    a.sr_percent /= n;
    a.mean_spl /= n;
    a.mean_ndtw /= n;
    a.mean_sdtw /= n;
    return a;
}

}  // namespace navkit
