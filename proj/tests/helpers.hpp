// Test-side oracles, implemented independently of the library code:
// Floyd-Warshall shortest paths, exhaustive DTW alignments, permutation TSP,
// spanning-tree enumeration, and random graph generation.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "navkit/nav_graph.hpp"
#include "navkit/rng.hpp"

namespace oracle {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct FloydWarshall {
    std::vector<navkit::NodeId> ids;
    std::map<navkit::NodeId, int> index;
    std::vector<std::vector<double>> dist;
    std::vector<std::vector<double>> weight;

    explicit FloydWarshall(const navkit::NavGraph& g) {
        for (const auto& n : g.nodes()) {
            index[n.id] = static_cast<int>(ids.size());
            ids.push_back(n.id);
        }
        int n = static_cast<int>(ids.size());
        dist.assign(n, std::vector<double>(n, kInf));
        weight = dist;
        for (int i = 0; i < n; ++i) dist[i][i] = 0.0;
        for (const auto& e : g.edges()) {
            int a = index.at(e.a), b = index.at(e.b);
            dist[a][b] = dist[b][a] = e.euclidean_length;
            weight[a][b] = weight[b][a] = e.euclidean_length;
        }
        for (int k = 0; k < n; ++k) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    if (dist[i][k] + dist[k][j] < dist[i][j]) {
                        dist[i][j] = dist[i][k] + dist[k][j];
                    }
                }
            }
        }
    }

    double d(navkit::NodeId a, navkit::NodeId b) const {
        return dist[index.at(a)][index.at(b)];
    }

    // Lexicographically smallest node-id sequence among minimal paths,
    // reconstructed greedily from the distance matrix.
    std::vector<navkit::NodeId> lex_path(const navkit::NavGraph& g, navkit::NodeId src,
                                         navkit::NodeId dst, double tol_scale = 1e-9) const {
        if (d(src, dst) == kInf) return {};
        std::vector<navkit::NodeId> path{src};
        navkit::NodeId cur = src;
        double total = d(src, dst);
        double tol = tol_scale * (1.0 + total);
        while (cur != dst) {
            navkit::NodeId next = cur;
            for (navkit::NodeId v : g.neighbors(cur)) {  // ascending
                int iu = index.at(cur), iv = index.at(v), id = index.at(dst);
                if (dist[iv][id] < dist[iu][id] &&
                    std::abs(weight[iu][iv] + dist[iv][id] - dist[iu][id]) <= tol) {
                    next = v;
                    break;
                }
            }
            if (next == cur) return {};  // reconstruction failed
            cur = next;
            path.push_back(cur);
        }
        return path;
    }
};

// Exhaustive DTW: minimum over all monotone boundary-aligned alignments,
// explored recursively over the three moves.
inline double dtw_exhaustive(const std::vector<std::vector<double>>& cost) {
    size_t n = cost.size(), m = cost[0].size();
    std::vector<std::vector<double>> memo(n, std::vector<double>(m, -1.0));
    auto rec = [&](auto&& self, size_t i, size_t j) -> double {
        if (memo[i][j] >= 0.0) return memo[i][j];
        double best;
        if (i == 0 && j == 0) {
            best = cost[0][0];
        } else {
            best = kInf;
            if (i > 0) best = std::min(best, self(self, i - 1, j));
            if (j > 0) best = std::min(best, self(self, i, j - 1));
            if (i > 0 && j > 0) best = std::min(best, self(self, i - 1, j - 1));
            best += cost[i][j];
        }
        return memo[i][j] = best;
    };
    return rec(rec, n - 1, m - 1);
}

// Open-path TSP by full permutation enumeration with lexicographic tie-break.
struct TspOracle {
    std::vector<navkit::NodeId> order;
    double length = kInf;
};

inline TspOracle tsp_permutations(const FloydWarshall& fw, std::vector<navkit::NodeId> w) {
    std::sort(w.begin(), w.end());
    TspOracle best;
    do {
        double len = 0.0;
        for (size_t i = 0; i + 1 < w.size(); ++i) len += fw.d(w[i], w[i + 1]);
        if (len < best.length - 1e-12 ||
            (len <= best.length + 1e-12 && (best.order.empty() || w < best.order))) {
            // within tolerance, keep the lexicographically smaller sequence
            if (len < best.length) best.length = len;
            best.order = w;
        }
    } while (std::next_permutation(w.begin(), w.end()));
    return best;
}

// All spanning trees of a small graph via edge-subset enumeration.
inline double mst_enumeration(const std::vector<navkit::NodeId>& nodes,
                              const std::vector<navkit::WeightedEdge>& edges) {
    size_t n = nodes.size(), m = edges.size();
    std::map<navkit::NodeId, int> idx;
    for (size_t i = 0; i < n; ++i) idx[nodes[i]] = static_cast<int>(i);
    double best = kInf;
    for (size_t mask = 0; mask < (size_t{1} << m); ++mask) {
        if (static_cast<size_t>(__builtin_popcountll(mask)) != n - 1) continue;
        std::vector<int> parent(n);
        for (size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
        auto find = [&](int x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        double total = 0.0;
        int merges = 0;
        for (size_t e = 0; e < m; ++e) {
            if (!(mask & (size_t{1} << e))) continue;
            int a = find(idx.at(edges[e].a)), b = find(idx.at(edges[e].b));
            total += edges[e].weight;
            if (a != b) {
                parent[a] = b;
                merges++;
            }
        }
        if (merges == static_cast<int>(n - 1) && total < best) best = total;
    }
    return best;
}

// Random connected geometric-ish graph for oracle comparisons.
inline navkit::NavGraph random_graph(navkit::Rng& rng, int n, double extra_edge_prob = 0.3) {
    std::vector<navkit::PanoNode> nodes;
    for (int i = 0; i < n; ++i) {
        nodes.push_back({i, {rng.uniform(0.0, 20.0), rng.uniform(0.0, 20.0),
                             rng.uniform(0.0, 1.5)}});
    }
    std::vector<std::pair<navkit::NodeId, navkit::NodeId>> edges;
    for (int i = 1; i < n; ++i) {
        edges.emplace_back(static_cast<navkit::NodeId>(rng.uniform_int(i)), i);  // spanning
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (rng.uniform() < extra_edge_prob) edges.emplace_back(i, j);
        }
    }
    return navkit::NavGraph(std::move(nodes), edges);
}

}  // namespace oracle
