#include "navkit/traj_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace navkit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void validate_trajectory(const Trajectory& traj, const NavGraph& graph) {
    if (traj.nodes.empty()) throw std::invalid_argument("trajectory: empty node sequence");
    double length = 0.0;
    for (size_t i = 0; i + 1 < traj.nodes.size(); ++i) {
        NodeId a = traj.nodes[i], b = traj.nodes[i + 1];
        if (!graph.has_edge(a, b)) {
            throw std::invalid_argument("trajectory: nodes " + std::to_string(a) + "," +
                                        std::to_string(b) + " not adjacent");
        }
        length += euclidean(graph.node(a).position, graph.node(b).position);
    }
    if (std::abs(length - traj.length_m) > 1e-9) {
        throw std::invalid_argument("trajectory: length_m inconsistent with edges");
    }
}

namespace {

// Pairwise shortest-path lengths between waypoints.
std::vector<std::vector<double>> waypoint_costs(const NavGraph& graph,
                                                const std::vector<NodeId>& wps) {
    const size_t n = wps.size();
    std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            auto sp = graph_shortest_path(graph, wps[i], wps[j]);
            if (!sp) {
                throw std::invalid_argument("tsp_order: waypoints " + std::to_string(wps[i]) + "," +
                                            std::to_string(wps[j]) + " unreachable");
            }
            cost[i][j] = cost[j][i] = sp->length;
        }
    }
    return cost;
}

TspResult enumerate_tsp(const std::vector<NodeId>& wps,
                        const std::vector<std::vector<double>>& cost) {
    std::vector<size_t> perm(wps.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    TspResult best;
    best.length = kInf;
    do {
        double len = 0.0;
        for (size_t i = 0; i + 1 < perm.size(); ++i) len += cost[perm[i]][perm[i + 1]];
        std::vector<NodeId> order;
        for (size_t i : perm) order.push_back(wps[i]);
        if (len < best.length - 1e-12 ||
            (std::abs(len - best.length) <= 1e-12 && order < best.order)) {
            best.length = len;
            best.order = order;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Held-Karp over (subset, last) states; path reconstruction re-applies the
// same (cost, id-sequence) ordering so ties match the enumeration.
TspResult held_karp(const std::vector<NodeId>& wps, const std::vector<std::vector<double>>& cost) {
    const size_t n = wps.size();
    const size_t full = size_t{1} << n;
    std::vector<std::vector<double>> dp(full, std::vector<double>(n, kInf));
    for (size_t i = 0; i < n; ++i) dp[size_t{1} << i][i] = 0.0;
    for (size_t mask = 1; mask < full; ++mask) {
        for (size_t last = 0; last < n; ++last) {
            if (dp[mask][last] == kInf || !(mask & (size_t{1} << last))) continue;
            for (size_t next = 0; next < n; ++next) {
                if (mask & (size_t{1} << next)) continue;
                size_t nm = mask | (size_t{1} << next);
                double nd = dp[mask][last] + cost[last][next];
                if (nd < dp[nm][next]) dp[nm][next] = nd;
            }
        }
    }
    double best_len = kInf;
    for (size_t last = 0; last < n; ++last) best_len = std::min(best_len, dp[full - 1][last]);

    // Walk forward greedily: at each step pick the smallest-id waypoint that
    // still admits an optimal completion. suffix[mask][cur] = best cost to
    // finish having visited mask and standing at cur.
    std::vector<std::vector<double>> suffix(full, std::vector<double>(n, kInf));
    for (size_t i = 0; i < n; ++i) suffix[full - 1][i] = 0.0;
    std::vector<size_t> masks;
    for (size_t mask = 1; mask < full; ++mask) masks.push_back(mask);
    std::sort(masks.begin(), masks.end(), [](size_t a, size_t b) {
        return __builtin_popcountll(a) > __builtin_popcountll(b);
    });
    for (size_t mask : masks) {
        if (mask == full - 1) continue;
        for (size_t cur = 0; cur < n; ++cur) {
            if (!(mask & (size_t{1} << cur))) continue;
            for (size_t next = 0; next < n; ++next) {
                if (mask & (size_t{1} << next)) continue;
                double v = cost[cur][next] + suffix[mask | (size_t{1} << next)][next];
                if (v < suffix[mask][cur]) suffix[mask][cur] = v;
            }
        }
    }
    std::vector<size_t> id_order(n);
    for (size_t i = 0; i < n; ++i) id_order[i] = i;
    std::sort(id_order.begin(), id_order.end(),
              [&](size_t a, size_t b) { return wps[a] < wps[b]; });

    TspResult result;
    result.length = best_len;
    const double tol = 1e-9 * (1.0 + best_len);
    size_t mask = 0, cur = n;  // cur == n marks "no start chosen yet"
    double spent = 0.0;
    for (size_t step = 0; step < n; ++step) {
        for (size_t cand : id_order) {
            if (mask & (size_t{1} << cand)) continue;
            size_t nm = mask | (size_t{1} << cand);
            double move = (cur == n) ? 0.0 : cost[cur][cand];
            if (spent + move + suffix[nm][cand] <= best_len + tol) {
                result.order.push_back(wps[cand]);
                spent += move;
                mask = nm;
                cur = cand;
                break;
            }
        }
    }
    if (result.order.size() != n) throw std::logic_error("held_karp: reconstruction failed");
    return result;
}

}  // namespace

TspResult tsp_order(const NavGraph& graph, const std::vector<NodeId>& waypoints) {
    if (waypoints.size() < 2) throw std::invalid_argument("tsp_order: need at least 2 waypoints");
    if (waypoints.size() > 12) throw std::invalid_argument("tsp_order: more than 12 waypoints unsupported");
    std::vector<NodeId> wps = waypoints;
    std::sort(wps.begin(), wps.end());
    if (std::adjacent_find(wps.begin(), wps.end()) != wps.end()) {
        throw std::invalid_argument("tsp_order: duplicate waypoint");
    }
    auto cost = waypoint_costs(graph, wps);
    return wps.size() <= 6 ? enumerate_tsp(wps, cost) : held_karp(wps, cost);
}

std::optional<Trajectory> sample_trajectory(const NavGraph& graph, const std::string& env_id,
                                            const SampleConfig& config, Rng& rng) {
    if (config.waypoints < 2) throw std::invalid_argument("sample_trajectory: waypoints must be >= 2");
    const auto& nodes = graph.nodes();
    if (nodes.size() < static_cast<size_t>(config.waypoints)) {
        throw std::invalid_argument("sample_trajectory: graph smaller than waypoint count");
    }
    // Uniform draw without replacement.
    std::vector<size_t> idx(nodes.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<NodeId> wps;
    for (int k = 0; k < config.waypoints; ++k) {
        size_t pick = k + rng.uniform_int(idx.size() - k);
        std::swap(idx[k], idx[pick]);
        wps.push_back(nodes[idx[k]].id);
    }
    auto tsp = tsp_order(graph, wps);

    Trajectory traj;
    traj.env_id = env_id;
    for (size_t leg = 0; leg + 1 < tsp.order.size(); ++leg) {
        auto sp = graph_shortest_path(graph, tsp.order[leg], tsp.order[leg + 1]);
        if (!sp) throw std::logic_error("sample_trajectory: waypoints became unreachable");
        size_t start = traj.nodes.empty() ? 0 : 1;  // merge the junction node
        for (size_t i = start; i < sp->nodes.size(); ++i) traj.nodes.push_back(sp->nodes[i]);
        traj.length_m += sp->length;
    }
    if (traj.steps() > config.max_steps || traj.length_m > config.max_length_m) {
        return std::nullopt;
    }
    return traj;
}

namespace {

std::vector<Trajectory> sample_envs(std::vector<EnvGraph>& envs, const SampleConfig& config,
                                    bool pre_explore) {
    std::sort(envs.begin(), envs.end(),
              [](const EnvGraph& a, const EnvGraph& b) { return a.env_id < b.env_id; });
    std::vector<Trajectory> out;
    for (const auto& env : envs) {
        Rng rng(derive_seed(config.seed, "sample", env.env_id));
        int accepted = 0;
        // Rejection sampling with a bounded attempt budget per environment.
        int attempts = config.per_env_cap * 40;
        while (accepted < config.per_env_cap && attempts-- > 0) {
            auto traj = sample_trajectory(*env.graph, env.env_id, config, rng);
            if (traj) {
                traj->pre_explore = pre_explore;
                out.push_back(std::move(*traj));
                accepted++;
            }
        }
    }
    return out;
}

}  // namespace

std::vector<Trajectory> sample_dataset(std::vector<EnvGraph> envs, const SampleConfig& config) {
    if (envs.empty()) throw std::invalid_argument("sample_dataset: no environments");
    return sample_envs(envs, config, false);
}

std::vector<Trajectory> pre_exploration_sample(std::vector<EnvGraph> envs,
                                               const SampleConfig& config) {
    std::vector<EnvGraph> filtered;
    for (auto& e : envs) {
        if (e.split == Split::val_unseen || e.split == Split::test) filtered.push_back(e);
    }
    if (filtered.empty()) return {};
    return sample_envs(filtered, config, true);
}

TrajectoryStats trajectory_stats(const std::vector<Trajectory>& trajs) {
    TrajectoryStats s;
    s.count = trajs.size();
    for (const auto& t : trajs) {
        s.mean_steps += t.steps();
        s.mean_length_m += t.length_m;
    }
    if (s.count > 0) {
        s.mean_steps /= static_cast<double>(s.count);
        s.mean_length_m /= static_cast<double>(s.count);
    }
    return s;
}

std::string trajectories_to_jsonl(const std::vector<Trajectory>& trajs) {
    std::ostringstream out;
    for (const auto& t : trajs) {
        nlohmann::json j;
        j["env_id"] = t.env_id;
        j["nodes"] = t.nodes;
        j["length_m"] = t.length_m;
        j["steps"] = t.steps();
        j["pre_explore"] = t.pre_explore;
        out << j.dump() << "\n";
    }
    return out.str();
}

std::vector<Trajectory> trajectories_from_jsonl(const std::string& text) {
    std::vector<Trajectory> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        Trajectory t;
        t.env_id = j.at("env_id").get<std::string>();
        t.nodes = j.at("nodes").get<std::vector<NodeId>>();
        t.length_m = j.at("length_m").get<double>();
        t.pre_explore = j.at("pre_explore").get<bool>();
        if (j.at("steps").get<int>() != t.steps()) {
            throw std::invalid_argument("trajectory jsonl: steps field inconsistent");
        }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace navkit
