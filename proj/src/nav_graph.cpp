#include "navkit/nav_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace navkit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double euclidean(const Vec3& a, const Vec3& b) {
    return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                     (a.z - b.z) * (a.z - b.z));
}

double euclidean_xy(const Vec3& a, const Vec3& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

NavGraph::NavGraph(std::vector<PanoNode> nodes, const std::vector<std::pair<NodeId, NodeId>>& edges)
    : nodes_(std::move(nodes)) {
    for (size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (!std::isfinite(n.position.x) || !std::isfinite(n.position.y) ||
            !std::isfinite(n.position.z)) {
            throw std::invalid_argument("NavGraph: non-finite node position");
        }
        if (!index_.emplace(n.id, i).second) {
            throw std::invalid_argument("NavGraph: duplicate node id " + std::to_string(n.id));
        }
        adjacency_[n.id];  // ensure entry for isolated nodes
    }
    std::set<std::pair<NodeId, NodeId>> seen;
    for (auto [a, b] : edges) {
        if (a == b) throw std::invalid_argument("NavGraph: self-loop at node " + std::to_string(a));
        if (!index_.count(a) || !index_.count(b)) {
            throw std::invalid_argument("NavGraph: edge endpoint missing");
        }
        if (a > b) std::swap(a, b);
        if (!seen.insert({a, b}).second) continue;
        Edge e;
        e.a = a;
        e.b = b;
        e.euclidean_length = euclidean(node(a).position, node(b).position);
        edges_.push_back(e);
        adjacency_[a].push_back(b);
        adjacency_[b].push_back(a);
    }
    std::sort(edges_.begin(), edges_.end(),
              [](const Edge& x, const Edge& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    for (auto& [id, nbrs] : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

const PanoNode& NavGraph::node(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("NavGraph: unknown node " + std::to_string(id));
    return nodes_[it->second];
}

bool NavGraph::has_node(NodeId id) const { return index_.count(id) > 0; }

bool NavGraph::has_edge(NodeId a, NodeId b) const {
    auto it = adjacency_.find(a);
    if (it == adjacency_.end()) return false;
    return std::binary_search(it->second.begin(), it->second.end(), b);
}

const std::vector<NodeId>& NavGraph::neighbors(NodeId id) const {
    auto it = adjacency_.find(id);
    if (it == adjacency_.end())
        throw std::out_of_range("NavGraph: unknown node " + std::to_string(id));
    return it->second;
}

std::string NavGraph::to_json() const {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : nodes_) {
        j["nodes"].push_back(
            {{"id", n.id}, {"x", n.position.x}, {"y", n.position.y}, {"z", n.position.z}});
    }
    j["edges"] = nlohmann::json::array();
    for (const auto& e : edges_) j["edges"].push_back({e.a, e.b});
    return j.dump();
}

NavGraph NavGraph::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    std::vector<PanoNode> nodes;
    for (const auto& n : j.at("nodes")) {
        nodes.push_back({n.at("id").get<NodeId>(),
                         {n.at("x").get<double>(), n.at("y").get<double>(), n.at("z").get<double>()}});
    }
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (const auto& e : j.at("edges")) {
        edges.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
    }
    return NavGraph(std::move(nodes), edges);
}

int OccupancyGrid::cell_x(double x) const {
    return static_cast<int>(std::floor((x - origin_x) / cell_size));
}

int OccupancyGrid::cell_y(double y) const {
    return static_cast<int>(std::floor((y - origin_y) / cell_size));
}

std::string OccupancyGrid::to_json() const {
    nlohmann::json j;
    j["cell_size"] = cell_size;
    j["origin"] = {origin_x, origin_y};
    std::vector<std::string> rows;
    rows.reserve(height);
    for (int y = 0; y < height; ++y) {
        std::string row(width, '0');
        for (int x = 0; x < width; ++x) {
            if (is_blocked(x, y)) row[x] = '1';
        }
        rows.push_back(std::move(row));
    }
    j["rows"] = rows;
    return j.dump();
}

OccupancyGrid OccupancyGrid::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    OccupancyGrid g;
    g.cell_size = j.at("cell_size").get<double>();
    g.origin_x = j.at("origin").at(0).get<double>();
    g.origin_y = j.at("origin").at(1).get<double>();
    auto rows = j.at("rows").get<std::vector<std::string>>();
    if (rows.empty() || rows[0].empty()) throw std::invalid_argument("OccupancyGrid: empty grid");
    if (g.cell_size <= 0) throw std::invalid_argument("OccupancyGrid: cell_size must be positive");
    g.height = static_cast<int>(rows.size());
    g.width = static_cast<int>(rows[0].size());
    g.blocked.assign(static_cast<size_t>(g.width) * g.height, 0);
    for (int y = 0; y < g.height; ++y) {
        if (static_cast<int>(rows[y].size()) != g.width) {
            throw std::invalid_argument("OccupancyGrid: ragged rows");
        }
        for (int x = 0; x < g.width; ++x) {
            g.blocked[static_cast<size_t>(y) * g.width + x] = rows[y][x] == '1';
        }
    }
    return g;
}

namespace {

void check_free_cell(const OccupancyGrid& grid, double x, double y, const char* which) {
    int cx = grid.cell_x(x), cy = grid.cell_y(y);
    if (!grid.in_bounds(cx, cy)) {
        throw std::domain_error(std::string("geodesic_distance: ") + which + " point out of bounds");
    }
    if (grid.is_blocked(cx, cy)) {
        throw std::domain_error(std::string("geodesic_distance: ") + which + " point in blocked cell");
    }
}

}  // namespace

std::vector<double> geodesic_field(const OccupancyGrid& grid, double ax, double ay) {
    check_free_cell(grid, ax, ay, "source");
    const int w = grid.width, h = grid.height;
    const double straight = grid.cell_size;
    const double diagonal = grid.cell_size * std::sqrt(2.0);
    std::vector<double> dist(static_cast<size_t>(w) * h, kInf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    int start = grid.cell_y(ay) * w + grid.cell_x(ax);
    dist[start] = 0.0;
    heap.push({0.0, start});
    while (!heap.empty()) {
        auto [d, c] = heap.top();
        heap.pop();
        if (d > dist[c]) continue;
        int cx = c % w, cy = c / w;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                int nx = cx + dx, ny = cy + dy;
                if (!grid.in_bounds(nx, ny) || grid.is_blocked(nx, ny)) continue;
                double nd = d + ((dx != 0 && dy != 0) ? diagonal : straight);
                int n = ny * w + nx;
                if (nd < dist[n]) {
                    dist[n] = nd;
                    heap.push({nd, n});
                }
            }
        }
    }
    return dist;
}

std::optional<double> geodesic_distance(const OccupancyGrid& grid, double ax, double ay,
                                        double bx, double by) {
    check_free_cell(grid, bx, by, "target");
    auto field = geodesic_field(grid, ax, ay);
    double d = field[static_cast<size_t>(grid.cell_y(by)) * grid.width + grid.cell_x(bx)];
    if (d == kInf) return std::nullopt;
    return d;
}

std::optional<ShortestPath> graph_shortest_path(const NavGraph& graph, NodeId src, NodeId dst) {
    graph.node(src);
    graph.node(dst);
    if (src == dst) return ShortestPath{{src}, 0.0};

    // Dijkstra from dst, then a greedy walk from src that always takes the
    // smallest-id neighbor lying on some shortest path. This yields the
    // lexicographically smallest node-id sequence among minimal paths.
    std::map<NodeId, double> dist;
    for (const auto& n : graph.nodes()) dist[n.id] = kInf;
    dist[dst] = 0.0;
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.push({0.0, dst});
    std::map<std::pair<NodeId, NodeId>, double> weight;
    for (const auto& e : graph.edges()) {
        weight[{e.a, e.b}] = e.euclidean_length;
        weight[{e.b, e.a}] = e.euclidean_length;
    }
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (NodeId v : graph.neighbors(u)) {
            double nd = d + weight[{u, v}];
            if (nd < dist[v]) {
                dist[v] = nd;
                heap.push({nd, v});
            }
        }
    }
    if (dist[src] == kInf) return std::nullopt;

    ShortestPath path;
    path.nodes.push_back(src);
    NodeId cur = src;
    const double tol = 1e-9 * (1.0 + dist[src]);
    while (cur != dst) {
        NodeId next = cur;
        for (NodeId v : graph.neighbors(cur)) {  // ascending ids
            if (dist[v] < dist[cur] &&
                std::abs(weight[{cur, v}] + dist[v] - dist[cur]) <= tol) {
                next = v;
                break;
            }
        }
        if (next == cur) throw std::logic_error("graph_shortest_path: walk failed to progress");
        path.length += weight[{cur, next}];
        cur = next;
        path.nodes.push_back(cur);
    }
    return path;
}

namespace {

class UnionFind {
public:
    explicit UnionFind(const std::vector<NodeId>& nodes) {
        for (NodeId n : nodes) parent_[n] = n;
    }
    NodeId find(NodeId x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    bool unite(NodeId a, NodeId b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent_[b] = a;
        return true;
    }

private:
    std::map<NodeId, NodeId> parent_;
};

}  // namespace

std::vector<WeightedEdge> minimum_spanning_tree(const std::vector<NodeId>& nodes,
                                                std::vector<WeightedEdge> candidates) {
    for (auto& e : candidates) {
        if (e.a > e.b) std::swap(e.a, e.b);
    }
    std::sort(candidates.begin(), candidates.end(), [](const WeightedEdge& x, const WeightedEdge& y) {
        return std::tie(x.weight, x.a, x.b) < std::tie(y.weight, y.a, y.b);
    });
    UnionFind uf(nodes);
    std::vector<WeightedEdge> tree;
    for (const auto& e : candidates) {
        if (uf.unite(e.a, e.b)) tree.push_back(e);
    }
    if (nodes.size() > 0 && tree.size() != nodes.size() - 1) {
        std::map<NodeId, std::vector<NodeId>> components;
        for (NodeId n : nodes) components[uf.find(n)].push_back(n);
        std::ostringstream msg;
        msg << "minimum_spanning_tree: candidate edges do not connect all nodes; components:";
        for (const auto& [root, members] : components) {
            msg << " {";
            for (size_t i = 0; i < members.size(); ++i) msg << (i ? "," : "") << members[i];
            msg << "}";
        }
        throw std::invalid_argument(msg.str());
    }
    return tree;
}

bool is_connected(const NavGraph& graph) {
    if (graph.nodes().size() <= 1) return true;
    std::set<NodeId> visited;
    std::vector<NodeId> stack{graph.nodes()[0].id};
    visited.insert(stack[0]);
    while (!stack.empty()) {
        NodeId u = stack.back();
        stack.pop_back();
        for (NodeId v : graph.neighbors(u)) {
            if (visited.insert(v).second) stack.push_back(v);
        }
    }
    return visited.size() == graph.nodes().size();
}

}  // namespace navkit
