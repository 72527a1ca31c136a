#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace navkit {

using NodeId = int32_t;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

double euclidean(const Vec3& a, const Vec3& b);
double euclidean_xy(const Vec3& a, const Vec3& b);

struct PanoNode {
    NodeId id = 0;
    Vec3 position;
};

struct Edge {
    NodeId a = 0, b = 0;  // stored with a < b
    double euclidean_length = 0.0;
};

// Undirected navigability graph over panos. Immutable once built; all
// queries are const and safe to call concurrently.
class NavGraph {
public:
    NavGraph() = default;
    NavGraph(std::vector<PanoNode> nodes, const std::vector<std::pair<NodeId, NodeId>>& edges);

    const std::vector<PanoNode>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const PanoNode& node(NodeId id) const;
    bool has_node(NodeId id) const;
    bool has_edge(NodeId a, NodeId b) const;
    // Neighbor ids in ascending order.
    const std::vector<NodeId>& neighbors(NodeId id) const;

    std::string to_json() const;
    // Lengths are recomputed from positions on load and validated against
    // the graph invariants (no self loops, endpoints exist, ids unique).
    static NavGraph from_json(const std::string& text);

private:
    std::vector<PanoNode> nodes_;
    std::vector<Edge> edges_;
    std::map<NodeId, size_t> index_;
    std::map<NodeId, std::vector<NodeId>> adjacency_;
};

struct OccupancyGrid {
    double cell_size = 0.25;
    int width = 0, height = 0;
    std::vector<uint8_t> blocked;  // row-major, height rows of width cells
    double origin_x = 0.0, origin_y = 0.0;

    bool is_blocked(int cx, int cy) const { return blocked[static_cast<size_t>(cy) * width + cx]; }
    bool in_bounds(int cx, int cy) const { return cx >= 0 && cx < width && cy >= 0 && cy < height; }
    int cell_x(double x) const;
    int cell_y(double y) const;
    double center_x(int cx) const { return origin_x + (cx + 0.5) * cell_size; }
    double center_y(int cy) const { return origin_y + (cy + 0.5) * cell_size; }

    std::string to_json() const;
    static OccupancyGrid from_json(const std::string& text);
};

// Shortest obstacle-avoiding distance between two free cells using
// 8-connected moves (cell_size straight, cell_size*sqrt(2) diagonal).
// nullopt when no path exists. Out-of-bounds or blocked endpoints throw.
std::optional<double> geodesic_distance(const OccupancyGrid& grid, double ax, double ay,
                                        double bx, double by);

// Single-source version: distances from (ax, ay) to every free cell,
// infinity where unreachable. Used to batch pano-pair geodesics.
std::vector<double> geodesic_field(const OccupancyGrid& grid, double ax, double ay);

struct ShortestPath {
    std::vector<NodeId> nodes;
    double length = 0.0;
};

// Minimal total euclidean_length path; among equal-length paths the
// lexicographically smallest node-id sequence. nullopt when disconnected.
std::optional<ShortestPath> graph_shortest_path(const NavGraph& graph, NodeId src, NodeId dst);

struct WeightedEdge {
    NodeId a = 0, b = 0;
    double weight = 0.0;
};

// Kruskal MST with deterministic (weight, min id, max id) tie-break.
// Throws listing the components if the candidate set does not connect.
std::vector<WeightedEdge> minimum_spanning_tree(const std::vector<NodeId>& nodes,
                                                std::vector<WeightedEdge> candidates);

bool is_connected(const NavGraph& graph);

}  // namespace navkit
