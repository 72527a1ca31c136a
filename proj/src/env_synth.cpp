#include "navkit/env_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <queue>
#include <stdexcept>

#include <json.hpp>

#include "navkit/rng.hpp"

namespace navkit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxEdgeM = 3.5;
}

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val_seen: return "val_seen";
        case Split::val_unseen: return "val_unseen";
        case Split::test: return "test";
    }
    throw std::logic_error("split_name: bad split");
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val_seen") return Split::val_seen;
    if (name == "val_unseen") return Split::val_unseen;
    if (name == "test") return Split::test;
    throw std::invalid_argument("unknown split: " + name);
}

FeatureStore::FeatureStore(int pano_count, int dim)
    : pano_count_(pano_count),
      dim_(dim),
      data_(static_cast<size_t>(pano_count) * kViewsPerPano * dim, 0.0f) {}

const float* FeatureStore::view(int pano, int view_index) const {
    return data_.data() + (static_cast<size_t>(pano) * kViewsPerPano + view_index) * dim_;
}

float* FeatureStore::view(int pano, int view_index) {
    return data_.data() + (static_cast<size_t>(pano) * kViewsPerPano + view_index) * dim_;
}

namespace {
constexpr char kFeatureMagic[4] = {'N', 'V', 'K', 'F'};
}

void FeatureStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("FeatureStore: cannot write " + path);
    uint32_t header[3] = {static_cast<uint32_t>(pano_count_), static_cast<uint32_t>(dim_), 0};
    out.write(kFeatureMagic, 4);
    out.write(reinterpret_cast<const char*>(header), 12);
    out.write(reinterpret_cast<const char*>(data_.data()),
              static_cast<std::streamsize>(data_.size() * sizeof(float)));
}

FeatureStore FeatureStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("FeatureStore: cannot read " + path);
    char magic[4];
    uint32_t header[3];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(header), 12);
    if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0) {
        throw std::runtime_error("FeatureStore: bad header in " + path);
    }
    FeatureStore fs(static_cast<int>(header[0]), static_cast<int>(header[1]));
    in.read(reinterpret_cast<char*>(fs.data_.data()),
            static_cast<std::streamsize>(fs.data_.size() * sizeof(float)));
    if (!in) throw std::runtime_error("FeatureStore: truncated " + path);
    return fs;
}

namespace {

// All cells crossed by the Bresenham line between two cells are free.
bool line_of_sight(const OccupancyGrid& grid, int x0, int y0, int x1, int y1) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        if (grid.is_blocked(x0, y0)) return false;
        if (x0 == x1 && y0 == y1) return true;
        int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

// Dijkstra over the grid with parent tracking, for tracing bridge paths.
struct GridSearchResult {
    std::vector<double> dist;
    std::vector<int> parent;
};

GridSearchResult grid_dijkstra(const OccupancyGrid& grid, int start_cell) {
    const int w = grid.width;
    GridSearchResult r;
    r.dist.assign(grid.blocked.size(), kInf);
    r.parent.assign(grid.blocked.size(), -1);
    const double straight = grid.cell_size, diagonal = grid.cell_size * std::sqrt(2.0);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    r.dist[start_cell] = 0.0;
    heap.push({0.0, start_cell});
    while (!heap.empty()) {
        auto [d, c] = heap.top();
        heap.pop();
        if (d > r.dist[c]) continue;
        int cx = c % w, cy = c / w;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                int nx = cx + dx, ny = cy + dy;
                if (!grid.in_bounds(nx, ny) || grid.is_blocked(nx, ny)) continue;
                double nd = d + ((dx && dy) ? diagonal : straight);
                int n = ny * w + nx;
                if (nd < r.dist[n]) {
                    r.dist[n] = nd;
                    r.parent[n] = c;
                    heap.push({nd, n});
                }
            }
        }
    }
    return r;
}

OccupancyGrid make_floorplan(const EnvParams& params, Rng& rng) {
    const int room = std::max(4, static_cast<int>(std::lround(params.room_size_m / params.cell_size_m)));
    const int w = params.room_cols * room + params.room_cols + 1;
    const int h = params.room_rows * room + params.room_rows + 1;
    OccupancyGrid grid;
    grid.cell_size = params.cell_size_m;
    grid.width = w;
    grid.height = h;
    grid.origin_x = 0.0;
    grid.origin_y = 0.0;
    grid.blocked.assign(static_cast<size_t>(w) * h, 0);
    auto block = [&](int x, int y) { grid.blocked[static_cast<size_t>(y) * w + x] = 1; };
    // Walls every (room + 1) cells in each axis, plus the outer boundary.
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (x % (room + 1) == 0 || y % (room + 1) == 0) block(x, y);
        }
    }
    const int door = std::max(3, static_cast<int>(std::lround(0.8 / params.cell_size_m)));
    // One door per internal wall segment, at a seeded offset.
    for (int wy = 1; wy < params.room_rows; ++wy) {
        int y = wy * (room + 1);
        for (int rc = 0; rc < params.room_cols; ++rc) {
            int x0 = rc * (room + 1) + 1;
            int off = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(room - door + 1)));
            for (int k = 0; k < door; ++k) grid.blocked[static_cast<size_t>(y) * w + x0 + off + k] = 0;
        }
    }
    for (int wx = 1; wx < params.room_cols; ++wx) {
        int x = wx * (room + 1);
        for (int rr = 0; rr < params.room_rows; ++rr) {
            int y0 = rr * (room + 1) + 1;
            int off = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(room - door + 1)));
            for (int k = 0; k < door; ++k) grid.blocked[static_cast<size_t>(y0 + off + k) * w + x] = 0;
        }
    }
    return grid;
}

std::vector<std::pair<NodeId, NodeId>> line_of_sight_edges(const OccupancyGrid& grid,
                                                           const std::vector<PanoNode>& panos) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (size_t i = 0; i < panos.size(); ++i) {
        for (size_t j = i + 1; j < panos.size(); ++j) {
            const auto& a = panos[i].position;
            const auto& b = panos[j].position;
            if (euclidean(a, b) > kMaxEdgeM) continue;
            if (std::abs(a.z - b.z) > 3.0) continue;
            if (line_of_sight(grid, grid.cell_x(a.x), grid.cell_y(a.y), grid.cell_x(b.x),
                              grid.cell_y(b.y))) {
                edges.emplace_back(panos[i].id, panos[j].id);
            }
        }
    }
    return edges;
}

std::vector<int> components_of(const std::vector<PanoNode>& panos,
                               const std::vector<std::pair<NodeId, NodeId>>& edges) {
    std::map<NodeId, int> index;
    for (size_t i = 0; i < panos.size(); ++i) index[panos[i].id] = static_cast<int>(i);
    std::vector<int> comp(panos.size());
    for (size_t i = 0; i < panos.size(); ++i) comp[i] = static_cast<int>(i);
    auto find = [&](int x) {
        while (comp[x] != x) x = comp[x] = comp[comp[x]];
        return x;
    };
    for (const auto& [a, b] : edges) {
        int ra = find(index[a]), rb = find(index[b]);
        if (ra != rb) comp[rb] = ra;
    }
    for (size_t i = 0; i < comp.size(); ++i) comp[i] = find(static_cast<int>(i));
    return comp;
}

}  // namespace

Environment generate_environment(uint64_t seed, const EnvParams& params) {
    if (params.room_rows <= 0 || params.room_cols <= 0 || params.room_size_m <= 0 ||
        params.pano_density < 0 || params.cell_size_m <= 0) {
        throw std::invalid_argument("generate_environment: params must be positive");
    }
    Rng rng(derive_seed(seed, "env"));
    Environment env;
    env.seed = seed;
    env.params = params;
    env.split = params.split;
    env.id = "env-" + std::to_string(seed);
    env.grid = make_floorplan(params, rng);

    std::vector<int> free_cells;
    for (int c = 0; c < env.grid.width * env.grid.height; ++c) {
        if (!env.grid.blocked[c]) free_cells.push_back(c);
    }
    if (free_cells.empty()) throw std::invalid_argument("generate_environment: no free cells");

    // Poisson-disk pano placement at cell centers (dart throwing).
    const double free_area = free_cells.size() * params.cell_size_m * params.cell_size_m;
    const int target = std::max(1, static_cast<int>(std::lround(params.pano_density * free_area)));
    const double min_dist = std::max(1.2, 0.7 / std::sqrt(std::max(params.pano_density, 1e-6)));
    std::vector<PanoNode> panos;
    NodeId next_id = 0;
    auto cell_center = [&](int c) {
        return Vec3{env.grid.center_x(c % env.grid.width), env.grid.center_y(c / env.grid.width), 0.0};
    };
    int attempts = target * 60;
    while (static_cast<int>(panos.size()) < target && attempts-- > 0) {
        int c = free_cells[rng.uniform_int(free_cells.size())];
        Vec3 pos = cell_center(c);
        bool ok = true;
        for (const auto& p : panos) {
            if (euclidean(p.position, pos) < min_dist) {
                ok = false;
                break;
            }
        }
        if (ok) panos.push_back({next_id++, pos});
    }
    if (panos.empty()) panos.push_back({next_id++, cell_center(free_cells[0])});

    // Bridge disconnected line-of-sight components by dropping panos along
    // the geodesic between the closest cross-component pair.
    auto edges = line_of_sight_edges(env.grid, panos);
    for (int round = 0; round < 64; ++round) {
        auto comp = components_of(panos, edges);
        bool single = std::all_of(comp.begin(), comp.end(), [&](int c) { return c == comp[0]; });
        if (single) break;
        double best = kInf;
        size_t bi = 0, bj = 0;
        std::vector<GridSearchResult> fields;
        for (size_t i = 0; i < panos.size(); ++i) {
            const auto& p = panos[i].position;
            fields.push_back(grid_dijkstra(
                env.grid, env.grid.cell_y(p.y) * env.grid.width + env.grid.cell_x(p.x)));
            for (size_t j = 0; j < i; ++j) {
                if (comp[i] == comp[j]) continue;
                const auto& q = panos[j].position;
                double d = fields[i].dist[env.grid.cell_y(q.y) * env.grid.width + env.grid.cell_x(q.x)];
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (best == kInf) {
            throw std::runtime_error("generate_environment: free space is disconnected");
        }
        const auto& q = panos[bj].position;
        int cell = env.grid.cell_y(q.y) * env.grid.width + env.grid.cell_x(q.x);
        std::vector<int> path;
        for (int c = cell; c != -1; c = fields[bi].parent[c]) path.push_back(c);
        double spacing = 0.8, acc = 0.0;
        for (size_t k = 1; k + 1 < path.size(); ++k) {
            int px = path[k] % env.grid.width, py = path[k] / env.grid.width;
            int qx = path[k - 1] % env.grid.width, qy = path[k - 1] / env.grid.width;
            acc += (px != qx && py != qy) ? env.grid.cell_size * std::sqrt(2.0) : env.grid.cell_size;
            if (acc >= spacing) {
                acc = 0.0;
                Vec3 pos = cell_center(path[k]);
                bool dup = std::any_of(panos.begin(), panos.end(), [&](const PanoNode& p) {
                    return euclidean(p.position, pos) < 0.3;
                });
                if (!dup) panos.push_back({next_id++, pos});
            }
        }
        edges = line_of_sight_edges(env.grid, panos);
    }

    // Final connectivity guarantee: union with the MST over reachable pairs.
    {
        auto comp = components_of(panos, edges);
        bool single = std::all_of(comp.begin(), comp.end(), [&](int c) { return c == comp[0]; });
        if (!single) {
            std::vector<NodeId> ids;
            for (const auto& p : panos) ids.push_back(p.id);
            std::vector<WeightedEdge> candidates;
            for (size_t i = 0; i < panos.size(); ++i) {
                const auto& p = panos[i].position;
                auto field = geodesic_field(env.grid, p.x, p.y);
                for (size_t j = i + 1; j < panos.size(); ++j) {
                    const auto& q = panos[j].position;
                    if (euclidean(p, q) > kMaxEdgeM) continue;
                    double g = field[env.grid.cell_y(q.y) * env.grid.width + env.grid.cell_x(q.x)];
                    if (g < kInf) candidates.push_back({panos[i].id, panos[j].id, g});
                }
            }
            for (const auto& e : minimum_spanning_tree(ids, candidates)) {
                if (std::none_of(edges.begin(), edges.end(), [&](const auto& x) {
                        return (x.first == e.a && x.second == e.b) ||
                               (x.first == e.b && x.second == e.a);
                    })) {
                    edges.emplace_back(e.a, e.b);
                }
            }
        }
    }

    env.panos = panos;
    env.reference_graph = NavGraph(panos, edges);
    if (!is_connected(env.reference_graph)) {
        throw std::runtime_error("generate_environment: reference graph not connected");
    }
    return env;
}

OracleEdgeProbability::OracleEdgeProbability(const Environment& env, double sigma, uint64_t seed)
    : env_(&env), sigma_(sigma), seed_(seed) {
    if (sigma < 0) throw std::invalid_argument("OracleEdgeProbability: sigma must be >= 0");
}

double OracleEdgeProbability::raw_probability(NodeId i, NodeId j) const {
    double base = env_->reference_graph.has_edge(i, j) ? kEdgeBase : kNonEdgeBase;
    if (sigma_ == 0.0) return base;
    uint64_t h = hash_combine(hash_combine(derive_seed(seed_, "edge-prob"), static_cast<uint64_t>(i)),
                              static_cast<uint64_t>(j));
    double p = base + Rng(h).normal(0.0, sigma_);
    return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

EdgeProbabilityBuckets OracleEdgeProbability::bucket_grid(NodeId source) const {
    EdgeProbabilityBuckets grid;
    const auto& src = env_->reference_graph.node(source).position;
    for (const auto& p : env_->panos) {
        if (p.id == source) continue;
        double s = euclidean(src, p.position);
        if (s > kMaxEdgeM || s == 0.0) continue;
        double horizontal = euclidean_xy(src, p.position);
        double pitch = std::atan2(p.position.z - src.z, std::max(horizontal, 1e-12));
        double heading = std::atan2(p.position.x - src.x, p.position.y - src.y);
        if (heading < 0) heading += 2.0 * M_PI;
        int pb = std::clamp(static_cast<int>((pitch + M_PI / 2) / M_PI * EdgeProbabilityBuckets::kPitch),
                            0, EdgeProbabilityBuckets::kPitch - 1);
        int hb = std::clamp(static_cast<int>(heading / (2.0 * M_PI) * EdgeProbabilityBuckets::kHeading),
                            0, EdgeProbabilityBuckets::kHeading - 1);
        int db = std::clamp(static_cast<int>(s / kMaxEdgeM * EdgeProbabilityBuckets::kDistance), 0,
                            EdgeProbabilityBuckets::kDistance - 1);
        grid.at(pb, hb, db) = std::max(grid.at(pb, hb, db), probability(source, p.id));
    }
    return grid;
}

FeatureStore generate_features(const Environment& env, uint64_t seed, int dim) {
    if (dim < 8) throw std::invalid_argument("generate_features: dim must be >= 8");
    const int n = static_cast<int>(env.panos.size());
    FeatureStore fs(n, dim);

    // Smooth random field for pano latents: low spatial frequencies so that
    // nearby panos correlate and panos >10 m apart do not.
    Rng field_rng(derive_seed(seed, "feature-field", env.id));
    std::vector<double> kx(dim), ky(dim), phase(dim);
    for (int d = 0; d < dim; ++d) {
        double freq = field_rng.uniform(2.0 * M_PI / 12.0, 2.0 * M_PI / 5.0);
        double angle = field_rng.uniform(0.0, 2.0 * M_PI);
        kx[d] = freq * std::cos(angle);
        ky[d] = freq * std::sin(angle);
        phase[d] = field_rng.uniform(0.0, 2.0 * M_PI);
    }
    Rng dir_rng(derive_seed(seed, "feature-dir", env.id));
    std::vector<double> dir_latent(static_cast<size_t>(kViewsPerPano) * dim);
    for (auto& v : dir_latent) v = dir_rng.normal();

    const double w_pano = 0.65, w_dir = 0.30, w_noise = 0.05;
    for (int p = 0; p < n; ++p) {
        const auto& pos = env.panos[p].position;
        std::vector<double> pano_latent(dim);
        double norm = 0.0;
        for (int d = 0; d < dim; ++d) {
            pano_latent[d] = std::cos(kx[d] * pos.x + ky[d] * pos.y + phase[d]);
            norm += pano_latent[d] * pano_latent[d];
        }
        norm = std::sqrt(std::max(norm, 1e-12));
        for (int d = 0; d < dim; ++d) pano_latent[d] /= norm;
        Rng noise_rng(derive_seed(seed, "feature-noise", env.id + "/" + std::to_string(env.panos[p].id)));
        for (int v = 0; v < kViewsPerPano; ++v) {
            double dnorm = 0.0;
            const double* dl = dir_latent.data() + static_cast<size_t>(v) * dim;
            for (int d = 0; d < dim; ++d) dnorm += dl[d] * dl[d];
            dnorm = std::sqrt(std::max(dnorm, 1e-12));
            float* out = fs.view(p, v);
            double fnorm = 0.0;
            for (int d = 0; d < dim; ++d) {
                double val = w_pano * pano_latent[d] + w_dir * dl[d] / dnorm + w_noise * noise_rng.normal() / std::sqrt(dim);
                out[d] = static_cast<float>(val);
                fnorm += val * val;
            }
            fnorm = std::sqrt(std::max(fnorm, 1e-12));
            for (int d = 0; d < dim; ++d) out[d] = static_cast<float>(out[d] / fnorm);
        }
    }
    return fs;
}

void save_environment(const Environment& env, const FeatureStore& features, const std::string& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
        if (!out) throw std::runtime_error("save_environment: cannot write " + name);
        out << text;
    };
    write("graph.json", env.reference_graph.to_json());
    write("grid.json", env.grid.to_json());
    nlohmann::json meta;
    meta["id"] = env.id;
    meta["seed"] = env.seed;
    meta["split"] = split_name(env.split);
    meta["params"] = {{"room_rows", env.params.room_rows},
                      {"room_cols", env.params.room_cols},
                      {"room_size_m", env.params.room_size_m},
                      {"pano_density", env.params.pano_density},
                      {"cell_size_m", env.params.cell_size_m}};
    write("meta.json", meta.dump(2));
    features.save((std::filesystem::path(dir) / "features.bin").string());
}

namespace {
std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("load_environment: cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
}  // namespace

Environment load_environment(const std::string& dir) {
    std::filesystem::path base(dir);
    Environment env;
    env.reference_graph = NavGraph::from_json(slurp(base / "graph.json"));
    env.grid = OccupancyGrid::from_json(slurp(base / "grid.json"));
    auto meta = nlohmann::json::parse(slurp(base / "meta.json"));
    env.id = meta.at("id").get<std::string>();
    env.seed = meta.at("seed").get<uint64_t>();
    env.split = split_from_name(meta.at("split").get<std::string>());
    const auto& p = meta.at("params");
    env.params.room_rows = p.at("room_rows").get<int>();
    env.params.room_cols = p.at("room_cols").get<int>();
    env.params.room_size_m = p.at("room_size_m").get<double>();
    env.params.pano_density = p.at("pano_density").get<double>();
    env.params.cell_size_m = p.at("cell_size_m").get<double>();
    env.params.split = env.split;
    env.panos = env.reference_graph.nodes();
    return env;
}

FeatureStore load_environment_features(const std::string& dir) {
    return FeatureStore::load((std::filesystem::path(dir) / "features.bin").string());
}

}  // namespace navkit
