#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "navkit/nav_graph.hpp"

namespace navkit {

enum class Split { train, val_seen, val_unseen, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct EnvParams {
    int room_rows = 2;
    int room_cols = 2;
    double room_size_m = 5.0;       // interior side length of one room
    double pano_density = 0.25;     // target panos per square meter of free space
    double cell_size_m = 0.25;
    Split split = Split::train;
};

// 36 views per pano: 12 headings x 3 elevations at 30 degree intervals,
// view index = elevation_index * 12 + heading_index.
inline constexpr int kViewsPerPano = 36;

class FeatureStore {
public:
    FeatureStore() = default;
    FeatureStore(int pano_count, int dim);

    int pano_count() const { return pano_count_; }
    int dim() const { return dim_; }
    const float* view(int pano, int view_index) const;
    float* view(int pano, int view_index);

    // features.bin: 16-byte header (magic, pano count, dim, pad) followed by
    // row-major little-endian float32 [pano][view][dim].
    void save(const std::string& path) const;
    static FeatureStore load(const std::string& path);

private:
    int pano_count_ = 0;
    int dim_ = 0;
    std::vector<float> data_;
};

struct Environment {
    std::string id;
    OccupancyGrid grid;
    std::vector<PanoNode> panos;
    NavGraph reference_graph;
    Split split = Split::train;
    uint64_t seed = 0;
    EnvParams params;
};

// Deterministic procedural environment: a grid of rooms joined by door gaps,
// Poisson-disk pano placement, and a connected line-of-sight reference graph
// (edges <= 3.5 m). Bridge panos are inserted along geodesics until the
// line-of-sight graph is connected, then an MST union over reachable pairs
// acts as a final connectivity guarantee.
Environment generate_environment(uint64_t seed, const EnvParams& params);

// Pairwise edge probability, symmetrized as max over the two query orders.
class EdgeProbabilityProvider {
public:
    virtual ~EdgeProbabilityProvider() = default;
    // Raw ordered query.
    virtual double raw_probability(NodeId i, NodeId j) const = 0;
    double probability(NodeId i, NodeId j) const {
        double p = std::max(raw_probability(i, j), raw_probability(j, i));
        return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
    }
};

// 8 x 16 x 5 pitch/heading/distance bucket view of a source pano's outgoing
// probabilities. Pitch bins cover +-90 degrees, heading bins 360 degrees,
// distance bins 0..3.5 m.
struct EdgeProbabilityBuckets {
    static constexpr int kPitch = 8, kHeading = 16, kDistance = 5;
    std::array<double, kPitch * kHeading * kDistance> p{};
    double& at(int pitch, int heading, int distance) {
        return p[(pitch * kHeading + heading) * kDistance + distance];
    }
    double at(int pitch, int heading, int distance) const {
        return p[(pitch * kHeading + heading) * kDistance + distance];
    }
};

// Stand-in for a learned navigability classifier: probability 0.9 on
// reference edges, 0.1 elsewhere, plus clamped gaussian noise per ordered
// pair, deterministic in the seed.
class OracleEdgeProbability : public EdgeProbabilityProvider {
public:
    OracleEdgeProbability(const Environment& env, double sigma, uint64_t seed);
    double raw_probability(NodeId i, NodeId j) const override;
    // Bucket grid for one source pano, filled with symmetrized pair
    // probabilities of panos within 3.5 m (max over panos sharing a bucket).
    EdgeProbabilityBuckets bucket_grid(NodeId source) const;

    static constexpr double kEdgeBase = 0.9;
    static constexpr double kNonEdgeBase = 0.1;

private:
    const Environment* env_;
    double sigma_;
    uint64_t seed_;
};

// Unit-norm view features: a mix of a spatially smooth per-pano latent, a
// per-view-direction latent shared across panos, and noise. Nearby panos get
// more similar features than distant ones.
FeatureStore generate_features(const Environment& env, uint64_t seed, int dim = 640);

// Environment bundle directory: graph.json, grid.json, features.bin, meta.json.
void save_environment(const Environment& env, const FeatureStore& features, const std::string& dir);
Environment load_environment(const std::string& dir);
FeatureStore load_environment_features(const std::string& dir);

}  // namespace navkit
