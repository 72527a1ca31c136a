#pragma once

#include <string>
#include <vector>

#include "navkit/env_synth.hpp"
#include "navkit/nav_graph.hpp"
#include "navkit/traj_sampler.hpp"

namespace navkit {

// Direction bucket constants: 12 headings x 3 elevations, bucket 36 reserved
// for STOP in the 37-entry direction tables.
inline constexpr int kHeadingBins = 12;
inline constexpr int kElevationBins = 3;
inline constexpr int kStopBucket = 36;
inline constexpr NodeId kStopAction = -1;

double normalize_angle(double radians);  // into [0, 2*pi)
// Compass bearing of the xy displacement a -> b (0 = +y, clockwise).
double bearing(const Vec3& from, const Vec3& to);
int heading_bin(double radians);         // nearest 30 degree bin, 0..11
int elevation_bin(double radians);       // nearest of {-30, 0, +30} degrees, clamped
inline int view_index(int elevation, int heading) { return elevation * kHeadingBins + heading; }

struct EpisodeState {
    std::string env_id;
    NodeId current_node = 0;
    double heading = 0.0;
    int t = 0;
    std::vector<NodeId> trace;
    bool done = false;
    enum class DoneReason { none, stop, cap } done_reason = DoneReason::none;
    int max_steps = 0;
};

struct View {
    std::vector<float> feature;
    int abs_bucket = 0;
    int rel_bucket = 0;
};

struct Observation {
    std::vector<View> views;  // exactly 36, ordered by (elevation, heading)
};

struct ActionCandidate {
    NodeId target = kStopAction;  // kStopAction encodes STOP
    std::vector<float> feature;   // zero vector for STOP
    int abs_bucket = kStopBucket;
    int rel_bucket = kStopBucket;

    bool is_stop() const { return target == kStopAction; }
};

// Immutable per-environment simulator context; states are values and
// episodes over the same Simulator can run concurrently.
class Simulator {
public:
    Simulator(const NavGraph& graph, const FeatureStore& features);

    const NavGraph& graph() const { return *graph_; }
    const FeatureStore& features() const { return *features_; }

    // max_steps <= 0 picks the default cap 2 * gt_steps + 4.
    EpisodeState reset(const Trajectory& trajectory, double init_heading, int max_steps = 0) const;
    Observation observe(const EpisodeState& state) const;
    std::vector<ActionCandidate> candidates(const EpisodeState& state) const;
    EpisodeState step(const EpisodeState& state, const ActionCandidate& action) const;

private:
    const NavGraph* graph_;
    const FeatureStore* features_;
    std::map<NodeId, int> pano_index_;
};

struct EpisodeTrace {
    std::string env_id;
    std::string instruction_id;
    std::vector<NodeId> trace;
    std::vector<double> headings;
    std::vector<NodeId> actions;  // kStopAction for STOP
    std::string done_reason;      // "stop" or "cap"
};

std::string traces_to_jsonl(const std::vector<EpisodeTrace>& traces);
std::vector<EpisodeTrace> traces_from_jsonl(const std::string& text);

}  // namespace navkit
