#include "navkit/episode_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace navkit {

double normalize_angle(double radians) {
    double two_pi = 2.0 * M_PI;
    double r = std::fmod(radians, two_pi);
    if (r < 0) r += two_pi;
    return r;
}

double bearing(const Vec3& from, const Vec3& to) {
    return normalize_angle(std::atan2(to.x - from.x, to.y - from.y));
}

int heading_bin(double radians) {
    double bin_width = 2.0 * M_PI / kHeadingBins;
    int bin = static_cast<int>(std::lround(normalize_angle(radians) / bin_width));
    return bin % kHeadingBins;
}

int elevation_bin(double radians) {
    double deg = radians * 180.0 / M_PI;
    if (deg < -15.0) return 0;
    if (deg > 15.0) return 2;
    return 1;
}

Simulator::Simulator(const NavGraph& graph, const FeatureStore& features)
    : graph_(&graph), features_(&features) {
    if (features.pano_count() != static_cast<int>(graph.nodes().size())) {
        throw std::invalid_argument("Simulator: feature store does not match graph");
    }
    for (size_t i = 0; i < graph.nodes().size(); ++i) {
        pano_index_[graph.nodes()[i].id] = static_cast<int>(i);
    }
}

EpisodeState Simulator::reset(const Trajectory& trajectory, double init_heading,
                              int max_steps) const {
    validate_trajectory(trajectory, *graph_);
    EpisodeState s;
    s.env_id = trajectory.env_id;
    s.current_node = trajectory.nodes.front();
    s.heading = normalize_angle(init_heading);
    s.t = 0;
    s.trace = {s.current_node};
    s.done = false;
    s.max_steps = max_steps > 0 ? max_steps : 2 * trajectory.steps() + 4;
    return s;
}

Observation Simulator::observe(const EpisodeState& state) const {
    if (state.done) throw std::logic_error("observe: episode is done");
    Observation obs;
    obs.views.resize(kViewsPerPano);
    int pano = pano_index_.at(state.current_node);
    const int dim = features_->dim();
    for (int e = 0; e < kElevationBins; ++e) {
        for (int h = 0; h < kHeadingBins; ++h) {
            int v = view_index(e, h);
            View& view = obs.views[v];
            view.feature.assign(features_->view(pano, v), features_->view(pano, v) + dim);
            view.abs_bucket = v;
            // Relative heading snapped to the nearest 30 degree bin.
            double abs_heading = h * (2.0 * M_PI / kHeadingBins);
            int rel_h = heading_bin(abs_heading - state.heading);
            view.rel_bucket = view_index(e, rel_h);
        }
    }
    return obs;
}

std::vector<ActionCandidate> Simulator::candidates(const EpisodeState& state) const {
    if (state.done) throw std::logic_error("candidates: episode is done");
    std::vector<ActionCandidate> out;
    int pano = pano_index_.at(state.current_node);
    const auto& here = graph_->node(state.current_node).position;
    const int dim = features_->dim();
    for (NodeId nbr : graph_->neighbors(state.current_node)) {  // ascending ids
        const auto& there = graph_->node(nbr).position;
        double abs_heading = bearing(here, there);
        double horizontal = euclidean_xy(here, there);
        double elevation = std::atan2(there.z - here.z, std::max(horizontal, 1e-12));
        int e = elevation_bin(elevation);
        int h = heading_bin(abs_heading);
        ActionCandidate c;
        c.target = nbr;
        int v = view_index(e, h);
        c.feature.assign(features_->view(pano, v), features_->view(pano, v) + dim);
        c.abs_bucket = v;
        c.rel_bucket = view_index(e, heading_bin(abs_heading - state.heading));
        out.push_back(std::move(c));
    }
    ActionCandidate stop;
    stop.feature.assign(dim, 0.0f);
    out.push_back(std::move(stop));
    return out;
}

EpisodeState Simulator::step(const EpisodeState& state, const ActionCandidate& action) const {
    if (state.done) throw std::logic_error("step: episode is done");
    if (!action.is_stop() && !graph_->has_edge(state.current_node, action.target)) {
        throw std::invalid_argument("step: action not in candidate set");
    }
    EpisodeState next = state;
    if (action.is_stop()) {
        next.done = true;
        next.done_reason = EpisodeState::DoneReason::stop;
        return next;
    }
    next.heading = bearing(graph_->node(state.current_node).position,
                           graph_->node(action.target).position);
    next.current_node = action.target;
    next.t = state.t + 1;
    next.trace.push_back(action.target);
    if (next.t >= next.max_steps) {
        next.done = true;
        next.done_reason = EpisodeState::DoneReason::cap;
    }
    return next;
}

std::string traces_to_jsonl(const std::vector<EpisodeTrace>& traces) {
    std::ostringstream out;
    for (const auto& t : traces) {
        nlohmann::json j;
        j["env_id"] = t.env_id;
        j["instruction_id"] = t.instruction_id;
        j["trace"] = t.trace;
        j["headings"] = t.headings;
        j["actions"] = t.actions;
        j["done_reason"] = t.done_reason;
        out << j.dump() << "\n";
    }
    return out.str();
}

std::vector<EpisodeTrace> traces_from_jsonl(const std::string& text) {
    std::vector<EpisodeTrace> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        EpisodeTrace t;
        t.env_id = j.at("env_id").get<std::string>();
        t.instruction_id = j.at("instruction_id").get<std::string>();
        t.trace = j.at("trace").get<std::vector<NodeId>>();
        t.headings = j.at("headings").get<std::vector<double>>();
        t.actions = j.at("actions").get<std::vector<NodeId>>();
        t.done_reason = j.at("done_reason").get<std::string>();
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace navkit
