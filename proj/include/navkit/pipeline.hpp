#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace navkit {

// Stage parameters for one end-to-end run. Parsed from a single JSON config;
// serialize(parse(text)) is the canonical form (sorted keys, stable dump).
struct RunConfig {
    uint64_t seed = 0;
    std::string out_root = "run";
    std::vector<std::string> stages;  // subset of kStageOrder, dependency order enforced

    // gen-envs
    int env_count = 6;
    int train_envs = 4;  // remainder becomes val_unseen
    int room_rows = 2;
    int room_cols = 2;
    double pano_density = 0.25;
    int feature_dim = 64;
    double sigma = 0.0;  // edge-probability noise

    // sample
    int waypoints = 3;
    int per_env_cap = 50;
    int eval_per_env = 10;

    // train
    int embed_dim = 32;
    double learning_rate = 0.05;
    double momentum = 0.9;
    int epochs = 20;
    int batch_size = 32;
    double mask_rate = 0.0;
    bool use_mlm = false;
    int dagger_rounds = 1;
    int dagger_epochs = 10;

    int threads = 0;  // 0 = all cores
};

extern const std::vector<std::string> kStageOrder;

// Throws std::invalid_argument on malformed or unknown-stage configs.
RunConfig parse_config(const std::string& text);
std::string serialize_config(const RunConfig& config);

struct StageRecord {
    std::string name;
    uint64_t seed = 0;
    double duration_ms = 0.0;
    std::map<std::string, uint64_t> output_hashes;  // path relative to out_root -> FNV-1a
    nlohmann::json stats;
};

struct Manifest {
    uint64_t seed = 0;
    std::string config;  // canonical config text
    std::vector<StageRecord> stages;

    std::string to_json() const;
    static Manifest from_json(const std::string& text);
};

uint64_t hash_file(const std::string& path);

// Runs the requested stages in dependency order under the config's out_root
// (overridable via the NAVKIT_OUT_ROOT environment variable) and writes
// manifest.json there. Stage failure is reported as std::runtime_error with
// the stage named.
Manifest run_pipeline(const RunConfig& config);

// Markdown summary of a manifest: graph quality, sampling stats, evaluation
// metrics, first-error histogram, with published reference values labeled
// as not reproducible at desk scale.
std::string report(const Manifest& manifest);

}  // namespace navkit
