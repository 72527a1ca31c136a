#include "navkit/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "navkit/dagger_expert.hpp"
#include "navkit/env_synth.hpp"
#include "navkit/episode_sim.hpp"
#include "navkit/graph_builder.hpp"
#include "navkit/il_pipeline.hpp"
#include "navkit/metrics.hpp"
#include "navkit/nav_graph.hpp"
#include "navkit/rng.hpp"
#include "navkit/traj_sampler.hpp"

namespace fs = std::filesystem;

namespace navkit {

const std::vector<std::string> kStageOrder = {
    "gen-envs", "fit-lambdas", "build-graphs", "sample",
    "episodes", "emit",        "train",        "evaluate",
};

RunConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("parse_config: invalid JSON: ") + e.what());
    }
    RunConfig c;
    auto opt = [&](const nlohmann::json& o, const char* key, auto& field) {
        if (o.contains(key)) field = o.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt(j, "seed", c.seed);
    opt(j, "out_root", c.out_root);
    if (j.contains("stages")) {
        if (j.at("stages").is_string() && j.at("stages").get<std::string>() == "all") {
            c.stages = kStageOrder;
        } else {
            c.stages = j.at("stages").get<std::vector<std::string>>();
        }
    }
    for (const auto& s : c.stages) {
        if (std::find(kStageOrder.begin(), kStageOrder.end(), s) == kStageOrder.end()) {
            throw std::invalid_argument("parse_config: unknown stage '" + s + "'");
        }
    }
    if (j.contains("envs")) {
        const auto& e = j.at("envs");
        opt(e, "count", c.env_count);
        opt(e, "train", c.train_envs);
        opt(e, "room_rows", c.room_rows);
        opt(e, "room_cols", c.room_cols);
        opt(e, "pano_density", c.pano_density);
        opt(e, "feature_dim", c.feature_dim);
        opt(e, "sigma", c.sigma);
    }
    if (j.contains("sample")) {
        const auto& s = j.at("sample");
        opt(s, "waypoints", c.waypoints);
        opt(s, "per_env_cap", c.per_env_cap);
        opt(s, "eval_per_env", c.eval_per_env);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        opt(t, "embed_dim", c.embed_dim);
        opt(t, "learning_rate", c.learning_rate);
        opt(t, "momentum", c.momentum);
        opt(t, "epochs", c.epochs);
        opt(t, "batch_size", c.batch_size);
        opt(t, "mask_rate", c.mask_rate);
        opt(t, "use_mlm", c.use_mlm);
        opt(t, "dagger_rounds", c.dagger_rounds);
        opt(t, "dagger_epochs", c.dagger_epochs);
    }
    opt(j, "threads", c.threads);
    if (c.env_count < 1 || c.train_envs < 1 || c.train_envs > c.env_count) {
        throw std::invalid_argument("parse_config: need 1 <= train <= count environments");
    }
    if (c.sigma < 0 || c.mask_rate < 0 || c.mask_rate > 1) {
        throw std::invalid_argument("parse_config: sigma/mask_rate out of range");
    }
    return c;
}

std::string serialize_config(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["out_root"] = c.out_root;
    j["stages"] = c.stages;
    j["envs"] = {{"count", c.env_count},         {"train", c.train_envs},
                 {"room_rows", c.room_rows},     {"room_cols", c.room_cols},
                 {"pano_density", c.pano_density}, {"feature_dim", c.feature_dim},
                 {"sigma", c.sigma}};
    j["sample"] = {{"waypoints", c.waypoints},
                   {"per_env_cap", c.per_env_cap},
                   {"eval_per_env", c.eval_per_env}};
    j["train"] = {{"embed_dim", c.embed_dim},     {"learning_rate", c.learning_rate},
                  {"momentum", c.momentum},       {"epochs", c.epochs},
                  {"batch_size", c.batch_size},   {"mask_rate", c.mask_rate},
                  {"use_mlm", c.use_mlm},         {"dagger_rounds", c.dagger_rounds},
                  {"dagger_epochs", c.dagger_epochs}};
    j["threads"] = c.threads;
    return j.dump(2) + "\n";
}

std::string Manifest::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["config"] = config;
    j["stages"] = nlohmann::json::array();
    for (const auto& s : stages) {
        nlohmann::json outputs = nlohmann::json::object();
        for (const auto& [path, h] : s.output_hashes) outputs[path] = h;
        j["stages"].push_back({{"name", s.name},
                               {"seed", s.seed},
                               {"duration_ms", s.duration_ms},
                               {"outputs", outputs},
                               {"stats", s.stats}});
    }
    return j.dump(2) + "\n";
}

Manifest Manifest::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    Manifest m;
    m.seed = j.at("seed").get<uint64_t>();
    m.config = j.at("config").get<std::string>();
    for (const auto& s : j.at("stages")) {
        StageRecord r;
        r.name = s.at("name").get<std::string>();
        r.seed = s.at("seed").get<uint64_t>();
        r.duration_ms = s.at("duration_ms").get<double>();
        for (const auto& [path, h] : s.at("outputs").items()) {
            r.output_hashes[path] = h.get<uint64_t>();
        }
        r.stats = s.at("stats");
        m.stages.push_back(std::move(r));
    }
    return m;
}

uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("hash_file: cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a(ss.str());
}

namespace {

std::string env_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "env%03d", i);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct EnvBundle {
    std::string name;
    Environment env;
    NavGraph built;
    FeatureStore features;
};

// Loads the per-environment artifacts a stage needs; `need_built` additionally
// requires build-graphs to have run.
std::vector<EnvBundle> load_envs(const fs::path& root, const RunConfig& cfg, bool need_built,
                                 bool need_features) {
    std::vector<EnvBundle> out;
    for (int i = 0; i < cfg.env_count; ++i) {
        EnvBundle b;
        b.name = env_name(i);
        fs::path dir = root / "envs" / b.name;
        if (!fs::exists(dir / "meta.json")) {
            throw std::runtime_error("missing environment " + b.name + "; run gen-envs first");
        }
        b.env = load_environment(dir.string());
        if (need_built) {
            fs::path built = dir / "built_graph.json";
            if (!fs::exists(built)) {
                throw std::runtime_error("missing built graph for " + b.name +
                                         "; run build-graphs first");
            }
            b.built = NavGraph::from_json(read_text(built));
        }
        if (need_features) b.features = load_environment_features(dir.string());
        out.push_back(std::move(b));
    }
    return out;
}

EdgeRuleParams load_fitted_params(const fs::path& root) {
    fs::path p = root / "params.json";
    if (!fs::exists(p)) throw std::runtime_error("missing params.json; run fit-lambdas first");
    auto j = nlohmann::json::parse(read_text(p));
    EdgeRuleParams params;
    params.lambda_d = j.at("lambda_d").get<double>();
    params.lambda_p = j.at("lambda_p").get<double>();
    return params;
}

double episode_init_heading(const Trajectory& traj, const NavGraph& graph) {
    if (traj.steps() < 1) return 0.0;
    return bearing(graph.node(traj.nodes[0]).position, graph.node(traj.nodes[1]).position);
}

std::vector<EpisodeSpec> make_episodes(const std::vector<Trajectory>& trajs,
                                       const std::vector<EnvBundle>& envs) {
    std::map<std::string, const NavGraph*> graphs;
    for (const auto& b : envs) graphs[b.env.id] = &b.built;
    std::map<std::string, int> counter;
    std::vector<EpisodeSpec> out;
    for (const auto& traj : trajs) {
        const NavGraph* g = graphs.at(traj.env_id);
        EpisodeSpec e;
        e.env_id = traj.env_id;
        e.gt = traj;
        e.init_heading = episode_init_heading(traj, *g);
        std::string id = traj.env_id + "/" + std::to_string(counter[traj.env_id]++);
        e.instruction = synthesize_instruction(traj, *g, e.init_heading, id);
        out.push_back(std::move(e));
    }
    return out;
}

struct EvalBundle {
    std::vector<EpisodeSpec> episodes;
    std::vector<std::unique_ptr<Simulator>> sim_storage;
    std::vector<const Simulator*> sims;
};

EvalBundle prepare_eval(const fs::path& root, const std::vector<EnvBundle>& envs,
                        const std::string& episodes_file) {
    EvalBundle b;
    b.episodes = episodes_from_jsonl(read_text(root / episodes_file));
    std::map<std::string, const Simulator*> by_env;
    for (const auto& e : envs) {
        b.sim_storage.push_back(std::make_unique<Simulator>(e.built, e.features));
        by_env[e.env.id] = b.sim_storage.back().get();
    }
    for (const auto& ep : b.episodes) {
        auto it = by_env.find(ep.env_id);
        if (it == by_env.end()) throw std::runtime_error("episode references unknown env " + ep.env_id);
        b.sims.push_back(it->second);
    }
    return b;
}

EpisodeTrace random_rollout(const EpisodeSpec& episode, const Simulator& sim, Rng& rng) {
    EpisodeState state = sim.reset(episode.gt, episode.init_heading);
    EpisodeTrace trace;
    trace.env_id = episode.env_id;
    trace.instruction_id = episode.instruction.id;
    trace.headings.push_back(state.heading);
    while (!state.done) {
        auto cands = sim.candidates(state);
        const ActionCandidate& chosen = cands[rng.uniform_int(cands.size())];
        trace.actions.push_back(chosen.target);
        state = sim.step(state, chosen);
        if (!state.done) trace.headings.push_back(state.heading);
    }
    trace.trace = state.trace;
    trace.done_reason = state.done_reason == EpisodeState::DoneReason::stop ? "stop" : "cap";
    return trace;
}

nlohmann::json aggregate_to_json(const Aggregate& a) {
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [step, count] : a.first_error_histogram) hist[std::to_string(step)] = count;
    return {{"count", a.count},       {"mean_ne_m", a.mean_ne_m}, {"sr_percent", a.sr_percent},
            {"mean_spl", a.mean_spl}, {"mean_ndtw", a.mean_ndtw}, {"mean_sdtw", a.mean_sdtw},
            {"first_error_histogram", hist}};
}

}  // namespace

Manifest run_pipeline(const RunConfig& config) {
    fs::path root = config.out_root;
    if (const char* override_root = std::getenv("NAVKIT_OUT_ROOT")) root = override_root;
    fs::create_directories(root);

    Manifest manifest;
    manifest.seed = config.seed;
    manifest.config = serialize_config(config);

    auto requested = [&](const std::string& stage) {
        return std::find(config.stages.begin(), config.stages.end(), stage) != config.stages.end();
    };

    for (const auto& stage : kStageOrder) {
        if (!requested(stage)) continue;
        StageRecord rec;
        rec.name = stage;
        rec.seed = derive_seed(config.seed, stage);
        rec.stats = nlohmann::json::object();
        std::vector<std::string> outputs;  // relative paths hashed at stage end
        auto t0 = std::chrono::steady_clock::now();
        try {
            if (stage == "gen-envs") {
                EnvParams params;
                params.room_rows = config.room_rows;
                params.room_cols = config.room_cols;
                params.pano_density = config.pano_density;
                double degree_sum = 0.0;
                long pano_sum = 0;
                for (int i = 0; i < config.env_count; ++i) {
                    std::string name = env_name(i);
                    params.split = i < config.train_envs ? Split::train : Split::val_unseen;
                    Environment env =
                        generate_environment(derive_seed(config.seed, "gen-env", name), params);
                    env.id = name;
                    FeatureStore features = generate_features(
                        env, derive_seed(config.seed, "features", name), config.feature_dim);
                    fs::path dir = root / "envs" / name;
                    save_environment(env, features, dir.string());
                    for (const std::string& f :
                         {"graph.json", "grid.json", "meta.json", "features.bin"}) {
                        outputs.push_back("envs/" + name + "/" + f);
                    }
                    pano_sum += static_cast<long>(env.panos.size());
                    degree_sum += 2.0 * env.reference_graph.edges().size() /
                                  std::max<size_t>(env.panos.size(), 1);
                }
                rec.stats["env_count"] = config.env_count;
                rec.stats["mean_panos"] = static_cast<double>(pano_sum) / config.env_count;
                rec.stats["mean_degree"] = degree_sum / config.env_count;
            } else if (stage == "fit-lambdas") {
                auto envs = load_envs(root, config, false, false);
                std::vector<const Environment*> train;
                std::vector<std::unique_ptr<OracleEdgeProbability>> providers;
                std::vector<const EdgeProbabilityProvider*> provider_ptrs;
                for (const auto& b : envs) {
                    if (b.env.split != Split::train) continue;
                    train.push_back(&b.env);
                    providers.push_back(std::make_unique<OracleEdgeProbability>(
                        b.env, config.sigma, derive_seed(config.seed, "edge-noise", b.env.id)));
                    provider_ptrs.push_back(providers.back().get());
                }
                auto grid = default_lambda_grid();
                auto result = grid_search(train, provider_ptrs, grid, grid, config.threads);
                nlohmann::json j = {{"lambda_d", result.params.lambda_d},
                                    {"lambda_p", result.params.lambda_p},
                                    {"f1", result.quality.f1},
                                    {"precision", result.quality.precision},
                                    {"recall", result.quality.recall}};
                write_text(root / "params.json", j.dump(2) + "\n");
                outputs.push_back("params.json");
                rec.stats = j;
            } else if (stage == "build-graphs") {
                auto envs = load_envs(root, config, false, false);
                EdgeRuleParams params = load_fitted_params(root);
                double f1_sum = 0.0;
                int connected = 0;
                for (const auto& b : envs) {
                    OracleEdgeProbability provider(
                        b.env, config.sigma, derive_seed(config.seed, "edge-noise", b.env.id));
                    NavGraph built = build_graph(b.env, provider, params, config.threads);
                    write_text(root / "envs" / b.name / "built_graph.json", built.to_json());
                    outputs.push_back("envs/" + b.name + "/built_graph.json");
                    f1_sum += graph_quality(built, b.env.reference_graph).f1;
                    connected += is_connected(built) ? 1 : 0;
                }
                rec.stats["mean_f1_vs_reference"] = f1_sum / envs.size();
                rec.stats["connected"] = connected;
                rec.stats["env_count"] = static_cast<int>(envs.size());
            } else if (stage == "sample") {
                auto envs = load_envs(root, config, true, false);
                SampleConfig sc;
                sc.waypoints = config.waypoints;
                sc.per_env_cap = config.per_env_cap;
                sc.seed = derive_seed(config.seed, "sample");
                std::vector<EnvGraph> train_envs, eval_envs;
                for (const auto& b : envs) {
                    EnvGraph g{b.env.id, &b.built, b.env.split};
                    (b.env.split == Split::train ? train_envs : eval_envs).push_back(g);
                }
                auto train_trajs = sample_dataset(train_envs, sc);
                SampleConfig ec = sc;
                ec.per_env_cap = config.eval_per_env;
                ec.seed = derive_seed(config.seed, "sample-eval");
                auto eval_trajs = pre_exploration_sample(eval_envs, ec);
                write_text(root / "trajs_train.jsonl", trajectories_to_jsonl(train_trajs));
                write_text(root / "trajs_eval.jsonl", trajectories_to_jsonl(eval_trajs));
                outputs.push_back("trajs_train.jsonl");
                outputs.push_back("trajs_eval.jsonl");
                auto ts = trajectory_stats(train_trajs);
                rec.stats["train"] = {{"count", ts.count},
                                      {"mean_steps", ts.mean_steps},
                                      {"mean_length_m", ts.mean_length_m}};
                auto es = trajectory_stats(eval_trajs);
                rec.stats["eval"] = {{"count", es.count},
                                     {"mean_steps", es.mean_steps},
                                     {"mean_length_m", es.mean_length_m}};
            } else if (stage == "episodes") {
                auto envs = load_envs(root, config, true, false);
                for (const char* which : {"train", "eval"}) {
                    auto trajs = trajectories_from_jsonl(
                        read_text(root / (std::string("trajs_") + which + ".jsonl")));
                    auto episodes = make_episodes(trajs, envs);
                    std::string file = std::string("episodes_") + which + ".jsonl";
                    write_text(root / file, episodes_to_jsonl(episodes));
                    outputs.push_back(file);
                    rec.stats[which] = static_cast<int>(episodes.size());
                }
            } else if (stage == "emit") {
                auto envs = load_envs(root, config, true, true);
                auto bundle = prepare_eval(root, envs, "episodes_train.jsonl");
                std::vector<StepExample> examples;
                for (size_t e = 0; e < bundle.episodes.size(); ++e) {
                    auto ex = emit_step_examples(bundle.episodes[e], *bundle.sims[e],
                                                 config.mask_rate,
                                                 derive_seed(config.seed, "mask"));
                    examples.insert(examples.end(), ex.begin(), ex.end());
                }
                save_examples(examples, config.feature_dim, (root / "ds").string());
                outputs.push_back("ds/examples.bin");
                outputs.push_back("ds/index.jsonl");
                rec.stats["examples"] = static_cast<int>(examples.size());
            } else if (stage == "train") {
                int feature_dim = 0;
                auto dataset = load_examples((root / "ds").string(), &feature_dim);
                TrainConfig tc;
                tc.embed_dim = config.embed_dim;
                tc.learning_rate = config.learning_rate;
                tc.momentum = config.momentum;
                tc.epochs = config.epochs;
                tc.batch_size = config.batch_size;
                tc.use_mlm = config.use_mlm;
                tc.seed = derive_seed(config.seed, "train-bc");
                auto bc = train_bc(dataset, feature_dim, tc);
                write_text(root / "policy_bc.json", bc.policy.to_json());
                outputs.push_back("policy_bc.json");
                rec.stats["bc_final_loss"] = bc.loss_curve.back();
                rec.stats["bc_loss_curve"] = bc.loss_curve;
                if (config.dagger_rounds > 0) {
                    auto envs = load_envs(root, config, true, true);
                    auto bundle = prepare_eval(root, envs, "episodes_train.jsonl");
                    LinearPolicy current = bc.policy;
                    for (int round = 0; round < config.dagger_rounds; ++round) {
                        dataset = dagger_iteration(current, bundle.episodes, bundle.sims,
                                                   std::move(dataset));
                        TrainConfig dc = tc;
                        dc.epochs = config.dagger_epochs;
                        dc.seed = derive_seed(config.seed, "train-dagger",
                                              std::to_string(round));
                        auto res = train_bc(dataset, feature_dim, dc, &current);
                        current = res.policy;
                        rec.stats["dagger_final_loss"] = res.loss_curve.back();
                    }
                    write_text(root / "policy_dagger.json", current.to_json());
                    outputs.push_back("policy_dagger.json");
                    rec.stats["dagger_examples"] = static_cast<int>(dataset.size());
                }
            } else if (stage == "evaluate") {
                auto envs = load_envs(root, config, true, true);
                auto bundle = prepare_eval(root, envs, "episodes_eval.jsonl");
                nlohmann::json report_json;
                report_json["episodes"] = static_cast<int>(bundle.episodes.size());
                auto evaluate_traces = [&](const std::string& name,
                                           const std::vector<EpisodeTrace>& traces) {
                    std::vector<EvalResult> results;
                    nlohmann::json per = nlohmann::json::array();
                    for (size_t e = 0; e < traces.size(); ++e) {
                        auto r = evaluate_episode(traces[e].trace, bundle.episodes[e].gt.nodes,
                                                  bundle.sims[e]->graph());
                        per.push_back({{"instruction_id", bundle.episodes[e].instruction.id},
                                       {"ne_m", r.ne_m},
                                       {"success", r.success},
                                       {"spl", r.spl},
                                       {"ndtw", r.ndtw},
                                       {"sdtw", r.sdtw},
                                       {"first_error_step",
                                        r.first_error_step ? nlohmann::json(*r.first_error_step)
                                                           : nlohmann::json(nullptr)}});
                        results.push_back(r);
                    }
                    report_json["policies"][name] = {{"aggregate", aggregate_to_json(aggregate(results))},
                                                     {"per_episode", per}};
                    write_text(root / ("rollouts_" + name + ".jsonl"), traces_to_jsonl(traces));
                    outputs.push_back("rollouts_" + name + ".jsonl");
                };
                // Random baseline.
                std::vector<EpisodeTrace> random_traces;
                for (size_t e = 0; e < bundle.episodes.size(); ++e) {
                    Rng rng(derive_seed(config.seed, "random-policy",
                                        bundle.episodes[e].instruction.id));
                    random_traces.push_back(random_rollout(bundle.episodes[e], *bundle.sims[e], rng));
                }
                evaluate_traces("random", random_traces);
                for (const char* name : {"bc", "dagger"}) {
                    fs::path pf = root / (std::string("policy_") + name + ".json");
                    if (!fs::exists(pf)) continue;
                    LinearPolicy policy = LinearPolicy::from_json(read_text(pf));
                    std::vector<EpisodeTrace> traces;
                    for (size_t e = 0; e < bundle.episodes.size(); ++e) {
                        traces.push_back(policy_rollout(policy, bundle.episodes[e], *bundle.sims[e]));
                    }
                    evaluate_traces(name, traces);
                }
                write_text(root / "report.json", report_json.dump(2) + "\n");
                outputs.push_back("report.json");
                for (const auto& [name, entry] : report_json["policies"].items()) {
                    rec.stats[name] = entry["aggregate"];
                }
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("stage '" + stage + "' failed: " + e.what());
        }
        auto t1 = std::chrono::steady_clock::now();
        rec.duration_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        for (const auto& out : outputs) rec.output_hashes[out] = hash_file((root / out).string());
        manifest.stages.push_back(std::move(rec));
    }

    write_text(root / "manifest.json", manifest.to_json());
    return manifest;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

const StageRecord* find_stage(const Manifest& m, const std::string& name) {
    for (const auto& s : m.stages) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

}  // namespace

std::string report(const Manifest& manifest) {
    std::ostringstream out;
    out << "# Run report\n\n";
    out << "seed: " << manifest.seed << "\n\n";
    if (manifest.stages.empty()) return out.str();

    if (const auto* s = find_stage(manifest, "gen-envs")) {
        out << "## Environments\n\n";
        out << "| metric | value | reference (not reproducible at desk scale) |\n";
        out << "|---|---|---|\n";
        out << "| environments | " << s->stats.value("env_count", 0) << " | 90 buildings |\n";
        out << "| mean panos | " << fmt(s->stats.value("mean_panos", 0.0)) << " | ~117 per scan |\n";
        out << "| mean degree | " << fmt(s->stats.value("mean_degree", 0.0)) << " | 4.15 |\n\n";
    }
    if (const auto* s = find_stage(manifest, "fit-lambdas")) {
        out << "## Edge-rule fit\n\n";
        out << "| metric | value | reference (not reproducible at desk scale) |\n";
        out << "|---|---|---|\n";
        out << "| F1 | " << fmt(s->stats.value("f1", 0.0)) << " | 0.70 |\n";
        out << "| precision | " << fmt(s->stats.value("precision", 0.0)) << " | - |\n";
        out << "| recall | " << fmt(s->stats.value("recall", 0.0)) << " | - |\n";
        out << "| lambda_d | " << fmt(s->stats.value("lambda_d", 0.0)) << " | fitted |\n";
        out << "| lambda_p | " << fmt(s->stats.value("lambda_p", 0.0)) << " | fitted |\n\n";
    }
    if (const auto* s = find_stage(manifest, "sample")) {
        out << "## Sampling\n\n";
        out << "| split | count | mean steps | mean length (m) |\n";
        out << "|---|---|---|---|\n";
        for (const char* which : {"train", "eval"}) {
            if (!s->stats.contains(which)) continue;
            const auto& t = s->stats.at(which);
            out << "| " << which << " | " << t.value("count", 0) << " | "
                << fmt(t.value("mean_steps", 0.0)) << " | " << fmt(t.value("mean_length_m", 0.0))
                << " |\n";
        }
        out << "\nConstraints: length <= 40 m, steps <= 16, cap 3000 per environment.\n\n";
    }
    if (const auto* s = find_stage(manifest, "evaluate")) {
        out << "## Evaluation\n\n";
        out << "| policy | NE (m) | SR % | SPL | NDTW | SDTW |\n";
        out << "|---|---|---|---|---|---|\n";
        for (const auto& [name, a] : s->stats.items()) {
            if (!a.is_object() || !a.contains("sr_percent")) continue;
            out << "| " << name << " | " << fmt(a.value("mean_ne_m", 0.0)) << " | "
                << fmt(a.value("sr_percent", 0.0)) << " | " << fmt(a.value("mean_spl", 0.0))
                << " | " << fmt(a.value("mean_ndtw", 0.0)) << " | " << fmt(a.value("mean_sdtw", 0.0))
                << " |\n";
        }
        out << "\nReference (not reproducible at desk scale): RxR Test NDTW 66.8, R2R Test SR 62.\n\n";
        out << "### First-error histogram\n\n";
        for (const auto& [name, a] : s->stats.items()) {
            if (!a.is_object() || !a.contains("first_error_histogram")) continue;
            out << "- " << name << ":";
            for (const auto& [step, count] : a.at("first_error_histogram").items()) {
                out << " step " << step << " x" << count.get<int>() << ";";
            }
            out << "\n";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace navkit
