// Single entry point for the navigation-graph pipeline: every stage is a
// subcommand, `pipeline` runs them end to end from a JSON config.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "navkit/dagger_expert.hpp"
#include "navkit/env_synth.hpp"
#include "navkit/episode_sim.hpp"
#include "navkit/graph_builder.hpp"
#include "navkit/il_pipeline.hpp"
#include "navkit/metrics.hpp"
#include "navkit/pipeline.hpp"
#include "navkit/rng.hpp"
#include "navkit/traj_sampler.hpp"

namespace fs = std::filesystem;
using namespace navkit;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

// Built graph when present, reference graph otherwise.
NavGraph load_env_graph(const std::string& dir) {
    fs::path built = fs::path(dir) / "built_graph.json";
    if (fs::exists(built)) return NavGraph::from_json(read_text(built.string()));
    return NavGraph::from_json(read_text((fs::path(dir) / "graph.json").string()));
}

struct SimSet {
    std::map<std::string, NavGraph> graphs;
    std::map<std::string, FeatureStore> features;
    std::map<std::string, std::unique_ptr<Simulator>> sims;

    void load(const std::vector<std::string>& env_dirs, bool with_features) {
        for (const auto& dir : env_dirs) {
            Environment env = load_environment(dir);
            graphs[env.id] = load_env_graph(dir);
            if (with_features) {
                features[env.id] = load_environment_features(dir);
                sims[env.id] =
                    std::make_unique<Simulator>(graphs.at(env.id), features.at(env.id));
            }
        }
    }

    const Simulator& sim(const std::string& env_id) const {
        auto it = sims.find(env_id);
        if (it == sims.end()) throw std::runtime_error("no environment loaded for " + env_id);
        return *it->second;
    }
};

std::vector<EpisodeSpec> episodes_for(const std::vector<Trajectory>& trajs, const SimSet& set) {
    std::map<std::string, int> counter;
    std::vector<EpisodeSpec> out;
    for (const auto& traj : trajs) {
        const NavGraph& g = set.graphs.at(traj.env_id);
        EpisodeSpec e;
        e.env_id = traj.env_id;
        e.gt = traj;
        e.init_heading = traj.steps() > 0 ? bearing(g.node(traj.nodes[0]).position,
                                                    g.node(traj.nodes[1]).position)
                                          : 0.0;
        e.instruction = synthesize_instruction(
            traj, g, e.init_heading, traj.env_id + "/" + std::to_string(counter[traj.env_id]++));
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"navigation-graph imitation-learning pipeline"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    int threads = 0;

    // gen-envs
    auto* gen = app.add_subcommand("gen-envs", "generate synthetic environments");
    std::string gen_out = "run";
    int gen_count = 6, gen_train = 4, gen_rows = 2, gen_cols = 2, gen_fdim = 64;
    double gen_density = 0.25;
    gen->add_option("--out", gen_out, "output root");
    gen->add_option("--count", gen_count);
    gen->add_option("--train", gen_train, "environments assigned to the train split");
    gen->add_option("--rows", gen_rows);
    gen->add_option("--cols", gen_cols);
    gen->add_option("--density", gen_density, "panos per square meter");
    gen->add_option("--feature-dim", gen_fdim);
    gen->add_option("--seed", seed);

    // fit-lambdas
    auto* fit = app.add_subcommand("fit-lambdas", "grid-search edge-rule coefficients");
    std::vector<std::string> fit_envs;
    std::string fit_out = "params.json";
    double fit_sigma = 0.0;
    fit->add_option("--envs", fit_envs, "environment directories")->required();
    fit->add_option("--sigma", fit_sigma, "edge-probability noise");
    fit->add_option("--seed", seed);
    fit->add_option("--out", fit_out);
    fit->add_option("--threads", threads);

    // build-graph
    auto* build = app.add_subcommand("build-graph", "apply the edge rule to one environment");
    std::string build_env, build_out = "built_graph.json";
    double build_ld = 0.0, build_lp = 0.0, build_sigma = 0.0;
    build->add_option("--env", build_env, "environment directory")->required();
    build->add_option("--lambda-d", build_ld)->required();
    build->add_option("--lambda-p", build_lp)->required();
    build->add_option("--sigma", build_sigma);
    build->add_option("--seed", seed);
    build->add_option("--out", build_out);
    build->add_option("--threads", threads);

    // sample
    auto* sample = app.add_subcommand("sample", "sample trajectories");
    std::vector<std::string> sample_envs;
    std::string sample_out = "trajs.jsonl";
    int sample_cap = 3000, sample_waypoints = 3;
    bool sample_pre = false;
    sample->add_option("--envs", sample_envs)->required();
    sample->add_option("--cap", sample_cap, "per-environment cap");
    sample->add_option("--waypoints", sample_waypoints);
    sample->add_flag("--pre-explore", sample_pre, "restrict to val_unseen/test splits");
    sample->add_option("--seed", seed);
    sample->add_option("--out", sample_out);

    // stats
    auto* stats = app.add_subcommand("stats", "summarize a trajectory file");
    std::string stats_in;
    stats->add_option("--in", stats_in)->required();

    // emit
    auto* emit = app.add_subcommand("emit", "emit step examples from trajectories");
    std::string emit_trajs, emit_out = "ds";
    std::vector<std::string> emit_envs;
    double emit_mask = 0.0;
    emit->add_option("--trajs", emit_trajs)->required();
    emit->add_option("--envs", emit_envs)->required();
    emit->add_option("--mask-rate", emit_mask);
    emit->add_option("--seed", seed);
    emit->add_option("--out", emit_out);

    // train
    auto* train = app.add_subcommand("train", "train a policy on a step-example dataset");
    std::string train_ds = "ds", train_mode = "bc", train_out = "policy.json";
    std::string train_episodes;
    std::vector<std::string> train_envs_opt;
    int train_epochs = 20, train_batch = 32, train_embed = 32, train_dagger_epochs = 10;
    double train_lr = 0.05, train_momentum = 0.9;
    train->add_option("--ds", train_ds)->required();
    train->add_option("--mode", train_mode)->check(CLI::IsMember({"bc", "dagger"}));
    train->add_option("--episodes", train_episodes, "episode file (dagger mode)");
    train->add_option("--envs", train_envs_opt, "environment directories (dagger mode)");
    train->add_option("--epochs", train_epochs);
    train->add_option("--dagger-epochs", train_dagger_epochs);
    train->add_option("--batch", train_batch);
    train->add_option("--embed-dim", train_embed);
    train->add_option("--lr", train_lr);
    train->add_option("--momentum", train_momentum);
    train->add_option("--seed", seed);
    train->add_option("--out", train_out);

    // rollout
    auto* rollout = app.add_subcommand("rollout", "greedy policy rollouts");
    std::string roll_policy, roll_episodes, roll_out = "rollouts.jsonl";
    std::vector<std::string> roll_envs;
    rollout->add_option("--policy", roll_policy)->required();
    rollout->add_option("--episodes", roll_episodes)->required();
    rollout->add_option("--envs", roll_envs)->required();
    rollout->add_option("--out", roll_out);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score rollouts against ground truth");
    std::string eval_trajs, eval_rollouts, eval_graphs, eval_out = "report.json";
    evaluate->add_option("--trajs", eval_trajs)->required();
    evaluate->add_option("--rollouts", eval_rollouts)->required();
    evaluate->add_option("--graphs", eval_graphs, "directory of environment subdirectories")
        ->required();
    evaluate->add_option("--out", eval_out);

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "run stages end to end from a config");
    std::string pipe_config;
    pipe->add_option("--config", pipe_config)->required();

    // report
    auto* rep = app.add_subcommand("report", "render a manifest as markdown");
    std::string rep_manifest, rep_out = "report.md";
    rep->add_option("--manifest", rep_manifest)->required();
    rep->add_option("--out", rep_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (gen->parsed()) {
            RunConfig cfg;
            cfg.seed = seed;
            cfg.out_root = gen_out;
            cfg.stages = {"gen-envs"};
            cfg.env_count = gen_count;
            cfg.train_envs = gen_train;
            cfg.room_rows = gen_rows;
            cfg.room_cols = gen_cols;
            cfg.pano_density = gen_density;
            cfg.feature_dim = gen_fdim;
            auto manifest = run_pipeline(cfg);
            std::cout << manifest.stages.front().stats.dump(2) << "\n";
        } else if (fit->parsed()) {
            std::vector<Environment> envs;
            for (const auto& d : fit_envs) envs.push_back(load_environment(d));
            std::vector<const Environment*> env_ptrs;
            std::vector<std::unique_ptr<OracleEdgeProbability>> providers;
            std::vector<const EdgeProbabilityProvider*> provider_ptrs;
            for (const auto& env : envs) {
                env_ptrs.push_back(&env);
                providers.push_back(std::make_unique<OracleEdgeProbability>(
                    env, fit_sigma, derive_seed(seed, "edge-noise", env.id)));
                provider_ptrs.push_back(providers.back().get());
            }
            auto grid = default_lambda_grid();
            auto result = grid_search(env_ptrs, provider_ptrs, grid, grid, threads);
            nlohmann::json j = {{"lambda_d", result.params.lambda_d},
                                {"lambda_p", result.params.lambda_p},
                                {"f1", result.quality.f1},
                                {"precision", result.quality.precision},
                                {"recall", result.quality.recall}};
            write_text(fit_out, j.dump(2) + "\n");
            std::cout << j.dump(2) << "\n";
        } else if (build->parsed()) {
            Environment env = load_environment(build_env);
            OracleEdgeProbability provider(env, build_sigma,
                                           derive_seed(seed, "edge-noise", env.id));
            EdgeRuleParams params;
            params.lambda_d = build_ld;
            params.lambda_p = build_lp;
            NavGraph built = build_graph(env, provider, params, threads);
            write_text(build_out, built.to_json());
            auto q = graph_quality(built, env.reference_graph);
            std::cout << "edges " << built.edges().size() << " f1 " << q.f1 << " connected "
                      << is_connected(built) << "\n";
        } else if (sample->parsed()) {
            std::vector<Environment> envs;
            std::vector<NavGraph> graphs;
            for (const auto& d : sample_envs) {
                envs.push_back(load_environment(d));
                graphs.push_back(load_env_graph(d));
            }
            std::vector<EnvGraph> env_graphs;
            for (size_t i = 0; i < envs.size(); ++i) {
                env_graphs.push_back({envs[i].id, &graphs[i], envs[i].split});
            }
            SampleConfig sc;
            sc.waypoints = sample_waypoints;
            sc.per_env_cap = sample_cap;
            sc.seed = seed;
            auto trajs = sample_pre ? pre_exploration_sample(env_graphs, sc)
                                    : sample_dataset(env_graphs, sc);
            write_text(sample_out, trajectories_to_jsonl(trajs));
            auto ts = trajectory_stats(trajs);
            std::cout << "count " << ts.count << " mean_steps " << ts.mean_steps
                      << " mean_length_m " << ts.mean_length_m << "\n";
        } else if (stats->parsed()) {
            auto trajs = trajectories_from_jsonl(read_text(stats_in));
            auto ts = trajectory_stats(trajs);
            std::cout << "count " << ts.count << " mean_steps " << ts.mean_steps
                      << " mean_length_m " << ts.mean_length_m << "\n";
        } else if (emit->parsed()) {
            SimSet set;
            set.load(emit_envs, true);
            auto trajs = trajectories_from_jsonl(read_text(emit_trajs));
            auto episodes = episodes_for(trajs, set);
            std::vector<StepExample> examples;
            int feature_dim = 0;
            for (const auto& episode : episodes) {
                const Simulator& sim = set.sim(episode.env_id);
                feature_dim = sim.features().dim();
                auto ex = emit_step_examples(episode, sim, emit_mask, derive_seed(seed, "mask"));
                examples.insert(examples.end(), ex.begin(), ex.end());
            }
            save_examples(examples, feature_dim, emit_out);
            std::cout << "examples " << examples.size() << "\n";
        } else if (train->parsed()) {
            int feature_dim = 0;
            auto dataset = load_examples(train_ds, &feature_dim);
            TrainConfig tc;
            tc.embed_dim = train_embed;
            tc.learning_rate = train_lr;
            tc.momentum = train_momentum;
            tc.epochs = train_epochs;
            tc.batch_size = train_batch;
            tc.seed = derive_seed(seed, "train-bc");
            auto bc = train_bc(dataset, feature_dim, tc);
            LinearPolicy policy = bc.policy;
            if (train_mode == "dagger") {
                if (train_episodes.empty() || train_envs_opt.empty()) {
                    std::cerr << "dagger mode needs --episodes and --envs\n";
                    return kExitConfig;
                }
                SimSet set;
                set.load(train_envs_opt, true);
                auto episodes = episodes_from_jsonl(read_text(train_episodes));
                std::vector<const Simulator*> sims;
                for (const auto& e : episodes) sims.push_back(&set.sim(e.env_id));
                dataset = dagger_iteration(policy, episodes, sims, std::move(dataset));
                TrainConfig dc = tc;
                dc.epochs = train_dagger_epochs;
                dc.seed = derive_seed(seed, "train-dagger", "0");
                policy = train_bc(dataset, feature_dim, dc, &policy).policy;
            }
            write_text(train_out, policy.to_json());
            std::cout << "final_loss " << bc.loss_curve.back() << " examples " << dataset.size()
                      << "\n";
        } else if (rollout->parsed()) {
            SimSet set;
            set.load(roll_envs, true);
            LinearPolicy policy = LinearPolicy::from_json(read_text(roll_policy));
            auto episodes = episodes_from_jsonl(read_text(roll_episodes));
            std::vector<EpisodeTrace> traces;
            for (const auto& episode : episodes) {
                traces.push_back(policy_rollout(policy, episode, set.sim(episode.env_id)));
            }
            write_text(roll_out, traces_to_jsonl(traces));
            std::cout << "episodes " << traces.size() << "\n";
        } else if (evaluate->parsed()) {
            auto gt = trajectories_from_jsonl(read_text(eval_trajs));
            auto traces = traces_from_jsonl(read_text(eval_rollouts));
            if (gt.size() != traces.size()) {
                throw std::runtime_error("trajectory and rollout counts differ");
            }
            std::map<std::string, NavGraph> graphs;
            for (const auto& entry : fs::directory_iterator(eval_graphs)) {
                if (!entry.is_directory() || !fs::exists(entry.path() / "meta.json")) continue;
                Environment env = load_environment(entry.path().string());
                graphs[env.id] = load_env_graph(entry.path().string());
            }
            std::vector<EvalResult> results;
            nlohmann::json per = nlohmann::json::array();
            for (size_t i = 0; i < gt.size(); ++i) {
                if (gt[i].env_id != traces[i].env_id) {
                    throw std::runtime_error("row " + std::to_string(i) +
                                             ": env_id mismatch between trajs and rollouts");
                }
                auto r = evaluate_episode(traces[i].trace, gt[i].nodes, graphs.at(gt[i].env_id));
                per.push_back({{"env_id", gt[i].env_id},
                               {"instruction_id", traces[i].instruction_id},
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
            auto a = aggregate(results);
            nlohmann::json hist = nlohmann::json::object();
            for (const auto& [step, count] : a.first_error_histogram) {
                hist[std::to_string(step)] = count;
            }
            nlohmann::json j = {{"aggregate",
                                 {{"count", a.count},
                                  {"mean_ne_m", a.mean_ne_m},
                                  {"sr_percent", a.sr_percent},
                                  {"mean_spl", a.mean_spl},
                                  {"mean_ndtw", a.mean_ndtw},
                                  {"mean_sdtw", a.mean_sdtw},
                                  {"first_error_histogram", hist}}},
                                {"per_episode", per}};
            write_text(eval_out, j.dump(2) + "\n");
            std::cout << j["aggregate"].dump(2) << "\n";
        } else if (pipe->parsed()) {
            RunConfig cfg;
            try {
                cfg = parse_config(read_text(pipe_config));
            } catch (const std::invalid_argument& e) {
                std::cerr << e.what() << "\n";
                return kExitConfig;
            }
            auto manifest = run_pipeline(cfg);
            std::cout << "stages " << manifest.stages.size() << "\n";
        } else if (rep->parsed()) {
            auto manifest = Manifest::from_json(read_text(rep_manifest));
            write_text(rep_out, report(manifest));
            std::cout << rep_out << "\n";
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    }
    return 0;
}
