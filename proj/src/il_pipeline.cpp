#include "navkit/il_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace navkit {

Instruction synthesize_instruction(const Trajectory& traj, const NavGraph& graph,
                                   double init_heading, const std::string& id,
                                   const std::string& language_tag) {
    validate_trajectory(traj, graph);
    Instruction ins;
    ins.id = id;
    ins.language_tag = language_tag;
    double heading = normalize_angle(init_heading);
    for (int t = 0; t < traj.steps(); ++t) {
        const auto& here = graph.node(traj.nodes[t]).position;
        const auto& there = graph.node(traj.nodes[t + 1]).position;
        double abs_heading = bearing(here, there);
        double horizontal = euclidean_xy(here, there);
        double elevation = std::atan2(there.z - here.z, std::max(horizontal, 1e-12));
        int rel = view_index(elevation_bin(elevation), heading_bin(abs_heading - heading));
        ins.tokens.push_back(1 + rel);
        heading = abs_heading;
    }
    ins.tokens.push_back(1 + kStopBucket);
    return ins;
}

MaskedInstruction mask_instruction(const std::vector<int>& tokens, double rate, Rng& rng) {
    if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("mask_instruction: rate outside [0,1]");
    MaskedInstruction out;
    std::vector<bool> masked(tokens.size(), false);
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (rate > 0.0 && rng.uniform() < rate) {
            masked[i] = true;
            out.targets.push_back({static_cast<int>(i), tokens[i]});
        }
    }
    // Collapse maximal masked runs into one sentinel.
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (!masked[i]) {
            out.tokens.push_back(tokens[i]);
        } else if (i == 0 || !masked[i - 1]) {
            out.tokens.push_back(kMaskToken);
        }
    }
    return out;
}

namespace {

std::vector<float> pool_views(const Observation& obs) {
    if (obs.views.empty()) return {};
    std::vector<float> pooled(obs.views[0].feature.size(), 0.0f);
    for (const auto& v : obs.views) {
        for (size_t d = 0; d < pooled.size(); ++d) pooled[d] += v.feature[d];
    }
    for (auto& x : pooled) x /= static_cast<float>(obs.views.size());
    return pooled;
}

int progress_class_of(int t, int total_steps) {
    int T = std::max(total_steps, 1);
    int cls = (kProgressClasses * t) / T;
    return std::min(cls, kProgressClasses - 1);
}

int candidate_index_for(const std::vector<ActionCandidate>& cands, NodeId action) {
    for (size_t i = 0; i < cands.size(); ++i) {
        if (cands[i].target == action) return static_cast<int>(i);
    }
    throw std::logic_error("candidate_index_for: action not in candidate set");
}

}  // namespace

std::vector<StepExample> emit_step_examples(const EpisodeSpec& episode, const Simulator& sim,
                                            double mask_rate, uint64_t mask_seed) {
    auto ctx = ExpertContext::make(sim.graph(), episode.gt);
    Expert expert(ctx);
    EpisodeState state = sim.reset(episode.gt, episode.init_heading);
    std::vector<StepExample> out;
    std::vector<HistoryEntry> history;
    Rng mask_rng(derive_seed(mask_seed, "mask", episode.instruction.id));
    const int T = episode.gt.steps();
    while (!state.done) {
        NodeId action = expert.expert_action(state);
        auto obs = sim.observe(state);
        StepExample ex;
        ex.env_id = episode.env_id;
        ex.instruction_id = episode.instruction.id;
        ex.t = state.t;
        ex.total_steps = T;
        if (mask_rate > 0.0) {
            auto masked = mask_instruction(episode.instruction.tokens, mask_rate, mask_rng);
            ex.tokens = masked.tokens;
            ex.masked_tokens = masked.targets;
        } else {
            ex.tokens = episode.instruction.tokens;
        }
        ex.history = history;
        ex.pooled_obs = pool_views(obs);
        ex.candidates = sim.candidates(state);
        ex.constrained_idx = candidate_index_for(ex.candidates, action);
        ex.unconstrained_bucket = ex.candidates[ex.constrained_idx].rel_bucket;
        ex.progress_class = progress_class_of(state.t, T);
        const ActionCandidate& chosen = ex.candidates[ex.constrained_idx];
        history.push_back({ex.pooled_obs, chosen.rel_bucket});
        out.push_back(std::move(ex));
        state = sim.step(state, chosen);
    }
    return out;
}

LinearPolicy::LinearPolicy(int feature_dim, int embed_dim, uint64_t init_seed)
    : feature_dim_(feature_dim), embed_dim_(embed_dim) {
    Rng rng(derive_seed(init_seed, "policy-init"));
    auto init = [&](std::vector<double>& v, size_t n, double scale) {
        v.resize(n);
        for (auto& x : v) x = scale * rng.normal();
    };
    const int C = context_dim();
    init(embed_, static_cast<size_t>(kVocabSize + 1) * embed_dim_, 0.1);
    init(w_, static_cast<size_t>(C + feature_dim_ + kDirectionBuckets), 0.01);
    init(u_, static_cast<size_t>(kDirectionBuckets) * C, 0.01);
    init(p_, static_cast<size_t>(kProgressClasses) * C, 0.01);
    init(m_, static_cast<size_t>(kVocabSize) * C, 0.0);
}

std::vector<double> LinearPolicy::context(const StepExample& ex) const {
    const int C = context_dim();
    std::vector<double> c(C, 0.0);
    if (!ex.tokens.empty()) {
        for (int tok : ex.tokens) {
            if (tok < 0 || tok > kVocabSize) throw std::out_of_range("context: token id out of range");
            const double* row = embed_.data() + static_cast<size_t>(tok) * embed_dim_;
            for (int d = 0; d < embed_dim_; ++d) c[d] += row[d];
        }
        for (int d = 0; d < embed_dim_; ++d) c[d] /= static_cast<double>(ex.tokens.size());
    }
    if (static_cast<int>(ex.pooled_obs.size()) != feature_dim_) {
        throw std::invalid_argument("context: pooled_obs dimension mismatch");
    }
    for (int d = 0; d < feature_dim_; ++d) c[embed_dim_ + d] = ex.pooled_obs[d];
    if (!ex.history.empty()) {
        const auto& last = ex.history.back().pooled_obs;
        if (static_cast<int>(last.size()) != feature_dim_) {
            throw std::invalid_argument("context: history dimension mismatch");
        }
        for (int d = 0; d < feature_dim_; ++d) c[embed_dim_ + feature_dim_ + d] = last[d];
    }
    c[C - 2] = static_cast<double>(ex.t) / std::max(ex.total_steps, 1);
    c[C - 1] = 1.0;  // bias
    return c;
}

double LinearPolicy::constrained_logit(const std::vector<double>& ctx,
                                       const ActionCandidate& cand) const {
    const int C = context_dim();
    if (static_cast<int>(cand.feature.size()) != feature_dim_) {
        throw std::invalid_argument("constrained_logit: candidate feature dimension mismatch");
    }
    double logit = 0.0;
    for (int d = 0; d < C; ++d) logit += w_[d] * ctx[d];
    for (int d = 0; d < feature_dim_; ++d) logit += w_[C + d] * cand.feature[d];
    logit += w_[C + feature_dim_ + cand.rel_bucket];
    return logit;
}

std::vector<double> LinearPolicy::unconstrained_logits(const std::vector<double>& ctx) const {
    const int C = context_dim();
    std::vector<double> q(kDirectionBuckets, 0.0);
    for (int b = 0; b < kDirectionBuckets; ++b) {
        const double* row = u_.data() + static_cast<size_t>(b) * C;
        for (int d = 0; d < C; ++d) q[b] += row[d] * ctx[d];
    }
    return q;
}

std::vector<double> LinearPolicy::progress_logits(const std::vector<double>& ctx) const {
    const int C = context_dim();
    std::vector<double> q(kProgressClasses, 0.0);
    for (int k = 0; k < kProgressClasses; ++k) {
        const double* row = p_.data() + static_cast<size_t>(k) * C;
        for (int d = 0; d < C; ++d) q[k] += row[d] * ctx[d];
    }
    return q;
}

std::vector<double> LinearPolicy::logits(const StepExample& ex) const {
    auto ctx = context(ex);
    auto q = unconstrained_logits(ctx);
    std::vector<double> scores;
    scores.reserve(ex.candidates.size());
    for (const auto& cand : ex.candidates) {
        scores.push_back(0.5 * constrained_logit(ctx, cand) + 0.5 * q[cand.rel_bucket]);
    }
    return scores;
}

int LinearPolicy::choose(const StepExample& ex) const {
    auto scores = logits(ex);
    int best = 0;
    for (size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = static_cast<int>(i);
    }
    return best;
}

std::vector<double*> LinearPolicy::parameter_blocks(bool embedding_only) {
    if (embedding_only) return {embed_.data()};
    return {embed_.data(), w_.data(), u_.data(), p_.data(), m_.data()};
}

std::string LinearPolicy::to_json() const {
    nlohmann::json j;
    j["feature_dim"] = feature_dim_;
    j["embed_dim"] = embed_dim_;
    j["vocab_size"] = kVocabSize;
    auto dump = [&](const char* name, const std::vector<double>& v,
                    std::initializer_list<int> shape) {
        j[name] = {{"shape", shape}, {"data", v}};
    };
    const int C = context_dim();
    dump("embed", embed_, {kVocabSize + 1, embed_dim_});
    dump("w", w_, {C + feature_dim_ + kDirectionBuckets});
    dump("u", u_, {kDirectionBuckets, C});
    dump("p", p_, {kProgressClasses, C});
    dump("m", m_, {kVocabSize, C});
    return j.dump();
}

LinearPolicy LinearPolicy::from_json(const std::string& text) {
    LinearPolicy policy;
    try {
        auto j = nlohmann::json::parse(text);
        policy.feature_dim_ = j.at("feature_dim").get<int>();
        policy.embed_dim_ = j.at("embed_dim").get<int>();
        policy.embed_ = j.at("embed").at("data").get<std::vector<double>>();
        policy.w_ = j.at("w").at("data").get<std::vector<double>>();
        policy.u_ = j.at("u").at("data").get<std::vector<double>>();
        policy.p_ = j.at("p").at("data").get<std::vector<double>>();
        policy.m_ = j.at("m").at("data").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        // Non-finite weights round-trip as JSON null and land here too.
        throw std::invalid_argument(std::string("LinearPolicy: malformed policy json: ") + e.what());
    }
    const int C = policy.context_dim();
    if (policy.embed_.size() != static_cast<size_t>(kVocabSize + 1) * policy.embed_dim_ ||
        policy.w_.size() != static_cast<size_t>(C + policy.feature_dim_ + kDirectionBuckets) ||
        policy.u_.size() != static_cast<size_t>(kDirectionBuckets) * C ||
        policy.p_.size() != static_cast<size_t>(kProgressClasses) * C ||
        policy.m_.size() != static_cast<size_t>(kVocabSize) * C) {
        throw std::invalid_argument("LinearPolicy: shape metadata inconsistent with data");
    }
    for (const auto& block : {&policy.embed_, &policy.w_, &policy.u_, &policy.p_, &policy.m_}) {
        for (double x : *block) {
            if (!std::isfinite(x)) throw std::invalid_argument("LinearPolicy: non-finite weight");
        }
    }
    return policy;
}

namespace {

// Softmax cross-entropy; fills probabilities and returns the loss.
double softmax_ce(const std::vector<double>& logits, int label, std::vector<double>& probs) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    probs.resize(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - mx);
        sum += probs[i];
    }
    for (auto& p : probs) p /= sum;
    return -std::log(std::max(probs[label], 1e-300));
}

}  // namespace

LossValue policy_loss(const LinearPolicy& policy, const std::vector<const StepExample*>& batch,
                      const TrainConfig& config, PolicyGradients* grads) {
    if (batch.empty()) throw std::invalid_argument("policy_loss: empty batch");
    const int C = policy.context_dim();
    const int D = policy.feature_dim();
    const int E = policy.embed_dim();
    if (grads) {
        grads->embed.assign(policy.embed_.size(), 0.0);
        grads->w.assign(policy.w_.size(), 0.0);
        grads->u.assign(policy.u_.size(), 0.0);
        grads->p.assign(policy.p_.size(), 0.0);
        grads->m.assign(policy.m_.size(), 0.0);
    }
    LossValue loss;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    std::vector<double> probs;
    for (const StepExample* exp : batch) {
        const StepExample& ex = *exp;
        auto ctx = policy.context(ex);
        std::vector<double> dctx(C, 0.0);

        // Fused action scores.
        auto q = policy.unconstrained_logits(ctx);
        std::vector<double> scores;
        for (const auto& cand : ex.candidates) {
            scores.push_back(0.5 * policy.constrained_logit(ctx, cand) + 0.5 * q[cand.rel_bucket]);
        }
        loss.constrained += inv_n * softmax_ce(scores, ex.constrained_idx, probs);
        if (grads) {
            for (size_t k = 0; k < ex.candidates.size(); ++k) {
                double ds = config.w_constrained * inv_n *
                            (probs[k] - (static_cast<int>(k) == ex.constrained_idx ? 1.0 : 0.0));
                const auto& cand = ex.candidates[k];
                // Constrained head.
                for (int d = 0; d < C; ++d) grads->w[d] += 0.5 * ds * ctx[d];
                for (int d = 0; d < D; ++d) grads->w[C + d] += 0.5 * ds * cand.feature[d];
                grads->w[C + D + cand.rel_bucket] += 0.5 * ds;
                // Unconstrained head reached through the fusion.
                double* urow_g = grads->u.data() + static_cast<size_t>(cand.rel_bucket) * C;
                const double* urow = policy.u_.data() + static_cast<size_t>(cand.rel_bucket) * C;
                for (int d = 0; d < C; ++d) {
                    urow_g[d] += 0.5 * ds * ctx[d];
                    dctx[d] += 0.5 * ds * (policy.w_[d] + urow[d]);
                }
            }
        }

        // Unconstrained bucket task.
        loss.unconstrained += inv_n * softmax_ce(q, ex.unconstrained_bucket, probs);
        if (grads) {
            for (int b = 0; b < kDirectionBuckets; ++b) {
                double dq = config.w_unconstrained * inv_n *
                            (probs[b] - (b == ex.unconstrained_bucket ? 1.0 : 0.0));
                double* urow_g = grads->u.data() + static_cast<size_t>(b) * C;
                const double* urow = policy.u_.data() + static_cast<size_t>(b) * C;
                for (int d = 0; d < C; ++d) {
                    urow_g[d] += dq * ctx[d];
                    dctx[d] += dq * urow[d];
                }
            }
        }

        // Progress task.
        auto pl = policy.progress_logits(ctx);
        loss.progress += inv_n * softmax_ce(pl, ex.progress_class, probs);
        if (grads) {
            for (int k = 0; k < kProgressClasses; ++k) {
                double dq = config.w_progress * inv_n *
                            (probs[k] - (k == ex.progress_class ? 1.0 : 0.0));
                double* prow_g = grads->p.data() + static_cast<size_t>(k) * C;
                const double* prow = policy.p_.data() + static_cast<size_t>(k) * C;
                for (int d = 0; d < C; ++d) {
                    prow_g[d] += dq * ctx[d];
                    dctx[d] += dq * prow[d];
                }
            }
        }

        // Optional bag-of-tokens reconstruction of masked ids.
        if (config.use_mlm && !ex.masked_tokens.empty()) {
            std::vector<double> v(kVocabSize, 0.0);
            for (int t = 0; t < kVocabSize; ++t) {
                const double* row = policy.m_.data() + static_cast<size_t>(t) * C;
                for (int d = 0; d < C; ++d) v[t] += row[d] * ctx[d];
            }
            double inv_t = 1.0 / static_cast<double>(ex.masked_tokens.size());
            for (const auto& target : ex.masked_tokens) {
                loss.mlm += inv_n * inv_t * softmax_ce(v, target.original_id, probs);
                if (grads) {
                    for (int t = 0; t < kVocabSize; ++t) {
                        double dv = config.w_mlm * inv_n * inv_t *
                                    (probs[t] - (t == target.original_id ? 1.0 : 0.0));
                        if (dv == 0.0) continue;
                        double* mrow_g = grads->m.data() + static_cast<size_t>(t) * C;
                        const double* mrow = policy.m_.data() + static_cast<size_t>(t) * C;
                        for (int d = 0; d < C; ++d) {
                            mrow_g[d] += dv * ctx[d];
                            dctx[d] += dv * mrow[d];
                        }
                    }
                }
            }
        }

        // Context gradient into the token embeddings (mean pooling).
        if (grads && !ex.tokens.empty()) {
            double inv_t = 1.0 / static_cast<double>(ex.tokens.size());
            for (int tok : ex.tokens) {
                double* row = grads->embed.data() + static_cast<size_t>(tok) * E;
                for (int d = 0; d < E; ++d) row[d] += inv_t * dctx[d];
            }
        }
    }
    loss.total = config.w_constrained * loss.constrained +
                 config.w_unconstrained * loss.unconstrained + config.w_progress * loss.progress +
                 (config.use_mlm ? config.w_mlm * loss.mlm : 0.0);
    return loss;
}

TrainResult train_bc(const std::vector<StepExample>& dataset, int feature_dim,
                     const TrainConfig& config, const LinearPolicy* init) {
    if (dataset.empty()) throw std::invalid_argument("train_bc: empty dataset");
    TrainResult result;
    result.policy = init ? *init : LinearPolicy(feature_dim, config.embed_dim, config.seed);
    LinearPolicy& policy = result.policy;

    PolicyGradients vel;  // momentum buffers
    vel.embed.assign(policy.embed_.size(), 0.0);
    vel.w.assign(policy.w_.size(), 0.0);
    vel.u.assign(policy.u_.size(), 0.0);
    vel.p.assign(policy.p_.size(), 0.0);
    vel.m.assign(policy.m_.size(), 0.0);

    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), size_t{0});
    PolicyGradients grads;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, "train-shuffle", std::to_string(epoch)));
        for (size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
        }
        double epoch_loss = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            std::vector<const StepExample*> batch;
            for (size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
                batch.push_back(&dataset[order[i]]);
            }
            LossValue loss = policy_loss(policy, batch, config, &grads);
            if (!std::isfinite(loss.total)) {
                throw std::runtime_error(
                    "train_bc: non-finite loss at epoch " + std::to_string(epoch) + " (constrained=" +
                    std::to_string(loss.constrained) + ", unconstrained=" +
                    std::to_string(loss.unconstrained) + ", progress=" + std::to_string(loss.progress) +
                    ")");
            }
            epoch_loss += loss.total;
            batches++;
            auto apply = [&](std::vector<double>& param, std::vector<double>& v,
                             const std::vector<double>& g) {
                for (size_t i = 0; i < param.size(); ++i) {
                    v[i] = config.momentum * v[i] - config.learning_rate * g[i];
                    param[i] += v[i];
                }
            };
            apply(policy.embed_, vel.embed, grads.embed);
            if (!config.freeze_non_embedding) {
                apply(policy.w_, vel.w, grads.w);
                apply(policy.u_, vel.u, grads.u);
                apply(policy.p_, vel.p, grads.p);
                if (config.use_mlm) apply(policy.m_, vel.m, grads.m);
            }
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(std::max<size_t>(batches, 1)));
    }
    return result;
}

EpisodeTrace policy_rollout(const LinearPolicy& policy, const EpisodeSpec& episode,
                            const Simulator& sim) {
    EpisodeState state = sim.reset(episode.gt, episode.init_heading);
    EpisodeTrace trace;
    trace.env_id = episode.env_id;
    trace.instruction_id = episode.instruction.id;
    trace.headings.push_back(state.heading);
    std::vector<HistoryEntry> history;
    const int T = episode.gt.steps();
    while (!state.done) {
        auto obs = sim.observe(state);
        StepExample ex;
        ex.env_id = episode.env_id;
        ex.instruction_id = episode.instruction.id;
        ex.t = state.t;
        ex.total_steps = T;
        ex.tokens = episode.instruction.tokens;
        ex.history = history;
        ex.pooled_obs = pool_views(obs);
        ex.candidates = sim.candidates(state);
        int choice = policy.choose(ex);
        const ActionCandidate& chosen = ex.candidates[choice];
        trace.actions.push_back(chosen.target);
        history.push_back({ex.pooled_obs, chosen.rel_bucket});
        state = sim.step(state, chosen);
        if (!state.done) trace.headings.push_back(state.heading);
    }
    trace.trace = state.trace;
    trace.done_reason = state.done_reason == EpisodeState::DoneReason::stop ? "stop" : "cap";
    return trace;
}

std::vector<StepExample> dagger_iteration(const LinearPolicy& policy,
                                          const std::vector<EpisodeSpec>& episodes,
                                          const std::vector<const Simulator*>& sims,
                                          std::vector<StepExample> dataset) {
    if (episodes.size() != sims.size()) {
        throw std::invalid_argument("dagger_iteration: episodes and simulators must pair up");
    }
    for (size_t e = 0; e < episodes.size(); ++e) {
        const EpisodeSpec& episode = episodes[e];
        const Simulator& sim = *sims[e];
        auto ctx = ExpertContext::make(sim.graph(), episode.gt);
        Expert expert(ctx);
        EpisodeState state = sim.reset(episode.gt, episode.init_heading);
        std::vector<HistoryEntry> history;
        const int T = episode.gt.steps();
        while (!state.done) {
            NodeId expert_choice = expert.expert_action(state);
            auto obs = sim.observe(state);
            StepExample ex;
            ex.env_id = episode.env_id;
            ex.instruction_id = episode.instruction.id;
            ex.t = state.t;
            ex.total_steps = T;
            ex.tokens = episode.instruction.tokens;
            ex.history = history;
            ex.pooled_obs = pool_views(obs);
            ex.candidates = sim.candidates(state);
            ex.constrained_idx = candidate_index_for(ex.candidates, expert_choice);
            ex.unconstrained_bucket = ex.candidates[ex.constrained_idx].rel_bucket;
            ex.progress_class = progress_class_of(state.t, T);

            // The agent follows its own policy; the expert only labels.
            int choice = policy.choose(ex);
            const ActionCandidate& chosen = ex.candidates[choice];
            history.push_back({ex.pooled_obs, chosen.rel_bucket});
            dataset.push_back(std::move(ex));
            state = sim.step(state, chosen);
        }
    }
    std::sort(dataset.begin(), dataset.end(), [](const StepExample& a, const StepExample& b) {
        return std::tie(a.env_id, a.instruction_id, a.t) < std::tie(b.env_id, b.instruction_id, b.t);
    });
    return dataset;
}

Aggregate evaluate_policy(const LinearPolicy& policy, const std::vector<EpisodeSpec>& episodes,
                          const std::vector<const Simulator*>& sims,
                          std::vector<EvalResult>* per_episode) {
    if (episodes.size() != sims.size()) {
        throw std::invalid_argument("evaluate_policy: episodes and simulators must pair up");
    }
    std::vector<EvalResult> results;
    for (size_t e = 0; e < episodes.size(); ++e) {
        auto trace = policy_rollout(policy, episodes[e], *sims[e]);
        results.push_back(evaluate_episode(trace.trace, episodes[e].gt.nodes, sims[e]->graph()));
    }
    if (per_episode) *per_episode = results;
    return aggregate(results);
}

std::string episodes_to_jsonl(const std::vector<EpisodeSpec>& episodes) {
    std::ostringstream out;
    for (const auto& e : episodes) {
        nlohmann::json j;
        j["env_id"] = e.env_id;
        j["instruction_id"] = e.instruction.id;
        j["tokens"] = e.instruction.tokens;
        j["language_tag"] = e.instruction.language_tag;
        j["nodes"] = e.gt.nodes;
        j["length_m"] = e.gt.length_m;
        j["pre_explore"] = e.gt.pre_explore;
        j["init_heading"] = e.init_heading;
        out << j.dump() << "\n";
    }
    return out.str();
}

std::vector<EpisodeSpec> episodes_from_jsonl(const std::string& text) {
    std::vector<EpisodeSpec> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        EpisodeSpec e;
        e.env_id = j.at("env_id").get<std::string>();
        e.instruction.id = j.at("instruction_id").get<std::string>();
        e.instruction.tokens = j.at("tokens").get<std::vector<int>>();
        e.instruction.language_tag = j.at("language_tag").get<std::string>();
        e.gt.env_id = e.env_id;
        e.gt.nodes = j.at("nodes").get<std::vector<NodeId>>();
        e.gt.length_m = j.at("length_m").get<double>();
        e.gt.pre_explore = j.at("pre_explore").get<bool>();
        e.init_heading = j.at("init_heading").get<double>();
        out.push_back(std::move(e));
    }
    return out;
}

void save_examples(const std::vector<StepExample>& examples, int feature_dim,
                   const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream bin(std::filesystem::path(dir) / "examples.bin", std::ios::binary);
    std::ofstream idx(std::filesystem::path(dir) / "index.jsonl", std::ios::binary);
    if (!bin || !idx) throw std::runtime_error("save_examples: cannot write to " + dir);
    const char magic[4] = {'N', 'V', 'K', 'X'};
    uint32_t header[3] = {static_cast<uint32_t>(examples.size()), static_cast<uint32_t>(feature_dim),
                          0};
    bin.write(magic, 4);
    bin.write(reinterpret_cast<const char*>(header), 12);
    uint64_t offset = 16;
    auto put = [&](const std::vector<float>& v) {
        bin.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(float)));
        offset += v.size() * sizeof(float);
    };
    for (const auto& ex : examples) {
        nlohmann::json j;
        j["env_id"] = ex.env_id;
        j["instruction_id"] = ex.instruction_id;
        j["t"] = ex.t;
        j["total_steps"] = ex.total_steps;
        j["tokens"] = ex.tokens;
        j["offset"] = offset;
        j["history_buckets"] = nlohmann::json::array();
        for (const auto& h : ex.history) j["history_buckets"].push_back(h.chosen_rel_bucket);
        j["candidates"] = nlohmann::json::array();
        for (const auto& c : ex.candidates) {
            j["candidates"].push_back({{"target", c.target},
                                       {"abs_bucket", c.abs_bucket},
                                       {"rel_bucket", c.rel_bucket}});
        }
        j["constrained_idx"] = ex.constrained_idx;
        j["unconstrained_bucket"] = ex.unconstrained_bucket;
        j["progress_class"] = ex.progress_class;
        j["masked"] = nlohmann::json::array();
        for (const auto& m : ex.masked_tokens) j["masked"].push_back({m.position, m.original_id});
        idx << j.dump() << "\n";

        put(ex.pooled_obs);
        for (const auto& h : ex.history) put(h.pooled_obs);
        for (const auto& c : ex.candidates) put(c.feature);
    }
}

std::vector<StepExample> load_examples(const std::string& dir, int* feature_dim_out) {
    std::ifstream bin(std::filesystem::path(dir) / "examples.bin", std::ios::binary);
    std::ifstream idx(std::filesystem::path(dir) / "index.jsonl", std::ios::binary);
    if (!bin || !idx) throw std::runtime_error("load_examples: cannot read from " + dir);
    char magic[4];
    uint32_t header[3];
    bin.read(magic, 4);
    bin.read(reinterpret_cast<char*>(header), 12);
    if (!bin || std::memcmp(magic, "NVKX", 4) != 0) {
        throw std::runtime_error("load_examples: bad examples.bin header");
    }
    const int feature_dim = static_cast<int>(header[1]);
    if (feature_dim_out) *feature_dim_out = feature_dim;
    auto get = [&](std::vector<float>& v) {
        v.resize(feature_dim);
        bin.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(float)));
        if (!bin) throw std::runtime_error("load_examples: truncated examples.bin");
    };
    std::vector<StepExample> out;
    std::string line;
    while (std::getline(idx, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        StepExample ex;
        ex.env_id = j.at("env_id").get<std::string>();
        ex.instruction_id = j.at("instruction_id").get<std::string>();
        ex.t = j.at("t").get<int>();
        ex.total_steps = j.at("total_steps").get<int>();
        ex.tokens = j.at("tokens").get<std::vector<int>>();
        ex.constrained_idx = j.at("constrained_idx").get<int>();
        ex.unconstrained_bucket = j.at("unconstrained_bucket").get<int>();
        ex.progress_class = j.at("progress_class").get<int>();
        for (const auto& m : j.at("masked")) {
            ex.masked_tokens.push_back({m.at(0).get<int>(), m.at(1).get<int>()});
        }
        get(ex.pooled_obs);
        for (const auto& b : j.at("history_buckets")) {
            HistoryEntry h;
            h.chosen_rel_bucket = b.get<int>();
            get(h.pooled_obs);
            ex.history.push_back(std::move(h));
        }
        for (const auto& c : j.at("candidates")) {
            ActionCandidate cand;
            cand.target = c.at("target").get<NodeId>();
            cand.abs_bucket = c.at("abs_bucket").get<int>();
            cand.rel_bucket = c.at("rel_bucket").get<int>();
            get(cand.feature);
            ex.candidates.push_back(std::move(cand));
        }
        if (ex.constrained_idx < 0 || ex.constrained_idx >= static_cast<int>(ex.candidates.size()) ||
            ex.candidates[ex.constrained_idx].rel_bucket != ex.unconstrained_bucket) {
            throw std::runtime_error("load_examples: label invariants violated");
        }
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace navkit
