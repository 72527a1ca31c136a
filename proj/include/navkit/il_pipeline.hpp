#pragma once

#include <string>
#include <vector>

#include "navkit/dagger_expert.hpp"
#include "navkit/episode_sim.hpp"
#include "navkit/metrics.hpp"
#include "navkit/rng.hpp"
#include "navkit/traj_sampler.hpp"

namespace navkit {

inline constexpr int kVocabSize = 4096;
inline constexpr int kMaskToken = kVocabSize;  // sentinel id outside the vocab
inline constexpr int kProgressClasses = 20;
inline constexpr int kDirectionBuckets = 37;   // 36 directions + STOP

struct Instruction {
    std::string id;
    std::vector<int> tokens;
    std::string language_tag = "en";  // metadata only
};

// One token per GT step encoding the agent-relative direction bucket of that
// move (STOP last), so instructions correlate with the actions they describe.
Instruction synthesize_instruction(const Trajectory& traj, const NavGraph& graph,
                                   double init_heading, const std::string& id,
                                   const std::string& language_tag = "en");

struct MaskTarget {
    int position = 0;
    int original_id = 0;
};

struct MaskedInstruction {
    std::vector<int> tokens;
    std::vector<MaskTarget> targets;
};

// Independent masking at `rate`, maximal masked runs collapsed to a single
// MASK sentinel, targets recorded per original position.
MaskedInstruction mask_instruction(const std::vector<int>& tokens, double rate, Rng& rng);

struct HistoryEntry {
    std::vector<float> pooled_obs;
    int chosen_rel_bucket = 0;
};

struct StepExample {
    std::string env_id;
    std::string instruction_id;
    int t = 0;
    int total_steps = 0;  // T = GT step count
    std::vector<int> tokens;
    std::vector<HistoryEntry> history;
    std::vector<float> pooled_obs;  // mean of the 36 view features
    std::vector<ActionCandidate> candidates;
    int constrained_idx = 0;
    int unconstrained_bucket = 0;
    int progress_class = 0;
    std::vector<MaskTarget> masked_tokens;
};

// An instruction paired with its GT trajectory and initial heading.
struct EpisodeSpec {
    std::string env_id;
    Instruction instruction;
    Trajectory gt;
    double init_heading = 0.0;
};

std::string episodes_to_jsonl(const std::vector<EpisodeSpec>& episodes);
std::vector<EpisodeSpec> episodes_from_jsonl(const std::string& text);

// One example per step along GT including the final STOP decision.
// progress_class = floor(20 t / T) clamped to 19; labels from the expert.
std::vector<StepExample> emit_step_examples(const EpisodeSpec& episode, const Simulator& sim,
                                            double mask_rate = 0.0, uint64_t mask_seed = 0);

struct TrainConfig {
    int embed_dim = 64;
    double learning_rate = 0.05;
    double momentum = 0.9;
    int epochs = 30;
    int batch_size = 32;
    uint64_t seed = 0;
    double w_constrained = 1.0;
    double w_unconstrained = 1.0;
    double w_progress = 0.2;
    double w_mlm = 0.1;
    bool use_mlm = false;
    bool freeze_non_embedding = false;  // finetune mode: update embeddings only
};

// Linear policy over a fixed feature map: context = [mean token embedding,
// pooled current obs, last history pooled obs (or zeros), progress t/T, 1].
// Constrained head scores [context, candidate feature, one-hot rel bucket];
// the unconstrained head maps context to 37 bucket logits; final score is
// the equal-weight fusion of the two.
class LinearPolicy {
public:
    LinearPolicy() = default;
    LinearPolicy(int feature_dim, int embed_dim, uint64_t init_seed);

    int feature_dim() const { return feature_dim_; }
    int embed_dim() const { return embed_dim_; }
    int context_dim() const { return embed_dim_ + 2 * feature_dim_ + 2; }

    std::vector<double> context(const StepExample& ex) const;
    // Fused per-candidate scores (0.5 constrained + 0.5 unconstrained bucket).
    std::vector<double> logits(const StepExample& ex) const;
    std::vector<double> unconstrained_logits(const std::vector<double>& ctx) const;
    std::vector<double> progress_logits(const std::vector<double>& ctx) const;
    double constrained_logit(const std::vector<double>& ctx, const ActionCandidate& cand) const;
    // Argmax with tie-break by candidate order.
    int choose(const StepExample& ex) const;

    std::string to_json() const;
    static LinearPolicy from_json(const std::string& text);

    // Flat parameter access for training and finite-difference checks.
    std::vector<double*> parameter_blocks(bool embedding_only);
    const std::vector<double>& embedding() const { return embed_; }

    std::vector<double> embed_;  // (vocab+1) x embed_dim
    std::vector<double> w_;      // context + feature + 37
    std::vector<double> u_;      // 37 x context
    std::vector<double> p_;      // 20 x context
    std::vector<double> m_;      // vocab x context (MLM head, optional)

private:
    int feature_dim_ = 0;
    int embed_dim_ = 0;
};

struct LossValue {
    double total = 0.0;
    double constrained = 0.0;
    double unconstrained = 0.0;
    double progress = 0.0;
    double mlm = 0.0;
};

// Mean loss over a batch; when grads is non-null, accumulates d(total)/d(param)
// into vectors parallel to the policy's parameter blocks.
struct PolicyGradients {
    std::vector<double> embed, w, u, p, m;
};

LossValue policy_loss(const LinearPolicy& policy, const std::vector<const StepExample*>& batch,
                      const TrainConfig& config, PolicyGradients* grads);

struct TrainResult {
    LinearPolicy policy;
    std::vector<double> loss_curve;  // per epoch mean loss
};

TrainResult train_bc(const std::vector<StepExample>& dataset, int feature_dim,
                     const TrainConfig& config, const LinearPolicy* init = nullptr);

// Greedy policy rollout through the simulator.
EpisodeTrace policy_rollout(const LinearPolicy& policy, const EpisodeSpec& episode,
                            const Simulator& sim);

// Rolls out the policy on each episode and labels every visited state with
// the expert action; returns original + new examples (no deduplication),
// sorted by (env_id, instruction_id, t).
std::vector<StepExample> dagger_iteration(const LinearPolicy& policy,
                                          const std::vector<EpisodeSpec>& episodes,
                                          const std::vector<const Simulator*>& sims,
                                          std::vector<StepExample> dataset);

Aggregate evaluate_policy(const LinearPolicy& policy, const std::vector<EpisodeSpec>& episodes,
                          const std::vector<const Simulator*>& sims,
                          std::vector<EvalResult>* per_episode = nullptr);

// StepExample dataset on disk: examples.bin (float payload, same format
// family as features.bin) plus index.jsonl with metadata and offsets.
void save_examples(const std::vector<StepExample>& examples, int feature_dim,
                   const std::string& dir);
std::vector<StepExample> load_examples(const std::string& dir, int* feature_dim = nullptr);

}  // namespace navkit
