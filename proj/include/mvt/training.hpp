#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <vector>

#include "mvt/corpus.hpp"
#include "mvt/model.hpp"
#include "mvt/rng.hpp"
#include "mvt/tensor.hpp"

namespace mvt {

struct SentencePair {
    TaggedSentence src;
    TaggedSentence tgt;
};

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t steps = 1000;
    double lr_scale = 1.0;         // multiplies the schedule; 0 freezes the parameters
    std::size_t warmup_steps = 400;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.98;
    double adam_eps = 1e-9;
    std::uint64_t seed = 1;
    std::size_t eval_interval = 100;      // 0 evaluates/logs only at the final step
    std::size_t checkpoint_interval = 0;  // 0 checkpoints only at the final step
    double stop_accuracy = 0.0;  // stop early once teacher-forced eval accuracy reaches this; 0 disables

    void validate() const;

    // Inverse-sqrt schedule with linear warmup, scaled by d_model^-0.5.
    // step is 1-based.
    double learning_rate(std::size_t step, std::size_t d_model) const;
};

// Everything mutable across steps besides the parameters themselves.
// Serialization round-trips bitwise, so a restored run continues exactly
// like an uninterrupted one.
struct TrainState {
    std::size_t step = 0;
    double running_loss = 0.0;
    Rng rng;
    std::vector<std::vector<double>> m, v;  // Adam moments, one entry per parameter block

    static TrainState init(const ModelParams& params, std::uint64_t seed);
    void save(std::ostream& os) const;
    static TrainState load(std::istream& is, const ModelParams& params);
};

// Mean negative log-likelihood over the positions pad_mask marks live.
TensorPtr cross_entropy_loss(GradTape* tape, const TensorPtr& logits, const std::vector<int>& gold,
                             const std::vector<std::uint8_t>& pad_mask);

double perplexity(double loss_per_token);

// One optimizer step over a batch (mean of per-sentence losses). Returns the
// batch loss. A non-finite loss aborts with a diagnostic naming the first
// non-finite parameter block.
double train_step(ModelParams& params, TrainState& state, const TrainConfig& cfg,
                  const std::vector<const SentencePair*>& batch, int neutral_tag);

// Token-mean NLL over the whole set (pad targets excluded).
double evaluate_loss(const ModelParams& params, const std::vector<SentencePair>& data,
                     int neutral_tag);

// Fraction of non-pad gold tokens the argmax row prediction gets right.
double teacher_forced_accuracy(const ModelParams& params, const std::vector<SentencePair>& data,
                               int neutral_tag);

struct TrainLogEntry {
    std::size_t step;
    double train_loss;
    double eval_loss;  // NaN when no eval data
    double eval_ppl;
};

struct TrainHooks {
    std::function<void(const TrainLogEntry&)> on_log;
    std::function<void(const ModelParams&, const TrainState&)> on_checkpoint;
};

// Runs state.step -> cfg.steps, sampling batches from train_data with the
// state RNG. Returns the step reached (early stop can end sooner).
std::size_t train_loop(ModelParams& params, TrainState& state, const TrainConfig& cfg,
                       const std::vector<SentencePair>& train_data,
                       const std::vector<SentencePair>& eval_data, int neutral_tag,
                       const TrainHooks& hooks);

}  // namespace mvt
