#pragma once

#include <functional>
#include <vector>

#include "mvt/model.hpp"

namespace mvt {

struct DecodeConfig {
    std::size_t max_out_len = 64;
    enum class Strategy { greedy, beam };
    Strategy strategy = Strategy::greedy;
    std::size_t beam_width = 1;
    double length_alpha = 0.0;

    void validate() const;
};

// Maps a BOS-led prefix of token ids to the log-probability row for the next
// token. The cores below are generation strategies over any such function,
// which keeps them testable against hand-built distributions.
using StepFn = std::function<std::vector<double>(const std::vector<int>& prefix)>;

// Argmax chain: ties break toward the lowest token id; stops at EOS or after
// max_out_len tokens. The result excludes BOS and EOS.
std::vector<int> greedy_core(const StepFn& step, std::size_t max_out_len);

// Beam search maximizing sum(log P) / len^alpha, where len counts every
// emitted token including the closing EOS (so the score is defined for
// EOS-first hypotheses). The finished pool is seeded with the greedy
// hypothesis, which makes the returned score >= the greedy score by
// construction. beam_width=1 with alpha=0 reproduces greedy_core exactly.
std::vector<int> beam_core(const StepFn& step, std::size_t max_out_len, std::size_t beam_width,
                           double length_alpha);

// Model-backed decoding. The target tag channel carries the neutral tag for
// BOS and every generated token.
std::vector<int> greedy_decode(const ModelParams& params, const TaggedSentence& src,
                               const DecodeConfig& cfg, int neutral_tag);
std::vector<int> beam_decode(const ModelParams& params, const TaggedSentence& src,
                             const DecodeConfig& cfg, int neutral_tag);

// The StepFn greedy_decode/beam_decode run on: encodes src once, then scores
// prefixes with the decoder. Exposed for causality and consistency tests.
StepFn model_step_fn(const ModelParams& params, const TaggedSentence& src, int neutral_tag);

}  // namespace mvt
