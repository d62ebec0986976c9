#include "mvt/decode.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "mvt/errors.hpp"
#include "mvt/ops.hpp"

namespace mvt {

void DecodeConfig::validate() const {
    if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
}

std::vector<int> greedy_core(const StepFn& step, std::size_t max_out_len) {
    std::vector<int> prefix = {Vocabulary::kBos};
    std::vector<int> out;
    while (out.size() < max_out_len) {
        const std::vector<double> logp = step(prefix);
        std::size_t best = 0;
        for (std::size_t i = 1; i < logp.size(); ++i)
            if (logp[i] > logp[best]) best = i;  // strict >, so ties keep the lowest id
        if (best == static_cast<std::size_t>(Vocabulary::kEos)) break;
        out.push_back(static_cast<int>(best));
        prefix.push_back(static_cast<int>(best));
    }
    return out;
}

namespace {

double hyp_score(double logp_sum, std::size_t emitted, double alpha) {
    const double len = static_cast<double>(emitted == 0 ? 1 : emitted);
    return logp_sum / std::pow(len, alpha);
}

}  // namespace

std::vector<int> beam_core(const StepFn& step, std::size_t max_out_len, std::size_t beam_width,
                           double length_alpha) {
    if (beam_width < 1) throw ConfigError("beam_width must be >= 1");

    struct Finished {
        std::vector<int> tokens;
        double score;
    };
    std::optional<Finished> best;
    auto consider = [&](std::vector<int> tokens, double logp_sum, std::size_t emitted) {
        const double score = hyp_score(logp_sum, emitted, length_alpha);
        if (!best || score > best->score) best = Finished{std::move(tokens), score};
    };

    // Greedy backstop: replay the greedy chain to score it, then seed the
    // finished pool so the returned score can never fall below greedy's.
    {
        const std::vector<int> greedy = greedy_core(step, max_out_len);
        std::vector<int> prefix = {Vocabulary::kBos};
        double sum = 0.0;
        for (int tok : greedy) {
            sum += step(prefix)[static_cast<std::size_t>(tok)];
            prefix.push_back(tok);
        }
        if (greedy.size() < max_out_len) {
            // Greedy stopped on EOS, which counts as an emitted token.
            sum += step(prefix)[static_cast<std::size_t>(Vocabulary::kEos)];
            consider(greedy, sum, greedy.size() + 1);
        } else {
            consider(greedy, sum, greedy.size());
        }
    }

    struct Hyp {
        std::vector<int> tokens;
        double logp_sum;
    };
    std::vector<Hyp> active = {{{}, 0.0}};

    for (std::size_t round = 0; round < max_out_len && !active.empty(); ++round) {
        struct Cand {
            std::size_t hyp;
            int token;
            double logp_sum;
        };
        std::vector<Cand> cands;
        for (std::size_t h = 0; h < active.size(); ++h) {
            std::vector<int> prefix;
            prefix.reserve(active[h].tokens.size() + 1);
            prefix.push_back(Vocabulary::kBos);
            prefix.insert(prefix.end(), active[h].tokens.begin(), active[h].tokens.end());
            const std::vector<double> logp = step(prefix);
            cands.reserve(cands.size() + logp.size());
            for (std::size_t tok = 0; tok < logp.size(); ++tok)
                cands.push_back({h, static_cast<int>(tok), active[h].logp_sum + logp[tok]});
        }
        // Candidates are generated in (hypothesis, token id) order; the
        // stable sort keeps that order on score ties, so pruning is
        // deterministic.
        std::stable_sort(cands.begin(), cands.end(),
                         [](const Cand& a, const Cand& b) { return a.logp_sum > b.logp_sum; });

        // The top beam_width candidates each take a slot; an EOS candidate
        // retires to the finished pool, so the active set can shrink.
        std::vector<Hyp> next;
        std::size_t consumed = 0;
        for (const Cand& c : cands) {
            if (consumed == beam_width) break;
            ++consumed;
            if (c.token == Vocabulary::kEos) {
                consider(active[c.hyp].tokens, c.logp_sum, active[c.hyp].tokens.size() + 1);
            } else {
                Hyp h;
                h.tokens = active[c.hyp].tokens;
                h.tokens.push_back(c.token);
                h.logp_sum = c.logp_sum;
                next.push_back(std::move(h));
            }
        }
        active = std::move(next);
    }

    // Whatever is still active hit the length cap; finish it without EOS.
    for (Hyp& h : active) {
        const std::size_t emitted = h.tokens.size();
        consider(std::move(h.tokens), h.logp_sum, emitted);
    }
    return best->tokens;
}

StepFn model_step_fn(const ModelParams& params, const TaggedSentence& src, int neutral_tag) {
    TensorPtr memory = encoder_forward(nullptr, params, src);
    const ModelParams* p = &params;
    return [p, memory, neutral_tag](const std::vector<int>& prefix) {
        TaggedSentence in;
        in.tokens = prefix;
        in.tags.assign(prefix.size(), neutral_tag);
        TensorPtr logits = decoder_forward(nullptr, *p, in, memory);
        const std::size_t cols = logits->cols();
        return ops::log_softmax_row(logits->data() + (logits->rows() - 1) * cols, cols);
    };
}

namespace {

std::size_t effective_cap(const ModelConfig& mc, const DecodeConfig& cfg) {
    // The BOS-led prefix must stay within max_len.
    return std::min(cfg.max_out_len, mc.max_len - 1);
}

}  // namespace

std::vector<int> greedy_decode(const ModelParams& params, const TaggedSentence& src,
                               const DecodeConfig& cfg, int neutral_tag) {
    cfg.validate();
    return greedy_core(model_step_fn(params, src, neutral_tag), effective_cap(params.config, cfg));
}

std::vector<int> beam_decode(const ModelParams& params, const TaggedSentence& src,
                             const DecodeConfig& cfg, int neutral_tag) {
    cfg.validate();
    return beam_core(model_step_fn(params, src, neutral_tag), effective_cap(params.config, cfg),
                     cfg.beam_width, cfg.length_alpha);
}

}  // namespace mvt
