#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mvt/corpus.hpp"
#include "mvt/encoding.hpp"
#include "mvt/tensor.hpp"

namespace mvt {

// Encoder-decoder transformer sized by this config. The input pipeline on
// both sides is: embed -> add position encoding (stepped when use_mvpe) ->
// concat tag encoding (when d_post > 0) -> learned projection to d_model.
struct ModelConfig {
    std::size_t d_emb = 64;
    std::size_t d_post = 0;     // tag channel width, 0 disables it
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t n_layers = 2;   // encoder and decoder depth
    std::size_t d_ff = 128;
    std::size_t max_len = 64;
    std::size_t src_vocab = 0;
    std::size_t tgt_vocab = 0;
    std::size_t src_tagset = 0;
    std::size_t tgt_tagset = 0;
    bool use_mvpe = false;
    std::size_t step_k = 1;     // must be 1 when use_mvpe is off
    std::size_t tag_step_k = 1;
    double pe_base = 10000.0;
    std::uint64_t init_seed = 1;

    void validate() const;
    std::size_t fused_dim() const { return d_emb + d_post; }
    std::size_t d_head() const { return d_model / n_heads; }

    // Small config for single-CPU experiments.
    static ModelConfig desk_preset();
    // The full-scale profile: d_emb=300, d_model=512, depth 4, d_post=64.
    static ModelConfig paper_preset();
};

constexpr double kLayerNormEps = 1e-6;

// Named parameter blocks in a fixed order (the checkpoint block order).
// Matrix blocks are initialized uniform in +-sqrt(6/(fan_in+fan_out)),
// biases zero, layer-norm gains one, all from init_seed.
struct ModelParams {
    ModelConfig config;
    std::vector<std::pair<std::string, TensorPtr>> blocks;

    // Constant encoding tables derived from config (not stored in checkpoints).
    EncodingTable src_pe, tgt_pe;
    EncodingTable src_tags, tgt_tags;  // empty when d_post == 0

    const TensorPtr& block(const std::string& name) const;
};

ModelParams init_params(const ModelConfig& cfg);

// Row-major [len_q x len_k] flags, nonzero = may attend.
std::vector<std::uint8_t> full_mask(std::size_t len_q, std::size_t len_k);
std::vector<std::uint8_t> causal_mask(std::size_t len);

// Attention sublayer named by `prefix` (e.g. "enc0.attn"). Queries come from
// q_in, keys and values from kv_in.
TensorPtr multi_head_attention(GradTape* tape, const ModelParams& params, const std::string& prefix,
                               const TensorPtr& q_in, const TensorPtr& kv_in,
                               const std::vector<std::uint8_t>& mask);

// Returns memory [len x d_model].
TensorPtr encoder_forward(GradTape* tape, const ModelParams& params, const TaggedSentence& src);

// Returns logits [len x tgt_vocab]; self-attention is causally masked, so
// row t depends only on tgt_prefix[0..t] and the encoder memory.
TensorPtr decoder_forward(GradTape* tape, const ModelParams& params, const TaggedSentence& tgt_prefix,
                          const TensorPtr& memory);

// Decoder input is the gold sentence shifted right behind BOS (BOS carries
// the neutral tag); gold output is the sentence plus EOS.
struct TeacherForcing {
    TaggedSentence input;
    std::vector<int> gold;
};
TeacherForcing shift_for_teacher_forcing(const TaggedSentence& tgt, int neutral_tag);

// Checkpoint format: one text header line with every ModelConfig field as
// key=value, then per block `block <name> <ndim> <dims...>` followed by the
// values as little-endian 64-bit floats. Round-trips byte-exactly.
void save_checkpoint(std::ostream& os, const ModelParams& params);
ModelParams load_checkpoint(std::istream& is);
void save_checkpoint_file(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint_file(const std::string& path);

}  // namespace mvt
