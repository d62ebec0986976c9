#include "mvt/model.hpp"

#include <cmath>
#include <cstring>

#include "mvt/errors.hpp"
#include "mvt/ops.hpp"
#include "mvt/rng.hpp"

namespace mvt {

void ModelConfig::validate() const {
    if (d_emb == 0 || d_emb % 2 != 0)
        throw ConfigError("d_emb must be positive and even, got " + std::to_string(d_emb));
    if (d_post % 2 != 0)
        throw ConfigError("d_post must be even (0 disables the tag channel), got " + std::to_string(d_post));
    if (d_model == 0) throw ConfigError("d_model must be positive");
    if (n_heads == 0) throw ConfigError("n_heads must be positive");
    if (d_model % n_heads != 0)
        throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                          std::to_string(n_heads));
    if (n_layers == 0) throw ConfigError("n_layers must be positive");
    if (d_ff == 0) throw ConfigError("d_ff must be positive");
    if (max_len == 0) throw ConfigError("max_len must be positive");
    if (src_vocab <= 4 || tgt_vocab <= 4)
        throw ConfigError("vocab sizes must exceed the 4 reserved ids");
    if (src_tagset == 0 || tgt_tagset == 0) throw ConfigError("tagset sizes must be positive");
    if (pe_base <= 1.0) throw ConfigError("pe_base must be > 1");
    if (step_k < 1) throw ConfigError("step_k must be >= 1");
    if (tag_step_k < 1) throw ConfigError("tag_step_k must be >= 1");
    if (!use_mvpe && step_k != 1)
        throw ConfigError("step_k > 1 requires use_mvpe");
}

ModelConfig ModelConfig::desk_preset() {
    ModelConfig cfg;
    cfg.d_emb = 64;
    cfg.d_post = 0;
    cfg.d_model = 64;
    cfg.n_heads = 4;
    cfg.n_layers = 2;
    cfg.d_ff = 128;
    cfg.max_len = 64;
    return cfg;
}

ModelConfig ModelConfig::paper_preset() {
    ModelConfig cfg;
    cfg.d_emb = 300;
    cfg.d_post = 64;
    cfg.d_model = 512;
    cfg.n_heads = 8;
    cfg.n_layers = 4;
    cfg.d_ff = 2048;
    cfg.max_len = 512;
    return cfg;
}

namespace {

enum class InitKind { uniform, zeros, ones };

struct BlockSpec {
    std::string name;
    std::vector<std::size_t> shape;
    InitKind init;
};

std::vector<BlockSpec> block_specs(const ModelConfig& cfg) {
    std::vector<BlockSpec> specs;
    auto mat = [&](std::string name, std::size_t r, std::size_t c) {
        specs.push_back({std::move(name), {r, c}, InitKind::uniform});
    };
    auto vec = [&](std::string name, std::size_t d, InitKind init = InitKind::zeros) {
        specs.push_back({std::move(name), {d}, init});
    };
    auto attn = [&](const std::string& p) {
        mat(p + ".wq", cfg.d_model, cfg.d_model);
        vec(p + ".bq", cfg.d_model);
        mat(p + ".wk", cfg.d_model, cfg.d_model);
        vec(p + ".bk", cfg.d_model);
        mat(p + ".wv", cfg.d_model, cfg.d_model);
        vec(p + ".bv", cfg.d_model);
        mat(p + ".wo", cfg.d_model, cfg.d_model);
        vec(p + ".bo", cfg.d_model);
    };
    auto norm = [&](const std::string& p) {
        vec(p + ".g", cfg.d_model, InitKind::ones);
        vec(p + ".b", cfg.d_model);
    };
    auto ffn = [&](const std::string& p) {
        mat(p + ".w1", cfg.d_model, cfg.d_ff);
        vec(p + ".b1", cfg.d_ff);
        mat(p + ".w2", cfg.d_ff, cfg.d_model);
        vec(p + ".b2", cfg.d_model);
    };

    mat("src_embed", cfg.src_vocab, cfg.d_emb);
    mat("tgt_embed", cfg.tgt_vocab, cfg.d_emb);
    mat("src_proj_w", cfg.fused_dim(), cfg.d_model);
    vec("src_proj_b", cfg.d_model);
    mat("tgt_proj_w", cfg.fused_dim(), cfg.d_model);
    vec("tgt_proj_b", cfg.d_model);
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        const std::string p = "enc" + std::to_string(i);
        attn(p + ".attn");
        norm(p + ".norm1");
        ffn(p + ".ff");
        norm(p + ".norm2");
    }
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        const std::string p = "dec" + std::to_string(i);
        attn(p + ".self");
        norm(p + ".norm1");
        attn(p + ".cross");
        norm(p + ".norm2");
        ffn(p + ".ff");
        norm(p + ".norm3");
    }
    mat("out_w", cfg.d_model, cfg.tgt_vocab);
    vec("out_b", cfg.tgt_vocab);
    return specs;
}

void attach_tables(ModelParams& params) {
    const ModelConfig& cfg = params.config;
    EncodingConfig pe{cfg.d_emb, cfg.pe_base, cfg.max_len, cfg.step_k};
    params.src_pe = build_mvpe_table(pe);
    params.tgt_pe = build_mvpe_table(pe);
    if (cfg.d_post > 0) {
        params.src_tags = build_mvpe_table({cfg.d_post, cfg.pe_base, cfg.src_tagset, cfg.tag_step_k});
        params.tgt_tags = build_mvpe_table({cfg.d_post, cfg.pe_base, cfg.tgt_tagset, cfg.tag_step_k});
    }
}

// Per-token fusion: embedding + position row, tag row concatenated, then the
// learned projection to d_model. The encoding rows enter as constants.
TensorPtr fused_input(GradTape* tape, const ModelParams& params, const TaggedSentence& sent,
                      bool src_side) {
    const ModelConfig& cfg = params.config;
    const char* side = src_side ? "source" : "target";
    if (sent.tokens.empty()) throw DataError(std::string(side) + " sentence is empty");
    if (sent.tokens.size() != sent.tags.size())
        throw DataError(std::string(side) + " sentence has " + std::to_string(sent.tokens.size()) +
                        " tokens but " + std::to_string(sent.tags.size()) + " tags");
    const std::size_t len = sent.tokens.size();
    if (len > cfg.max_len)
        throw DataError(std::string(side) + " sentence length " + std::to_string(len) +
                        " exceeds max_len " + std::to_string(cfg.max_len));

    TensorPtr emb = ops::embedding_rows(tape, params.block(src_side ? "src_embed" : "tgt_embed"),
                                        sent.tokens);
    const EncodingTable& pe = src_side ? params.src_pe : params.tgt_pe;
    TensorPtr pe_rows = make_tensor({len, cfg.d_emb});
    for (std::size_t i = 0; i < len; ++i)
        std::memcpy(pe_rows->data() + i * cfg.d_emb, pe.row(i).data(), cfg.d_emb * sizeof(double));
    TensorPtr x = ops::add(tape, emb, pe_rows);

    if (cfg.d_post > 0) {
        const EncodingTable& tag_table = src_side ? params.src_tags : params.tgt_tags;
        const std::size_t tagset = src_side ? cfg.src_tagset : cfg.tgt_tagset;
        TensorPtr tag_rows = make_tensor({len, cfg.d_post});
        for (std::size_t i = 0; i < len; ++i) {
            const int tag = sent.tags[i];
            if (tag < 0 || static_cast<std::size_t>(tag) >= tagset)
                throw DataError(std::string(side) + " tag id " + std::to_string(tag) +
                                " out of range (tagset size " + std::to_string(tagset) + ")");
            std::memcpy(tag_rows->data() + i * cfg.d_post,
                        tag_table.row(static_cast<std::size_t>(tag)).data(),
                        cfg.d_post * sizeof(double));
        }
        x = ops::concat_cols(tape, x, tag_rows);
    }

    return ops::add_rowvec(tape, ops::matmul(tape, x, params.block(src_side ? "src_proj_w" : "tgt_proj_w")),
                           params.block(src_side ? "src_proj_b" : "tgt_proj_b"));
}

TensorPtr feed_forward(GradTape* tape, const ModelParams& params, const std::string& p,
                       const TensorPtr& x) {
    TensorPtr h = ops::relu(
        tape, ops::add_rowvec(tape, ops::matmul(tape, x, params.block(p + ".w1")), params.block(p + ".b1")));
    return ops::add_rowvec(tape, ops::matmul(tape, h, params.block(p + ".w2")), params.block(p + ".b2"));
}

TensorPtr residual_norm(GradTape* tape, const ModelParams& params, const std::string& p,
                        const TensorPtr& x, const TensorPtr& sub) {
    return ops::layer_norm(tape, ops::add(tape, x, sub), params.block(p + ".g"), params.block(p + ".b"),
                           kLayerNormEps);
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams params;
    params.config = cfg;
    Rng rng(cfg.init_seed);
    for (const BlockSpec& spec : block_specs(cfg)) {
        TensorPtr t = make_tensor(spec.shape);
        switch (spec.init) {
            case InitKind::uniform: {
                const double bound =
                    std::sqrt(6.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
                for (double& v : t->values()) v = rng.uniform(-bound, bound);
                break;
            }
            case InitKind::ones:
                for (double& v : t->values()) v = 1.0;
                break;
            case InitKind::zeros:
                break;
        }
        t->enable_grad();
        params.blocks.emplace_back(spec.name, std::move(t));
    }
    attach_tables(params);
    return params;
}

const TensorPtr& ModelParams::block(const std::string& name) const {
    for (const auto& [n, t] : blocks)
        if (n == name) return t;
    throw ConfigError("unknown parameter block " + name);
}

std::vector<std::uint8_t> full_mask(std::size_t len_q, std::size_t len_k) {
    return std::vector<std::uint8_t>(len_q * len_k, 1);
}

std::vector<std::uint8_t> causal_mask(std::size_t len) {
    std::vector<std::uint8_t> mask(len * len, 0);
    for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = 0; j <= i; ++j) mask[i * len + j] = 1;
    return mask;
}

TensorPtr multi_head_attention(GradTape* tape, const ModelParams& params, const std::string& prefix,
                               const TensorPtr& q_in, const TensorPtr& kv_in,
                               const std::vector<std::uint8_t>& mask) {
    const ModelConfig& cfg = params.config;
    auto W = [&](const char* suffix) -> const TensorPtr& { return params.block(prefix + suffix); };

    TensorPtr q = ops::add_rowvec(tape, ops::matmul(tape, q_in, W(".wq")), W(".bq"));
    TensorPtr k = ops::add_rowvec(tape, ops::matmul(tape, kv_in, W(".wk")), W(".bk"));
    TensorPtr v = ops::add_rowvec(tape, ops::matmul(tape, kv_in, W(".wv")), W(".bv"));

    const std::size_t dh = cfg.d_head();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    TensorPtr ctx;
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        TensorPtr qh = ops::slice_cols(tape, q, h * dh, (h + 1) * dh);
        TensorPtr kh = ops::slice_cols(tape, k, h * dh, (h + 1) * dh);
        TensorPtr vh = ops::slice_cols(tape, v, h * dh, (h + 1) * dh);
        TensorPtr scores = ops::scale(tape, ops::matmul(tape, qh, ops::transpose(tape, kh)), inv_sqrt_dh);
        TensorPtr weights = ops::masked_softmax_rows(tape, scores, mask);
        TensorPtr ctx_h = ops::matmul(tape, weights, vh);
        ctx = h == 0 ? ctx_h : ops::concat_cols(tape, ctx, ctx_h);
    }
    return ops::add_rowvec(tape, ops::matmul(tape, ctx, W(".wo")), W(".bo"));
}

TensorPtr encoder_forward(GradTape* tape, const ModelParams& params, const TaggedSentence& src) {
    const ModelConfig& cfg = params.config;
    TensorPtr x = fused_input(tape, params, src, true);
    const auto mask = full_mask(src.tokens.size(), src.tokens.size());
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        const std::string p = "enc" + std::to_string(i);
        TensorPtr attn = multi_head_attention(tape, params, p + ".attn", x, x, mask);
        x = residual_norm(tape, params, p + ".norm1", x, attn);
        TensorPtr ff = feed_forward(tape, params, p + ".ff", x);
        x = residual_norm(tape, params, p + ".norm2", x, ff);
    }
    return x;
}

TensorPtr decoder_forward(GradTape* tape, const ModelParams& params, const TaggedSentence& tgt_prefix,
                          const TensorPtr& memory) {
    const ModelConfig& cfg = params.config;
    if (memory->ndim() != 2 || memory->cols() != cfg.d_model)
        throw ShapeError("memory shape " + shape_str(memory->shape()) + " does not match d_model " +
                         std::to_string(cfg.d_model));
    TensorPtr x = fused_input(tape, params, tgt_prefix, false);
    const std::size_t len = tgt_prefix.tokens.size();
    const auto self_mask = causal_mask(len);
    const auto cross = full_mask(len, memory->rows());
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        const std::string p = "dec" + std::to_string(i);
        TensorPtr self = multi_head_attention(tape, params, p + ".self", x, x, self_mask);
        x = residual_norm(tape, params, p + ".norm1", x, self);
        TensorPtr cr = multi_head_attention(tape, params, p + ".cross", x, memory, cross);
        x = residual_norm(tape, params, p + ".norm2", x, cr);
        TensorPtr ff = feed_forward(tape, params, p + ".ff", x);
        x = residual_norm(tape, params, p + ".norm3", x, ff);
    }
    return ops::add_rowvec(tape, ops::matmul(tape, x, params.block("out_w")), params.block("out_b"));
}

TeacherForcing shift_for_teacher_forcing(const TaggedSentence& tgt, int neutral_tag) {
    if (tgt.tokens.empty()) throw DataError("cannot teacher-force an empty sentence");
    if (tgt.tokens.size() != tgt.tags.size())
        throw DataError("sentence has " + std::to_string(tgt.tokens.size()) + " tokens but " +
                        std::to_string(tgt.tags.size()) + " tags");
    TeacherForcing tf;
    tf.input.tokens.reserve(tgt.tokens.size() + 1);
    tf.input.tokens.push_back(Vocabulary::kBos);
    tf.input.tokens.insert(tf.input.tokens.end(), tgt.tokens.begin(), tgt.tokens.end());
    tf.input.tags.reserve(tgt.tags.size() + 1);
    tf.input.tags.push_back(neutral_tag);
    tf.input.tags.insert(tf.input.tags.end(), tgt.tags.begin(), tgt.tags.end());
    tf.gold = tgt.tokens;
    tf.gold.push_back(Vocabulary::kEos);
    return tf;
}

}  // namespace mvt
