#include "mvt/encoding.hpp"

#include <cmath>
#include <string>

#include "mvt/errors.hpp"

namespace mvt {

void EncodingConfig::validate() const {
    if (d_model == 0 || d_model % 2 != 0)
        throw ConfigError("encoding: d_model must be even and positive, got " + std::to_string(d_model));
    if (!(base > 1.0)) throw ConfigError("encoding: base must exceed 1");
    if (max_len == 0) throw ConfigError("encoding: max_len must be positive");
    if (step_k < 1) throw ConfigError("encoding: step_k must be >= 1");
}

namespace {

// One encoding row at real-valued phase argument `scaled_pos` (pos * k).
// The phase is used directly, no modular wrap.
void fill_row(double* dst, std::size_t d_model, double base, double scaled_pos) {
    for (std::size_t i = 0; 2 * i < d_model; ++i) {
        const double denom = std::pow(base, (2.0 * static_cast<double>(i)) / static_cast<double>(d_model));
        const double phase = scaled_pos / denom;
        dst[2 * i] = std::sin(phase);
        dst[2 * i + 1] = std::cos(phase);
    }
}

EncodingTable build_table(const EncodingConfig& cfg) {
    cfg.validate();
    EncodingTable table;
    table.config = cfg;
    table.rows.resize(cfg.max_len * cfg.d_model);
    for (std::size_t pos = 0; pos < cfg.max_len; ++pos)
        fill_row(table.rows.data() + pos * cfg.d_model, cfg.d_model, cfg.base,
                 static_cast<double>(pos) * static_cast<double>(cfg.step_k));
    return table;
}

}  // namespace

EncodingTable build_pe_table(const EncodingConfig& cfg) {
    if (cfg.step_k != 1)
        throw ConfigError("build_pe_table: step_k must be 1 (got " + std::to_string(cfg.step_k) +
                          "); use build_mvpe_table for stepped encodings");
    return build_table(cfg);
}

EncodingTable build_mvpe_table(const EncodingConfig& cfg) { return build_table(cfg); }

double variance_objective(const EncodingTable& table, std::size_t L, Norm norm,
                          bool consecutive_only) {
    if (L > table.config.max_len)
        throw ConfigError("variance_objective: L=" + std::to_string(L) + " exceeds table height " +
                          std::to_string(table.config.max_len));
    if (L < 2) return 0.0;
    const std::size_t d = table.config.d_model;
    double total = 0.0;
    for (std::size_t i = 1; i + 1 < L; ++i) {
        const double* a = table.rows.data() + i * d;
        const std::size_t j_end = consecutive_only ? i + 2 : L;
        for (std::size_t j = i + 1; j < j_end; ++j) {
            const double* b = table.rows.data() + j * d;
            double dist = 0.0;
            if (norm == Norm::l2) {
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = a[c] - b[c];
                    dist += diff * diff;
                }
                dist = std::sqrt(dist);
            } else {
                for (std::size_t c = 0; c < d; ++c) dist += std::fabs(a[c] - b[c]);
            }
            total += dist;
        }
    }
    return total;
}

StepSearchResult search_optimal_step(std::size_t d_model, double base, std::size_t L,
                                     const std::vector<std::size_t>& k_candidates,
                                     double plateau_frac, Norm norm, bool consecutive_only) {
    if (k_candidates.empty()) throw ConfigError("step search: empty candidate list");
    for (std::size_t k : k_candidates)
        if (k < 1) throw ConfigError("step search: candidate steps must be >= 1");
    if (!(plateau_frac >= 0.0 && plateau_frac < 1.0))
        throw ConfigError("step search: plateau fraction must lie in [0,1)");

    StepSearchResult res;
    res.curve.reserve(k_candidates.size());
    for (std::size_t k : k_candidates) {
        EncodingConfig cfg{d_model, base, L > 0 ? L : 1, k};
        const EncodingTable table = build_mvpe_table(cfg);
        const double obj = variance_objective(table, L, norm, consecutive_only);
        res.curve.emplace_back(k, obj);
        if (obj > res.max_objective) res.max_objective = obj;
    }
    const double threshold = (1.0 - plateau_frac) * res.max_objective;
    for (const auto& [k, obj] : res.curve) {
        if (obj >= threshold) {
            res.best_k = k;
            res.best_objective = obj;
            break;
        }
    }
    return res;
}

std::vector<double> encode_pos_tag(std::size_t tag_id, std::size_t d_post, double base,
                                   std::size_t tag_step_k, std::size_t tagset_size) {
    if (d_post == 0 || d_post % 2 != 0)
        throw ConfigError("tag encoding: d_post must be even and positive, got " + std::to_string(d_post));
    if (tag_id >= tagset_size)
        throw DataError("tag encoding: tag id " + std::to_string(tag_id) +
                        " outside tagset of size " + std::to_string(tagset_size));
    if (tag_step_k < 1) throw ConfigError("tag encoding: step must be >= 1");
    std::vector<double> out(d_post);
    fill_row(out.data(), d_post, base, static_cast<double>(tag_id) * static_cast<double>(tag_step_k));
    return out;
}

std::vector<double> fuse_inputs(std::span<const double> word_emb, std::size_t position,
                                std::size_t tag_id, const EncodingTable& word_table,
                                const EncodingTable* tag_table) {
    if (word_emb.size() != word_table.config.d_model)
        throw ShapeError("fuse_inputs: embedding width " + std::to_string(word_emb.size()) +
                         " does not match encoding width " + std::to_string(word_table.config.d_model));
    if (position >= word_table.config.max_len)
        throw ConfigError("fuse_inputs: position " + std::to_string(position) +
                          " out of range (max_len " + std::to_string(word_table.config.max_len) + ")");
    const std::size_t d_emb = word_emb.size();
    const std::size_t d_post = tag_table ? tag_table->config.d_model : 0;
    std::vector<double> out(d_emb + d_post);
    const auto pe = word_table.row(position);
    for (std::size_t i = 0; i < d_emb; ++i) out[i] = word_emb[i] + pe[i];
    if (tag_table) {
        if (tag_id >= tag_table->config.max_len)
            throw DataError("fuse_inputs: tag id " + std::to_string(tag_id) +
                            " outside tag table of height " + std::to_string(tag_table->config.max_len));
        const auto tg = tag_table->row(tag_id);
        for (std::size_t i = 0; i < d_post; ++i) out[d_emb + i] = tg[i];
    }
    return out;
}

}  // namespace mvt
