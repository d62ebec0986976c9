#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace mvt {

// Sinusoidal position encodings. The table maps position p to a d_model
// vector whose even entries are sin(p*k / base^(2i/d_model)) and odd entries
// the matching cosines. step_k = 1 is the plain encoding; step_k > 1 spreads
// consecutive positions further apart on every frequency, which is what the
// step search below optimizes for.
struct EncodingConfig {
    std::size_t d_model = 0;   // even, > 0
    double base = 10000.0;     // > 1
    std::size_t max_len = 0;   // rows in the table
    std::size_t step_k = 1;    // position multiplier, >= 1

    void validate() const;
};

struct EncodingTable {
    EncodingConfig config;
    std::vector<double> rows;  // max_len * d_model, row-major

    std::span<const double> row(std::size_t pos) const {
        return {rows.data() + pos * config.d_model, config.d_model};
    }
};

// Plain sinusoidal table; cfg.step_k must be 1.
EncodingTable build_pe_table(const EncodingConfig& cfg);

// Stepped table: row p encodes position p * step_k. step_k = 1 reproduces
// build_pe_table bit for bit.
EncodingTable build_mvpe_table(const EncodingConfig& cfg);

enum class Norm { l2, l1 };

// Sum of ||row(i) - row(j)|| over all index pairs 1 <= i < j < L
// (consecutive_only restricts to j = i + 1). Rows enter at the table's own
// step, so on a stepped table this is the spread between encoded positions
// i*k and j*k. Returns 0 for L < 2.
double variance_objective(const EncodingTable& table, std::size_t L,
                          Norm norm = Norm::l2, bool consecutive_only = false);

struct StepSearchResult {
    std::size_t best_k = 0;      // smallest candidate within plateau_frac of the max
    double best_objective = 0.0; // objective at best_k
    double max_objective = 0.0;  // curve maximum
    std::vector<std::pair<std::size_t, double>> curve;  // (k, objective) per candidate
};

// Evaluates the objective for every candidate step and applies the
// plateau-entry rule: pick the smallest k whose objective reaches
// (1 - plateau_frac) of the curve maximum.
StepSearchResult search_optimal_step(std::size_t d_model, double base, std::size_t L,
                                     const std::vector<std::size_t>& k_candidates,
                                     double plateau_frac = 0.01, Norm norm = Norm::l2,
                                     bool consecutive_only = false);

// Sinusoidal encoding of a POS tag id, treating the id as a position in a
// d_post-dimensional table (tag_step_k = 1 for the plain variant).
std::vector<double> encode_pos_tag(std::size_t tag_id, std::size_t d_post, double base,
                                   std::size_t tag_step_k, std::size_t tagset_size);

struct FusionConfig {
    std::size_t d_emb = 0;       // word embedding width, equals the position table width
    std::size_t d_post = 0;      // tag channel width; 0 disables the channel
    bool use_mvpe = false;
    std::size_t step_k = 1;
    std::size_t tag_step_k = 1;

    std::size_t fused_dim() const { return d_emb + d_post; }
};

// concat(word_emb + position_row, tag_row). tag_table may be null when the
// tag channel is disabled; then the result is the plain add of embedding and
// position encoding.
std::vector<double> fuse_inputs(std::span<const double> word_emb, std::size_t position,
                                std::size_t tag_id, const EncodingTable& word_table,
                                const EncodingTable* tag_table);

}  // namespace mvt
