#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace mvt {

struct EvalPair {
    std::vector<std::string> ref;  // must be non-empty
    std::vector<std::string> hyp;  // may be empty
};

struct BleuResult {
    std::size_t max_n = 4;
    std::vector<std::size_t> matches;  // clipped n-gram matches per order (index 0 = unigrams)
    std::vector<std::size_t> totals;   // hypothesis n-gram counts per order
    std::vector<double> precisions;    // matches/totals, 0 when totals is 0
    double brevity_penalty = 0.0;      // min(1, e^(1 - r/c))
    std::size_t ref_len = 0, hyp_len = 0;
    std::vector<double> bleu;  // bleu[k-1] = BP * geometric mean of precisions 1..k
};

// Corpus-level BLEU with clipped precisions. Throws DataError on an empty
// pair list or an empty reference.
BleuResult corpus_bleu(const std::vector<EvalPair>& pairs, std::size_t max_n = 4);

// Per-sentence BLEU with add-1 smoothing on zero-match orders (an order with
// no hypothesis n-grams counts as precision 1); empty hypothesis scores 0.
double sentence_bleu(const EvalPair& pair, std::size_t max_n = 4);

struct RougeScore {
    double f = 0.0, p = 0.0, r = 0.0;
};

// Macro-averaged sentence ROUGE; F = 2PR/(P+R), 0 when P+R = 0.
RougeScore rouge_n(const std::vector<EvalPair>& pairs, std::size_t n);
RougeScore rouge_l(const std::vector<EvalPair>& pairs);

struct LengthRatioResult {
    double ratio = 0.0;  // hyp_total / ref_total
    std::size_t ref_total = 0, hyp_total = 0;
};

LengthRatioResult length_ratio(const std::vector<EvalPair>& pairs);

enum class BucketDim { word_frequency, sentence_length, length_difference, sentence_bleu };

const char* bucket_dim_name(BucketDim dim);

// Boundaries b0 < b1 < ... < bm partition the real line into
// (-inf,b0), [b0,b1), ..., [bm,inf): every key lands in exactly one bucket.
// An empty boundary list is the single all-covering bucket.
struct BucketSpec {
    BucketDim dimension;
    std::vector<double> boundaries;

    void validate() const;
    std::size_t n_buckets() const { return boundaries.size() + 1; }
    std::size_t bucket_of(double key) const;
    std::string label(std::size_t bucket) const;

    static BucketSpec defaults(BucketDim dim);
};

struct BucketRow {
    std::string label;
    std::size_t count = 0;
    double value = 0.0;
};

struct BucketReport {
    BucketDim dimension;
    std::string value_name;
    std::vector<BucketRow> rows;
};

using FreqTable = std::map<std::string, std::size_t>;

// Word-level F1 per training-frequency bucket (clipped bag-of-words
// matching); a word absent from the table counts as frequency 0. Row counts
// are reference occurrences, so they sum to the reference token total.
BucketReport word_f1_by_freq_bucket(const std::vector<EvalPair>& pairs, const FreqTable& train_freq,
                                    const BucketSpec& spec);

// Mean sentence BLEU per reference-length bucket; counts sum to the number
// of pairs.
BucketReport sentence_bleu_by_length_bucket(const std::vector<EvalPair>& pairs,
                                            const BucketSpec& spec);

// Sentence counts keyed by len(hyp) - len(ref), signed.
BucketReport count_by_length_diff_bucket(const std::vector<EvalPair>& pairs, const BucketSpec& spec);

// Sentence counts keyed by smoothed sentence BLEU.
BucketReport count_by_sentence_bleu_bucket(const std::vector<EvalPair>& pairs,
                                           const BucketSpec& spec);

struct BucketSpecs {
    BucketSpec freq = BucketSpec::defaults(BucketDim::word_frequency);
    BucketSpec length = BucketSpec::defaults(BucketDim::sentence_length);
    BucketSpec diff = BucketSpec::defaults(BucketDim::length_difference);
    BucketSpec bleu = BucketSpec::defaults(BucketDim::sentence_bleu);
};

struct EvalReport {
    std::size_t n_pairs = 0;
    BleuResult bleu;
    RougeScore rouge1, rouge2, rougeL;
    LengthRatioResult length;
    bool has_perplexity = false;
    double perplexity = 0.0;
    BucketReport freq_f1, bleu_by_length, count_by_diff, count_by_bleu;
};

EvalReport evaluate_corpus(const std::vector<EvalPair>& pairs, const FreqTable& train_freq,
                           const BucketSpecs& specs = {});

}  // namespace mvt
