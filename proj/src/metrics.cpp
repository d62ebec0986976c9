#include "mvt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mvt/errors.hpp"

namespace mvt {

namespace {

using Counts = std::map<std::vector<std::string>, std::size_t>;

Counts ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
    Counts counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return counts;
}

void check_pairs(const std::vector<EvalPair>& pairs) {
    if (pairs.empty()) throw DataError("no evaluation pairs");
    for (std::size_t i = 0; i < pairs.size(); ++i)
        if (pairs[i].ref.empty())
            throw DataError("pair " + std::to_string(i + 1) + ": empty reference");
}

double safe_div(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double f_measure(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string fmt_g(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

BleuResult corpus_bleu(const std::vector<EvalPair>& pairs, std::size_t max_n) {
    if (max_n < 1) throw ConfigError("BLEU max_n must be >= 1");
    check_pairs(pairs);

    BleuResult res;
    res.max_n = max_n;
    res.matches.assign(max_n, 0);
    res.totals.assign(max_n, 0);
    for (const EvalPair& pair : pairs) {
        res.ref_len += pair.ref.size();
        res.hyp_len += pair.hyp.size();
        for (std::size_t n = 1; n <= max_n; ++n) {
            const Counts hyp_counts = ngram_counts(pair.hyp, n);
            const Counts ref_counts = ngram_counts(pair.ref, n);
            for (const auto& [gram, count] : hyp_counts) {
                auto it = ref_counts.find(gram);
                const std::size_t ref_count = it == ref_counts.end() ? 0 : it->second;
                res.matches[n - 1] += std::min(count, ref_count);
                res.totals[n - 1] += count;
            }
        }
    }
    res.precisions.resize(max_n);
    for (std::size_t n = 0; n < max_n; ++n)
        res.precisions[n] = safe_div(res.matches[n], res.totals[n]);
    res.brevity_penalty =
        res.hyp_len == 0
            ? 0.0
            : std::min(1.0, std::exp(1.0 - static_cast<double>(res.ref_len) /
                                               static_cast<double>(res.hyp_len)));
    res.bleu.resize(max_n);
    for (std::size_t k = 1; k <= max_n; ++k) {
        double log_sum = 0.0;
        bool zero = false;
        for (std::size_t n = 0; n < k; ++n) {
            if (res.precisions[n] <= 0.0) {
                zero = true;
                break;
            }
            log_sum += std::log(res.precisions[n]);
        }
        res.bleu[k - 1] = zero ? 0.0 : res.brevity_penalty * std::exp(log_sum / static_cast<double>(k));
    }
    return res;
}

double sentence_bleu(const EvalPair& pair, std::size_t max_n) {
    if (max_n < 1) throw ConfigError("BLEU max_n must be >= 1");
    if (pair.ref.empty()) throw DataError("empty reference");
    if (pair.hyp.empty()) return 0.0;

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        const Counts hyp_counts = ngram_counts(pair.hyp, n);
        const Counts ref_counts = ngram_counts(pair.ref, n);
        std::size_t matches = 0, total = 0;
        for (const auto& [gram, count] : hyp_counts) {
            auto it = ref_counts.find(gram);
            matches += std::min(count, it == ref_counts.end() ? 0 : it->second);
            total += count;
        }
        const double p = matches == 0
                             ? static_cast<double>(matches + 1) / static_cast<double>(total + 1)
                             : static_cast<double>(matches) / static_cast<double>(total);
        log_sum += std::log(p);
    }
    const double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(pair.ref.size()) /
                                                       static_cast<double>(pair.hyp.size())));
    return bp * std::exp(log_sum / static_cast<double>(max_n));
}

RougeScore rouge_n(const std::vector<EvalPair>& pairs, std::size_t n) {
    if (n < 1) throw ConfigError("ROUGE n must be >= 1");
    check_pairs(pairs);
    RougeScore acc;
    for (const EvalPair& pair : pairs) {
        const Counts hyp_counts = ngram_counts(pair.hyp, n);
        const Counts ref_counts = ngram_counts(pair.ref, n);
        std::size_t overlap = 0, hyp_total = 0, ref_total = 0;
        for (const auto& [gram, count] : hyp_counts) {
            auto it = ref_counts.find(gram);
            overlap += std::min(count, it == ref_counts.end() ? 0 : it->second);
            hyp_total += count;
        }
        for (const auto& [gram, count] : ref_counts) ref_total += count;
        const double p = safe_div(overlap, hyp_total);
        const double r = safe_div(overlap, ref_total);
        acc.p += p;
        acc.r += r;
        acc.f += f_measure(p, r);
    }
    const double m = static_cast<double>(pairs.size());
    return {acc.f / m, acc.p / m, acc.r / m};
}

RougeScore rouge_l(const std::vector<EvalPair>& pairs) {
    check_pairs(pairs);
    RougeScore acc;
    for (const EvalPair& pair : pairs) {
        const std::size_t lcs = lcs_length(pair.ref, pair.hyp);
        const double p = safe_div(lcs, pair.hyp.size());
        const double r = safe_div(lcs, pair.ref.size());
        acc.p += p;
        acc.r += r;
        acc.f += f_measure(p, r);
    }
    const double m = static_cast<double>(pairs.size());
    return {acc.f / m, acc.p / m, acc.r / m};
}

LengthRatioResult length_ratio(const std::vector<EvalPair>& pairs) {
    check_pairs(pairs);
    LengthRatioResult res;
    for (const EvalPair& pair : pairs) {
        res.ref_total += pair.ref.size();
        res.hyp_total += pair.hyp.size();
    }
    res.ratio = static_cast<double>(res.hyp_total) / static_cast<double>(res.ref_total);
    return res;
}

const char* bucket_dim_name(BucketDim dim) {
    switch (dim) {
        case BucketDim::word_frequency: return "word_frequency";
        case BucketDim::sentence_length: return "sentence_length";
        case BucketDim::length_difference: return "length_difference";
        case BucketDim::sentence_bleu: return "sentence_bleu";
    }
    throw ConfigError("invalid bucket dimension");
}

void BucketSpec::validate() const {
    for (std::size_t i = 1; i < boundaries.size(); ++i)
        if (!(boundaries[i - 1] < boundaries[i]))
            throw ConfigError("bucket boundaries must be strictly increasing");
}

std::size_t BucketSpec::bucket_of(double key) const {
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), key);
    return static_cast<std::size_t>(it - boundaries.begin());
}

std::string BucketSpec::label(std::size_t bucket) const {
    if (boundaries.empty()) return "all";
    if (bucket == 0) return "<" + fmt_g(boundaries.front());
    if (bucket >= boundaries.size()) return ">=" + fmt_g(boundaries.back());
    return "[" + fmt_g(boundaries[bucket - 1]) + "," + fmt_g(boundaries[bucket]) + ")";
}

BucketSpec BucketSpec::defaults(BucketDim dim) {
    switch (dim) {
        case BucketDim::word_frequency:
            return {dim, {1, 2, 3, 4, 5, 10, 100, 1000}};
        case BucketDim::sentence_length:
            return {dim, {5, 10, 15, 20, 25, 30, 40, 50}};
        case BucketDim::length_difference:
            return {dim, {-5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 6}};
        case BucketDim::sentence_bleu:
            return {dim, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}};
    }
    throw ConfigError("invalid bucket dimension");
}

namespace {

BucketReport empty_report(const BucketSpec& spec, std::string value_name) {
    spec.validate();
    BucketReport rep;
    rep.dimension = spec.dimension;
    rep.value_name = std::move(value_name);
    rep.rows.resize(spec.n_buckets());
    for (std::size_t b = 0; b < rep.rows.size(); ++b) rep.rows[b].label = spec.label(b);
    return rep;
}

}  // namespace

BucketReport word_f1_by_freq_bucket(const std::vector<EvalPair>& pairs, const FreqTable& train_freq,
                                    const BucketSpec& spec) {
    BucketReport rep = empty_report(spec, "f1");
    const std::size_t n = rep.rows.size();
    std::vector<std::size_t> matched(n, 0), hyp_total(n, 0), ref_total(n, 0);

    auto bucket_of_word = [&](const std::string& word) {
        auto it = train_freq.find(word);
        const std::size_t freq = it == train_freq.end() ? 0 : it->second;
        return spec.bucket_of(static_cast<double>(freq));
    };

    for (const EvalPair& pair : pairs) {
        std::map<std::string, std::size_t> rc, hc;
        for (const std::string& w : pair.ref) ++rc[w];
        for (const std::string& w : pair.hyp) ++hc[w];
        for (const auto& [word, count] : rc) {
            const std::size_t b = bucket_of_word(word);
            ref_total[b] += count;
            auto it = hc.find(word);
            matched[b] += std::min(count, it == hc.end() ? 0 : it->second);
        }
        for (const auto& [word, count] : hc) hyp_total[bucket_of_word(word)] += count;
    }
    for (std::size_t b = 0; b < n; ++b) {
        rep.rows[b].count = ref_total[b];
        rep.rows[b].value =
            f_measure(safe_div(matched[b], hyp_total[b]), safe_div(matched[b], ref_total[b]));
    }
    return rep;
}

BucketReport sentence_bleu_by_length_bucket(const std::vector<EvalPair>& pairs,
                                            const BucketSpec& spec) {
    BucketReport rep = empty_report(spec, "mean_sentence_bleu");
    std::vector<double> sums(rep.rows.size(), 0.0);
    for (const EvalPair& pair : pairs) {
        const std::size_t b = spec.bucket_of(static_cast<double>(pair.ref.size()));
        rep.rows[b].count += 1;
        sums[b] += sentence_bleu(pair);
    }
    for (std::size_t b = 0; b < rep.rows.size(); ++b)
        rep.rows[b].value = rep.rows[b].count == 0 ? 0.0 : sums[b] / static_cast<double>(rep.rows[b].count);
    return rep;
}

BucketReport count_by_length_diff_bucket(const std::vector<EvalPair>& pairs, const BucketSpec& spec) {
    BucketReport rep = empty_report(spec, "count");
    for (const EvalPair& pair : pairs) {
        const double diff =
            static_cast<double>(pair.hyp.size()) - static_cast<double>(pair.ref.size());
        rep.rows[spec.bucket_of(diff)].count += 1;
    }
    for (BucketRow& row : rep.rows) row.value = static_cast<double>(row.count);
    return rep;
}

BucketReport count_by_sentence_bleu_bucket(const std::vector<EvalPair>& pairs,
                                           const BucketSpec& spec) {
    BucketReport rep = empty_report(spec, "count");
    for (const EvalPair& pair : pairs) rep.rows[spec.bucket_of(sentence_bleu(pair))].count += 1;
    for (BucketRow& row : rep.rows) row.value = static_cast<double>(row.count);
    return rep;
}

EvalReport evaluate_corpus(const std::vector<EvalPair>& pairs, const FreqTable& train_freq,
                           const BucketSpecs& specs) {
    check_pairs(pairs);
    EvalReport rep;
    rep.n_pairs = pairs.size();
    rep.bleu = corpus_bleu(pairs, 4);
    rep.rouge1 = rouge_n(pairs, 1);
    rep.rouge2 = rouge_n(pairs, 2);
    rep.rougeL = rouge_l(pairs);
    rep.length = length_ratio(pairs);
    rep.freq_f1 = word_f1_by_freq_bucket(pairs, train_freq, specs.freq);
    rep.bleu_by_length = sentence_bleu_by_length_bucket(pairs, specs.length);
    rep.count_by_diff = count_by_length_diff_bucket(pairs, specs.diff);
    rep.count_by_bleu = count_by_sentence_bleu_bucket(pairs, specs.bleu);
    return rep;
}

}  // namespace mvt
