#include "mvt/report.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "mvt/errors.hpp"
#include "mvt/serialize.hpp"

namespace mvt {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt4(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string fmt_delta(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%+.4f", v);
    return buf;
}

std::string length_display(const LengthRatioResult& len) {
    return fmt4(len.ratio) + " (ref=" + std::to_string(len.ref_total) +
           ", out=" + std::to_string(len.hyp_total) + ")";
}

ordered_json rouge_json(const RougeScore& s) {
    return ordered_json{{"f", s.f}, {"p", s.p}, {"r", s.r}};
}

ordered_json bucket_json(const BucketReport& rep) {
    ordered_json rows = ordered_json::array();
    for (const BucketRow& row : rep.rows)
        rows.push_back(ordered_json{{"label", row.label}, {"count", row.count}, {"value", row.value}});
    return ordered_json{{"dimension", bucket_dim_name(rep.dimension)},
                        {"value_name", rep.value_name},
                        {"rows", rows}};
}

ordered_json report_json(const EvalReport& rep) {
    ordered_json bleu;
    for (std::size_t k = 0; k < rep.bleu.bleu.size(); ++k)
        bleu["bleu_" + std::to_string(k + 1)] = rep.bleu.bleu[k];
    bleu["precisions"] = rep.bleu.precisions;
    bleu["matches"] = rep.bleu.matches;
    bleu["totals"] = rep.bleu.totals;
    bleu["brevity_penalty"] = rep.bleu.brevity_penalty;
    bleu["ref_len"] = rep.bleu.ref_len;
    bleu["hyp_len"] = rep.bleu.hyp_len;

    ordered_json j;
    j["n_pairs"] = rep.n_pairs;
    j["bleu"] = bleu;
    j["rouge_1"] = rouge_json(rep.rouge1);
    j["rouge_2"] = rouge_json(rep.rouge2);
    j["rouge_l"] = rouge_json(rep.rougeL);
    j["length_ratio"] = ordered_json{{"ratio", rep.length.ratio},
                                     {"ref_total", rep.length.ref_total},
                                     {"hyp_total", rep.length.hyp_total},
                                     {"display", length_display(rep.length)}};
    if (rep.has_perplexity)
        j["perplexity"] = rep.perplexity;
    else
        j["perplexity"] = nullptr;
    j["buckets"] = ordered_json{{"word_frequency_f1", bucket_json(rep.freq_f1)},
                                {"sentence_bleu_by_length", bucket_json(rep.bleu_by_length)},
                                {"count_by_length_difference", bucket_json(rep.count_by_diff)},
                                {"count_by_sentence_bleu", bucket_json(rep.count_by_bleu)}};
    return j;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += "\"";
    return out;
}

}  // namespace

std::string eval_report_json(const EvalReport& report) { return report_json(report).dump(2) + "\n"; }

std::string bucket_csv(const BucketReport& report) {
    std::ostringstream os;
    os << "label,count," << report.value_name << "\n";
    for (const BucketRow& row : report.rows)
        os << csv_quote(row.label) << "," << row.count << "," << fmt17(row.value) << "\n";
    return os.str();
}

std::string render_comparison(const std::vector<SystemEval>& systems) {
    if (systems.empty()) throw DataError("no systems to compare");
    std::ostringstream os;
    auto name_col = [](const std::string& name) {
        std::string s = name;
        if (s.size() < 22) s.resize(22, ' ');
        return s + " ";
    };
    auto cell = [](const std::string& v) {
        std::string s = v;
        if (s.size() < 9) s.insert(0, 9 - s.size(), ' ');
        return s + " ";
    };

    os << "== BLEU ==\n";
    os << name_col("system");
    for (int k = 1; k <= 4; ++k) os << cell("BLEU-" + std::to_string(k));
    os << "\n";
    const EvalReport& base = systems.front().report;
    for (std::size_t s = 0; s < systems.size(); ++s) {
        const EvalReport& rep = systems[s].report;
        os << name_col(systems[s].name);
        for (std::size_t k = 0; k < 4; ++k) os << cell(fmt4(rep.bleu.bleu[k]));
        os << "\n";
        if (s > 0) {
            os << name_col("  delta vs " + systems.front().name);
            for (std::size_t k = 0; k < 4; ++k)
                os << cell(fmt_delta(rep.bleu.bleu[k] - base.bleu.bleu[k]));
            os << "\n";
        }
    }

    os << "\n== ROUGE ==\n";
    os << name_col("system");
    for (const char* v : {"R1", "R2", "RL"})
        for (const char* m : {"F", "P", "R"}) os << cell(std::string(v) + "-" + m);
    os << "\n";
    auto rouge_vals = [](const EvalReport& rep) {
        return std::vector<double>{rep.rouge1.f, rep.rouge1.p, rep.rouge1.r,
                                   rep.rouge2.f, rep.rouge2.p, rep.rouge2.r,
                                   rep.rougeL.f, rep.rougeL.p, rep.rougeL.r};
    };
    const auto base_rouge = rouge_vals(base);
    for (std::size_t s = 0; s < systems.size(); ++s) {
        const auto vals = rouge_vals(systems[s].report);
        os << name_col(systems[s].name);
        for (double v : vals) os << cell(fmt4(v));
        os << "\n";
        if (s > 0) {
            os << name_col("  delta vs " + systems.front().name);
            for (std::size_t k = 0; k < vals.size(); ++k)
                os << cell(fmt_delta(vals[k] - base_rouge[k]));
            os << "\n";
        }
    }

    os << "\n== Length ratio ==\n";
    os << name_col("system") << "value\n";
    for (const SystemEval& sys : systems)
        os << name_col(sys.name) << length_display(sys.report.length) << "\n";

    bool any_ppl = false;
    for (const SystemEval& sys : systems) any_ppl = any_ppl || sys.report.has_perplexity;
    if (any_ppl) {
        os << "\n== Perplexity ==\n";
        os << name_col("system") << cell("ppl");
        os << "\n";
        for (std::size_t s = 0; s < systems.size(); ++s) {
            const EvalReport& rep = systems[s].report;
            os << name_col(systems[s].name)
               << cell(rep.has_perplexity ? fmt4(rep.perplexity) : std::string("n/a"));
            os << "\n";
            if (s > 0 && rep.has_perplexity && base.has_perplexity) {
                os << name_col("  delta vs " + systems.front().name)
                   << cell(fmt_delta(rep.perplexity - base.perplexity)) << "\n";
            }
        }
    }
    return os.str();
}

std::string comparison_json(const std::vector<SystemEval>& systems) {
    if (systems.empty()) throw DataError("no systems to compare");
    ordered_json j;
    j["baseline"] = systems.front().name;
    ordered_json sys_array = ordered_json::array();
    for (const SystemEval& sys : systems)
        sys_array.push_back(ordered_json{{"name", sys.name}, {"report", report_json(sys.report)}});
    j["systems"] = sys_array;

    const EvalReport& base = systems.front().report;
    ordered_json deltas = ordered_json::array();
    for (std::size_t s = 1; s < systems.size(); ++s) {
        const EvalReport& rep = systems[s].report;
        ordered_json d;
        d["name"] = systems[s].name;
        ordered_json bleu = ordered_json::array();
        for (std::size_t k = 0; k < 4; ++k) bleu.push_back(rep.bleu.bleu[k] - base.bleu.bleu[k]);
        d["bleu"] = bleu;
        d["rouge_1"] = ordered_json{{"f", rep.rouge1.f - base.rouge1.f},
                                    {"p", rep.rouge1.p - base.rouge1.p},
                                    {"r", rep.rouge1.r - base.rouge1.r}};
        d["rouge_2"] = ordered_json{{"f", rep.rouge2.f - base.rouge2.f},
                                    {"p", rep.rouge2.p - base.rouge2.p},
                                    {"r", rep.rouge2.r - base.rouge2.r}};
        d["rouge_l"] = ordered_json{{"f", rep.rougeL.f - base.rougeL.f},
                                    {"p", rep.rougeL.p - base.rougeL.p},
                                    {"r", rep.rougeL.r - base.rougeL.r}};
        d["length_ratio"] = rep.length.ratio - base.length.ratio;
        if (rep.has_perplexity && base.has_perplexity)
            d["perplexity"] = rep.perplexity - base.perplexity;
        else
            d["perplexity"] = nullptr;
        deltas.push_back(d);
    }
    j["deltas"] = deltas;
    return j.dump(2) + "\n";
}

}  // namespace mvt
