#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mvt/errors.hpp"
#include "mvt/report.hpp"
#include "mvt/rng.hpp"

using namespace mvt;
using nlohmann::json;

namespace {

std::vector<EvalPair> sample_pairs(std::uint64_t seed, std::size_t n) {
    const std::vector<std::string> alphabet = {"aa", "bb", "cc", "dd"};
    Rng rng(seed);
    std::vector<EvalPair> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        EvalPair pair;
        const std::size_t ref_len = 1 + rng.below(5);
        for (std::size_t t = 0; t < ref_len; ++t)
            pair.ref.push_back(alphabet[rng.below(alphabet.size())]);
        const std::size_t hyp_len = rng.below(6);
        for (std::size_t t = 0; t < hyp_len; ++t)
            pair.hyp.push_back(alphabet[rng.below(alphabet.size())]);
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

EvalReport sample_report(std::uint64_t seed) {
    FreqTable train_freq{{"aa", 1}, {"bb", 12}, {"cc", 300}};
    return evaluate_corpus(sample_pairs(seed, 6), train_freq);
}

// Structural JSON-schema checker covering the subset the published schema
// uses: type (string or list), properties/required/additionalProperties,
// items, and #/$defs/... references.
void check_schema(const json& schema, const json& node, const json& root,
                  const std::string& path, std::vector<std::string>& errors) {
    if (schema.contains("$ref")) {
        const std::string ref = schema["$ref"].get<std::string>();
        const std::string prefix = "#/$defs/";
        if (ref.rfind(prefix, 0) != 0) {
            errors.push_back(path + ": unsupported $ref " + ref);
            return;
        }
        check_schema(root["$defs"][ref.substr(prefix.size())], node, root, path, errors);
        return;
    }
    if (schema.contains("type")) {
        auto matches = [&](const std::string& t) {
            if (t == "object") return node.is_object();
            if (t == "array") return node.is_array();
            if (t == "string") return node.is_string();
            if (t == "integer") return node.is_number_integer() || node.is_number_unsigned();
            if (t == "number") return node.is_number();
            if (t == "boolean") return node.is_boolean();
            if (t == "null") return node.is_null();
            return false;
        };
        bool ok = false;
        if (schema["type"].is_array()) {
            for (const auto& t : schema["type"]) ok = ok || matches(t.get<std::string>());
        } else {
            ok = matches(schema["type"].get<std::string>());
        }
        if (!ok) {
            errors.push_back(path + ": type mismatch, got " + std::string(node.type_name()));
            return;
        }
    }
    if (node.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema["required"])
                if (!node.contains(key.get<std::string>()))
                    errors.push_back(path + ": missing required key " + key.get<std::string>());
        const bool closed = schema.contains("additionalProperties") &&
                            schema["additionalProperties"].is_boolean() &&
                            !schema["additionalProperties"].get<bool>();
        for (const auto& [key, value] : node.items()) {
            if (schema.contains("properties") && schema["properties"].contains(key))
                check_schema(schema["properties"][key], value, root, path + "/" + key, errors);
            else if (closed)
                errors.push_back(path + ": unexpected key " + key);
        }
    }
    if (node.is_array() && schema.contains("items")) {
        std::size_t i = 0;
        for (const auto& item : node)
            check_schema(schema["items"], item, root, path + "/" + std::to_string(i++), errors);
    }
}

std::vector<std::string> schema_errors(const json& schema, const json& doc) {
    std::vector<std::string> errors;
    check_schema(schema, doc, schema, "", errors);
    return errors;
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("report JSON is stable and carries the metric values") {
    EvalReport rep = sample_report(1);
    const std::string a = eval_report_json(rep);
    const std::string b = eval_report_json(sample_report(1));
    CHECK(a == b);

    json j = json::parse(a);
    CHECK(j["n_pairs"] == 6);
    CHECK(j["bleu"]["bleu_1"].get<double>() == rep.bleu.bleu[0]);
    CHECK(j["bleu"]["bleu_4"].get<double>() == rep.bleu.bleu[3]);
    CHECK(j["bleu"]["matches"].size() == 4);
    CHECK(j["bleu"]["ref_len"] == rep.bleu.ref_len);
    CHECK(j["rouge_1"]["f"].get<double>() == rep.rouge1.f);
    CHECK(j["rouge_l"]["r"].get<double>() == rep.rougeL.r);
    CHECK(j["length_ratio"]["ratio"].get<double>() == rep.length.ratio);
    CHECK(j["length_ratio"]["display"].get<std::string>().find("ref=") != std::string::npos);
    CHECK(j["perplexity"].is_null());
    CHECK(j["buckets"]["word_frequency_f1"]["rows"].size() == rep.freq_f1.rows.size());
    CHECK(j["buckets"]["count_by_length_difference"]["value_name"] == "count");

    rep.has_perplexity = true;
    rep.perplexity = 12.25;
    json with_ppl = json::parse(eval_report_json(rep));
    CHECK(with_ppl["perplexity"].get<double>() == 12.25);
}

TEST_CASE("report JSON validates against the published schema") {
    std::ifstream is(std::string(MVT_REPO_ROOT) + "/schemas/eval_report.schema.json");
    REQUIRE(is.good());
    json schema = json::parse(is);

    EvalReport rep = sample_report(2);
    for (bool with_ppl : {false, true}) {
        rep.has_perplexity = with_ppl;
        rep.perplexity = 3.5;
        json doc = json::parse(eval_report_json(rep));
        auto errors = schema_errors(schema, doc);
        for (const std::string& e : errors) MESSAGE(e);
        CHECK(errors.empty());
    }

    // The checker itself rejects a broken document.
    json doc = json::parse(eval_report_json(rep));
    doc.erase("bleu");
    doc["surprise"] = 1;
    CHECK_FALSE(schema_errors(schema, doc).empty());
}

TEST_CASE("bucket CSV quoting and formatting") {
    BucketReport rep;
    rep.dimension = BucketDim::word_frequency;
    rep.value_name = "f1";
    rep.rows = {{"<1", 3, 0.5}, {"[1,2)", 0, 0.0}, {"a\"b", 2, 1.0 / 3.0}};
    const std::string csv = bucket_csv(rep);
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    CHECK(line == "label,count,f1");
    std::getline(is, line);
    CHECK(line == "\"<1\",3,0.5");
    std::getline(is, line);
    CHECK(line == "\"[1,2)\",0,0");
    std::getline(is, line);
    CHECK(line == "\"a\"\"b\",2,0.33333333333333331");
    CHECK_FALSE(std::getline(is, line));
}

TEST_CASE("self-comparison renders zero deltas") {
    SystemEval sys{"baseline", sample_report(3)};
    SystemEval same{"clone", sample_report(3)};
    const std::string text = render_comparison({sys, same});
    CHECK(text.find("== BLEU ==") != std::string::npos);
    CHECK(text.find("== ROUGE ==") != std::string::npos);
    CHECK(text.find("== Length ratio ==") != std::string::npos);
    CHECK(text.find("== Perplexity ==") == std::string::npos);  // nobody has one
    CHECK(text.find("delta vs baseline") != std::string::npos);

    // Every delta cell on a delta row is exactly +0.0000.
    std::istringstream is(text);
    std::string line;
    std::size_t delta_rows = 0;
    while (std::getline(is, line)) {
        if (line.find("delta vs") == std::string::npos) continue;
        ++delta_rows;
        std::size_t pos = 0;
        while ((pos = line.find("0.0000", pos)) != std::string::npos) {
            CHECK(line[pos - 1] == '+');
            pos += 6;
        }
        CHECK(line.find("-0.") == std::string::npos);
    }
    CHECK(delta_rows == 2);  // one under BLEU, one under ROUGE
}

TEST_CASE("perplexity section appears when any system has one") {
    SystemEval a{"base", sample_report(4)};
    SystemEval b{"other", sample_report(5)};
    b.report.has_perplexity = true;
    b.report.perplexity = 8.0;
    const std::string text = render_comparison({a, b});
    CHECK(text.find("== Perplexity ==") != std::string::npos);
    CHECK(text.find("n/a") != std::string::npos);       // the base has no perplexity
    CHECK(text.find("8.0000") != std::string::npos);
}

TEST_CASE("comparison JSON deltas equal recomputed differences") {
    SystemEval a{"base", sample_report(6)};
    SystemEval b{"variant", sample_report(7)};
    a.report.has_perplexity = true;
    a.report.perplexity = 10.0;
    b.report.has_perplexity = true;
    b.report.perplexity = 7.5;

    json j = json::parse(comparison_json({a, b}));
    CHECK(j["baseline"] == "base");
    REQUIRE(j["systems"].size() == 2);
    CHECK(j["systems"][0]["name"] == "base");
    CHECK(j["systems"][1]["report"]["n_pairs"] == 6);
    REQUIRE(j["deltas"].size() == 1);
    const json& d = j["deltas"][0];
    CHECK(d["name"] == "variant");
    for (std::size_t k = 0; k < 4; ++k)
        CHECK(d["bleu"][k].get<double>() ==
              doctest::Approx(b.report.bleu.bleu[k] - a.report.bleu.bleu[k]).epsilon(1e-15));
    CHECK(d["rouge_l"]["f"].get<double>() ==
          doctest::Approx(b.report.rougeL.f - a.report.rougeL.f).epsilon(1e-15));
    CHECK(d["length_ratio"].get<double>() ==
          doctest::Approx(b.report.length.ratio - a.report.length.ratio).epsilon(1e-15));
    CHECK(d["perplexity"].get<double>() == doctest::Approx(-2.5).epsilon(1e-15));

    b.report.has_perplexity = false;
    json no_ppl = json::parse(comparison_json({a, b}));
    CHECK(no_ppl["deltas"][0]["perplexity"].is_null());
}

TEST_CASE("comparisons require at least one system") {
    CHECK_THROWS_WITH_AS(render_comparison({}), "no systems to compare", DataError);
    CHECK_THROWS_WITH_AS(comparison_json({}), "no systems to compare", DataError);
}

}  // TEST_SUITE
