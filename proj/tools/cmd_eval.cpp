#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cli_common.hpp"
#include "mvt/metrics.hpp"
#include "mvt/report.hpp"
#include "mvt/serialize.hpp"
#include "mvt/training.hpp"

namespace mvt::cli {

namespace {

std::vector<EvalPair> make_eval_pairs(const std::vector<std::string>& ref_lines,
                                      const std::vector<std::string>& hyp_lines) {
    if (ref_lines.size() != hyp_lines.size())
        throw DataError("reference has " + std::to_string(ref_lines.size()) +
                        " lines but hypothesis has " + std::to_string(hyp_lines.size()));
    std::vector<EvalPair> pairs;
    pairs.reserve(ref_lines.size());
    for (std::size_t i = 0; i < ref_lines.size(); ++i)
        pairs.push_back({tokenize(ref_lines[i]), tokenize(hyp_lines[i])});
    return pairs;
}

FreqTable load_freq_table(const std::string& train_corpus) {
    if (train_corpus.empty()) return {};
    return word_frequencies(read_file_lines(train_corpus));
}

// Model perplexity of the references given the sources (reference tags are
// neutral: plain references carry no tag information).
double reference_perplexity(const std::string& model_dir, const std::string& src_file,
                            const std::string& src_format,
                            const std::vector<std::string>& ref_lines) {
    ModelDir md = load_model_dir(model_dir);
    std::vector<TaggedText> src = read_source_file(src_file, src_format, md.tags);
    if (src.size() != ref_lines.size())
        throw DataError("source has " + std::to_string(src.size()) + " sentences but reference has " +
                        std::to_string(ref_lines.size()) + " lines");
    const int neutral = md.tags.neutral_id();
    std::vector<SentencePair> data;
    data.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        std::vector<std::string> words = tokenize(ref_lines[i]);
        TaggedText ref{words, std::vector<int>(words.size(), neutral)};
        data.push_back({encode_sentence(src[i], md.src_vocab), encode_sentence(ref, md.tgt_vocab)});
    }
    return perplexity(evaluate_loss(md.params, data, neutral));
}

void write_bucket_files(const std::string& out_dir, const EvalReport& report) {
    write_text_file(path_join(out_dir, "word_frequency_f1.csv"), bucket_csv(report.freq_f1));
    write_text_file(path_join(out_dir, "sentence_bleu_by_length.csv"),
                    bucket_csv(report.bleu_by_length));
    write_text_file(path_join(out_dir, "count_by_length_difference.csv"),
                    bucket_csv(report.count_by_diff));
    write_text_file(path_join(out_dir, "count_by_sentence_bleu.csv"),
                    bucket_csv(report.count_by_bleu));
}

void print_headline(const EvalReport& report) {
    std::cout << "pairs=" << report.n_pairs << "\n";
    for (std::size_t k = 0; k < report.bleu.bleu.size(); ++k)
        std::cout << "bleu_" << (k + 1) << "=" << fmt17(report.bleu.bleu[k]) << "\n";
    std::cout << "rouge_l_f=" << fmt17(report.rougeL.f) << "\n";
    std::cout << "length_ratio=" << fmt17(report.length.ratio) << " (ref=" << report.length.ref_total
              << ", out=" << report.length.hyp_total << ")\n";
    if (report.has_perplexity) std::cout << "perplexity=" << fmt17(report.perplexity) << "\n";
}

struct EvaluateOptions {
    std::string ref, hyp, train_corpus, out_dir;
    std::string model_dir, src_file;
    std::string src_format = "plain";
    const CLI::App* root = nullptr;
};

void run_evaluate(const EvaluateOptions& o) {
    std::vector<std::string> ref_lines = read_file_lines(o.ref);
    std::vector<std::string> hyp_lines = read_file_lines(o.hyp);
    std::vector<EvalPair> pairs = make_eval_pairs(ref_lines, hyp_lines);
    EvalReport report = evaluate_corpus(pairs, load_freq_table(o.train_corpus));
    if (!o.model_dir.empty()) {
        if (o.src_file.empty())
            throw ConfigError("--src is required for perplexity with --model-dir");
        report.perplexity = reference_perplexity(o.model_dir, o.src_file, o.src_format, ref_lines);
        report.has_perplexity = true;
    }
    ensure_dir(o.out_dir);
    write_text_file(path_join(o.out_dir, "report.json"), eval_report_json(report));
    write_bucket_files(o.out_dir, report);
    dump_run_config(*o.root, path_join(o.out_dir, kRunConfigFile));
    print_headline(report);
}

struct CompareOptions {
    std::string ref, train_corpus, out_dir;
    std::vector<std::string> systems;
    const CLI::App* root = nullptr;
};

void run_compare(const CompareOptions& o) {
    std::vector<std::string> ref_lines = read_file_lines(o.ref);
    FreqTable freq = load_freq_table(o.train_corpus);
    std::vector<SystemEval> systems;
    for (const std::string& spec : o.systems) {
        std::size_t eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
            throw ConfigError("--system expects name=hyp-file, got: " + spec);
        const std::string name = spec.substr(0, eq);
        const std::string path = spec.substr(eq + 1);
        std::vector<EvalPair> pairs = make_eval_pairs(ref_lines, read_file_lines(path));
        systems.push_back({name, evaluate_corpus(pairs, freq)});
    }
    ensure_dir(o.out_dir);
    const std::string text = render_comparison(systems);
    write_text_file(path_join(o.out_dir, "comparison.txt"), text);
    write_text_file(path_join(o.out_dir, "comparison.json"), comparison_json(systems));
    dump_run_config(*o.root, path_join(o.out_dir, kRunConfigFile));
    std::cout << text;
}

}  // namespace

void add_cmd_evaluate(CLI::App& app) {
    auto o = std::make_shared<EvaluateOptions>();
    CLI::App* sub =
        app.add_subcommand("evaluate", "Score a hypothesis file against references");
    sub->add_option("--ref", o->ref, "Reference file, one sentence per line")->required();
    sub->add_option("--hyp", o->hyp, "Hypothesis file, one sentence per line")->required();
    sub->add_option("--train-corpus", o->train_corpus,
                    "Training target corpus for frequency buckets (absent words count as 0)");
    sub->add_option("--out-dir", o->out_dir, "Directory for report.json and bucket CSVs")
        ->required();
    sub->add_option("--model-dir", o->model_dir, "Model directory for reference perplexity");
    sub->add_option("--src", o->src_file, "Source file matching --ref (needed for perplexity)");
    sub->add_option("--src-format", o->src_format, "Source format: plain or tagged")
        ->check(CLI::IsMember({"plain", "tagged"}))
        ->capture_default_str();
    o->root = &app;
    sub->callback([o] { run_evaluate(*o); });
}

void add_cmd_compare(CLI::App& app) {
    auto o = std::make_shared<CompareOptions>();
    CLI::App* sub = app.add_subcommand("compare", "Side-by-side report over several systems");
    sub->add_option("--ref", o->ref, "Reference file, one sentence per line")->required();
    sub->add_option("--train-corpus", o->train_corpus,
                    "Training target corpus for frequency buckets");
    sub->add_option("--system", o->systems, "System as name=hyp-file (repeatable, first is baseline)")
        ->required()
        ->expected(1, -1);
    sub->add_option("--out-dir", o->out_dir, "Directory for comparison.txt and comparison.json")
        ->required();
    o->root = &app;
    sub->callback([o] { run_compare(*o); });
}

}  // namespace mvt::cli
