#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cli_common.hpp"
#include "mvt/decode.hpp"

namespace mvt::cli {

namespace {

struct TranslateOptions {
    std::string model_dir;
    std::string input, output;
    std::string format = "plain";
    std::string strategy = "greedy";
    std::size_t beam_width = 1;
    double length_alpha = 0.0;
    std::size_t max_out_len = 64;
    const CLI::App* root = nullptr;
};

void run_translate(const TranslateOptions& o) {
    ModelDir md = load_model_dir(o.model_dir);
    std::vector<TaggedText> sents = read_source_file(o.input, o.format, md.tags);

    DecodeConfig cfg;
    cfg.max_out_len = o.max_out_len;
    cfg.strategy =
        o.strategy == "beam" ? DecodeConfig::Strategy::beam : DecodeConfig::Strategy::greedy;
    cfg.beam_width = o.beam_width;
    cfg.length_alpha = o.length_alpha;
    cfg.validate();

    std::ostringstream out;
    for (const TaggedText& sent : sents) {
        TaggedSentence enc = encode_sentence(sent, md.src_vocab);
        std::vector<int> ids = cfg.strategy == DecodeConfig::Strategy::beam
                                   ? beam_decode(md.params, enc, cfg, md.tags.neutral_id())
                                   : greedy_decode(md.params, enc, cfg, md.tags.neutral_id());
        std::vector<std::string> words;
        words.reserve(ids.size());
        for (int id : ids) words.push_back(md.tgt_vocab.token_of(id));
        out << join_tokens(words) << "\n";
    }
    write_text_file(o.output, out.str());
    dump_run_config(*o.root, o.output + ".run.cfg");
    std::cout << "translated " << sents.size() << " sentences to " << o.output << "\n";
}

}  // namespace

void add_cmd_translate(CLI::App& app) {
    auto o = std::make_shared<TranslateOptions>();
    CLI::App* sub = app.add_subcommand("translate", "Decode a source file with a trained model");
    sub->add_option("--model-dir", o->model_dir, "Directory holding model.ckpt, vocab, tagset")
        ->required();
    sub->add_option("--input", o->input, "Source file")->required();
    sub->add_option("--output", o->output, "Output file, one sentence per line")->required();
    sub->add_option("--format", o->format, "Input format: plain or tagged")
        ->check(CLI::IsMember({"plain", "tagged"}))
        ->capture_default_str();
    sub->add_option("--strategy", o->strategy, "Decoding strategy: greedy or beam")
        ->check(CLI::IsMember({"greedy", "beam"}))
        ->capture_default_str();
    sub->add_option("--beam-width", o->beam_width, "Beam width")->capture_default_str();
    sub->add_option("--length-alpha", o->length_alpha, "Length-normalization exponent")
        ->capture_default_str();
    sub->add_option("--max-out-len", o->max_out_len, "Maximum generated tokens per sentence")
        ->capture_default_str();
    o->root = &app;
    sub->callback([o] { run_translate(*o); });
}

}  // namespace mvt::cli
