#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cli_common.hpp"
#include "json.hpp"
#include "mvt/decode.hpp"
#include "mvt/encoding.hpp"
#include "mvt/metrics.hpp"
#include "mvt/report.hpp"
#include "mvt/serialize.hpp"
#include "mvt/training.hpp"

namespace mvt::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

struct TripleOptions {
    std::string out_dir;
    std::size_t n_samples = 10000;
    std::size_t n_eval = 200;
    std::size_t vocab_size = 50;
    std::size_t len_min = 3;
    std::size_t len_max = 12;
    std::uint64_t data_seed = 1;
    std::uint64_t init_seed = 1;
    std::uint64_t train_seed = 1;
    std::size_t steps = 1200;
    std::size_t batch_size = 32;
    double lr_scale = 1.0;
    std::size_t warmup_steps = 400;
    std::size_t eval_interval = 200;
    std::size_t d_emb = 64;
    std::size_t d_post = 64;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t n_layers = 2;
    std::size_t d_ff = 128;
    std::size_t max_len = 64;
    std::size_t k_max = 500;
    double plateau_frac = 0.01;
    const CLI::App* root = nullptr;
};

struct TripleData {
    std::vector<TaggedText> train_src, train_tgt, eval_src, eval_tgt;
    Vocabulary src_vocab, tgt_vocab;
    TagSet tags;
    std::vector<SentencePair> train, eval;
    FreqTable train_freq;

    TripleData() : tags(TagSet::penn_default()) {}
};

std::vector<std::string> surface_lines(const std::vector<TaggedText>& sents) {
    std::vector<std::string> lines;
    lines.reserve(sents.size());
    for (const TaggedText& s : sents) lines.push_back(join_tokens(s.words));
    return lines;
}

std::vector<SentencePair> encode_pairs(const std::vector<TaggedText>& src,
                                       const std::vector<TaggedText>& tgt,
                                       const Vocabulary& src_vocab, const Vocabulary& tgt_vocab) {
    std::vector<SentencePair> pairs;
    pairs.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i)
        pairs.push_back({encode_sentence(src[i], src_vocab), encode_sentence(tgt[i], tgt_vocab)});
    return pairs;
}

TripleData build_data(const TripleOptions& o) {
    TripleData d;
    ParallelTaggedCorpus corpus = synth_task(SynthKind::tagged_translation, o.n_samples + o.n_eval,
                                             o.vocab_size, o.len_min, o.len_max, o.data_seed);
    d.tags = corpus.tags;
    d.train_src.assign(corpus.src.begin(), corpus.src.begin() + o.n_samples);
    d.train_tgt.assign(corpus.tgt.begin(), corpus.tgt.begin() + o.n_samples);
    d.eval_src.assign(corpus.src.begin() + o.n_samples, corpus.src.end());
    d.eval_tgt.assign(corpus.tgt.begin() + o.n_samples, corpus.tgt.end());
    d.src_vocab = build_vocab(surface_lines(d.train_src), 1, 0);
    d.tgt_vocab = build_vocab(surface_lines(d.train_tgt), 1, 0);
    d.train = encode_pairs(d.train_src, d.train_tgt, d.src_vocab, d.tgt_vocab);
    d.eval = encode_pairs(d.eval_src, d.eval_tgt, d.src_vocab, d.tgt_vocab);
    d.train_freq = word_frequencies(surface_lines(d.train_tgt));
    return d;
}

ModelConfig base_config(const TripleOptions& o, const TripleData& d) {
    ModelConfig cfg;
    cfg.d_emb = o.d_emb;
    cfg.d_post = 0;
    cfg.d_model = o.d_model;
    cfg.n_heads = o.n_heads;
    cfg.n_layers = o.n_layers;
    cfg.d_ff = o.d_ff;
    cfg.max_len = o.max_len;
    cfg.src_vocab = d.src_vocab.size();
    cfg.tgt_vocab = d.tgt_vocab.size();
    cfg.src_tagset = d.tags.size();
    cfg.tgt_tagset = d.tags.size();
    cfg.use_mvpe = false;
    cfg.step_k = 1;
    cfg.tag_step_k = 1;
    cfg.init_seed = o.init_seed;
    return cfg;
}

void save_model_dir_files(const std::string& dir, const TripleData& d) {
    {
        std::ostringstream os;
        d.src_vocab.save(os);
        write_text_file(path_join(dir, kSrcVocabFile), os.str());
    }
    {
        std::ostringstream os;
        d.tgt_vocab.save(os);
        write_text_file(path_join(dir, kTgtVocabFile), os.str());
    }
    {
        std::ostringstream os;
        d.tags.save(os);
        write_text_file(path_join(dir, kTagSetFile), os.str());
    }
}

void dump_corpus_files(const std::string& dir, const TripleData& d) {
    auto vertical = [&d](const std::string& path, const std::vector<TaggedText>& sents) {
        std::ostringstream os;
        write_tagged_corpus(os, sents, d.tags);
        write_text_file(path, os.str());
    };
    auto plain = [](const std::string& path, const std::vector<TaggedText>& sents) {
        std::ostringstream os;
        for (const TaggedText& s : sents) os << join_tokens(s.words) << "\n";
        write_text_file(path, os.str());
    };
    vertical(path_join(dir, "train_src.vert"), d.train_src);
    vertical(path_join(dir, "train_tgt.vert"), d.train_tgt);
    plain(path_join(dir, "train_tgt.txt"), d.train_tgt);
    vertical(path_join(dir, "eval_src.vert"), d.eval_src);
    vertical(path_join(dir, "eval_tgt.vert"), d.eval_tgt);
    plain(path_join(dir, "eval_ref.txt"), d.eval_tgt);
}

SystemEval run_one(const TripleOptions& o, const TripleData& d, const std::string& name,
                   const ModelConfig& cfg) {
    const std::string dir = path_join(o.out_dir, name);
    ensure_dir(dir);
    save_model_dir_files(dir, d);

    ModelParams params = init_params(cfg);
    TrainState state = TrainState::init(params, o.train_seed);
    TrainConfig tc;
    tc.batch_size = o.batch_size;
    tc.steps = o.steps;
    tc.lr_scale = o.lr_scale;
    tc.warmup_steps = o.warmup_steps;
    tc.seed = o.train_seed;
    tc.eval_interval = o.eval_interval;

    std::ofstream log(path_join(dir, kTrainLogFile), std::ios::binary);
    if (!log) throw DataError("cannot write " + path_join(dir, kTrainLogFile));
    TrainHooks hooks;
    hooks.on_log = [&log, &name](const TrainLogEntry& e) {
        std::ostringstream line;
        line << e.step << "\t" << fmt17(e.train_loss) << "\t" << fmt17(e.eval_loss) << "\t"
             << fmt17(e.eval_ppl) << "\n";
        log << line.str();
        log.flush();
        std::cout << name << "\t" << line.str();
    };
    hooks.on_checkpoint = [&dir](const ModelParams& p, const TrainState& s) {
        save_checkpoint_file(path_join(dir, kCheckpointFile), p);
        std::ofstream os(path_join(dir, kTrainStateFile), std::ios::binary);
        if (!os) throw DataError("cannot write " + path_join(dir, kTrainStateFile));
        s.save(os);
    };
    train_loop(params, state, tc, d.train, d.eval, d.tags.neutral_id(), hooks);

    const double ppl = perplexity(evaluate_loss(params, d.eval, d.tags.neutral_id()));

    DecodeConfig dc;
    dc.max_out_len = o.len_max + 4;
    std::vector<EvalPair> pairs;
    pairs.reserve(d.eval.size());
    std::ostringstream hyp_out;
    for (std::size_t i = 0; i < d.eval.size(); ++i) {
        std::vector<int> ids = greedy_decode(params, d.eval[i].src, dc, d.tags.neutral_id());
        std::vector<std::string> words;
        words.reserve(ids.size());
        for (int id : ids) words.push_back(d.tgt_vocab.token_of(id));
        hyp_out << join_tokens(words) << "\n";
        pairs.push_back({d.eval_tgt[i].words, words});
    }
    write_text_file(path_join(dir, "hyp.txt"), hyp_out.str());

    EvalReport report = evaluate_corpus(pairs, d.train_freq);
    report.has_perplexity = true;
    report.perplexity = ppl;
    write_text_file(path_join(dir, "report.json"), eval_report_json(report));
    return {name, report};
}

void run_triple(const TripleOptions& o) {
    if (o.n_eval == 0) throw ConfigError("--n-eval must be >= 1");
    TripleData d = build_data(o);
    ensure_dir(o.out_dir);
    dump_run_config(*o.root, path_join(o.out_dir, kRunConfigFile));
    const std::string data_dir = path_join(o.out_dir, "data");
    ensure_dir(data_dir);
    dump_corpus_files(data_dir, d);

    if (o.k_max < 1) throw ConfigError("--k-max must be >= 1");
    std::vector<std::size_t> grid;
    for (std::size_t k = 1; k <= o.k_max; ++k) grid.push_back(k);
    StepSearchResult search =
        search_optimal_step(o.d_emb, 10000.0, o.max_len, grid, o.plateau_frac, Norm::l2, false);
    {
        ordered_json j;
        j["d_model"] = o.d_emb;
        j["max_len"] = o.max_len;
        j["k_star"] = search.best_k;
        j["objective"] = search.best_objective;
        j["max_objective"] = search.max_objective;
        write_text_file(path_join(o.out_dir, "step_search.json"), j.dump(2) + "\n");
    }
    std::cout << "k_star=" << search.best_k << "\n";

    ModelConfig vanilla = base_config(o, d);

    ModelConfig mvpe = vanilla;
    mvpe.use_mvpe = true;
    mvpe.step_k = search.best_k;

    ModelConfig augmented = mvpe;
    augmented.d_post = o.d_post;

    std::vector<SystemEval> systems;
    systems.push_back(run_one(o, d, "vanilla", vanilla));
    systems.push_back(run_one(o, d, "mvpe", mvpe));
    systems.push_back(run_one(o, d, "augmented", augmented));

    const std::string text = render_comparison(systems);
    write_text_file(path_join(o.out_dir, "comparison.txt"), text);
    write_text_file(path_join(o.out_dir, "comparison.json"), comparison_json(systems));
    std::cout << text;
}

}  // namespace

void add_cmd_experiment_triple(CLI::App& app) {
    auto o = std::make_shared<TripleOptions>();
    CLI::App* sub = app.add_subcommand(
        "experiment-triple",
        "Train and compare vanilla, stepped-encoding, and tag-augmented models on the "
        "synthetic tagged-translation task under shared seeds");
    sub->add_option("--out-dir", o->out_dir, "Output directory")->required();
    sub->add_option("--n-samples", o->n_samples, "Training pairs")->capture_default_str();
    sub->add_option("--n-eval", o->n_eval, "Held-out pairs")->capture_default_str();
    sub->add_option("--vocab-size", o->vocab_size, "Synthetic vocabulary size")
        ->capture_default_str();
    sub->add_option("--len-min", o->len_min, "Minimum sentence length")->capture_default_str();
    sub->add_option("--len-max", o->len_max, "Maximum sentence length")->capture_default_str();
    sub->add_option("--data-seed", o->data_seed, "Data seed")->capture_default_str();
    sub->add_option("--init-seed", o->init_seed, "Parameter init seed (shared)")
        ->capture_default_str();
    sub->add_option("--train-seed", o->train_seed, "Batch sampling seed (shared)")
        ->capture_default_str();
    sub->add_option("--steps", o->steps, "Optimizer steps per model")->capture_default_str();
    sub->add_option("--batch-size", o->batch_size, "Sentences per step")->capture_default_str();
    sub->add_option("--lr-scale", o->lr_scale, "Learning-rate scale")->capture_default_str();
    sub->add_option("--warmup-steps", o->warmup_steps, "Warmup steps")->capture_default_str();
    sub->add_option("--eval-interval", o->eval_interval, "Steps between log lines")
        ->capture_default_str();
    sub->add_option("--d-emb", o->d_emb, "Word embedding width")->capture_default_str();
    sub->add_option("--d-post", o->d_post, "Tag channel width of the augmented model")
        ->capture_default_str();
    sub->add_option("--d-model", o->d_model, "Transformer width")->capture_default_str();
    sub->add_option("--n-heads", o->n_heads, "Attention heads")->capture_default_str();
    sub->add_option("--n-layers", o->n_layers, "Encoder/decoder depth")->capture_default_str();
    sub->add_option("--d-ff", o->d_ff, "Feed-forward width")->capture_default_str();
    sub->add_option("--max-len", o->max_len, "Maximum sequence length")->capture_default_str();
    sub->add_option("--k-max", o->k_max, "Step-search grid upper bound")->capture_default_str();
    sub->add_option("--plateau-frac", o->plateau_frac, "Step-search plateau fraction")
        ->capture_default_str();
    o->root = &app;
    sub->callback([o] { run_triple(*o); });
}

}  // namespace mvt::cli
