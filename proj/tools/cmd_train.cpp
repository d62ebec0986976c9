#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cli_common.hpp"
#include "mvt/serialize.hpp"
#include "mvt/training.hpp"

namespace mvt::cli {

namespace {

struct TrainOptions {
    // Synthetic data
    std::string task;
    std::size_t n_samples = 2000;
    std::size_t n_eval = 0;
    std::size_t vocab_size = 50;
    std::size_t len_min = 1;
    std::size_t len_max = 10;
    std::uint64_t data_seed = 1;

    // File data
    std::string train_src, train_tgt, eval_src, eval_tgt;
    std::string format = "plain";
    std::string tagset_file;
    std::size_t min_freq = 1;
    std::size_t max_vocab = 0;

    // Model
    std::string preset = "desk";
    ModelConfig cfg;
    CLI::Option *opt_d_emb = nullptr, *opt_d_post = nullptr, *opt_d_model = nullptr,
                *opt_n_heads = nullptr, *opt_n_layers = nullptr, *opt_d_ff = nullptr,
                *opt_max_len = nullptr, *opt_use_mvpe = nullptr, *opt_step_k = nullptr,
                *opt_tag_step_k = nullptr, *opt_pe_base = nullptr, *opt_init_seed = nullptr;

    // Optimization
    TrainConfig train;
    std::size_t steps = 1000;

    std::string model_dir;
    bool resume = false;

    const CLI::App* root = nullptr;
};

struct Dataset {
    std::vector<SentencePair> train, eval;
    Vocabulary src_vocab, tgt_vocab;
    TagSet tags;
    // Raw sentences kept for the synthetic-data dump.
    std::vector<TaggedText> train_src, train_tgt, eval_src, eval_tgt;
    bool synthetic = false;

    Dataset() : tags(TagSet::penn_default()) {}
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
    if (src.size() != tgt.size())
        throw DataError("parallel corpus sides differ: " + std::to_string(src.size()) + " vs " +
                        std::to_string(tgt.size()) + " sentences");
    std::vector<SentencePair> pairs;
    pairs.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i)
        pairs.push_back({encode_sentence(src[i], src_vocab), encode_sentence(tgt[i], tgt_vocab)});
    return pairs;
}

Dataset build_synth_dataset(const TrainOptions& o) {
    Dataset ds;
    ds.synthetic = true;
    SynthKind kind = synth_kind_from_name(o.task);
    ParallelTaggedCorpus corpus =
        synth_task(kind, o.n_samples + o.n_eval, o.vocab_size, o.len_min, o.len_max, o.data_seed);
    ds.tags = corpus.tags;

    ds.train_src.assign(corpus.src.begin(), corpus.src.begin() + o.n_samples);
    ds.train_tgt.assign(corpus.tgt.begin(), corpus.tgt.begin() + o.n_samples);
    ds.eval_src.assign(corpus.src.begin() + o.n_samples, corpus.src.end());
    ds.eval_tgt.assign(corpus.tgt.begin() + o.n_samples, corpus.tgt.end());

    ds.src_vocab = build_vocab(surface_lines(ds.train_src), 1, 0);
    ds.tgt_vocab = build_vocab(surface_lines(ds.train_tgt), 1, 0);
    ds.train = encode_pairs(ds.train_src, ds.train_tgt, ds.src_vocab, ds.tgt_vocab);
    ds.eval = encode_pairs(ds.eval_src, ds.eval_tgt, ds.src_vocab, ds.tgt_vocab);
    return ds;
}

Dataset build_file_dataset(const TrainOptions& o) {
    Dataset ds;
    if (o.train_src.empty() || o.train_tgt.empty())
        throw ConfigError("either --task or both --train-src and --train-tgt are required");
    if (o.eval_src.empty() != o.eval_tgt.empty())
        throw ConfigError("--eval-src and --eval-tgt must be given together");

    if (!o.tagset_file.empty()) {
        auto is = open_input(o.tagset_file);
        ds.tags = TagSet::load(is);
    }
    ds.train_src = read_source_file(o.train_src, o.format, ds.tags);
    ds.train_tgt = read_source_file(o.train_tgt, o.format, ds.tags);
    ds.src_vocab = build_vocab(surface_lines(ds.train_src), o.min_freq, o.max_vocab);
    ds.tgt_vocab = build_vocab(surface_lines(ds.train_tgt), o.min_freq, o.max_vocab);
    ds.train = encode_pairs(ds.train_src, ds.train_tgt, ds.src_vocab, ds.tgt_vocab);
    if (!o.eval_src.empty()) {
        ds.eval_src = read_source_file(o.eval_src, o.format, ds.tags);
        ds.eval_tgt = read_source_file(o.eval_tgt, o.format, ds.tags);
        ds.eval = encode_pairs(ds.eval_src, ds.eval_tgt, ds.src_vocab, ds.tgt_vocab);
    }
    return ds;
}

ModelConfig resolve_model_config(const TrainOptions& o, const Dataset& ds) {
    ModelConfig cfg = o.preset == "paper" ? ModelConfig::paper_preset() : ModelConfig::desk_preset();
    if (o.opt_d_emb->count()) cfg.d_emb = o.cfg.d_emb;
    if (o.opt_d_post->count()) cfg.d_post = o.cfg.d_post;
    if (o.opt_d_model->count()) cfg.d_model = o.cfg.d_model;
    if (o.opt_n_heads->count()) cfg.n_heads = o.cfg.n_heads;
    if (o.opt_n_layers->count()) cfg.n_layers = o.cfg.n_layers;
    if (o.opt_d_ff->count()) cfg.d_ff = o.cfg.d_ff;
    if (o.opt_max_len->count()) cfg.max_len = o.cfg.max_len;
    if (o.opt_use_mvpe->count()) cfg.use_mvpe = o.cfg.use_mvpe;
    if (o.opt_step_k->count()) cfg.step_k = o.cfg.step_k;
    if (o.opt_tag_step_k->count()) cfg.tag_step_k = o.cfg.tag_step_k;
    if (o.opt_pe_base->count()) cfg.pe_base = o.cfg.pe_base;
    if (o.opt_init_seed->count()) cfg.init_seed = o.cfg.init_seed;
    cfg.src_vocab = ds.src_vocab.size();
    cfg.tgt_vocab = ds.tgt_vocab.size();
    cfg.src_tagset = ds.tags.size();
    cfg.tgt_tagset = ds.tags.size();
    cfg.validate();
    return cfg;
}

void write_plain(const std::string& path, const std::vector<TaggedText>& sents) {
    std::ostringstream os;
    for (const TaggedText& s : sents) os << join_tokens(s.words) << "\n";
    write_text_file(path, os.str());
}

void write_vertical(const std::string& path, const std::vector<TaggedText>& sents,
                    const TagSet& tags) {
    std::ostringstream os;
    write_tagged_corpus(os, sents, tags);
    write_text_file(path, os.str());
}

void dump_dataset_files(const TrainOptions& o, const Dataset& ds) {
    {
        std::ostringstream os;
        ds.src_vocab.save(os);
        write_text_file(path_join(o.model_dir, kSrcVocabFile), os.str());
    }
    {
        std::ostringstream os;
        ds.tgt_vocab.save(os);
        write_text_file(path_join(o.model_dir, kTgtVocabFile), os.str());
    }
    {
        std::ostringstream os;
        ds.tags.save(os);
        write_text_file(path_join(o.model_dir, kTagSetFile), os.str());
    }
    if (ds.synthetic) {
        write_vertical(path_join(o.model_dir, "train_src.vert"), ds.train_src, ds.tags);
        write_vertical(path_join(o.model_dir, "train_tgt.vert"), ds.train_tgt, ds.tags);
        write_plain(path_join(o.model_dir, "train_tgt.txt"), ds.train_tgt);
        if (!ds.eval_src.empty()) {
            write_vertical(path_join(o.model_dir, "eval_src.vert"), ds.eval_src, ds.tags);
            write_vertical(path_join(o.model_dir, "eval_tgt.vert"), ds.eval_tgt, ds.tags);
            write_plain(path_join(o.model_dir, "eval_ref.txt"), ds.eval_tgt);
        }
    }
}

void save_model(const std::string& dir, const ModelParams& params, const TrainState& state) {
    save_checkpoint_file(path_join(dir, kCheckpointFile), params);
    std::ofstream os(path_join(dir, kTrainStateFile), std::ios::binary);
    if (!os) throw DataError("cannot write " + path_join(dir, kTrainStateFile));
    state.save(os);
}

std::string log_line(const TrainLogEntry& e) {
    std::ostringstream os;
    os << e.step << "\t" << fmt17(e.train_loss) << "\t" << fmt17(e.eval_loss) << "\t"
       << fmt17(e.eval_ppl) << "\n";
    return os.str();
}

void run_train(const TrainOptions& o) {
    Dataset ds = o.task.empty() ? build_file_dataset(o) : build_synth_dataset(o);
    ensure_dir(o.model_dir);
    dump_dataset_files(o, ds);
    dump_run_config(*o.root, path_join(o.model_dir, kRunConfigFile));

    ModelParams params;
    TrainState state;
    if (o.resume) {
        if (o.steps == 0) throw ConfigError("--steps 0 cannot be combined with --resume");
        params = load_checkpoint_file(path_join(o.model_dir, kCheckpointFile));
        auto is = open_input(path_join(o.model_dir, kTrainStateFile));
        state = TrainState::load(is, params);
    } else {
        params = init_params(resolve_model_config(o, ds));
        state = TrainState::init(params, o.train.seed);
    }

    if (o.steps == 0) {
        save_model(o.model_dir, params, state);
        write_text_file(path_join(o.model_dir, kTrainLogFile), "");
        std::cout << "final_step=0\n";
        return;
    }

    TrainConfig cfg = o.train;
    cfg.steps = o.steps;
    cfg.validate();

    std::ofstream log(path_join(o.model_dir, kTrainLogFile),
                      o.resume ? std::ios::binary | std::ios::app : std::ios::binary);
    if (!log) throw DataError("cannot write " + path_join(o.model_dir, kTrainLogFile));

    TrainHooks hooks;
    hooks.on_log = [&log](const TrainLogEntry& e) {
        const std::string line = log_line(e);
        log << line;
        log.flush();
        std::cout << line;
    };
    hooks.on_checkpoint = [&o](const ModelParams& p, const TrainState& s) {
        save_model(o.model_dir, p, s);
    };

    const std::size_t final_step =
        train_loop(params, state, cfg, ds.train, ds.eval, ds.tags.neutral_id(), hooks);
    std::cout << "final_step=" << final_step << "\n";
}

}  // namespace

void add_cmd_train(CLI::App& app) {
    auto o = std::make_shared<TrainOptions>();
    CLI::App* sub = app.add_subcommand("train", "Train a model on synthetic or file corpora");

    sub->add_option("--task", o->task,
                    "Synthetic task: copy, reverse, or tagged-translation (omit for file data)");
    sub->add_option("--n-samples", o->n_samples, "Synthetic training pairs")->capture_default_str();
    sub->add_option("--n-eval", o->n_eval, "Synthetic held-out pairs")->capture_default_str();
    sub->add_option("--vocab-size", o->vocab_size, "Synthetic vocabulary size (incl. reserved ids)")
        ->capture_default_str();
    sub->add_option("--len-min", o->len_min, "Synthetic minimum sentence length")
        ->capture_default_str();
    sub->add_option("--len-max", o->len_max, "Synthetic maximum sentence length")
        ->capture_default_str();
    sub->add_option("--data-seed", o->data_seed, "Synthetic data seed")->capture_default_str();

    sub->add_option("--train-src", o->train_src, "Training source corpus file");
    sub->add_option("--train-tgt", o->train_tgt, "Training target corpus file");
    sub->add_option("--eval-src", o->eval_src, "Held-out source corpus file");
    sub->add_option("--eval-tgt", o->eval_tgt, "Held-out target corpus file");
    sub->add_option("--format", o->format, "Corpus format: plain or tagged")
        ->check(CLI::IsMember({"plain", "tagged"}))
        ->capture_default_str();
    sub->add_option("--tagset", o->tagset_file,
                    "Tag inventory file, one tag per line (default: Penn Treebank)");
    sub->add_option("--min-freq", o->min_freq, "Minimum token frequency for the vocabulary")
        ->capture_default_str();
    sub->add_option("--max-vocab", o->max_vocab, "Vocabulary size cap, 0 = unbounded")
        ->capture_default_str();

    sub->add_option("--preset", o->preset, "Model size preset: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}))
        ->capture_default_str();
    ModelConfig defaults;
    o->cfg = defaults;
    o->opt_d_emb = sub->add_option("--d-emb", o->cfg.d_emb, "Word embedding width (even)");
    o->opt_d_post = sub->add_option("--d-post", o->cfg.d_post, "Tag channel width, 0 disables");
    o->opt_d_model = sub->add_option("--d-model", o->cfg.d_model, "Transformer width");
    o->opt_n_heads = sub->add_option("--n-heads", o->cfg.n_heads, "Attention heads");
    o->opt_n_layers = sub->add_option("--n-layers", o->cfg.n_layers, "Encoder/decoder depth");
    o->opt_d_ff = sub->add_option("--d-ff", o->cfg.d_ff, "Feed-forward width");
    o->opt_max_len = sub->add_option("--max-len", o->cfg.max_len, "Maximum sequence length");
    o->opt_use_mvpe = sub->add_flag("--use-mvpe", o->cfg.use_mvpe, "Stepped position encoding");
    o->opt_step_k = sub->add_option("--step-k", o->cfg.step_k, "Position encoding step");
    o->opt_tag_step_k = sub->add_option("--tag-step-k", o->cfg.tag_step_k, "Tag encoding step");
    o->opt_pe_base = sub->add_option("--pe-base", o->cfg.pe_base, "Sinusoid base");
    o->opt_init_seed = sub->add_option("--init-seed", o->cfg.init_seed, "Parameter init seed");

    sub->add_option("--batch-size", o->train.batch_size, "Sentences per step")
        ->capture_default_str();
    sub->add_option("--steps", o->steps, "Total optimizer steps (0 writes the initial checkpoint)")
        ->capture_default_str();
    sub->add_option("--lr-scale", o->train.lr_scale, "Learning-rate scale, 0 freezes parameters")
        ->capture_default_str();
    sub->add_option("--warmup-steps", o->train.warmup_steps, "Linear warmup steps")
        ->capture_default_str();
    sub->add_option("--beta1", o->train.adam_beta1, "Adam beta1")->capture_default_str();
    sub->add_option("--beta2", o->train.adam_beta2, "Adam beta2")->capture_default_str();
    sub->add_option("--adam-eps", o->train.adam_eps, "Adam epsilon")->capture_default_str();
    sub->add_option("--seed", o->train.seed, "Batch sampling seed")->capture_default_str();
    sub->add_option("--eval-interval", o->train.eval_interval,
                    "Steps between eval/log lines, 0 = final step only")
        ->capture_default_str();
    sub->add_option("--checkpoint-interval", o->train.checkpoint_interval,
                    "Steps between checkpoints, 0 = final step only")
        ->capture_default_str();
    sub->add_option("--stop-accuracy", o->train.stop_accuracy,
                    "Early-stop threshold on teacher-forced eval accuracy, 0 disables")
        ->capture_default_str();

    sub->add_option("--model-dir", o->model_dir, "Output directory for checkpoint, logs, vocab")
        ->required();
    sub->add_flag("--resume", o->resume,
                  "Continue from the checkpoint in --model-dir (checkpoint config wins)");

    o->root = &app;
    sub->callback([o] {
        if (!o->task.empty() && !o->train_src.empty())
            throw ConfigError("--task and --train-src are mutually exclusive");
        if (!o->task.empty() && !o->tagset_file.empty())
            throw ConfigError("--tagset applies to file corpora only");
        run_train(*o);
    });
}

}  // namespace mvt::cli
