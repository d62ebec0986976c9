#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mvt/errors.hpp"
#include "mvt/ops.hpp"
#include "mvt/training.hpp"

using namespace mvt;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.d_emb = 16;
    cfg.d_post = 0;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.d_ff = 32;
    cfg.max_len = 16;
    cfg.src_vocab = 12;
    cfg.tgt_vocab = 12;
    cfg.src_tagset = 5;
    cfg.tgt_tagset = 5;
    cfg.init_seed = 3;
    return cfg;
}

struct Dataset {
    std::vector<SentencePair> pairs;
    int neutral_tag = 0;
};

Dataset synth_pairs(SynthKind kind, std::size_t n, std::size_t vocab_size, std::size_t len_max,
                    std::uint64_t seed) {
    ParallelTaggedCorpus corpus = synth_task(kind, n, vocab_size, 1, len_max, seed);
    std::vector<std::string> src_lines, tgt_lines;
    for (const TaggedText& t : corpus.src) src_lines.push_back(join_tokens(t.words));
    for (const TaggedText& t : corpus.tgt) tgt_lines.push_back(join_tokens(t.words));
    Vocabulary src_vocab = build_vocab(src_lines, 1);
    Vocabulary tgt_vocab = build_vocab(tgt_lines, 1);
    Dataset data;
    data.neutral_tag = corpus.tags.neutral_id();
    for (std::size_t i = 0; i < n; ++i)
        data.pairs.push_back({encode_sentence(corpus.src[i], src_vocab),
                              encode_sentence(corpus.tgt[i], tgt_vocab)});
    return data;
}

bool blocks_bitwise_equal(const ModelParams& a, const ModelParams& b) {
    if (a.blocks.size() != b.blocks.size()) return false;
    for (std::size_t i = 0; i < a.blocks.size(); ++i) {
        const TensorPtr& x = a.blocks[i].second;
        const TensorPtr& y = b.blocks[i].second;
        if (a.blocks[i].first != b.blocks[i].first || x->shape() != y->shape()) return false;
        if (std::memcmp(x->data(), y->data(), x->size() * sizeof(double)) != 0) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("train config validation") {
    TrainConfig ok;
    CHECK_NOTHROW(ok.validate());
    auto broken = [](auto mutate) {
        TrainConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), ConfigError);
    };
    broken([](TrainConfig& c) { c.batch_size = 0; });
    broken([](TrainConfig& c) { c.steps = 0; });
    broken([](TrainConfig& c) { c.lr_scale = -0.5; });
    broken([](TrainConfig& c) { c.warmup_steps = 0; });
    broken([](TrainConfig& c) { c.adam_beta1 = 1.0; });
    broken([](TrainConfig& c) { c.adam_beta2 = -0.1; });
    broken([](TrainConfig& c) { c.adam_eps = 0.0; });
    broken([](TrainConfig& c) { c.stop_accuracy = 1.5; });
}

TEST_CASE("learning rate follows the warmup schedule") {
    TrainConfig cfg;
    cfg.lr_scale = 1.0;
    cfg.warmup_steps = 400;
    const double scale = 1.0 / std::sqrt(64.0);
    CHECK(cfg.learning_rate(1, 64) ==
          doctest::Approx(scale * (1.0 / (400.0 * std::sqrt(400.0)))).epsilon(1e-14));
    CHECK(cfg.learning_rate(400, 64) == doctest::Approx(scale / std::sqrt(400.0)).epsilon(1e-14));
    CHECK(cfg.learning_rate(10000, 64) ==
          doctest::Approx(scale / std::sqrt(10000.0)).epsilon(1e-14));
    // Warmup ramps up, decay comes down.
    CHECK(cfg.learning_rate(10, 64) < cfg.learning_rate(400, 64));
    CHECK(cfg.learning_rate(1600, 64) < cfg.learning_rate(400, 64));
    cfg.lr_scale = 2.0;
    CHECK(cfg.learning_rate(400, 64) ==
          doctest::Approx(2.0 * scale / std::sqrt(400.0)).epsilon(1e-14));
}

TEST_CASE("perplexity") {
    CHECK(perplexity(0.0) == 1.0);
    CHECK(perplexity(std::log(2.0)) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("uniform logits score ln(vocab)") {
    ModelParams p = init_params(tiny_config());
    for (double& v : p.block("out_w")->values()) v = 0.0;
    for (double& v : p.block("out_b")->values()) v = 0.0;
    Dataset data = synth_pairs(SynthKind::copy, 4, 12, 5, 11);
    const double loss = evaluate_loss(p, data.pairs, data.neutral_tag);
    CHECK(loss == doctest::Approx(std::log(12.0)).epsilon(1e-12));
    CHECK(perplexity(loss) == doctest::Approx(12.0).epsilon(1e-9));
    // Ties resolve to the lowest id, which is never a gold token here.
    CHECK(teacher_forced_accuracy(p, data.pairs, data.neutral_tag) == 0.0);
}

TEST_CASE("argmax prediction ties break toward the lowest id") {
    ModelParams p = init_params(tiny_config());
    for (double& v : p.block("out_w")->values()) v = 0.0;
    for (double& v : p.block("out_b")->values()) v = 0.0;
    p.block("out_b")->values()[Vocabulary::kEos] = 5.0;  // every row predicts EOS
    Dataset data;
    data.neutral_tag = 4;
    data.pairs.push_back({TaggedSentence{{5}, {0}}, TaggedSentence{{6}, {1}}});
    // gold = {6, EOS}: EOS row hits, token row misses.
    CHECK(teacher_forced_accuracy(p, data.pairs, data.neutral_tag) == 0.5);
}

TEST_CASE("zero learning rate leaves parameters bitwise untouched") {
    ModelParams p = init_params(tiny_config());
    ModelParams snapshot = init_params(tiny_config());
    TrainState state = TrainState::init(p, 5);
    TrainConfig cfg;
    cfg.lr_scale = 0.0;
    Dataset data = synth_pairs(SynthKind::copy, 6, 12, 5, 3);
    std::vector<const SentencePair*> batch{&data.pairs[0], &data.pairs[1]};
    const double loss = train_step(p, state, cfg, batch, data.neutral_tag);
    CHECK(std::isfinite(loss));
    CHECK(state.step == 1);
    CHECK(blocks_bitwise_equal(p, snapshot));
}

TEST_CASE("batch loss is the mean of sentence losses") {
    ModelParams p = init_params(tiny_config());
    Dataset data = synth_pairs(SynthKind::copy, 3, 12, 5, 7);

    double sum = 0.0;
    for (const SentencePair& pair : data.pairs) {
        TensorPtr memory = encoder_forward(nullptr, p, pair.src);
        TeacherForcing tf = shift_for_teacher_forcing(pair.tgt, data.neutral_tag);
        TensorPtr logits = decoder_forward(nullptr, p, tf.input, memory);
        std::vector<std::uint8_t> mask(tf.gold.size(), 1);
        sum += (*cross_entropy_loss(nullptr, logits, tf.gold, mask))[0];
    }
    const double want = sum / 3.0;

    TrainState state = TrainState::init(p, 5);
    TrainConfig cfg;
    std::vector<const SentencePair*> batch;
    for (const SentencePair& pair : data.pairs) batch.push_back(&pair);
    const double got = train_step(p, state, cfg, batch, data.neutral_tag);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("train_step rejects bad inputs") {
    ModelParams p = init_params(tiny_config());
    TrainState state = TrainState::init(p, 5);
    TrainConfig cfg;
    CHECK_THROWS_WITH_AS(train_step(p, state, cfg, {}, 4), "empty training batch", DataError);

    ModelConfig deeper = tiny_config();
    deeper.n_layers = 2;
    ModelParams other = init_params(deeper);
    TrainState mismatched = TrainState::init(other, 5);
    Dataset data = synth_pairs(SynthKind::copy, 1, 12, 3, 7);
    std::vector<const SentencePair*> batch{&data.pairs[0]};
    CHECK_THROWS_AS(train_step(p, mismatched, cfg, batch, data.neutral_tag), ConfigError);
}

TEST_CASE("non-finite parameters abort with the block name") {
    ModelParams p = init_params(tiny_config());
    p.block("enc0.attn.wq")->values()[0] = std::numeric_limits<double>::infinity();
    TrainState state = TrainState::init(p, 5);
    TrainConfig cfg;
    Dataset data = synth_pairs(SynthKind::copy, 1, 12, 3, 7);
    std::vector<const SentencePair*> batch{&data.pairs[0]};
    try {
        train_step(p, state, cfg, batch, data.neutral_tag);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("enc0.attn.wq") != std::string::npos);
    }
}

TEST_CASE("masked pad rows change neither loss nor gradients") {
    Rng rng(13);
    TensorPtr w = make_tensor({4, 9});
    for (double& v : w->values()) v = rng.uniform(-1.0, 1.0);
    TensorPtr x2 = make_tensor({2, 4});
    for (double& v : x2->values()) v = rng.uniform(-1.0, 1.0);
    // Same first two rows plus a to-be-masked third row.
    TensorPtr x3 = make_tensor({3, 4});
    std::memcpy(x3->data(), x2->data(), 8 * sizeof(double));
    for (std::size_t i = 8; i < 12; ++i) (*x3)[i] = rng.uniform(-1.0, 1.0);

    auto loss_and_grad = [&](const TensorPtr& x, const std::vector<int>& gold,
                             const std::vector<std::uint8_t>& mask) {
        w->enable_grad();
        w->zero_grad();
        GradTape tape;
        TensorPtr logits = ops::matmul(&tape, x, w);
        TensorPtr loss = cross_entropy_loss(&tape, logits, gold, mask);
        tape.backward(loss);
        return std::pair<double, std::vector<double>>((*loss)[0], w->grad);
    };

    auto [loss_a, grad_a] = loss_and_grad(x2, {5, 6}, {1, 1});
    auto [loss_b, grad_b] = loss_and_grad(x3, {5, 6, Vocabulary::kPad}, {1, 1, 0});
    CHECK(loss_a == loss_b);
    CHECK(std::memcmp(grad_a.data(), grad_b.data(), grad_a.size() * sizeof(double)) == 0);
}

TEST_CASE("evaluate_loss equals a per-sentence cross-entropy recomputation") {
    ModelParams p = init_params(tiny_config());
    Dataset data = synth_pairs(SynthKind::reverse, 5, 12, 6, 21);

    double total_nll = 0.0;
    std::size_t total_tokens = 0;
    for (const SentencePair& pair : data.pairs) {
        TensorPtr memory = encoder_forward(nullptr, p, pair.src);
        TeacherForcing tf = shift_for_teacher_forcing(pair.tgt, data.neutral_tag);
        TensorPtr logits = decoder_forward(nullptr, p, tf.input, memory);
        std::vector<std::uint8_t> mask(tf.gold.size(), 1);
        TensorPtr mean_nll = ops::cross_entropy_rows(nullptr, logits, tf.gold, mask);
        total_nll += (*mean_nll)[0] * static_cast<double>(tf.gold.size());
        total_tokens += tf.gold.size();
    }
    const double want = total_nll / static_cast<double>(total_tokens);
    CHECK(evaluate_loss(p, data.pairs, data.neutral_tag) ==
          doctest::Approx(want).epsilon(1e-12));

    CHECK_THROWS_AS(evaluate_loss(p, {}, data.neutral_tag), DataError);
}

TEST_CASE("train state round-trips bitwise") {
    ModelParams p = init_params(tiny_config());
    TrainState state = TrainState::init(p, 17);
    TrainConfig cfg;
    Dataset data = synth_pairs(SynthKind::copy, 8, 12, 5, 3);
    for (int s = 0; s < 3; ++s) {
        std::vector<const SentencePair*> batch;
        for (std::size_t b = 0; b < 4; ++b)
            batch.push_back(&data.pairs[state.rng.below(data.pairs.size())]);
        train_step(p, state, cfg, batch, data.neutral_tag);
    }

    std::ostringstream os;
    state.save(os);
    std::istringstream is(os.str());
    TrainState loaded = TrainState::load(is, p);
    CHECK(loaded.step == state.step);
    CHECK(loaded.running_loss == state.running_loss);
    std::ostringstream ra, rb;
    ra << state.rng;
    rb << loaded.rng;
    CHECK(ra.str() == rb.str());
    REQUIRE(loaded.m.size() == state.m.size());
    for (std::size_t i = 0; i < state.m.size(); ++i) {
        CHECK(loaded.m[i] == state.m[i]);
        CHECK(loaded.v[i] == state.v[i]);
    }
}

TEST_CASE("train state load rejects malformed streams") {
    ModelParams p = init_params(tiny_config());
    std::istringstream empty("");
    CHECK_THROWS_WITH_AS(TrainState::load(empty, p), "train state is empty", DataError);
    std::istringstream bad_magic("other v1 step=0 running_loss=0\n");
    CHECK_THROWS_WITH_AS(TrainState::load(bad_magic, p), "not a v1 train-state file", DataError);

    TrainState state = TrainState::init(p, 1);
    std::ostringstream os;
    state.save(os);
    const std::string bytes = os.str();

    std::istringstream truncated(bytes.substr(0, bytes.size() - 16));
    CHECK_THROWS_AS(TrainState::load(truncated, p), DataError);

    ModelConfig deeper = tiny_config();
    deeper.n_layers = 2;
    ModelParams other = init_params(deeper);
    std::istringstream wrong_model(bytes);
    CHECK_THROWS_AS(TrainState::load(wrong_model, other), DataError);
}

TEST_CASE("resumed training matches an uninterrupted run bitwise") {
    Dataset data = synth_pairs(SynthKind::copy, 20, 12, 6, 31);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.steps = 12;
    cfg.eval_interval = 0;

    ModelParams straight = init_params(tiny_config());
    TrainState straight_state = TrainState::init(straight, 9);
    train_loop(straight, straight_state, cfg, data.pairs, {}, data.neutral_tag, {});

    ModelParams part = init_params(tiny_config());
    TrainState part_state = TrainState::init(part, 9);
    TrainConfig first_half = cfg;
    first_half.steps = 6;
    train_loop(part, part_state, first_half, data.pairs, {}, data.neutral_tag, {});

    std::ostringstream ckpt, st;
    save_checkpoint(ckpt, part);
    part_state.save(st);
    std::istringstream ckpt_in(ckpt.str());
    ModelParams resumed = load_checkpoint(ckpt_in);
    std::istringstream st_in(st.str());
    TrainState resumed_state = TrainState::load(st_in, resumed);
    CHECK(resumed_state.step == 6);

    TrainConfig second_half = first_half;
    second_half.steps = 12;
    train_loop(resumed, resumed_state, second_half, data.pairs, {}, data.neutral_tag, {});
    CHECK(resumed_state.step == 12);
    CHECK(blocks_bitwise_equal(resumed, straight));
    CHECK(resumed_state.m == straight_state.m);
    CHECK(resumed_state.v == straight_state.v);
}

TEST_CASE("train loop logs and checkpoints on schedule") {
    Dataset data = synth_pairs(SynthKind::copy, 10, 12, 4, 41);
    ModelParams p = init_params(tiny_config());
    TrainState state = TrainState::init(p, 2);
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.steps = 5;
    cfg.eval_interval = 2;
    cfg.checkpoint_interval = 0;

    std::vector<TrainLogEntry> logs;
    std::vector<std::size_t> checkpoints;
    TrainHooks hooks;
    hooks.on_log = [&](const TrainLogEntry& e) { logs.push_back(e); };
    hooks.on_checkpoint = [&](const ModelParams&, const TrainState& s) {
        checkpoints.push_back(s.step);
    };
    const std::size_t reached = train_loop(p, state, cfg, data.pairs, {}, data.neutral_tag, hooks);
    CHECK(reached == 5);
    REQUIRE(logs.size() == 3);
    CHECK(logs[0].step == 2);
    CHECK(logs[1].step == 4);
    CHECK(logs[2].step == 5);
    for (const TrainLogEntry& e : logs) {
        CHECK(std::isfinite(e.train_loss));
        CHECK(std::isnan(e.eval_loss));  // no eval data
        CHECK(std::isnan(e.eval_ppl));
    }
    CHECK(checkpoints == std::vector<std::size_t>{5});

    CHECK_THROWS_AS(train_loop(p, state, cfg, {}, {}, data.neutral_tag, hooks), DataError);
}

TEST_CASE("a single pair is memorized") {
    Dataset data = synth_pairs(SynthKind::copy, 1, 10, 4, 3);
    ModelParams p = init_params(tiny_config());
    TrainState state = TrainState::init(p, 7);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.steps = 400;
    cfg.warmup_steps = 50;
    cfg.eval_interval = 0;
    train_loop(p, state, cfg, data.pairs, {}, data.neutral_tag, {});
    const double loss = evaluate_loss(p, data.pairs, data.neutral_tag);
    CHECK(loss < 0.01);
    CHECK(teacher_forced_accuracy(p, data.pairs, data.neutral_tag) == 1.0);
}

TEST_CASE("accuracy target stops training early") {
    Dataset data = synth_pairs(SynthKind::copy, 1, 10, 4, 3);
    ModelParams p = init_params(tiny_config());
    TrainState state = TrainState::init(p, 7);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.steps = 2000;
    cfg.warmup_steps = 50;
    cfg.eval_interval = 10;
    cfg.stop_accuracy = 1.0;
    const std::size_t reached =
        train_loop(p, state, cfg, data.pairs, data.pairs, data.neutral_tag, {});
    CHECK(reached < 2000);
    CHECK(teacher_forced_accuracy(p, data.pairs, data.neutral_tag) == 1.0);
}

}  // TEST_SUITE
