#include "mvt/training.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mvt/errors.hpp"
#include "mvt/kernels.hpp"
#include "mvt/ops.hpp"
#include "mvt/serialize.hpp"

namespace mvt {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (lr_scale < 0.0) throw ConfigError("lr_scale must be >= 0");
    if (warmup_steps < 1) throw ConfigError("warmup_steps must be >= 1");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0) throw ConfigError("adam_beta1 must be in [0, 1)");
    if (adam_beta2 < 0.0 || adam_beta2 >= 1.0) throw ConfigError("adam_beta2 must be in [0, 1)");
    if (adam_eps <= 0.0) throw ConfigError("adam_eps must be positive");
    if (stop_accuracy < 0.0 || stop_accuracy > 1.0)
        throw ConfigError("stop_accuracy must be in [0, 1]");
}

double TrainConfig::learning_rate(std::size_t step, std::size_t d_model) const {
    const double t = static_cast<double>(step);
    const double w = static_cast<double>(warmup_steps);
    const double ramp = std::min(1.0 / std::sqrt(t), t / (w * std::sqrt(w)));
    return lr_scale / std::sqrt(static_cast<double>(d_model)) * ramp;
}

TrainState TrainState::init(const ModelParams& params, std::uint64_t seed) {
    TrainState state;
    state.rng = Rng(seed);
    state.m.reserve(params.blocks.size());
    state.v.reserve(params.blocks.size());
    for (const auto& [name, t] : params.blocks) {
        state.m.emplace_back(t->size(), 0.0);
        state.v.emplace_back(t->size(), 0.0);
    }
    return state;
}

void TrainState::save(std::ostream& os) const {
    os << "mvt-trainstate v1 step=" << step << " running_loss=" << fmt17(running_loss) << "\n";
    os << "rng " << rng << "\n";
    os << "moments " << m.size() << "\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        os << "m " << i << " " << m[i].size() << "\n";
        write_f64_block(os, m[i]);
        os << "v " << i << " " << v[i].size() << "\n";
        write_f64_block(os, v[i]);
    }
    if (!os) throw DataError("train-state write failed");
}

TrainState TrainState::load(std::istream& is, const ModelParams& params) {
    std::string header;
    if (!std::getline(is, header)) throw DataError("train state is empty");
    std::istringstream hs(header);
    std::string magic, version, field;
    hs >> magic >> version;
    if (magic != "mvt-trainstate" || version != "v1")
        throw DataError("not a v1 train-state file");

    TrainState state;
    while (hs >> field) {
        auto eq = field.find('=');
        if (eq == std::string::npos) throw DataError("train state header: malformed entry " + field);
        const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
        if (key == "step")
            state.step = parse_u64_field(key, value);
        else if (key == "running_loss")
            state.running_loss = parse_f64_field(key, value);
        else
            throw DataError("train state header: unknown key " + key);
    }

    std::string tag;
    if (!(is >> tag) || tag != "rng") throw DataError("train state: missing rng section");
    if (!(is >> state.rng)) throw DataError("train state: bad rng state");
    if (!(is >> tag) || tag != "moments") throw DataError("train state: missing moments section");
    std::size_t n_blocks = 0;
    if (!(is >> n_blocks) || n_blocks != params.blocks.size())
        throw DataError("train state: moment count does not match the model's parameter blocks");
    is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');

    state.m.resize(n_blocks);
    state.v.resize(n_blocks);
    for (std::size_t i = 0; i < n_blocks; ++i) {
        for (int which = 0; which < 2; ++which) {
            std::string line;
            if (!std::getline(is, line)) throw DataError("train state truncated in moments");
            std::istringstream ls(line);
            std::string kind;
            std::size_t idx = 0, size = 0;
            ls >> kind >> idx >> size;
            const char* expect = which == 0 ? "m" : "v";
            if (kind != expect || idx != i)
                throw DataError("train state: unexpected moment line: " + line);
            if (size != params.blocks[i].second->size())
                throw DataError("train state: moment size mismatch for block " +
                                params.blocks[i].first);
            auto& dst = which == 0 ? state.m[i] : state.v[i];
            dst.assign(size, 0.0);
            read_f64_block(is, dst);
        }
    }
    return state;
}

TensorPtr cross_entropy_loss(GradTape* tape, const TensorPtr& logits, const std::vector<int>& gold,
                             const std::vector<std::uint8_t>& pad_mask) {
    return ops::cross_entropy_rows(tape, logits, gold, pad_mask);
}

double perplexity(double loss_per_token) { return std::exp(loss_per_token); }

namespace {

[[noreturn]] void abort_non_finite(const ModelParams& params, double loss, std::size_t step) {
    for (const auto& [name, t] : params.blocks)
        if (!t->all_finite())
            throw NumericError("non-finite loss " + fmt17(loss) + " at step " + std::to_string(step) +
                               "; first non-finite parameter block: " + name);
    throw NumericError("non-finite loss " + fmt17(loss) + " at step " + std::to_string(step) +
                       "; all parameter blocks are finite (activation overflow?)");
}

TensorPtr sentence_loss(GradTape* tape, const ModelParams& params, const SentencePair& pair,
                        int neutral_tag, std::size_t* live_tokens = nullptr) {
    TensorPtr memory = encoder_forward(tape, params, pair.src);
    TeacherForcing tf = shift_for_teacher_forcing(pair.tgt, neutral_tag);
    std::vector<std::uint8_t> mask(tf.gold.size());
    std::size_t live = 0;
    for (std::size_t i = 0; i < tf.gold.size(); ++i) {
        mask[i] = tf.gold[i] != Vocabulary::kPad;
        live += mask[i];
    }
    if (live_tokens) *live_tokens = live;
    TensorPtr logits = decoder_forward(tape, params, tf.input, memory);
    return cross_entropy_loss(tape, logits, tf.gold, mask);
}

}  // namespace

double train_step(ModelParams& params, TrainState& state, const TrainConfig& cfg,
                  const std::vector<const SentencePair*>& batch, int neutral_tag) {
    if (batch.empty()) throw DataError("empty training batch");
    if (state.m.size() != params.blocks.size())
        throw ConfigError("train state does not match the model's parameter blocks");

    GradTape tape;
    for (auto& [name, t] : params.blocks) t->zero_grad();

    TensorPtr total;
    for (const SentencePair* pair : batch) {
        TensorPtr loss = sentence_loss(&tape, params, *pair, neutral_tag);
        total = total ? ops::add(&tape, total, loss) : loss;
    }
    TensorPtr batch_loss = ops::scale(&tape, total, 1.0 / static_cast<double>(batch.size()));
    const double loss_value = (*batch_loss)[0];
    if (!std::isfinite(loss_value)) abort_non_finite(params, loss_value, state.step + 1);
    tape.backward(batch_loss);

    const std::size_t t = state.step + 1;
    const double lr = cfg.learning_rate(t, params.config.d_model);
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
    const kern::Kernels& k = kern::active();
    for (std::size_t i = 0; i < params.blocks.size(); ++i) {
        Tensor& p = *params.blocks[i].second;
        k.adam(p.data(), p.grad.data(), state.m[i].data(), state.v[i].data(), p.size(), lr,
               cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, bc1, bc2);
    }
    state.step = t;
    state.running_loss = loss_value;
    return loss_value;
}

double evaluate_loss(const ModelParams& params, const std::vector<SentencePair>& data,
                     int neutral_tag) {
    if (data.empty()) throw DataError("evaluation set is empty");
    double total_nll = 0.0;
    std::size_t total_tokens = 0;
    for (const SentencePair& pair : data) {
        TensorPtr memory = encoder_forward(nullptr, params, pair.src);
        TeacherForcing tf = shift_for_teacher_forcing(pair.tgt, neutral_tag);
        TensorPtr logits = decoder_forward(nullptr, params, tf.input, memory);
        const std::size_t cols = logits->cols();
        for (std::size_t row = 0; row < tf.gold.size(); ++row) {
            if (tf.gold[row] == Vocabulary::kPad) continue;
            auto logp = ops::log_softmax_row(logits->data() + row * cols, cols);
            total_nll -= logp[static_cast<std::size_t>(tf.gold[row])];
            ++total_tokens;
        }
    }
    if (total_tokens == 0) throw DataError("evaluation set has only pad targets");
    return total_nll / static_cast<double>(total_tokens);
}

double teacher_forced_accuracy(const ModelParams& params, const std::vector<SentencePair>& data,
                               int neutral_tag) {
    if (data.empty()) throw DataError("evaluation set is empty");
    std::size_t hits = 0, total = 0;
    for (const SentencePair& pair : data) {
        TensorPtr memory = encoder_forward(nullptr, params, pair.src);
        TeacherForcing tf = shift_for_teacher_forcing(pair.tgt, neutral_tag);
        TensorPtr logits = decoder_forward(nullptr, params, tf.input, memory);
        const std::size_t cols = logits->cols();
        for (std::size_t row = 0; row < tf.gold.size(); ++row) {
            if (tf.gold[row] == Vocabulary::kPad) continue;
            const double* r = logits->data() + row * cols;
            std::size_t best = 0;
            for (std::size_t c = 1; c < cols; ++c)
                if (r[c] > r[best]) best = c;
            hits += best == static_cast<std::size_t>(tf.gold[row]);
            ++total;
        }
    }
    if (total == 0) throw DataError("evaluation set has only pad targets");
    return static_cast<double>(hits) / static_cast<double>(total);
}

std::size_t train_loop(ModelParams& params, TrainState& state, const TrainConfig& cfg,
                       const std::vector<SentencePair>& train_data,
                       const std::vector<SentencePair>& eval_data, int neutral_tag,
                       const TrainHooks& hooks) {
    cfg.validate();
    if (train_data.empty()) throw DataError("training set is empty");

    std::size_t last_checkpoint = std::numeric_limits<std::size_t>::max();
    bool stop = false;
    while (state.step < cfg.steps && !stop) {
        std::vector<const SentencePair*> batch;
        batch.reserve(cfg.batch_size);
        for (std::size_t b = 0; b < cfg.batch_size; ++b)
            batch.push_back(&train_data[state.rng.below(train_data.size())]);
        const double train_loss = train_step(params, state, cfg, batch, neutral_tag);

        const bool last = state.step >= cfg.steps;
        const bool log_now = last || (cfg.eval_interval > 0 && state.step % cfg.eval_interval == 0);
        if (log_now) {
            double eval_loss = std::numeric_limits<double>::quiet_NaN();
            double eval_ppl = std::numeric_limits<double>::quiet_NaN();
            if (!eval_data.empty()) {
                eval_loss = evaluate_loss(params, eval_data, neutral_tag);
                eval_ppl = perplexity(eval_loss);
                if (cfg.stop_accuracy > 0.0 &&
                    teacher_forced_accuracy(params, eval_data, neutral_tag) >= cfg.stop_accuracy)
                    stop = true;
            }
            if (hooks.on_log) hooks.on_log({state.step, train_loss, eval_loss, eval_ppl});
        }
        const bool ckpt_now =
            last || stop || (cfg.checkpoint_interval > 0 && state.step % cfg.checkpoint_interval == 0);
        if (ckpt_now && hooks.on_checkpoint && state.step != last_checkpoint) {
            hooks.on_checkpoint(params, state);
            last_checkpoint = state.step;
        }
    }
    return state.step;
}

}  // namespace mvt
