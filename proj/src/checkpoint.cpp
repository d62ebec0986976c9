#include <fstream>
#include <map>
#include <sstream>

#include "mvt/errors.hpp"
#include "mvt/model.hpp"
#include "mvt/serialize.hpp"

namespace mvt {

void save_checkpoint(std::ostream& os, const ModelParams& params) {
    const ModelConfig& c = params.config;
    os << "mvt-checkpoint v1"
       << " d_emb=" << c.d_emb << " d_post=" << c.d_post << " d_model=" << c.d_model
       << " n_heads=" << c.n_heads << " n_layers=" << c.n_layers << " d_ff=" << c.d_ff
       << " max_len=" << c.max_len << " src_vocab=" << c.src_vocab << " tgt_vocab=" << c.tgt_vocab
       << " src_tagset=" << c.src_tagset << " tgt_tagset=" << c.tgt_tagset
       << " use_mvpe=" << (c.use_mvpe ? 1 : 0) << " step_k=" << c.step_k
       << " tag_step_k=" << c.tag_step_k << " pe_base=" << fmt17(c.pe_base)
       << " init_seed=" << c.init_seed << "\n";
    for (const auto& [name, t] : params.blocks) {
        os << "block " << name << " " << t->ndim();
        for (std::size_t d : t->shape()) os << " " << d;
        os << "\n";
        write_f64_block(os, t->values());
    }
    if (!os) throw DataError("checkpoint write failed");
}

ModelParams load_checkpoint(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw DataError("checkpoint is empty");
    std::istringstream hs(header);
    std::string magic, version;
    hs >> magic >> version;
    if (magic != "mvt-checkpoint") throw DataError("not a checkpoint file");
    if (version != "v1") throw DataError("unsupported checkpoint version " + version);

    std::map<std::string, std::string> kv;
    std::string pair;
    while (hs >> pair) {
        auto eq = pair.find('=');
        if (eq == std::string::npos || eq == 0)
            throw DataError("checkpoint header: malformed entry " + pair);
        if (!kv.emplace(pair.substr(0, eq), pair.substr(eq + 1)).second)
            throw DataError("checkpoint header: duplicate key " + pair.substr(0, eq));
    }
    auto need = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw DataError(std::string("checkpoint header: missing key ") + key);
        return it->second;
    };

    ModelConfig cfg;
    cfg.d_emb = parse_u64_field("d_emb", need("d_emb"));
    cfg.d_post = parse_u64_field("d_post", need("d_post"));
    cfg.d_model = parse_u64_field("d_model", need("d_model"));
    cfg.n_heads = parse_u64_field("n_heads", need("n_heads"));
    cfg.n_layers = parse_u64_field("n_layers", need("n_layers"));
    cfg.d_ff = parse_u64_field("d_ff", need("d_ff"));
    cfg.max_len = parse_u64_field("max_len", need("max_len"));
    cfg.src_vocab = parse_u64_field("src_vocab", need("src_vocab"));
    cfg.tgt_vocab = parse_u64_field("tgt_vocab", need("tgt_vocab"));
    cfg.src_tagset = parse_u64_field("src_tagset", need("src_tagset"));
    cfg.tgt_tagset = parse_u64_field("tgt_tagset", need("tgt_tagset"));
    cfg.use_mvpe = parse_u64_field("use_mvpe", need("use_mvpe")) != 0;
    cfg.step_k = parse_u64_field("step_k", need("step_k"));
    cfg.tag_step_k = parse_u64_field("tag_step_k", need("tag_step_k"));
    cfg.pe_base = parse_f64_field("pe_base", need("pe_base"));
    cfg.init_seed = parse_u64_field("init_seed", need("init_seed"));
    if (kv.size() != 16) throw DataError("checkpoint header: unexpected extra keys");

    // init_params supplies the canonical block order and shapes; the file
    // must match them exactly, which makes load->save byte-identical.
    ModelParams params = init_params(cfg);
    for (auto& [name, tensor] : params.blocks) {
        std::string line;
        if (!std::getline(is, line)) throw DataError("checkpoint truncated before block " + name);
        std::istringstream ls(line);
        std::string tag, got_name;
        std::size_t ndim = 0;
        ls >> tag >> got_name >> ndim;
        if (tag != "block" || got_name != name)
            throw DataError("checkpoint block mismatch: expected " + name + ", got line: " + line);
        if (ndim != tensor->ndim())
            throw DataError("checkpoint block " + name + ": rank " + std::to_string(ndim) +
                            " does not match expected " + std::to_string(tensor->ndim()));
        for (std::size_t d = 0; d < ndim; ++d) {
            std::size_t dim = 0;
            if (!(ls >> dim) || dim != tensor->shape()[d])
                throw DataError("checkpoint block " + name + ": shape mismatch, expected " +
                                shape_str(tensor->shape()));
        }
        read_f64_block(is, tensor->values());
    }
    if (is.peek() != std::istream::traits_type::eof())
        throw DataError("checkpoint has trailing data after the last block");
    return params;
}

void save_checkpoint_file(const std::string& path, const ModelParams& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open checkpoint for writing: " + path);
    save_checkpoint(os, params);
}

ModelParams load_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);
    return load_checkpoint(is);
}

}  // namespace mvt
