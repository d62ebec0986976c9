#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvt/corpus.hpp"
#include "mvt/errors.hpp"
#include "mvt/model.hpp"

namespace mvt::cli {

// Canonical file names inside a model directory.
inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kTrainStateFile = "trainstate.bin";
inline constexpr const char* kSrcVocabFile = "src_vocab.txt";
inline constexpr const char* kTgtVocabFile = "tgt_vocab.txt";
inline constexpr const char* kTagSetFile = "tagset.txt";
inline constexpr const char* kTrainLogFile = "train_log.tsv";
inline constexpr const char* kRunConfigFile = "run_config.cfg";

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

inline std::string path_join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path);
    os << content;
    if (!os) throw DataError("write failed for " + path);
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path);
    return is;
}

inline std::vector<std::string> read_file_lines(const std::string& path) {
    auto is = open_input(path);
    return read_lines(is);
}

// Resolved configuration snapshot written next to every command's outputs.
inline void dump_run_config(const CLI::App& root, const std::string& path) {
    std::string cfg = root.config_to_str(true, false);
    write_text_file(path, cfg);
}

struct ModelDir {
    ModelParams params;
    Vocabulary src_vocab, tgt_vocab;
    TagSet tags;

    ModelDir() : tags(TagSet::penn_default()) {}
};

inline ModelDir load_model_dir(const std::string& dir) {
    ModelDir md;
    md.params = load_checkpoint_file(path_join(dir, kCheckpointFile));
    {
        auto is = open_input(path_join(dir, kSrcVocabFile));
        md.src_vocab = Vocabulary::load(is);
    }
    {
        auto is = open_input(path_join(dir, kTgtVocabFile));
        md.tgt_vocab = Vocabulary::load(is);
    }
    {
        auto is = open_input(path_join(dir, kTagSetFile));
        md.tags = TagSet::load(is);
    }
    if (md.src_vocab.size() != md.params.config.src_vocab)
        throw DataError("source vocabulary size does not match the checkpoint");
    if (md.tgt_vocab.size() != md.params.config.tgt_vocab)
        throw DataError("target vocabulary size does not match the checkpoint");
    if (md.tags.size() != md.params.config.src_tagset)
        throw DataError("tagset size does not match the checkpoint");
    return md;
}

// Sentences as the model consumes them; file tags default to neutral in
// plain format.
inline std::vector<TaggedText> read_source_file(const std::string& path, const std::string& format,
                                                const TagSet& tags) {
    if (format == "tagged") {
        auto is = open_input(path);
        return read_tagged_corpus(is, tags);
    }
    return plain_to_tagged(read_file_lines(path), tags.neutral_id());
}

void add_cmd_analyze_pe(CLI::App& app);
void add_cmd_search_step(CLI::App& app);
void add_cmd_train(CLI::App& app);
void add_cmd_translate(CLI::App& app);
void add_cmd_evaluate(CLI::App& app);
void add_cmd_compare(CLI::App& app);
void add_cmd_experiment_triple(CLI::App& app);

}  // namespace mvt::cli
