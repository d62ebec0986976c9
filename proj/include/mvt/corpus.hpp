#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

namespace mvt {

// Token ids with fixed reserved slots. Non-reserved ids are assigned most
// frequent first, ties broken lexicographically.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    Vocabulary();

    int add(const std::string& token);  // returns existing id if already present
    int lookup(const std::string& token) const;  // kUnk when absent
    const std::string& token_of(int id) const;
    std::size_t size() const { return id_to_token_.size(); }

    const std::vector<std::string>& tokens() const { return id_to_token_; }

    void save(std::ostream& os) const;
    static Vocabulary load(std::istream& is);

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

// max_size bounds the total vocabulary size including the 4 reserved ids;
// 0 means unbounded. Throws DataError on a corpus with no tokens.
Vocabulary build_vocab(const std::vector<std::string>& lines, std::size_t min_freq,
                       std::size_t max_size = 0);

// POS tag inventory. Ids are dense and follow inventory order; a neutral
// tag is guaranteed to exist (appended last when the inventory lacks one)
// and is what the decoder feeds for positions whose tag is unknown.
class TagSet {
public:
    static constexpr const char* kNeutralName = "NEUTRAL";

    static TagSet penn_default();  // 36 Penn Treebank tags + punctuation tags
    static TagSet from_inventory(const std::vector<std::string>& names);

    int id_of(const std::string& name) const;  // throws DataError for unknown tags
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    const std::string& name_of(int id) const;
    int neutral_id() const { return neutral_id_; }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    void save(std::ostream& os) const;
    static TagSet load(std::istream& is);

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    int neutral_id_ = -1;
};

// A sentence as read from disk: surface forms plus tag ids.
struct TaggedText {
    std::vector<std::string> words;
    std::vector<int> tags;
};

// A sentence as the model consumes it: token ids plus tag ids.
struct TaggedSentence {
    std::vector<int> tokens;
    std::vector<int> tags;
};

std::vector<std::string> tokenize(const std::string& line);

// Vertical format: one `token<TAB>TAG` per line, blank line between
// sentences. Errors carry 1-based line numbers.
std::vector<TaggedText> read_tagged_corpus(std::istream& is, const TagSet& tags);
void write_tagged_corpus(std::ostream& os, const std::vector<TaggedText>& corpus, const TagSet& tags);

// Plain format: one whitespace-tokenized sentence per line. With
// `default_tag` all tokens get that tag.
std::vector<std::string> read_lines(std::istream& is);
std::vector<TaggedText> plain_to_tagged(const std::vector<std::string>& lines, int default_tag);

TaggedSentence encode_sentence(const TaggedText& text, const Vocabulary& vocab);
std::string join_tokens(const std::vector<std::string>& tokens);

// Training-corpus word frequencies, for the frequency-bucket report.
std::map<std::string, std::size_t> word_frequencies(const std::vector<std::string>& lines);

enum class SynthKind { copy, reverse, tagged_translation };

SynthKind synth_kind_from_name(const std::string& name);
const char* synth_kind_name(SynthKind kind);

struct ParallelTaggedCorpus {
    std::vector<TaggedText> src;
    std::vector<TaggedText> tgt;
    TagSet tags;  // the synthetic tagset both sides share
};

// Deterministic synthetic parallel data. `tagged_translation` draws a random
// tag per source token and builds the target by a fixed word mapping plus a
// tag-triggered swap of adjacent tokens, so the reordering is recoverable
// only through the tag channel.
ParallelTaggedCorpus synth_task(SynthKind kind, std::size_t n_samples, std::size_t vocab_size,
                                std::size_t len_min, std::size_t len_max, std::uint64_t seed);

}  // namespace mvt
