#include "mvt/corpus.hpp"

#include <algorithm>
#include <sstream>

#include "mvt/errors.hpp"
#include "mvt/rng.hpp"

namespace mvt {

namespace {

const char* kReservedNames[4] = {"<pad>", "<bos>", "<eos>", "<unk>"};

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

Vocabulary::Vocabulary() {
    for (const char* name : kReservedNames) add(name);
}

int Vocabulary::add(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    int id = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_.emplace(token, id);
    return id;
}

int Vocabulary::lookup(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
        throw DataError("token id " + std::to_string(id) + " out of range (vocab size " +
                        std::to_string(id_to_token_.size()) + ")");
    return id_to_token_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(std::ostream& os) const {
    for (const std::string& token : id_to_token_) os << token << '\n';
}

Vocabulary Vocabulary::load(std::istream& is) {
    Vocabulary vocab;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) throw DataError("vocabulary line " + std::to_string(line_no) + ": empty token");
        if (line_no <= 4) {
            if (line != kReservedNames[line_no - 1])
                throw DataError("vocabulary line " + std::to_string(line_no) + ": expected reserved token " +
                                kReservedNames[line_no - 1] + ", got " + line);
            continue;
        }
        if (vocab.token_to_id_.count(line))
            throw DataError("vocabulary line " + std::to_string(line_no) + ": duplicate token " + line);
        vocab.add(line);
    }
    if (line_no < 4) throw DataError("vocabulary file truncated: reserved tokens missing");
    return vocab;
}

Vocabulary build_vocab(const std::vector<std::string>& lines, std::size_t min_freq,
                       std::size_t max_size) {
    if (min_freq < 1) throw ConfigError("min_freq must be >= 1");
    if (max_size > 0 && max_size < 4)
        throw ConfigError("max_size must be 0 (unbounded) or >= 4 to hold the reserved ids");
    std::map<std::string, std::size_t> freq;
    for (const std::string& line : lines)
        for (const std::string& token : tokenize(line)) ++freq[token];
    if (freq.empty()) throw DataError("cannot build a vocabulary from an empty corpus");

    std::vector<std::pair<std::string, std::size_t>> entries;
    for (const auto& [token, count] : freq)
        if (count >= min_freq) entries.emplace_back(token, count);
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (max_size > 0 && entries.size() > max_size - 4) entries.resize(max_size - 4);

    Vocabulary vocab;
    for (const auto& [token, count] : entries) vocab.add(token);
    return vocab;
}

TagSet TagSet::penn_default() {
    static const std::vector<std::string> inventory = {
        "CC", "CD",  "DT",  "EX",  "FW",   "IN",  "JJ",  "JJR", "JJS", "LS",  "MD",  "NN",
        "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB",  "RBR", "RBS", "RP",  "SYM",
        "TO",  "UH",  "VB",  "VBD", "VBG",  "VBN", "VBP", "VBZ", "WDT", "WP",  "WP$", "WRB",
        "#",   "$",   "''",  "(",   ")",    ",",   ".",   ":",   "``",
    };
    return from_inventory(inventory);
}

TagSet TagSet::from_inventory(const std::vector<std::string>& names) {
    if (names.empty()) throw DataError("tag inventory is empty");
    TagSet tags;
    for (const std::string& name : names) {
        if (name.empty()) throw DataError("tag inventory contains an empty tag name");
        if (tags.index_.count(name)) throw DataError("tag inventory contains duplicate tag " + name);
        tags.index_.emplace(name, static_cast<int>(tags.names_.size()));
        tags.names_.push_back(name);
    }
    if (!tags.index_.count(kNeutralName)) {
        tags.index_.emplace(kNeutralName, static_cast<int>(tags.names_.size()));
        tags.names_.push_back(kNeutralName);
    }
    tags.neutral_id_ = tags.index_.at(kNeutralName);
    return tags;
}

int TagSet::id_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("unknown tag " + name);
    return it->second;
}

const std::string& TagSet::name_of(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= names_.size())
        throw DataError("tag id " + std::to_string(id) + " out of range (tagset size " +
                        std::to_string(names_.size()) + ")");
    return names_[static_cast<std::size_t>(id)];
}

void TagSet::save(std::ostream& os) const {
    for (const std::string& name : names_) os << name << '\n';
}

TagSet TagSet::load(std::istream& is) {
    std::vector<std::string> names;
    std::string line;
    while (std::getline(is, line)) {
        line = strip_cr(line);
        if (!line.empty()) names.push_back(line);
    }
    return from_inventory(names);
}

std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream iss(line);
    std::vector<std::string> tokens;
    std::string token;
    while (iss >> token) tokens.push_back(token);
    return tokens;
}

std::vector<TaggedText> read_tagged_corpus(std::istream& is, const TagSet& tags) {
    std::vector<TaggedText> corpus;
    TaggedText current;
    std::string line;
    std::size_t line_no = 0;
    auto flush = [&](std::size_t at_line) {
        if (current.words.empty())
            throw DataError("line " + std::to_string(at_line) + ": empty sentence block");
        corpus.push_back(std::move(current));
        current = TaggedText{};
    };
    while (std::getline(is, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) {
            flush(line_no);
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
            throw DataError("line " + std::to_string(line_no) + ": expected token<TAB>TAG, got: " + line);
        std::string word = line.substr(0, tab);
        std::string tag = line.substr(tab + 1);
        if (!tags.has(tag))
            throw DataError("line " + std::to_string(line_no) + ": unknown tag " + tag);
        current.words.push_back(std::move(word));
        current.tags.push_back(tags.id_of(tag));
    }
    if (!current.words.empty()) corpus.push_back(std::move(current));
    return corpus;
}

void write_tagged_corpus(std::ostream& os, const std::vector<TaggedText>& corpus, const TagSet& tags) {
    for (std::size_t s = 0; s < corpus.size(); ++s) {
        if (s > 0) os << '\n';
        const TaggedText& sent = corpus[s];
        if (sent.words.size() != sent.tags.size())
            throw DataError("sentence " + std::to_string(s) + ": " + std::to_string(sent.words.size()) +
                            " words but " + std::to_string(sent.tags.size()) + " tags");
        for (std::size_t i = 0; i < sent.words.size(); ++i)
            os << sent.words[i] << '\t' << tags.name_of(sent.tags[i]) << '\n';
    }
}

std::vector<std::string> read_lines(std::istream& is) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) lines.push_back(strip_cr(line));
    return lines;
}

std::vector<TaggedText> plain_to_tagged(const std::vector<std::string>& lines, int default_tag) {
    std::vector<TaggedText> corpus;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        TaggedText sent;
        sent.words = tokenize(lines[i]);
        if (sent.words.empty())
            throw DataError("line " + std::to_string(i + 1) + ": empty sentence");
        sent.tags.assign(sent.words.size(), default_tag);
        corpus.push_back(std::move(sent));
    }
    return corpus;
}

TaggedSentence encode_sentence(const TaggedText& text, const Vocabulary& vocab) {
    if (text.words.size() != text.tags.size())
        throw DataError("sentence has " + std::to_string(text.words.size()) + " words but " +
                        std::to_string(text.tags.size()) + " tags");
    TaggedSentence sent;
    sent.tokens.reserve(text.words.size());
    for (const std::string& word : text.words) sent.tokens.push_back(vocab.lookup(word));
    sent.tags = text.tags;
    return sent;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::map<std::string, std::size_t> word_frequencies(const std::vector<std::string>& lines) {
    std::map<std::string, std::size_t> freq;
    for (const std::string& line : lines)
        for (const std::string& token : tokenize(line)) ++freq[token];
    return freq;
}

SynthKind synth_kind_from_name(const std::string& name) {
    if (name == "copy") return SynthKind::copy;
    if (name == "reverse") return SynthKind::reverse;
    if (name == "tagged-translation") return SynthKind::tagged_translation;
    throw ConfigError("unknown synthetic task: " + name +
                      " (expected copy, reverse, or tagged-translation)");
}

const char* synth_kind_name(SynthKind kind) {
    switch (kind) {
        case SynthKind::copy: return "copy";
        case SynthKind::reverse: return "reverse";
        case SynthKind::tagged_translation: return "tagged-translation";
    }
    throw ConfigError("invalid synthetic task kind");
}

ParallelTaggedCorpus synth_task(SynthKind kind, std::size_t n_samples, std::size_t vocab_size,
                                std::size_t len_min, std::size_t len_max, std::uint64_t seed) {
    if (vocab_size <= 4) throw ConfigError("synthetic vocab_size must exceed the 4 reserved ids");
    if (len_min < 1) throw ConfigError("synthetic sentences must have at least one token");
    if (len_min > len_max) throw ConfigError("len_min exceeds len_max");

    const std::size_t n_words = vocab_size - 4;
    ParallelTaggedCorpus out;
    out.tags = TagSet::from_inventory({"TA", "TB", "TC", "TD"});
    const int swap_tag = out.tags.id_of("TB");
    Rng rng(seed);

    for (std::size_t s = 0; s < n_samples; ++s) {
        const std::size_t len = len_min + static_cast<std::size_t>(rng.below(len_max - len_min + 1));
        std::vector<std::size_t> word_idx(len);
        TaggedText src;
        for (std::size_t i = 0; i < len; ++i) {
            word_idx[i] = static_cast<std::size_t>(rng.below(n_words));
            src.words.push_back("w" + std::to_string(word_idx[i]));
            if (kind == SynthKind::tagged_translation)
                src.tags.push_back(static_cast<int>(rng.below(4)));
            else
                src.tags.push_back(static_cast<int>(word_idx[i] % 4));
        }

        TaggedText tgt;
        switch (kind) {
            case SynthKind::copy:
                tgt = src;
                break;
            case SynthKind::reverse:
                tgt.words.assign(src.words.rbegin(), src.words.rend());
                tgt.tags.assign(src.tags.rbegin(), src.tags.rend());
                break;
            case SynthKind::tagged_translation: {
                // The swap tag flips a token with its right neighbour; the
                // consumed neighbour never triggers another swap.
                std::vector<std::size_t> order;
                for (std::size_t i = 0; i < len;) {
                    if (src.tags[i] == swap_tag && i + 1 < len) {
                        order.push_back(i + 1);
                        order.push_back(i);
                        i += 2;
                    } else {
                        order.push_back(i);
                        ++i;
                    }
                }
                for (std::size_t pos : order) {
                    tgt.words.push_back("v" + std::to_string((word_idx[pos] + 3) % n_words));
                    tgt.tags.push_back(src.tags[pos]);
                }
                break;
            }
        }
        out.src.push_back(std::move(src));
        out.tgt.push_back(std::move(tgt));
    }
    return out;
}

}  // namespace mvt
