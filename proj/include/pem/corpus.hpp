#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "pem/common.hpp"

namespace pem {

enum class TokenKind : std::uint8_t { Entity, Hashtag, Mention, Emoji, Word };

const char* token_kind_name(TokenKind kind);

struct Token {
    std::string surface;
    TokenKind kind = TokenKind::Word;
    // Index into the vocabulary, or -1 while untagged / out of vocabulary.
    std::int64_t vocab_id = -1;

    bool in_vocab() const { return vocab_id >= 0; }
};

// One tokenized tweet. polar_indices lists the positions (strictly
// increasing) whose token kind is Entity or Hashtag; only those positions
// carry polarity during pooling.
struct TokenSeq {
    std::vector<Token> tokens;
    std::vector<std::size_t> polar_indices;

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
    void recompute_polar_indices();
};

enum class Label : std::uint8_t { Liberal, Conservative, Unlabeled };

// Liberal -> l=-1, y=0; Conservative -> l=+1, y=1.
inline int label_sign(Label label) { return label == Label::Conservative ? 1 : -1; }
inline int label_binary(Label label) { return label == Label::Conservative ? 1 : 0; }

struct LabeledTweet {
    std::string account_id;
    Label label = Label::Unlabeled;
    std::optional<std::int64_t> timestamp;  // UTC epoch seconds
    TokenSeq seq;
};

// Entity gazetteer: lower-cased phrases, longest match wins.
class Lexicon {
public:
    Lexicon() = default;
    explicit Lexicon(const std::vector<std::string>& phrases);

    static Lexicon load(const std::string& path);

    bool contains(const std::string& phrase) const { return phrases_.count(phrase) > 0; }
    std::size_t max_words() const { return max_words_; }
    std::size_t size() const { return phrases_.size(); }

private:
    std::set<std::string> phrases_;
    std::size_t max_words_ = 0;
};

class Vocabulary {
public:
    Vocabulary() = default;

    std::size_t size() const { return surfaces_.size(); }
    std::int64_t id_of(const std::string& surface) const;
    const std::string& surface(std::size_t id) const { return surfaces_[id]; }
    TokenKind kind(std::size_t id) const { return kinds_[id]; }
    std::uint64_t count(std::size_t id) const { return counts_[id]; }
    std::uint64_t total_count() const { return total_count_; }

    // Corpus frequency f(w) of token id.
    Scalar frequency(std::size_t id) const {
        return static_cast<Scalar>(counts_[id]) / static_cast<Scalar>(total_count_);
    }

    // Writes vocab ids into the sequence (OOV tokens keep -1).
    void tag(TokenSeq& seq) const;

    void append(std::string surface, TokenKind kind, std::uint64_t count);

private:
    std::vector<std::string> surfaces_;
    std::vector<TokenKind> kinds_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, std::int64_t> index_;
    std::uint64_t total_count_ = 0;
};

TokenSeq tokenize_tweet(const std::string& text, const Lexicon& lexicon);

// Retains tokens with count >= min_count; ids in descending count order,
// ties broken lexicographically by surface.
Vocabulary build_vocabulary(const std::vector<TokenSeq>& corpus, std::uint64_t min_count);

// Frequent-token subsampling: token w is discarded with probability
// 1 - sqrt(t / f(w)). Sequence must already be vocabulary-tagged; OOV tokens
// are always kept.
TokenSeq subsample(const TokenSeq& seq, const Vocabulary& vocab, Scalar t, Rng& rng);

struct DatasetSplit {
    std::vector<LabeledTweet> train;
    std::vector<LabeledTweet> validation;
    std::vector<LabeledTweet> test;
};

// Seeded Fisher-Yates shuffle (j = raw_u64 % (i+1), descending i), then an
// 8:1:1 cut: floor(0.8N) / floor(0.1N) / remainder.
DatasetSplit split_dataset(const std::vector<LabeledTweet>& corpus, std::uint64_t seed);

// k folds over one seeded shuffle; fold i withholds chunk i (sizes differ by
// at most one), first half validation and the rest test.
std::vector<DatasetSplit> kfold_split(const std::vector<LabeledTweet>& corpus, std::size_t k,
                                      std::uint64_t seed);

// JSONL corpus: one object per line with keys account_id, label ("D"|"R"|null),
// timestamp (int|null), text. "D" -> Liberal, "R" -> Conservative.
std::vector<LabeledTweet> load_corpus_jsonl(const std::string& path, const Lexicon& lexicon);
std::vector<LabeledTweet> parse_corpus_jsonl(std::istream& in, const Lexicon& lexicon);

}  // namespace pem
