#include "pem/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace pem {

const char* token_kind_name(TokenKind kind) {
    switch (kind) {
        case TokenKind::Entity: return "entity";
        case TokenKind::Hashtag: return "hashtag";
        case TokenKind::Mention: return "mention";
        case TokenKind::Emoji: return "emoji";
        case TokenKind::Word: return "word";
    }
    return "?";
}

void TokenSeq::recompute_polar_indices() {
    polar_indices.clear();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const TokenKind k = tokens[i].kind;
        if (k == TokenKind::Entity || k == TokenKind::Hashtag) polar_indices.push_back(i);
    }
}

namespace {

bool is_ascii_alnum(char32_t cp) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}

// Word characters: ASCII alphanumerics, underscore, and any non-ASCII
// codepoint that is not whitespace/emoji (so accented words survive).
bool is_word_char(char32_t cp, bool emoji) {
    if (emoji) return false;
    if (cp < 128) return is_ascii_alnum(cp) || cp == '_';
    return true;
}

bool is_space(char32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
           cp == 0x00A0 || cp == 0x2028 || cp == 0x2029 || (cp >= 0x2000 && cp <= 0x200B) ||
           cp == 0x3000;
}

bool is_emoji(char32_t cp) {
    return (cp >= 0x1F300 && cp <= 0x1F5FF) ||  // symbols & pictographs
           (cp >= 0x1F600 && cp <= 0x1F64F) ||  // emoticons
           (cp >= 0x1F680 && cp <= 0x1F6FF) ||  // transport & map
           (cp >= 0x1F900 && cp <= 0x1F9FF) ||  // supplemental symbols
           (cp >= 0x1FA00 && cp <= 0x1FAFF) ||  // extended-A
           (cp >= 0x1F1E6 && cp <= 0x1F1FF) ||  // regional indicators
           (cp >= 0x2600 && cp <= 0x26FF) ||    // misc symbols
           (cp >= 0x2700 && cp <= 0x27BF);      // dingbats
}

// Joiners and variation selectors carry no lexical content of their own.
bool is_ignorable(char32_t cp) { return cp == 0xFE0F || cp == 0x200D; }

std::u32string decode_utf8(const std::string& text) {
    std::u32string out;
    out.reserve(text.size());
    std::size_t i = 0;
    const auto byte = [&](std::size_t j) { return static_cast<unsigned char>(text[j]); };
    while (i < text.size()) {
        const unsigned char b0 = byte(i);
        char32_t cp = 0xFFFD;
        std::size_t len = 1;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 >> 5) == 0x6 && i + 1 < text.size()) {
            cp = ((b0 & 0x1F) << 6) | (byte(i + 1) & 0x3F);
            len = 2;
        } else if ((b0 >> 4) == 0xE && i + 2 < text.size()) {
            cp = ((b0 & 0x0F) << 12) | ((byte(i + 1) & 0x3F) << 6) | (byte(i + 2) & 0x3F);
            len = 3;
        } else if ((b0 >> 3) == 0x1E && i + 3 < text.size()) {
            cp = ((b0 & 0x07) << 18) | ((byte(i + 1) & 0x3F) << 12) |
                 ((byte(i + 2) & 0x3F) << 6) | (byte(i + 3) & 0x3F);
            len = 4;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode_utf8(char32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

char32_t ascii_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    return cp;
}

std::string lower_ascii(std::string s) {
    for (char& c : s)
        if (c >= 'A' && c <= 'Z') c += 32;
    return s;
}

bool starts_with_url(const std::u32string& seg, std::size_t pos) {
    static const std::u32string kHttp = U"http://";
    static const std::u32string kHttps = U"https://";
    static const std::u32string kWww = U"www.";
    const auto match = [&](const std::u32string& prefix) {
        if (pos + prefix.size() > seg.size()) return false;
        for (std::size_t i = 0; i < prefix.size(); ++i)
            if (ascii_lower(seg[pos + i]) != prefix[i]) return false;
        return true;
    };
    return match(kHttp) || match(kHttps) || match(kWww);
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

Lexicon::Lexicon(const std::vector<std::string>& phrases) {
    for (const auto& raw : phrases) {
        std::string p = trim(lower_ascii(raw));
        if (p.empty()) continue;
        phrases_.insert(p);
        const std::size_t words = 1 + std::count(p.begin(), p.end(), ' ');
        max_words_ = std::max(max_words_, words);
    }
}

Lexicon Lexicon::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lexicon file: " + path);
    std::vector<std::string> phrases;
    std::string line;
    while (std::getline(in, line)) phrases.push_back(line);
    return Lexicon(phrases);
}

TokenSeq tokenize_tweet(const std::string& text, const Lexicon& lexicon) {
    const std::u32string cps = decode_utf8(text);
    std::vector<Token> raw;

    std::size_t i = 0;
    const std::size_t n = cps.size();
    while (i < n) {
        const char32_t cp = cps[i];
        if (is_space(cp)) {
            ++i;
            continue;
        }
        if (starts_with_url(cps, i)) {
            while (i < n && !is_space(cps[i])) ++i;
            continue;
        }
        if ((cp == U'#' || cp == U'@') && i + 1 < n && is_word_char(cps[i + 1], is_emoji(cps[i + 1]))) {
            const bool hashtag = cp == U'#';
            std::string surface = encode_utf8(cp);
            ++i;
            while (i < n && is_word_char(cps[i], is_emoji(cps[i])))
                surface += encode_utf8(hashtag ? ascii_lower(cps[i]) : cps[i]), ++i;
            raw.push_back({surface, hashtag ? TokenKind::Hashtag : TokenKind::Mention, -1});
            continue;
        }
        if (is_emoji(cp)) {
            raw.push_back({encode_utf8(cp), TokenKind::Emoji, -1});
            ++i;
            continue;
        }
        if (is_ignorable(cp)) {
            ++i;
            continue;
        }
        if (is_word_char(cp, false)) {
            std::string surface;
            while (i < n && is_word_char(cps[i], is_emoji(cps[i])))
                surface += encode_utf8(ascii_lower(cps[i])), ++i;
            raw.push_back({surface, TokenKind::Word, -1});
            continue;
        }
        ++i;  // punctuation
    }

    // Greedy leftmost-longest entity match over runs of Word tokens.
    TokenSeq seq;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        if (raw[pos].kind != TokenKind::Word || lexicon.size() == 0) {
            seq.tokens.push_back(std::move(raw[pos]));
            ++pos;
            continue;
        }
        std::size_t run = 0;
        while (pos + run < raw.size() && raw[pos + run].kind == TokenKind::Word &&
               run < lexicon.max_words())
            ++run;
        std::size_t matched = 0;
        std::string phrase;
        for (std::size_t len = run; len >= 1; --len) {
            phrase.clear();
            for (std::size_t j = 0; j < len; ++j) {
                if (j) phrase += ' ';
                phrase += raw[pos + j].surface;
            }
            if (lexicon.contains(phrase)) {
                matched = len;
                break;
            }
        }
        if (matched > 0) {
            seq.tokens.push_back({std::move(phrase), TokenKind::Entity, -1});
            pos += matched;
        } else {
            seq.tokens.push_back(std::move(raw[pos]));
            ++pos;
        }
    }

    seq.recompute_polar_indices();
    return seq;
}

std::int64_t Vocabulary::id_of(const std::string& surface) const {
    auto it = index_.find(surface);
    return it == index_.end() ? -1 : it->second;
}

void Vocabulary::tag(TokenSeq& seq) const {
    for (Token& tok : seq.tokens) tok.vocab_id = id_of(tok.surface);
}

void Vocabulary::append(std::string surface, TokenKind kind, std::uint64_t count) {
    index_.emplace(surface, static_cast<std::int64_t>(surfaces_.size()));
    surfaces_.push_back(std::move(surface));
    kinds_.push_back(kind);
    counts_.push_back(count);
    total_count_ += count;
}

Vocabulary build_vocabulary(const std::vector<TokenSeq>& corpus, std::uint64_t min_count) {
    if (corpus.empty()) throw DataError("empty corpus");
    if (min_count < 1) throw DataError("min_count must be >= 1");

    std::unordered_map<std::string, std::pair<std::uint64_t, TokenKind>> counts;
    for (const TokenSeq& seq : corpus) {
        for (const Token& tok : seq.tokens) {
            auto [it, inserted] = counts.try_emplace(tok.surface, 0, tok.kind);
            ++it->second.first;
        }
    }

    std::vector<const std::pair<const std::string, std::pair<std::uint64_t, TokenKind>>*> kept;
    kept.reserve(counts.size());
    for (const auto& entry : counts)
        if (entry.second.first >= min_count) kept.push_back(&entry);
    std::sort(kept.begin(), kept.end(), [](const auto* a, const auto* b) {
        if (a->second.first != b->second.first) return a->second.first > b->second.first;
        return a->first < b->first;
    });

    Vocabulary vocab;
    for (const auto* entry : kept) vocab.append(entry->first, entry->second.second, entry->second.first);
    return vocab;
}

TokenSeq subsample(const TokenSeq& seq, const Vocabulary& vocab, Scalar t, Rng& rng) {
    if (t <= 0) throw DataError("subsample threshold must be > 0");
    TokenSeq out;
    for (const Token& tok : seq.tokens) {
        if (tok.in_vocab()) {
            const Scalar f = vocab.frequency(static_cast<std::size_t>(tok.vocab_id));
            const Scalar discard = 1.0 - std::sqrt(t / f);
            if (rng.uniform01() < discard) continue;
        }
        out.tokens.push_back(tok);
    }
    out.recompute_polar_indices();
    return out;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = derive_rng(seed, "corpus/shuffle");
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

std::vector<LabeledTweet> take(const std::vector<LabeledTweet>& corpus,
                               const std::vector<std::size_t>& idx, std::size_t begin,
                               std::size_t end) {
    std::vector<LabeledTweet> out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) out.push_back(corpus[idx[i]]);
    return out;
}

}  // namespace

DatasetSplit split_dataset(const std::vector<LabeledTweet>& corpus, std::uint64_t seed) {
    const std::size_t n = corpus.size();
    if (n < 10) throw DataError("corpus too small to split (need >= 10 tweets)");
    const auto idx = shuffled_indices(n, seed);
    const std::size_t n_train = (n * 8) / 10;
    const std::size_t n_val = n / 10;
    DatasetSplit split;
    split.train = take(corpus, idx, 0, n_train);
    split.validation = take(corpus, idx, n_train, n_train + n_val);
    split.test = take(corpus, idx, n_train + n_val, n);
    return split;
}

std::vector<DatasetSplit> kfold_split(const std::vector<LabeledTweet>& corpus, std::size_t k,
                                      std::uint64_t seed) {
    const std::size_t n = corpus.size();
    if (k < 2) throw DataError("k must be >= 2");
    if (k > n) throw DataError("k exceeds corpus size");
    const auto idx = shuffled_indices(n, seed);

    std::vector<DatasetSplit> folds(k);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t start = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        const std::size_t mid = start + len / 2;
        DatasetSplit& fold = folds[f];
        fold.validation = take(corpus, idx, start, mid);
        fold.test = take(corpus, idx, mid, start + len);
        fold.train.reserve(n - len);
        for (std::size_t i = 0; i < n; ++i)
            if (i < start || i >= start + len) fold.train.push_back(corpus[idx[i]]);
        start += len;
    }
    return folds;
}

std::vector<LabeledTweet> parse_corpus_jsonl(std::istream& in, const Lexicon& lexicon) {
    std::vector<LabeledTweet> corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!obj.is_object() || !obj.contains("account_id") || !obj.contains("text"))
            throw DataError("corpus line " + std::to_string(lineno) +
                            ": expected object with account_id and text");
        LabeledTweet tweet;
        tweet.account_id = obj.at("account_id").get<std::string>();
        if (obj.contains("label") && !obj.at("label").is_null()) {
            const std::string label = obj.at("label").get<std::string>();
            if (label == "D")
                tweet.label = Label::Liberal;
            else if (label == "R")
                tweet.label = Label::Conservative;
            else
                throw DataError("corpus line " + std::to_string(lineno) + ": unknown label '" +
                                label + "'");
        }
        if (obj.contains("timestamp") && !obj.at("timestamp").is_null())
            tweet.timestamp = obj.at("timestamp").get<std::int64_t>();
        tweet.seq = tokenize_tweet(obj.at("text").get<std::string>(), lexicon);
        corpus.push_back(std::move(tweet));
    }
    return corpus;
}

std::vector<LabeledTweet> load_corpus_jsonl(const std::string& path, const Lexicon& lexicon) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    return parse_corpus_jsonl(in, lexicon);
}

}  // namespace pem
