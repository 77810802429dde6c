#include "pem/inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace pem {

const char* leaning_name(Scalar score) {
    if (score < 0) return "liberal-leaning";
    if (score > 0) return "conservative-leaning";
    return "neutral";
}

ScoreMode score_mode_from(const std::string& name) {
    if (name == "attention") return ScoreMode::Attention;
    if (name == "mean") return ScoreMode::Mean;
    throw DataError("unknown score mode '" + name + "' (expected attention|mean)");
}

TokenScope token_scope_from(const std::string& name) {
    if (name == "polar") return TokenScope::PolarOnly;
    if (name == "all") return TokenScope::AllTokens;
    throw DataError("unknown token scope '" + name + "' (expected polar|all)");
}

PolarityScore token_polarity(const TrainedModel& model, const std::string& token) {
    const std::int64_t id = model.vocab.id_of(token);
    if (id < 0) throw DataError("unknown token '" + token + "'");
    return {model.params.polarity(static_cast<Eigen::Index>(id))};
}

Scalar score_tokenseq(const ModelParams& params, const AttentionParams* att,
                      const TokenSeq& tagged_seq, ScoreMode mode, TokenScope scope) {
    std::vector<std::size_t> pooled;
    if (scope == TokenScope::PolarOnly) {
        for (const std::size_t pos : tagged_seq.polar_indices)
            if (tagged_seq.tokens[pos].in_vocab())
                pooled.push_back(static_cast<std::size_t>(tagged_seq.tokens[pos].vocab_id));
    } else {
        for (const Token& tok : tagged_seq.tokens)
            if (tok.in_vocab()) pooled.push_back(static_cast<std::size_t>(tok.vocab_id));
    }
    if (pooled.empty()) return 0;

    const Eigen::Index m = static_cast<Eigen::Index>(pooled.size());
    Vector polarity(m);
    for (Eigen::Index i = 0; i < m; ++i)
        polarity(i) = params.polarity(static_cast<Eigen::Index>(pooled[i]));

    if (mode == ScoreMode::Mean) return polarity.mean();

    if (att == nullptr) throw DataError("attention mode requires attention parameters");
    Matrix semantic(m, params.d);
    for (Eigen::Index i = 0; i < m; ++i)
        semantic.row(i) = params.semantic(static_cast<Eigen::Index>(pooled[i]));
    return tweet_polarity(attention_weights(semantic, *att), polarity);
}

PolarityScore score_tweet(const TrainedModel& model, const TokenSeq& seq, ScoreMode mode,
                          TokenScope scope) {
    TokenSeq tagged = seq;
    model.vocab.tag(tagged);
    return {score_tokenseq(model.params, &model.att2, tagged, mode, scope)};
}

Label classify(Scalar score) { return score > 0 ? Label::Conservative : Label::Liberal; }

PolarityScore score_account(const TrainedModel& model, const std::vector<TokenSeq>& tweets,
                            ScoreMode mode, TokenScope scope) {
    if (tweets.empty()) throw DataError("account has no tweets");
    Scalar sum = 0;
    for (const TokenSeq& seq : tweets) sum += score_tweet(model, seq, mode, scope).value;
    return {sum / static_cast<Scalar>(tweets.size())};
}

Metrics metrics(const std::vector<Label>& preds, const std::vector<Label>& labels) {
    if (preds.size() != labels.size()) throw DataError("prediction/label length mismatch");
    if (preds.empty()) throw DataError("empty prediction list");
    Metrics m;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool pred_pos = preds[i] == Label::Conservative;
        const bool true_pos = labels[i] == Label::Conservative;
        if (pred_pos && true_pos) ++m.tp;
        else if (pred_pos && !true_pos) ++m.fp;
        else if (!pred_pos && true_pos) ++m.fn;
        else ++m.tn;
    }
    m.accuracy = static_cast<Scalar>(m.tp + m.tn) / static_cast<Scalar>(preds.size());
    if (m.tp + m.fp == 0 || m.tp + m.fn == 0) return m;  // F1 = 0 by convention
    const Scalar precision = static_cast<Scalar>(m.tp) / static_cast<Scalar>(m.tp + m.fp);
    const Scalar recall = static_cast<Scalar>(m.tp) / static_cast<Scalar>(m.tp + m.fn);
    if (precision + recall > 0) m.f1 = 2 * precision * recall / (precision + recall);
    return m;
}

std::vector<Neighbor> nearest_neighbors(const TrainedModel& model, const std::string& token,
                                        std::size_t topk) {
    const std::int64_t query = model.vocab.id_of(token);
    if (query < 0) throw DataError("unknown token '" + token + "'");
    const Eigen::Index qi = static_cast<Eigen::Index>(query);
    const Vector q = model.params.semantic(qi).transpose();
    const Scalar q_norm = q.norm();

    std::vector<Neighbor> all;
    all.reserve(model.vocab.size());
    for (std::size_t id = 0; id < model.vocab.size(); ++id) {
        if (static_cast<std::int64_t>(id) == query) continue;
        const Vector v = model.params.semantic(static_cast<Eigen::Index>(id)).transpose();
        const Scalar denom = q_norm * v.norm();
        all.push_back({id, denom > 0 ? q.dot(v) / denom : 0.0});
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.cosine != b.cosine) return a.cosine > b.cosine;
        return a.id < b.id;
    });
    if (all.size() > topk) all.resize(topk);
    return all;
}

std::map<std::string, GroupScore> aggregate_groups(
    const std::map<std::string, Scalar>& account_scores,
    const std::map<std::string, std::string>& group_of_account) {
    std::map<std::string, std::pair<Scalar, std::size_t>> sums;
    for (const auto& [account, score] : account_scores) {
        const auto it = group_of_account.find(account);
        if (it == group_of_account.end()) continue;
        auto& [sum, count] = sums[it->second];
        sum += score;
        ++count;
    }
    if (sums.empty()) throw DataError("no account maps to any group");

    std::map<std::string, GroupScore> groups;
    Scalar mean = 0, max_abs = 0;
    for (const auto& [group, sc] : sums) {
        const Scalar q = sc.first / static_cast<Scalar>(sc.second);
        groups[group].raw = q;
        mean += q;
        max_abs = std::max(max_abs, std::abs(q));
    }
    mean /= static_cast<Scalar>(groups.size());
    Scalar max_dev = 0;
    for (const auto& [group, gs] : groups) max_dev = std::max(max_dev, std::abs(gs.raw - mean));

    for (auto& [group, gs] : groups) {
        gs.normalized = max_abs > 0 ? (gs.raw - mean) / max_abs : 0.0;
        gs.normalized_bounded = max_dev > 0 ? (gs.raw - mean) / max_dev : 0.0;
    }
    return groups;
}

PeriodReport aggregate_periods(const std::vector<ScoredTweet>& scored, int period_days,
                               std::int64_t origin_epoch_seconds) {
    if (period_days < 1) throw DataError("period must be >= 1 day");
    const std::int64_t period_seconds = static_cast<std::int64_t>(period_days) * 86400;

    struct Bucket {
        std::size_t liberal = 0, conservative = 0;
        Scalar sum = 0;
        std::size_t count = 0;
    };
    std::map<std::int64_t, Bucket> tweet_buckets;
    std::map<std::pair<std::int64_t, std::string>, std::pair<Scalar, std::size_t>> account_sums;

    PeriodReport report;
    for (const ScoredTweet& tweet : scored) {
        if (!tweet.timestamp) {
            ++report.skipped_missing_timestamp;
            continue;
        }
        std::int64_t delta = *tweet.timestamp - origin_epoch_seconds;
        std::int64_t period = delta / period_seconds;
        if (delta < 0 && delta % period_seconds != 0) --period;  // floor for pre-origin tweets

        Bucket& bucket = tweet_buckets[period];
        if (classify(tweet.score) == Label::Conservative) ++bucket.conservative;
        else ++bucket.liberal;
        bucket.sum += tweet.score;
        ++bucket.count;

        auto& [sum, count] = account_sums[{period, tweet.account_id}];
        sum += tweet.score;
        ++count;
    }

    for (const auto& [period, bucket] : tweet_buckets)
        report.tweet_level.push_back(
            {period, bucket.liberal, bucket.conservative,
             bucket.sum / static_cast<Scalar>(bucket.count)});

    std::map<std::int64_t, Bucket> account_buckets;
    for (const auto& [key, sc] : account_sums) {
        const Scalar mean = sc.first / static_cast<Scalar>(sc.second);
        Bucket& bucket = account_buckets[key.first];
        if (classify(mean) == Label::Conservative) ++bucket.conservative;
        else ++bucket.liberal;
        bucket.sum += mean;
        ++bucket.count;
    }
    for (const auto& [period, bucket] : account_buckets)
        report.account_level.push_back(
            {period, bucket.liberal, bucket.conservative,
             bucket.sum / static_cast<Scalar>(bucket.count)});
    return report;
}

Scalar kde_bandwidth(const std::vector<Scalar>& scores) {
    const std::size_t n = scores.size();
    if (n < 2) throw DataError("degenerate distribution: need at least two scores");
    Scalar mean = 0;
    for (const Scalar s : scores) mean += s;
    mean /= static_cast<Scalar>(n);
    Scalar var = 0;
    for (const Scalar s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<Scalar>(n - 1);
    if (var <= 0) throw DataError("degenerate distribution: zero variance");
    return std::sqrt(var) * std::pow(static_cast<Scalar>(n), -0.2);
}

Vector kde_default_grid(const std::vector<Scalar>& scores, std::size_t points) {
    if (points < 2) throw DataError("grid needs at least two points");
    const Scalar h = kde_bandwidth(scores);
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const Scalar lo = *lo_it - 5 * h;
    const Scalar hi = *hi_it + 5 * h;
    return Vector::LinSpaced(static_cast<Eigen::Index>(points), lo, hi);
}

Vector kde_density(const std::vector<Scalar>& scores, const Eigen::Ref<const Vector>& grid) {
    const Scalar h = kde_bandwidth(scores);
    const Scalar norm = 1.0 / (static_cast<Scalar>(scores.size()) * h * std::sqrt(2.0 * M_PI));
    Vector density = Vector::Zero(grid.size());
    for (const Scalar s : scores)
        density.array() += (-0.5 * ((grid.array() - s) / h).square()).exp();
    return norm * density;
}

BiasSummary corpus_bias_summary(const TrainedModel& model,
                                const std::vector<LabeledTweet>& corpus,
                                const std::vector<std::string>& keywords, ScoreMode mode,
                                TokenScope scope) {
    if (corpus.empty()) throw DataError("empty corpus");
    BiasSummary summary;

    std::vector<ScoredTweet> scored;
    scored.reserve(corpus.size());
    std::optional<std::int64_t> origin;
    Scalar sum = 0;
    for (const LabeledTweet& tweet : corpus) {
        const Scalar score = score_tweet(model, tweet.seq, mode, scope).value;
        sum += score;
        scored.push_back({tweet.account_id, tweet.timestamp, score, tweet.label});
        if (tweet.timestamp && (!origin || *tweet.timestamp < *origin)) origin = tweet.timestamp;
    }
    summary.tweet_count = corpus.size();
    summary.overall_mean = sum / static_cast<Scalar>(corpus.size());

    if (origin) {
        PeriodReport periods = aggregate_periods(scored, 7, *origin);
        summary.weekly = std::move(periods.tweet_level);
        summary.weekly_skipped = periods.skipped_missing_timestamp;
    } else {
        summary.weekly_skipped = corpus.size();
    }

    for (const std::string& keyword : keywords) {
        if (model.vocab.id_of(keyword) < 0) {
            summary.oov_keywords.push_back(keyword);
            continue;
        }
        const Scalar score = token_polarity(model, keyword).value;
        summary.keywords.push_back({keyword, score});
        if (score < 0) ++summary.liberal_keywords;
        else if (score > 0) ++summary.conservative_keywords;
    }
    return summary;
}

}  // namespace pem
