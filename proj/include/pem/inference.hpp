#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pem/common.hpp"
#include "pem/trainer.hpp"

namespace pem {

// Negative = liberal-leaning, positive = conservative-leaning, magnitude =
// strength of the leaning.
struct PolarityScore {
    Scalar value = 0;
};

const char* leaning_name(Scalar score);

enum class ScoreMode : std::uint8_t { Attention, Mean };
enum class TokenScope : std::uint8_t { PolarOnly, AllTokens };

ScoreMode score_mode_from(const std::string& name);
TokenScope token_scope_from(const std::string& name);

// Polarity score of a token: last coordinate of its context embedding row.
// Throws DataError("unknown token ...") for out-of-vocabulary queries.
PolarityScore token_polarity(const TrainedModel& model, const std::string& token);

// Pooled tweet score over a vocabulary-tagged sequence. PolarOnly pools the
// in-vocab entity/hashtag positions, AllTokens every in-vocab position;
// Attention weights with Task-2 alpha, Mean averages unweighted. An empty
// pooling set scores 0 (neutral). att may be null in Mean mode.
Scalar score_tokenseq(const ModelParams& params, const AttentionParams* att,
                      const TokenSeq& tagged_seq, ScoreMode mode, TokenScope scope);

PolarityScore score_tweet(const TrainedModel& model, const TokenSeq& seq, ScoreMode mode,
                          TokenScope scope);

// score > 0 -> Conservative; score < 0 -> Liberal; exactly 0 -> Liberal (the
// paper calls 0 neutral; binary metrics need a deterministic side).
Label classify(Scalar score);

// Unweighted mean of the tweet scores.
PolarityScore score_account(const TrainedModel& model, const std::vector<TokenSeq>& tweets,
                            ScoreMode mode, TokenScope scope);

struct Metrics {
    Scalar accuracy = 0;
    Scalar f1 = 0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Accuracy and F1 with Conservative as the positive class; any zero
// denominator in precision/recall yields F1 = 0.
Metrics metrics(const std::vector<Label>& preds, const std::vector<Label>& labels);

struct Neighbor {
    std::size_t id = 0;
    Scalar cosine = 0;
};

// Cosine similarity over the semantic dims of the context rows, descending,
// query excluded, ties broken by vocabulary id.
std::vector<Neighbor> nearest_neighbors(const TrainedModel& model, const std::string& token,
                                        std::size_t topk);

struct GroupScore {
    Scalar raw = 0;                 // q_i: mean account score in the group
    Scalar normalized = 0;          // q_hat_i = (q_i - mean q) / max_j |q_j|
    Scalar normalized_bounded = 0;  // q_hat'_i = (q_i - mean q) / max_j |q_j - mean q|, in [-1, 1]
};

std::map<std::string, GroupScore> aggregate_groups(
    const std::map<std::string, Scalar>& account_scores,
    const std::map<std::string, std::string>& group_of_account);

struct ScoredTweet {
    std::string account_id;
    std::optional<std::int64_t> timestamp;
    Scalar score = 0;
    Label label = Label::Unlabeled;
};

struct PeriodRow {
    std::int64_t period = 0;
    std::size_t liberal = 0;
    std::size_t conservative = 0;
    Scalar mean_score = 0;
};

struct PeriodReport {
    std::vector<PeriodRow> tweet_level;
    std::vector<PeriodRow> account_level;  // classify(mean per account per bucket)
    std::size_t skipped_missing_timestamp = 0;
};

// Buckets tweets by floor((timestamp - origin) / (period_days * 86400)); the
// trailing partial bucket is kept. Tweets without timestamps are skipped and
// counted.
PeriodReport aggregate_periods(const std::vector<ScoredTweet>& scored, int period_days,
                               std::int64_t origin_epoch_seconds);

// Scott's-rule bandwidth n^{-1/5} * sample standard deviation.
Scalar kde_bandwidth(const std::vector<Scalar>& scores);

// Evenly spaced grid spanning the data range extended by 5 bandwidths.
Vector kde_default_grid(const std::vector<Scalar>& scores, std::size_t points);

// Gaussian kernel density estimate on the grid. Requires >= 2 scores with
// nonzero variance.
Vector kde_density(const std::vector<Scalar>& scores, const Eigen::Ref<const Vector>& grid);

struct KeywordBias {
    std::string keyword;
    Scalar score = 0;
};

struct BiasSummary {
    Scalar overall_mean = 0;
    std::size_t tweet_count = 0;
    std::vector<PeriodRow> weekly;  // 7-day buckets from the earliest timestamp
    std::size_t weekly_skipped = 0;
    std::vector<KeywordBias> keywords;        // in-vocabulary keywords with scores
    std::vector<std::string> oov_keywords;    // listed separately, not counted
    std::size_t liberal_keywords = 0;         // score < 0
    std::size_t conservative_keywords = 0;    // score > 0
};

BiasSummary corpus_bias_summary(const TrainedModel& model,
                                const std::vector<LabeledTweet>& corpus,
                                const std::vector<std::string>& keywords, ScoreMode mode,
                                TokenScope scope);

}  // namespace pem
