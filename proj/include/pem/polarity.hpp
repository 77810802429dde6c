#pragma once

#include <cstdint>
#include <vector>

#include "pem/common.hpp"
#include "pem/corpus.hpp"
#include "pem/embedding.hpp"

namespace pem {

// Key/query maps for attention pooling. Keys and queries are built from
// stop-gradded semantic rows, so these weights steer the pooling but never
// push gradient back into the rows they read.
struct AttentionParams {
    Matrix W_K;
    Matrix W_Q;
};

// Xavier-style init: entries ~ U[-sqrt(6/(2d)), +sqrt(6/(2d))], row-major.
AttentionParams init_attention(Eigen::Index d, Rng& rng);

// One tweet's pooled view: semantic rows E_S (m x d) and polarity column E_P
// gathered from the context matrix at the polar in-vocabulary positions.
// row_ids maps pooled rows back to vocabulary ids for scatter updates.
struct TweetView {
    Matrix E_S;
    Vector E_P;
    int l = 0;  // label sign, -1 liberal / +1 conservative
    int y = 0;  // label bit, 0 liberal / 1 conservative
    std::vector<std::size_t> row_ids;

    Eigen::Index m() const { return E_P.size(); }
};

using TweetBatch = std::vector<TweetView>;

// Gathers polarity-bearing (entity/hashtag) in-vocab rows. m() == 0 when the
// tweet has none; such tweets are excluded from Task #2/#3 batches upstream.
TweetView make_tweet_view(const ModelParams& params, const LabeledTweet& tweet);

struct AttentionForward {
    Vector alpha;    // softmax of row scores, sums to 1
    Matrix Q;        // stopgrad(E_S) W_Q
    Vector key_sum;  // column sums of stopgrad(E_S) W_K
    Scalar inv_sqrt_m = 0;
};

// alpha = softmax((Q K^T / sqrt(m)) 1), with K = stopgrad(E_S) W_K and
// Q = stopgrad(E_S) W_Q. Row score i reduces to q_i . key_sum / sqrt(m).
AttentionForward attention_forward(const Eigen::Ref<const Matrix>& E_S,
                                   const AttentionParams& att);
Vector attention_weights(const Eigen::Ref<const Matrix>& E_S, const AttentionParams& att);

// Jacobian-vector product of softmax: alpha .* (g - alpha.g).
Vector softmax_backward(const Vector& alpha, const Vector& d_alpha);

// Accumulates d(loss)/dW_K and d(loss)/dW_Q given d(loss)/d(row scores).
void attention_param_grad(const AttentionForward& fwd, const Eigen::Ref<const Matrix>& E_S,
                          const Vector& d_scores, Matrix& d_WK, Matrix& d_WQ);

// Tweet polarity: alpha-weighted average of the pooled polarity dims.
Scalar tweet_polarity(const Vector& alpha, const Vector& E_P);

// max{0, gamma - l * score}; zero iff the margin is satisfied. Subgradient at
// the kink is taken from the inactive side (0).
Scalar hinge_loss(Scalar score, int l, Scalar gamma);

struct Task2Grad {
    Scalar loss = 0;
    Matrix d_WK;
    Matrix d_WQ;
    std::vector<Vector> d_EP;  // per batch member, aligned with batch order
};

// Batch-mean hinge loss and its gradients. Gradient reaches E_P through the
// attention weights and W_K/W_Q through the softmax; E_S gets none
// (stop-gradient), so semantic dims are never touched by this task.
Task2Grad task2_loss_grad(const TweetBatch& batch, const AttentionParams& att, Scalar gamma);

}  // namespace pem
