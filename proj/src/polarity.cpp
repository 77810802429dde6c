#include "pem/polarity.hpp"

#include <cmath>

namespace pem {

AttentionParams init_attention(Eigen::Index d, Rng& rng) {
    const Scalar bound = std::sqrt(6.0 / (2.0 * static_cast<Scalar>(d)));
    AttentionParams att;
    att.W_K = Matrix::Zero(d, d);
    att.W_Q = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) att.W_K(i, j) = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) att.W_Q(i, j) = rng.uniform(-bound, bound);
    return att;
}

TweetView make_tweet_view(const ModelParams& params, const LabeledTweet& tweet) {
    TweetView view;
    view.l = label_sign(tweet.label);
    view.y = label_binary(tweet.label);
    for (const std::size_t pos : tweet.seq.polar_indices) {
        const Token& tok = tweet.seq.tokens[pos];
        if (tok.in_vocab()) view.row_ids.push_back(static_cast<std::size_t>(tok.vocab_id));
    }
    const Eigen::Index m = static_cast<Eigen::Index>(view.row_ids.size());
    view.E_S = Matrix::Zero(m, params.d);
    view.E_P = Vector::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        view.E_S.row(i) = params.semantic(static_cast<Eigen::Index>(view.row_ids[i]));
        view.E_P(i) = params.polarity(static_cast<Eigen::Index>(view.row_ids[i]));
    }
    return view;
}

AttentionForward attention_forward(const Eigen::Ref<const Matrix>& E_S,
                                   const AttentionParams& att) {
    const Eigen::Index m = E_S.rows();
    if (m < 1) throw DataError("attention needs at least one pooled row");
    AttentionForward fwd;
    fwd.inv_sqrt_m = 1.0 / std::sqrt(static_cast<Scalar>(m));
    fwd.Q = E_S * att.W_Q;
    fwd.key_sum = (E_S * att.W_K).colwise().sum().transpose();
    const Vector scores = fwd.inv_sqrt_m * (fwd.Q * fwd.key_sum);
    fwd.alpha = softmax(scores);
    return fwd;
}

Vector attention_weights(const Eigen::Ref<const Matrix>& E_S, const AttentionParams& att) {
    return attention_forward(E_S, att).alpha;
}

Vector softmax_backward(const Vector& alpha, const Vector& d_alpha) {
    const Scalar inner = alpha.dot(d_alpha);
    return alpha.array() * (d_alpha.array() - inner);
}

void attention_param_grad(const AttentionForward& fwd, const Eigen::Ref<const Matrix>& E_S,
                          const Vector& d_scores, Matrix& d_WK, Matrix& d_WQ) {
    // score_i = (1/sqrt(m)) (E_S W_Q)_i . key_sum, with key_sum = colsum(E_S) W_K
    const Vector col_sum = E_S.colwise().sum().transpose();
    d_WQ.noalias() += fwd.inv_sqrt_m * (E_S.transpose() * d_scores) * fwd.key_sum.transpose();
    d_WK.noalias() += fwd.inv_sqrt_m * col_sum * (fwd.Q.transpose() * d_scores).transpose();
}

Scalar tweet_polarity(const Vector& alpha, const Vector& E_P) {
    if (alpha.size() != E_P.size()) throw DataError("attention/polarity length mismatch");
    return alpha.dot(E_P);
}

Scalar hinge_loss(Scalar score, int l, Scalar gamma) {
    if (gamma <= 0) throw DataError("hinge margin must be > 0");
    return std::max<Scalar>(0.0, gamma - static_cast<Scalar>(l) * score);
}

Task2Grad task2_loss_grad(const TweetBatch& batch, const AttentionParams& att, Scalar gamma) {
    if (batch.empty()) throw DataError("empty batch");
    const Eigen::Index d = att.W_K.rows();

    Task2Grad grad;
    grad.d_WK = Matrix::Zero(d, d);
    grad.d_WQ = Matrix::Zero(d, d);
    grad.d_EP.reserve(batch.size());

    const Scalar inv_n = 1.0 / static_cast<Scalar>(batch.size());
    for (const TweetView& tweet : batch) {
        const AttentionForward fwd = attention_forward(tweet.E_S, att);
        const Scalar score = tweet_polarity(fwd.alpha, tweet.E_P);
        const Scalar margin = gamma - static_cast<Scalar>(tweet.l) * score;
        if (margin <= 0) {
            grad.d_EP.emplace_back(Vector::Zero(tweet.m()));
            continue;
        }
        grad.loss += margin * inv_n;
        const Scalar d_score = -static_cast<Scalar>(tweet.l) * inv_n;
        grad.d_EP.emplace_back(d_score * fwd.alpha);
        const Vector d_alpha = d_score * tweet.E_P;
        const Vector d_scores = softmax_backward(fwd.alpha, d_alpha);
        attention_param_grad(fwd, tweet.E_S, d_scores, grad.d_WK, grad.d_WQ);
    }
    return grad;
}

}  // namespace pem
