#include "pem/adversary.hpp"

#include <cmath>

namespace pem {

namespace {

constexpr Scalar kBceEps = 1e-12;

Scalar bce_term(Scalar y_hat, int y) {
    const Scalar p = std::clamp(y_hat, kBceEps, 1.0 - kBceEps);
    return y ? -std::log(p) : -std::log1p(-p);
}

struct MlpForward {
    Vector pre;   // W1^T zs + b1
    Vector hidden;  // relu(pre)
    Scalar logit = 0;
    Scalar y_hat = 0;
};

MlpForward mlp_forward(const Vector& zs, const DiscriminatorParams& disc) {
    MlpForward fwd;
    fwd.pre = disc.W1.transpose() * zs + disc.b1;
    fwd.hidden = fwd.pre.cwiseMax(0.0);
    fwd.logit = disc.W2.dot(fwd.hidden) + disc.b2;
    fwd.y_hat = sigmoid(fwd.logit);
    return fwd;
}

}  // namespace

DiscriminatorParams init_discriminator(Eigen::Index d, Eigen::Index d_mlp, Rng& rng) {
    DiscriminatorParams disc;
    disc.W1 = Matrix::Zero(d, d_mlp);
    disc.b1 = Vector::Zero(d_mlp);
    disc.W2 = Vector::Zero(d_mlp);
    disc.b2 = 0;
    const Scalar bound1 = std::sqrt(6.0 / static_cast<Scalar>(d + d_mlp));
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d_mlp; ++j) disc.W1(i, j) = rng.uniform(-bound1, bound1);
    const Scalar bound2 = std::sqrt(6.0 / static_cast<Scalar>(d_mlp + 1));
    for (Eigen::Index j = 0; j < d_mlp; ++j) disc.W2(j) = rng.uniform(-bound2, bound2);
    return disc;
}

Vector tweet_semantic(const Vector& alpha, const Eigen::Ref<const Matrix>& E_S) {
    if (alpha.size() != E_S.rows()) throw DataError("attention/semantic row mismatch");
    return E_S.transpose() * alpha;
}

Scalar discriminator_forward(const Vector& zs, const DiscriminatorParams& disc) {
    return mlp_forward(zs, disc).y_hat;
}

Scalar bce_loss(const std::vector<Scalar>& y_hat, const std::vector<int>& y) {
    if (y_hat.size() != y.size()) throw DataError("prediction/label length mismatch");
    if (y_hat.empty()) throw DataError("empty prediction list");
    Scalar sum = 0;
    for (std::size_t i = 0; i < y_hat.size(); ++i) sum += bce_term(y_hat[i], y[i]);
    return sum / static_cast<Scalar>(y_hat.size());
}

Scalar adversary_loss(const TweetBatch& batch, const AdversaryState& state) {
    if (batch.empty()) throw DataError("empty batch");
    Scalar sum = 0;
    for (const TweetView& tweet : batch) {
        const Vector alpha = attention_weights(tweet.E_S, state.att);
        const Vector zs = tweet_semantic(alpha, tweet.E_S);
        sum += bce_term(discriminator_forward(zs, state.disc), tweet.y);
    }
    return sum / static_cast<Scalar>(batch.size());
}

Scalar adversary_loss_frozen_alpha(const std::vector<Vector>& alphas, const TweetBatch& batch,
                                   const DiscriminatorParams& disc) {
    if (alphas.size() != batch.size()) throw DataError("alpha/batch length mismatch");
    if (batch.empty()) throw DataError("empty batch");
    Scalar sum = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Vector zs = tweet_semantic(alphas[i], batch[i].E_S);
        sum += bce_term(discriminator_forward(zs, disc), batch[i].y);
    }
    return sum / static_cast<Scalar>(batch.size());
}

DiscriminatorGrad discriminator_grad(const TweetBatch& batch, const AdversaryState& state) {
    if (batch.empty()) throw DataError("empty batch");
    const Eigen::Index d = state.disc.W1.rows();
    const Eigen::Index d_mlp = state.disc.hidden_size();

    DiscriminatorGrad grad;
    grad.d_W1 = Matrix::Zero(d, d_mlp);
    grad.d_b1 = Vector::Zero(d_mlp);
    grad.d_W2 = Vector::Zero(d_mlp);
    grad.d_WK = Matrix::Zero(d, d);
    grad.d_WQ = Matrix::Zero(d, d);

    const Scalar inv_n = 1.0 / static_cast<Scalar>(batch.size());
    for (const TweetView& tweet : batch) {
        const AttentionForward att_fwd = attention_forward(tweet.E_S, state.att);
        const Vector zs = tweet_semantic(att_fwd.alpha, tweet.E_S);
        const MlpForward fwd = mlp_forward(zs, state.disc);
        grad.loss += bce_term(fwd.y_hat, tweet.y) * inv_n;

        // d BCE(sigma(o), y) / d o = yhat - y
        const Scalar d_logit = (fwd.y_hat - static_cast<Scalar>(tweet.y)) * inv_n;
        grad.d_W2 += d_logit * fwd.hidden;
        grad.d_b2 += d_logit;
        const Vector d_pre =
            (d_logit * state.disc.W2.array() * (fwd.pre.array() > 0).cast<Scalar>()).matrix();
        grad.d_W1.noalias() += zs * d_pre.transpose();
        grad.d_b1 += d_pre;

        const Vector d_zs = state.disc.W1 * d_pre;
        const Vector d_alpha = tweet.E_S * d_zs;
        const Vector d_scores = softmax_backward(att_fwd.alpha, d_alpha);
        attention_param_grad(att_fwd, tweet.E_S, d_scores, grad.d_WK, grad.d_WQ);
    }
    return grad;
}

EncoderAdversarialGrad encoder_adversarial_grad(const TweetBatch& batch,
                                                const AdversaryState& state, Scalar lambda) {
    if (batch.empty()) throw DataError("empty batch");
    if (lambda < 0) throw DataError("lambda must be >= 0");

    EncoderAdversarialGrad grad;
    grad.d_ES.reserve(batch.size());

    const Scalar inv_n = 1.0 / static_cast<Scalar>(batch.size());
    for (const TweetView& tweet : batch) {
        const Vector alpha = attention_weights(tweet.E_S, state.att);
        const Vector zs = tweet_semantic(alpha, tweet.E_S);
        const MlpForward fwd = mlp_forward(zs, state.disc);
        grad.loss_d += bce_term(fwd.y_hat, tweet.y) * inv_n;

        if (lambda == 0) {
            grad.d_ES.emplace_back(Matrix::Zero(tweet.m(), state.disc.W1.rows()));
            continue;
        }
        const Scalar d_logit = (fwd.y_hat - static_cast<Scalar>(tweet.y)) * inv_n;
        const Vector d_pre =
            (d_logit * state.disc.W2.array() * (fwd.pre.array() > 0).cast<Scalar>()).matrix();
        const Vector d_zs = state.disc.W1 * d_pre;
        // zs = E_S^T alpha with alpha stop-gradded: dE_S row i = -lambda alpha_i d_zs
        grad.d_ES.emplace_back(-lambda * alpha * d_zs.transpose());
    }
    return grad;
}

}  // namespace pem
