#pragma once

#include <vector>

#include "pem/common.hpp"
#include "pem/polarity.hpp"

namespace pem {

// Two-layer MLP with ReLU hidden layer and sigmoid output:
// yhat = sigma(W2 . relu(W1^T zs + b1) + b2).
struct DiscriminatorParams {
    Matrix W1;   // d x d_mlp
    Vector b1;   // d_mlp
    Vector W2;   // d_mlp
    Scalar b2 = 0;

    Eigen::Index hidden_size() const { return b1.size(); }
};

DiscriminatorParams init_discriminator(Eigen::Index d, Eigen::Index d_mlp, Rng& rng);

// Task #3 state: its own attention pair (never aliased with Task #2's) plus
// the discriminator. Both belong to theta_D: trained in the discriminator
// phase, frozen in the encoder phase.
struct AdversaryState {
    AttentionParams att;
    DiscriminatorParams disc;
    Scalar lambda = 0.1;
};

// Pooled semantic tweet embedding: convex combination alpha^T E_S.
Vector tweet_semantic(const Vector& alpha, const Eigen::Ref<const Matrix>& E_S);

Scalar discriminator_forward(const Vector& zs, const DiscriminatorParams& disc);

// Binary cross entropy, predictions clamped to [eps, 1-eps] with eps = 1e-12.
Scalar bce_loss(const std::vector<Scalar>& y_hat, const std::vector<int>& y);

// Discriminator loss l_D over a batch, attention included in the forward.
Scalar adversary_loss(const TweetBatch& batch, const AdversaryState& state);

// l_D with the attention vectors pinned, used by the encoder path (and its
// finite-difference oracle), where alpha is stop-gradded.
Scalar adversary_loss_frozen_alpha(const std::vector<Vector>& alphas, const TweetBatch& batch,
                                   const DiscriminatorParams& disc);

struct DiscriminatorGrad {
    Scalar loss = 0;
    Matrix d_W1;
    Vector d_b1;
    Vector d_W2;
    Scalar d_b2 = 0;
    Matrix d_WK;
    Matrix d_WQ;
};

// Exact gradients of l_D w.r.t. the discriminator weights and the Task-3
// attention weights. Embedding matrices are never touched.
DiscriminatorGrad discriminator_grad(const TweetBatch& batch, const AdversaryState& state);

struct EncoderAdversarialGrad {
    Scalar loss_d = 0;                // l_D at the current parameters
    std::vector<Matrix> d_ES;         // d(-lambda l_D)/d E_S, value path only
};

// Gradient of (-lambda l_D) w.r.t. the pooled semantic rows, theta_D frozen
// and alpha stop-gradded. The trainer adds this to the Task #1 + #2 updates.
EncoderAdversarialGrad encoder_adversarial_grad(const TweetBatch& batch,
                                                const AdversaryState& state, Scalar lambda);

}  // namespace pem
