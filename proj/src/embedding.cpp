#include "pem/embedding.hpp"

#include <algorithm>
#include <cmath>

namespace pem {

ModelParams init_params(Eigen::Index vocab_size, Eigen::Index d, std::uint64_t seed) {
    if (d < 1) throw DataError("semantic dimension must be >= 1");
    if (vocab_size < 1) throw DataError("empty vocabulary");

    ModelParams params;
    params.d = d;
    params.target = Matrix::Zero(vocab_size, d + 1);
    params.context = Matrix::Zero(vocab_size, d + 1);

    const Scalar half = 0.5 / static_cast<Scalar>(d);
    Rng target_rng = derive_rng(seed, "init/target");
    Rng context_rng = derive_rng(seed, "init/context");
    for (Eigen::Index i = 0; i < vocab_size; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) params.target(i, j) = target_rng.uniform(-half, half);
        params.target(i, d) = target_rng.uniform(-0.01, 0.01);
        params.context(i, d) = context_rng.uniform(-0.01, 0.01);
    }
    return params;
}

NoiseTable::NoiseTable(const Vocabulary& vocab) {
    if (vocab.size() == 0) throw DataError("empty vocabulary");
    probs_.resize(vocab.size());
    cumulative_.resize(vocab.size());
    Scalar norm = 0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        probs_[i] = std::pow(static_cast<Scalar>(vocab.count(i)), 0.75);
        norm += probs_[i];
    }
    Scalar acc = 0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        probs_[i] /= norm;
        acc += probs_[i];
        cumulative_[i] = acc;
    }
    cumulative_.back() = 1.0;
}

std::size_t NoiseTable::sample(Rng& rng) const {
    const Scalar u = rng.uniform01();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                                             cumulative_.size() - 1));
}

std::vector<std::size_t> sample_negatives(const NoiseTable& table, std::size_t k,
                                          std::size_t exclude, Rng& rng) {
    if (table.size() < 2) throw DataError("need at least two tokens to sample negatives");
    if (k < 1) throw DataError("k must be >= 1");
    std::vector<std::size_t> negatives;
    negatives.reserve(k);
    while (negatives.size() < k) {
        const std::size_t id = table.sample(rng);
        if (id == exclude) continue;
        negatives.push_back(id);
    }
    return negatives;
}

std::vector<std::pair<std::size_t, std::size_t>> window_pairs(const TokenSeq& seq, std::size_t c,
                                                              Rng& rng) {
    if (c < 1) throw DataError("window size must be >= 1");
    std::vector<std::size_t> ids;
    ids.reserve(seq.tokens.size());
    for (const Token& tok : seq.tokens)
        if (tok.in_vocab()) ids.push_back(static_cast<std::size_t>(tok.vocab_id));

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(ids.size());
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        const std::ptrdiff_t b = 1 + static_cast<std::ptrdiff_t>(rng.below(c));
        for (std::ptrdiff_t j = -b; j <= b; ++j) {
            if (j == 0) continue;
            const std::ptrdiff_t u = t + j;
            if (u < 0 || u >= n) continue;
            pairs.emplace_back(ids[t], ids[u]);
        }
    }
    return pairs;
}

Task1Grad task1_loss_grad(std::size_t center, std::size_t context,
                          const std::vector<std::size_t>& negatives, const ModelParams& params) {
    Task1Grad grad;
    grad.center = center;
    grad.d_target = Vector::Zero(params.dim());
    if (center == context) return grad;
    if (negatives.empty()) throw DataError("need at least one negative sample");

    const Scalar inv = 1.0 / static_cast<Scalar>(negatives.size() + 1);
    const auto z_t = params.target.row(center);

    const Scalar s_pos = z_t.dot(params.context.row(context));
    grad.loss = -log_sigmoid(s_pos) * inv;
    // d/ds ln sigma(s) = 1 - sigma(s)
    const Scalar g_pos = -(1.0 - sigmoid(s_pos)) * inv;
    grad.d_target = g_pos * params.context.row(context).transpose();
    grad.d_context.emplace_back(context, g_pos * z_t.transpose());

    for (const std::size_t neg : negatives) {
        const Scalar s_neg = z_t.dot(params.context.row(neg));
        grad.loss -= log_sigmoid(-s_neg) * inv;
        // d/ds ln sigma(-s) = -sigma(s)
        const Scalar g_neg = sigmoid(s_neg) * inv;
        grad.d_target += g_neg * params.context.row(neg).transpose();

        bool merged = false;
        for (auto& [id, vec] : grad.d_context) {
            if (id == neg) {
                vec += g_neg * z_t.transpose();
                merged = true;
                break;
            }
        }
        if (!merged) grad.d_context.emplace_back(neg, g_neg * z_t.transpose());
    }
    return grad;
}

void apply_task1_grad(ModelParams& params, const Task1Grad& grad, Scalar lr) {
    if (grad.d_context.empty()) return;
    params.target.row(grad.center) -= lr * grad.d_target.transpose();
    for (const auto& [id, vec] : grad.d_context) params.context.row(id) -= lr * vec.transpose();
}

}  // namespace pem
