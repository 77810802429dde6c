#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pem/common.hpp"
#include "pem/corpus.hpp"

namespace pem {

// Target and context embedding matrices, one row per vocabulary id. Each row
// is [semantic d dims | 1 polarity dim]; the polarity score of token i is
// context(i, d). Tasks #2/#3 and all inference read only context rows.
struct ModelParams {
    Matrix target;
    Matrix context;
    Eigen::Index d = 0;

    Eigen::Index dim() const { return d + 1; }
    Eigen::Index vocab_size() const { return target.rows(); }

    auto semantic(Eigen::Index id) const { return context.row(id).head(d); }
    Scalar polarity(Eigen::Index id) const { return context(id, d); }
};

// Target semantic dims ~ U[-0.5/d, 0.5/d]; both polarity dims ~ U[-0.01, 0.01];
// context semantic block starts at zero. Row-major draw order, one stream per
// matrix, so the layout is reproducible byte for byte.
ModelParams init_params(Eigen::Index vocab_size, Eigen::Index d, std::uint64_t seed);

// Unigram noise distribution P(w) = U(w)^{3/4} / sum_i U(i)^{3/4}, realized
// as a cumulative table sampled by binary search.
class NoiseTable {
public:
    explicit NoiseTable(const Vocabulary& vocab);

    Scalar probability(std::size_t id) const { return probs_[id]; }
    std::size_t size() const { return probs_.size(); }

    std::size_t sample(Rng& rng) const;

private:
    std::vector<Scalar> probs_;
    std::vector<Scalar> cumulative_;
};

// k i.i.d. draws from the noise distribution, resampling any draw equal to
// exclude. Requires a vocabulary of at least two tokens.
std::vector<std::size_t> sample_negatives(const NoiseTable& table, std::size_t k,
                                          std::size_t exclude, Rng& rng);

// Dynamic-window skip-gram pairs: OOV tokens are dropped first, then for each
// surviving position t a width b ~ U{1..c} is drawn and (w_t, w_{t+j}) is
// emitted for j in {-b..b}\{0} that stay in range.
std::vector<std::pair<std::size_t, std::size_t>> window_pairs(const TokenSeq& seq, std::size_t c,
                                                              Rng& rng);

// Gradient of the negative-sampling loss for one (center, context) pair.
// Touches the target row of the center and the context rows of the context
// token and negatives; duplicates among negatives are accumulated.
struct Task1Grad {
    Scalar loss = 0;
    std::size_t center = 0;
    Vector d_target;                                      // dL/d target.row(center)
    std::vector<std::pair<std::size_t, Vector>> d_context;  // dL/d context.row(id)
};

// loss = -(1/(k+1)) [ ln sigma(z_t . z'_ctx) + sum_i ln sigma(-z_t . z'_neg_i) ].
// center == context is skipped: zero loss, no updates.
Task1Grad task1_loss_grad(std::size_t center, std::size_t context,
                          const std::vector<std::size_t>& negatives, const ModelParams& params);

// One SGD step: params -= lr * grad.
void apply_task1_grad(ModelParams& params, const Task1Grad& grad, Scalar lr);

}  // namespace pem
