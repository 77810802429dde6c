#include "pem/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "pem/inference.hpp"

namespace pem {

const char* model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Baseline: return "baseline";
        case ModelKind::Polarized: return "polarized";
        case ModelKind::Complete: return "complete";
    }
    return "?";
}

const char* phase_name(Phase phase) {
    return phase == Phase::Encoder ? "encoder" : "discriminator";
}

ModelKind model_kind_from(const std::string& name) {
    if (name == "baseline") return ModelKind::Baseline;
    if (name == "polarized") return ModelKind::Polarized;
    if (name == "complete") return ModelKind::Complete;
    throw DataError("unknown model kind '" + name + "' (expected baseline|polarized|complete)");
}

std::map<std::string, std::string> config_to_kv(const TrainConfig& c) {
    std::map<std::string, std::string> kv;
    kv["model"] = model_kind_name(c.model_kind);
    kv["d"] = std::to_string(c.d);
    kv["d_mlp"] = std::to_string(c.d_mlp);
    kv["window"] = std::to_string(c.window);
    kv["negatives"] = std::to_string(c.negatives);
    kv["min_count"] = std::to_string(c.min_count);
    kv["subsample_t"] = format_double(c.subsample_t);
    kv["gamma"] = format_double(c.gamma);
    kv["lambda"] = format_double(c.lambda);
    kv["batch"] = std::to_string(c.batch_size);
    kv["iter"] = std::to_string(c.iters);
    kv["lr_embed"] = format_double(c.lr_embed);
    kv["lr_attention"] = format_double(c.lr_attention);
    kv["lr_discriminator"] = format_double(c.lr_discriminator);
    kv["eval_every"] = std::to_string(c.eval_every);
    kv["max_epochs"] = std::to_string(c.max_epochs_per_phase);
    kv["threads"] = std::to_string(c.threads);
    kv["seed"] = std::to_string(c.seed);
    return kv;
}

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': expected integer, got '" + value + "'");
    }
}

Scalar parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const Scalar v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': expected number, got '" + value + "'");
    }
}

}  // namespace

void config_set(TrainConfig& c, const std::string& key, const std::string& value) {
    if (key == "model") c.model_kind = model_kind_from(value);
    else if (key == "d") c.d = static_cast<Eigen::Index>(parse_u64(key, value));
    else if (key == "d_mlp") c.d_mlp = static_cast<Eigen::Index>(parse_u64(key, value));
    else if (key == "window") c.window = parse_u64(key, value);
    else if (key == "negatives") c.negatives = parse_u64(key, value);
    else if (key == "min_count") c.min_count = parse_u64(key, value);
    else if (key == "subsample_t") c.subsample_t = parse_real(key, value);
    else if (key == "gamma") c.gamma = parse_real(key, value);
    else if (key == "lambda") c.lambda = parse_real(key, value);
    else if (key == "batch") c.batch_size = parse_u64(key, value);
    else if (key == "iter") c.iters = parse_u64(key, value);
    else if (key == "lr_embed") c.lr_embed = parse_real(key, value);
    else if (key == "lr_attention") c.lr_attention = parse_real(key, value);
    else if (key == "lr_discriminator") c.lr_discriminator = parse_real(key, value);
    else if (key == "eval_every") c.eval_every = parse_u64(key, value);
    else if (key == "max_epochs") c.max_epochs_per_phase = parse_u64(key, value);
    else if (key == "threads") c.threads = parse_u64(key, value);
    else if (key == "seed") c.seed = parse_u64(key, value);
    else throw DataError("unknown config key '" + key + "'");
}

std::string config_echo(const TrainConfig& config) {
    std::ostringstream out;
    for (const auto& [key, value] : config_to_kv(config)) out << key << '=' << value << '\n';
    return out.str();
}

struct Trainer::Snapshot {
    ModelParams params;
    AttentionParams att2;
    std::optional<AdversaryState> adversary;
};

namespace {

void validate_labeled(const std::vector<LabeledTweet>& tweets, const char* which) {
    if (tweets.empty()) throw DataError(std::string("empty ") + which + " set");
    for (const LabeledTweet& t : tweets)
        if (t.label == Label::Unlabeled)
            throw DataError(std::string("unlabeled tweet in ") + which + " set");
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.below(i))]);
}

TweetBatch eligible_views(const ModelParams& params, const std::vector<LabeledTweet>& tweets) {
    TweetBatch batch;
    for (const LabeledTweet& tweet : tweets) {
        TweetView view = make_tweet_view(params, tweet);
        if (view.m() > 0) batch.push_back(std::move(view));
    }
    return batch;
}

Scalar task1_pair_loss(std::size_t center, std::size_t context,
                       const std::vector<std::size_t>& negatives, const ModelParams& params) {
    if (center == context) return 0;
    const Scalar inv = 1.0 / static_cast<Scalar>(negatives.size() + 1);
    const auto z_t = params.target.row(center);
    Scalar loss = -log_sigmoid(z_t.dot(params.context.row(context))) * inv;
    for (const std::size_t neg : negatives)
        loss -= log_sigmoid(-z_t.dot(params.context.row(neg))) * inv;
    return loss;
}

}  // namespace

Trainer::Trainer(TrainConfig config, const std::vector<LabeledTweet>& train_set,
                 const std::vector<LabeledTweet>& val_set)
    : config_(std::move(config)), train_(train_set), val_(val_set) {
    validate_labeled(train_, "training");
    validate_labeled(val_, "validation");
    bool has_lib = false, has_con = false;
    for (const LabeledTweet& t : val_) {
        has_lib |= t.label == Label::Liberal;
        has_con |= t.label == Label::Conservative;
    }
    if (!has_lib || !has_con) throw DataError("validation F1 undefined: single-class validation set");
    if (config_.batch_size < 1) throw DataError("batch size must be >= 1");
    if (config_.gamma <= 0) throw DataError("gamma must be > 0");
    if (config_.lambda < 0) throw DataError("lambda must be >= 0");
    if (config_.model_kind == ModelKind::Complete && config_.iters < 1)
        throw DataError("iter must be >= 1 for the complete model");

    std::vector<TokenSeq> seqs;
    seqs.reserve(train_.size());
    for (const LabeledTweet& t : train_) seqs.push_back(t.seq);
    vocab_ = build_vocabulary(seqs, config_.min_count);
    if (vocab_.size() == 0) throw DataError("empty vocabulary after min_count pruning");
    if (vocab_.size() < 2) throw DataError("vocabulary needs at least two tokens");
    for (LabeledTweet& t : train_) vocab_.tag(t.seq);
    for (LabeledTweet& t : val_) vocab_.tag(t.seq);

    noise_.emplace(vocab_);
    params_ = init_params(static_cast<Eigen::Index>(vocab_.size()), config_.d, config_.seed);
    Rng att2_rng = derive_rng(config_.seed, "init/att2");
    att2_ = init_attention(config_.d, att2_rng);
    if (config_.model_kind == ModelKind::Complete) {
        Rng att3_rng = derive_rng(config_.seed, "init/att3");
        Rng disc_rng = derive_rng(config_.seed, "init/disc");
        adversary_.emplace(AdversaryState{init_attention(config_.d, att3_rng),
                                          init_discriminator(config_.d, config_.d_mlp, disc_rng),
                                          config_.lambda});
    }
}

const AdversaryState& Trainer::adversary() const {
    if (!adversary_) throw DataError("model has no adversary state");
    return *adversary_;
}

Trainer::Snapshot Trainer::snapshot() const { return {params_, att2_, adversary_}; }

void Trainer::restore(const Snapshot& snap) {
    params_ = snap.params;
    att2_ = snap.att2;
    adversary_ = snap.adversary;
}

TweetBatch Trainer::gather_batch(const std::vector<std::size_t>& tweet_idx) const {
    TweetBatch batch;
    for (const std::size_t i : tweet_idx) {
        TweetView view = make_tweet_view(params_, train_[i]);
        if (view.m() > 0) batch.push_back(std::move(view));
    }
    return batch;
}

void Trainer::process_encoder_batch(const std::vector<std::size_t>& tweet_idx, Rng& rng,
                                    Scalar lr1) {
    // Task #1: per-pair SGD over this batch's window pairs.
    if (config_.threads <= 1) {
        for (const std::size_t i : tweet_idx) {
            const TokenSeq sub = subsample(train_[i].seq, vocab_, config_.subsample_t, rng);
            for (const auto& [center, context] : window_pairs(sub, config_.window, rng)) {
                const auto negatives = sample_negatives(*noise_, config_.negatives, center, rng);
                apply_task1_grad(params_, task1_loss_grad(center, context, negatives, params_), lr1);
            }
        }
    } else {
        // Throughput mode: lock-free sparse updates, lost updates tolerated.
        std::vector<std::uint64_t> seeds(tweet_idx.size());
        for (auto& s : seeds) s = rng.next_u64();
        const std::size_t workers = std::min<std::size_t>(config_.threads, tweet_idx.size());
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < tweet_idx.size(); i += workers) {
                    Rng local(seeds[i]);
                    const TokenSeq sub =
                        subsample(train_[tweet_idx[i]].seq, vocab_, config_.subsample_t, local);
                    for (const auto& [center, context] : window_pairs(sub, config_.window, local)) {
                        const auto negatives =
                            sample_negatives(*noise_, config_.negatives, center, local);
                        apply_task1_grad(params_,
                                         task1_loss_grad(center, context, negatives, params_), lr1);
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    if (config_.model_kind == ModelKind::Baseline) return;

    const TweetBatch batch = gather_batch(tweet_idx);
    if (batch.empty()) return;

    // Task #2: polarity dims and Task-2 attention.
    const Task2Grad t2 = task2_loss_grad(batch, att2_, config_.gamma);
    att2_.W_K -= config_.lr_attention * t2.d_WK;
    att2_.W_Q -= config_.lr_attention * t2.d_WQ;
    const Eigen::Index d = params_.d;
    for (std::size_t b = 0; b < batch.size(); ++b)
        for (Eigen::Index r = 0; r < batch[b].m(); ++r)
            params_.context(static_cast<Eigen::Index>(batch[b].row_ids[r]), d) -=
                lr1 * t2.d_EP[b](r);

    // Task #3 encoder leg: push semantic dims against the frozen discriminator.
    if (config_.model_kind == ModelKind::Complete && config_.lambda != 0) {
        const EncoderAdversarialGrad adv =
            encoder_adversarial_grad(batch, *adversary_, config_.lambda);
        for (std::size_t b = 0; b < batch.size(); ++b)
            for (Eigen::Index r = 0; r < batch[b].m(); ++r)
                params_.context.row(static_cast<Eigen::Index>(batch[b].row_ids[r])).head(d) -=
                    lr1 * adv.d_ES[b].row(r);
    }
}

bool Trainer::process_discriminator_batch(const std::vector<std::size_t>& tweet_idx) {
    const TweetBatch batch = gather_batch(tweet_idx);
    if (batch.empty()) return false;
    const DiscriminatorGrad g = discriminator_grad(batch, *adversary_);
    const Scalar lr = config_.lr_discriminator;
    adversary_->disc.W1 -= lr * g.d_W1;
    adversary_->disc.b1 -= lr * g.d_b1;
    adversary_->disc.W2 -= lr * g.d_W2;
    adversary_->disc.b2 -= lr * g.d_b2;
    adversary_->att.W_K -= lr * g.d_WK;
    adversary_->att.W_Q -= lr * g.d_WQ;
    return true;
}

Scalar Trainer::encoder_eval_loss() const {
    Rng rng = derive_rng(config_.seed, "eval/loss");
    Scalar t1_sum = 0;
    std::size_t t1_pairs = 0;
    for (const LabeledTweet& tweet : val_) {
        for (const auto& [center, context] : window_pairs(tweet.seq, config_.window, rng)) {
            const auto negatives = sample_negatives(*noise_, config_.negatives, center, rng);
            t1_sum += task1_pair_loss(center, context, negatives, params_);
            ++t1_pairs;
        }
    }
    const Scalar t1 = t1_pairs ? t1_sum / static_cast<Scalar>(t1_pairs) : 0.0;

    Scalar t2 = 0;
    const TweetBatch views = eligible_views(params_, val_);
    if (!views.empty()) {
        Scalar sum = 0;
        for (const TweetView& view : views) {
            const Vector alpha = attention_weights(view.E_S, att2_);
            sum += hinge_loss(tweet_polarity(alpha, view.E_P), view.l, config_.gamma);
        }
        t2 = sum / static_cast<Scalar>(views.size());
    }
    return t1 + t2;
}

Scalar Trainer::discriminator_eval_loss() const {
    const TweetBatch views = eligible_views(params_, val_);
    if (views.empty()) return 0;
    return adversary_loss(views, *adversary_);
}

Scalar Trainer::validation_f1(Phase phase) const {
    std::vector<Label> preds, labels;
    if (phase == Phase::Encoder) {
        preds.reserve(val_.size());
        labels.reserve(val_.size());
        for (const LabeledTweet& tweet : val_) {
            const Scalar score = score_tokenseq(params_, &att2_, tweet.seq, ScoreMode::Attention,
                                                TokenScope::PolarOnly);
            preds.push_back(classify(score));
            labels.push_back(tweet.label);
        }
    } else {
        for (const LabeledTweet& tweet : val_) {
            const TweetView view = make_tweet_view(params_, tweet);
            if (view.m() == 0) continue;
            const Vector alpha = attention_weights(view.E_S, adversary_->att);
            const Scalar y_hat = discriminator_forward(tweet_semantic(alpha, view.E_S),
                                                       adversary_->disc);
            preds.push_back(y_hat > 0.5 ? Label::Conservative : Label::Liberal);
            labels.push_back(tweet.label);
        }
        if (preds.empty()) return 0;
    }
    return metrics(preds, labels).f1;
}

std::vector<LogRow> Trainer::run_phase(Phase phase, std::size_t outer_iter) {
    if (phase == Phase::Discriminator && !adversary_)
        throw DataError("discriminator phase requires the complete model");

    Rng rng = derive_rng(config_.seed, std::string("phase/") + phase_name(phase) + "/" +
                                           std::to_string(outer_iter));
    const std::size_t n = train_.size();
    const std::size_t batch = config_.batch_size;
    const std::size_t batches_per_epoch = (n + batch - 1) / batch;
    const std::size_t total_planned =
        std::max<std::size_t>(1, config_.max_epochs_per_phase * batches_per_epoch);

    std::vector<LogRow> rows;
    Snapshot prev_snap = snapshot();
    Scalar prev_f1 = 0;
    bool have_prev = false;
    std::size_t batches_seen = 0;
    std::size_t check_index = 0;
    std::size_t checked_at = static_cast<std::size_t>(-1);
    bool stopped = false;

    const auto check = [&]() {
        ++check_index;
        const Scalar loss =
            phase == Phase::Encoder ? encoder_eval_loss() : discriminator_eval_loss();
        const Scalar f1 =
            f1_override ? f1_override(phase, check_index) : validation_f1(phase);
        rows.push_back({phase, check_index, batches_seen, loss, f1});
        checked_at = batches_seen;
        if (have_prev && f1 < prev_f1) {
            restore(prev_snap);
            return true;
        }
        prev_snap = snapshot();
        prev_f1 = f1;
        have_prev = true;
        return false;
    };

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> batch_idx;
    for (std::size_t epoch = 0; epoch < config_.max_epochs_per_phase && !stopped; ++epoch) {
        shuffle_indices(order, rng);
        for (std::size_t start = 0; start < n && !stopped; start += batch) {
            batch_idx.assign(order.begin() + start,
                             order.begin() + std::min(n, start + batch));
            if (phase == Phase::Encoder) {
                const Scalar progress =
                    static_cast<Scalar>(batches_seen) / static_cast<Scalar>(total_planned);
                const Scalar lr1 = config_.lr_embed * std::max<Scalar>(1e-4, 1.0 - progress);
                process_encoder_batch(batch_idx, rng, lr1);
            } else {
                process_discriminator_batch(batch_idx);
            }
            ++batches_seen;
            if (config_.eval_every > 0 && batches_seen % config_.eval_every == 0)
                stopped = check();
        }
        if (!stopped && checked_at != batches_seen) stopped = check();
    }

    log_.insert(log_.end(), rows.begin(), rows.end());
    return rows;
}

void Trainer::run_all() {
    if (config_.model_kind == ModelKind::Complete) {
        for (std::size_t i = 0; i < config_.iters; ++i) {
            run_phase(Phase::Encoder, i);
            run_phase(Phase::Discriminator, i);
        }
    } else {
        run_phase(Phase::Encoder, 0);
    }
}

TrainedModel Trainer::take_model() {
    TrainedModel model;
    model.params = std::move(params_);
    model.att2 = std::move(att2_);
    model.adversary = std::move(adversary_);
    model.vocab = std::move(vocab_);
    model.config = config_;
    model.log = std::move(log_);
    return model;
}

TrainedModel train(const TrainConfig& config, const std::vector<LabeledTweet>& train_set,
                   const std::vector<LabeledTweet>& val_set) {
    Trainer trainer(config, train_set, val_set);
    trainer.run_all();
    return trainer.take_model();
}

}  // namespace pem
