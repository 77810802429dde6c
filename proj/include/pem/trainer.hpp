#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pem/adversary.hpp"
#include "pem/common.hpp"
#include "pem/corpus.hpp"
#include "pem/embedding.hpp"
#include "pem/polarity.hpp"

namespace pem {

enum class ModelKind : std::uint8_t { Baseline, Polarized, Complete };
enum class Phase : std::uint8_t { Encoder, Discriminator };

const char* model_kind_name(ModelKind kind);
const char* phase_name(Phase phase);
ModelKind model_kind_from(const std::string& name);

struct TrainConfig {
    ModelKind model_kind = ModelKind::Complete;
    Eigen::Index d = 100;           // semantic dims; polarity dim is always 1
    Eigen::Index d_mlp = 100;       // discriminator hidden width
    std::size_t window = 5;         // sliding-window half-width c
    std::size_t negatives = 5;      // negative samples k per positive pair
    std::uint64_t min_count = 5;
    Scalar subsample_t = 1e-3;
    Scalar gamma = 1.0;             // hinge margin
    Scalar lambda = 0.1;            // adversarial weight
    std::size_t batch_size = 16;
    std::size_t iters = 5;          // outer encoder/discriminator alternations
    Scalar lr_embed = 0.025;        // Task #1 rate, linearly decayed over a phase
    Scalar lr_attention = 0.01;     // Task #2 W_K/W_Q, fixed
    Scalar lr_discriminator = 0.01; // theta_D (MLP + Task-3 attention), fixed
    std::size_t eval_every = 2000;  // batches between validation checks
    std::size_t max_epochs_per_phase = 5;
    std::size_t threads = 1;        // >1 enables non-deterministic throughput mode
    std::uint64_t seed = 1;
};

// Flat key=value codec shared by config files, CLI overrides, and the echo
// embedded in every output artifact. Unknown keys are rejected.
std::map<std::string, std::string> config_to_kv(const TrainConfig& config);
void config_set(TrainConfig& config, const std::string& key, const std::string& value);
std::string config_echo(const TrainConfig& config);

struct LogRow {
    Phase phase = Phase::Encoder;
    std::size_t check_index = 0;    // 1-based within a phase
    std::size_t batches_seen = 0;   // cumulative within the phase
    Scalar loss = 0;                // encoder: l_Task1 + l_Task2 on validation; discriminator: l_D
    Scalar val_f1 = 0;
};

struct TrainedModel {
    ModelParams params;
    AttentionParams att2;
    std::optional<AdversaryState> adversary;
    Vocabulary vocab;
    TrainConfig config;
    std::vector<LogRow> log;
};

// Owns all mutable state during a run. Phases mutate disjoint tensor sets:
// the encoder phase touches {target, context, att2}, the discriminator phase
// touches {disc, att3}. Exposed (rather than just the train() wrapper) so
// tests can drive single phases and inspect state between them.
class Trainer {
public:
    Trainer(TrainConfig config, const std::vector<LabeledTweet>& train_set,
            const std::vector<LabeledTweet>& val_set);

    void run_all();
    // One phase of Algorithm 1: batches with a validation check every
    // eval_every batches (and at least one per epoch); on the first check
    // whose F1 drops below the previous check's, the previous check's
    // snapshot is restored and the phase ends. Returns this phase's log rows.
    std::vector<LogRow> run_phase(Phase phase, std::size_t outer_iter);

    TrainedModel take_model();

    Scalar validation_f1(Phase phase) const;
    // l_Task1 + l_Task2 over the validation set with a fixed evaluation
    // stream; recomputable bit-for-bit from a parameter snapshot.
    Scalar encoder_eval_loss() const;
    Scalar discriminator_eval_loss() const;

    const ModelParams& params() const { return params_; }
    const AttentionParams& att2() const { return att2_; }
    const AdversaryState& adversary() const;
    const Vocabulary& vocab() const { return vocab_; }

    // Test seam: when set, replaces the validation F1 computed at each check.
    std::function<Scalar(Phase, std::size_t check_index)> f1_override;

private:
    struct Snapshot;

    void process_encoder_batch(const std::vector<std::size_t>& tweet_idx, Rng& rng, Scalar lr1);
    bool process_discriminator_batch(const std::vector<std::size_t>& tweet_idx);
    TweetBatch gather_batch(const std::vector<std::size_t>& tweet_idx) const;
    Snapshot snapshot() const;
    void restore(const Snapshot& snap);

    TrainConfig config_;
    Vocabulary vocab_;
    std::vector<LabeledTweet> train_;
    std::vector<LabeledTweet> val_;
    std::optional<NoiseTable> noise_;
    ModelParams params_;
    AttentionParams att2_;
    std::optional<AdversaryState> adversary_;
    std::vector<LogRow> log_;
};

TrainedModel train(const TrainConfig& config, const std::vector<LabeledTweet>& train_set,
                   const std::vector<LabeledTweet>& val_set);

}  // namespace pem
