#pragma once

#include <iosfwd>
#include <string>

#include "pem/trainer.hpp"

namespace pem {

// Versioned binary container: config echo, vocabulary, embedding matrices,
// attention and discriminator tensors, training log. Round-trips losslessly;
// identical models produce byte-identical files.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

// TSV of (phase, check_index, batches_seen, loss, val_F1) preceded by
// '#'-prefixed config-echo lines.
void write_training_log(const TrainedModel& model, std::ostream& out);

// word2vec text interchange: header "<vocab_size> <d+1>", then one line per
// token with its context row; spaces in entity surfaces become '_'.
void export_text(const TrainedModel& model, std::ostream& out);

}  // namespace pem
