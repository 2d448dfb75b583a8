#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ols/dataset.hpp"
#include "ols/models.hpp"

namespace ols {

struct TrainMetrics {
  std::vector<double> loss_curve;
  double exact_sequence_accuracy = 0.0;
  bool diverged = false;
  std::int64_t steps_completed = 0;
};

struct CaptionerTrainConfig {
  std::int64_t steps = 300;
  std::int64_t batch = 32;
  double lr = 3e-3;
  std::uint64_t seed = 0;
  std::int64_t conv1_channels = 3;
  std::int64_t conv2_channels = 6;
  std::int64_t fc_hidden = 24;
  std::int64_t embed = 16;   // encoder output / decoder input width
  std::int64_t hidden = 16;  // decoder state width
  std::int64_t max_unroll = 50;
};

/// Digits 0-9 plus eos; encoder conv-relu-conv-relu-fc-relu-fc.
CaptionerModel init_captioner(const CaptionerTrainConfig& cfg,
                              const std::vector<std::int64_t>& input_shape);

/// Teacher forcing on eos-terminated digit labels, cross-entropy, Adam.
/// Divergence (non-finite loss) aborts and returns the last good parameters.
TrainMetrics train_captioner(CaptionerModel& model, const Dataset& dataset,
                             const CaptionerTrainConfig& cfg);

struct Seq2SeqTrainConfig {
  std::int64_t steps = 400;
  std::int64_t batch = 32;
  double lr = 5e-3;
  std::uint64_t seed = 0;
  std::int64_t data_vocab = 10;  // payload tokens; eos is appended after them
  std::int64_t embed = 8;
  std::int64_t hidden = 16;
  std::int64_t length_cap = 6;  // training sequence lengths are 1..cap
  std::int64_t max_unroll = 50;
};

Seq2SeqModel init_seq2seq(const Seq2SeqTrainConfig& cfg);

/// Copy task: target sequence equals the input plus eos; inputs are random
/// token sequences of length 1..length_cap drawn from the config seed.
TrainMetrics train_copy_seq2seq(Seq2SeqModel& model, const Seq2SeqTrainConfig& cfg);

/// Exact-sequence accuracy of the captioner over samples: the decode must
/// terminate and reproduce the label exactly.
double captioner_exact_accuracy(const CaptionerModel& model,
                                const std::vector<CanvasSample>& samples);

}  // namespace ols
