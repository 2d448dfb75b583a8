#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ols/autodiff.hpp"
#include "ols/tensor.hpp"

namespace ols {

struct Vocabulary {
  std::vector<std::string> tokens;
  std::int64_t eos_index = 0;
  Tensor embedding;  // [vocab, dim], rows emb[y]

  static Vocabulary make(std::vector<std::string> tokens, std::int64_t eos_index,
                         Tensor embedding);
  std::int64_t size() const { return static_cast<std::int64_t>(tokens.size()); }
  std::int64_t embed_dim() const { return embedding.dim(1); }
  Tensor embed(std::int64_t token) const;
};

/// CNN encoder + ReLU RNN decoder. i_0 = encoder(x), h_0 = 0; there is no
/// start-of-sequence token.
struct CaptionerModel {
  std::vector<LayerParams> encoder;  // Conv2D/Linear/ReLU stack
  LayerParams decoder_cell;          // RNNCellReLU
  Vocabulary vocab;
  std::vector<std::int64_t> input_shape;
  double domain_lo = -1.0;
  double domain_hi = 1.0;
  std::int64_t max_unroll = 200;

  void validate() const;
  std::int64_t input_numel() const { return shape_numel(input_shape); }
};

/// Encoder RNN + decoder RNN; f(x) = final encoder state seeds the decoder
/// state, the decoder's first input is the zero vector.
struct Seq2SeqModel {
  Vocabulary in_vocab;       // source embedding emb^e
  LayerParams encoder_cell;  // RNNCellReLU (its logits head is unused)
  LayerParams decoder_cell;  // RNNCellReLU
  Vocabulary out_vocab;
  std::int64_t max_unroll = 200;

  void validate() const;
};

struct DecodeTrace {
  std::vector<std::int64_t> tokens;  // y_0..y_t
  std::vector<Tensor> logits;        // o_0..o_t, one per emitted token
  std::vector<Tensor> hidden;        // h_1..h_{t+1}
  bool terminated = false;           // last token is eos iff true
};

Tensor encode_image(const CaptionerModel& model, const Tensor& x);
Tensor encode_sequence(const Seq2SeqModel& model, const std::vector<std::int64_t>& tokens);
/// Encoder pass from a caller-supplied first-step input box of embeddings
/// (used by the relaxed attack path). Inputs are per-position embedding
/// vectors already mixed.
Tensor encode_embeddings(const Seq2SeqModel& model, const std::vector<Tensor>& embedded);

DecodeTrace greedy_decode(const CaptionerModel& model, const Tensor& x);
DecodeTrace greedy_decode(const Seq2SeqModel& model, const std::vector<std::int64_t>& tokens);
/// Shared decode loop from explicit initial (input, state).
DecodeTrace greedy_decode_from(const LayerParams& cell, const Vocabulary& vocab,
                               const Tensor& first_input, const Tensor& initial_state,
                               std::int64_t max_unroll);

/// First index t with y_t = eos; nullopt when no eos within max_unroll
/// steps (OVERFLOW).
std::optional<std::int64_t> output_length(const CaptionerModel& model, const Tensor& x);
std::optional<std::int64_t> output_length(const Seq2SeqModel& model,
                                          const std::vector<std::int64_t>& tokens);
std::optional<std::int64_t> trace_length(const DecodeTrace& trace);

/// True iff the decoded length is at most khat; OVERFLOW counts as a
/// violation. Rejects khat > max_unroll.
bool check_length_spec(const CaptionerModel& model, const Tensor& x, std::int64_t khat);
bool check_length_spec(const Seq2SeqModel& model, const std::vector<std::int64_t>& tokens,
                       std::int64_t khat);

/// Decode unrolled for exactly `steps` cell applications, feeding the argmax
/// embedding back regardless of eos. This is the trajectory the MIP encoding
/// constrains; also records every intermediate activation.
struct ForcedUnroll {
  std::vector<Tensor> encoder_acts;  // output of each encoder layer
  Tensor i0;
  std::vector<Tensor> inputs;        // i_0..i_{steps-1}
  std::vector<Tensor> pre_acts;      // cell pre-activations per step
  std::vector<Tensor> states;        // h_1..h_steps
  std::vector<Tensor> logits;        // o_0..o_{steps-1}
  std::vector<std::int64_t> tokens;  // argmax per step (lowest-index ties)
};
ForcedUnroll forced_unroll(const CaptionerModel& model, const Tensor& x, std::int64_t steps);

}  // namespace ols
