#include "ols/models.hpp"

#include <set>
#include <stdexcept>

namespace ols {

Vocabulary Vocabulary::make(std::vector<std::string> tokens, std::int64_t eos_index,
                            Tensor embedding) {
  if (tokens.empty()) throw std::invalid_argument("vocabulary: no tokens");
  if (eos_index < 0 || eos_index >= static_cast<std::int64_t>(tokens.size()))
    throw std::invalid_argument("vocabulary: eos index out of range");
  std::set<std::string> uniq(tokens.begin(), tokens.end());
  if (uniq.size() != tokens.size()) throw std::invalid_argument("vocabulary: duplicate tokens");
  if (embedding.rank() != 2 || embedding.dim(0) != static_cast<std::int64_t>(tokens.size()))
    throw std::invalid_argument("vocabulary: embedding rows != vocabulary size");
  Vocabulary v;
  v.tokens = std::move(tokens);
  v.eos_index = eos_index;
  v.embedding = std::move(embedding);
  return v;
}

Tensor Vocabulary::embed(std::int64_t token) const {
  if (token < 0 || token >= size())
    throw std::invalid_argument("vocabulary: unknown token index " + std::to_string(token));
  const std::int64_t d = embed_dim();
  Tensor out = Tensor::zeros({d});
  for (std::int64_t j = 0; j < d; ++j) out.at(j) = embedding.at2(token, j);
  return out;
}

namespace {

std::vector<std::int64_t> layer_out_shape(const LayerParams& layer,
                                          const std::vector<std::int64_t>& in_shape) {
  switch (layer.kind) {
    case LayerKind::Linear:
      if (layer.weight.dim(1) != shape_numel(in_shape))
        throw std::invalid_argument("encoder: linear expects " +
                                    std::to_string(layer.weight.dim(1)) + " inputs, got " +
                                    shape_str(in_shape));
      return {layer.weight.dim(0)};
    case LayerKind::Conv2D:
      if (shape_numel(in_shape) != layer.in_c * layer.in_h * layer.in_w)
        throw std::invalid_argument("encoder: conv input mismatch, got " + shape_str(in_shape));
      return {layer.conv_out_c(), layer.conv_out_h(), layer.conv_out_w()};
    case LayerKind::ReLU:
      return in_shape;
    default:
      throw std::invalid_argument("encoder: unsupported layer kind in stack");
  }
}

}  // namespace

void CaptionerModel::validate() const {
  if (encoder.empty()) throw std::invalid_argument("captioner: empty encoder");
  std::vector<std::int64_t> shape = input_shape;
  for (const LayerParams& layer : encoder) shape = layer_out_shape(layer, shape);
  if (decoder_cell.kind != LayerKind::RNNCellReLU)
    throw std::invalid_argument("captioner: decoder must be an RNN cell");
  if (shape_numel(shape) != decoder_cell.rnn_input())
    throw std::invalid_argument("captioner: encoder output " + shape_str(shape) +
                                " != decoder input " + std::to_string(decoder_cell.rnn_input()));
  if (decoder_cell.rnn_vocab() != vocab.size())
    throw std::invalid_argument("captioner: decoder logits != vocabulary size");
  if (vocab.embed_dim() != decoder_cell.rnn_input())
    throw std::invalid_argument("captioner: embedding dim != decoder input dim");
  if (max_unroll <= 0) throw std::invalid_argument("captioner: max_unroll must be positive");
  if (domain_lo > domain_hi) throw std::invalid_argument("captioner: empty input domain");
}

void Seq2SeqModel::validate() const {
  if (encoder_cell.kind != LayerKind::RNNCellReLU || decoder_cell.kind != LayerKind::RNNCellReLU)
    throw std::invalid_argument("seq2seq: both cells must be RNN cells");
  if (encoder_cell.rnn_input() != in_vocab.embed_dim())
    throw std::invalid_argument("seq2seq: encoder input dim != source embedding dim");
  if (encoder_cell.rnn_hidden() != decoder_cell.rnn_hidden())
    throw std::invalid_argument("seq2seq: encoder final-state extent " +
                                std::to_string(encoder_cell.rnn_hidden()) +
                                " != decoder initial-state extent " +
                                std::to_string(decoder_cell.rnn_hidden()));
  if (decoder_cell.rnn_vocab() != out_vocab.size())
    throw std::invalid_argument("seq2seq: decoder logits != output vocabulary size");
  if (decoder_cell.rnn_input() != out_vocab.embed_dim())
    throw std::invalid_argument("seq2seq: decoder input dim != output embedding dim");
  if (max_unroll <= 0) throw std::invalid_argument("seq2seq: max_unroll must be positive");
}

namespace {

Tensor encoder_forward(const std::vector<LayerParams>& stack, const Tensor& x,
                       std::vector<Tensor>* acts = nullptr) {
  Tensor cur = x;
  for (const LayerParams& layer : stack) {
    switch (layer.kind) {
      case LayerKind::Linear: {
        Tensor flat = cur;
        flat.shape = {cur.numel()};
        cur = add(matvec(layer.weight, flat), layer.bias);
        break;
      }
      case LayerKind::Conv2D:
        cur = conv2d_forward(layer, cur);
        break;
      case LayerKind::ReLU:
        cur = relu(cur);
        break;
      default:
        throw std::invalid_argument("encoder: unsupported layer kind");
    }
    if (acts) acts->push_back(cur);
  }
  Tensor flat = cur;
  flat.shape = {cur.numel()};
  return flat;
}

// h' = ReLU(w_ih i + w_hh h + b_h); o = w_ho h' + b_o
struct CellOut {
  Tensor pre, state, logits;
};
CellOut cell_step(const LayerParams& cell, const Tensor& input, const Tensor& state) {
  CellOut out;
  out.pre = add(add(matvec(cell.w_ih, input), matvec(cell.w_hh, state)), cell.b_h);
  out.state = relu(out.pre);
  out.logits = add(matvec(cell.w_ho, out.state), cell.b_o);
  return out;
}

}  // namespace

Tensor encode_image(const CaptionerModel& model, const Tensor& x) {
  if (shape_numel(model.input_shape) != x.numel())
    throw std::invalid_argument("encode_image: input shape " + shape_str(x.shape) +
                                " != declared " + shape_str(model.input_shape));
  for (double v : x.data) {
    if (v < model.domain_lo - 1e-12 || v > model.domain_hi + 1e-12)
      throw std::invalid_argument("encode_image: pixel outside domain [" +
                                  std::to_string(model.domain_lo) + ", " +
                                  std::to_string(model.domain_hi) + "]");
  }
  return encoder_forward(model.encoder, x);
}

Tensor encode_sequence(const Seq2SeqModel& model, const std::vector<std::int64_t>& tokens) {
  if (tokens.empty()) throw std::invalid_argument("encode_sequence: empty input");
  std::vector<Tensor> embedded;
  embedded.reserve(tokens.size());
  for (std::int64_t t : tokens) embedded.push_back(model.in_vocab.embed(t));
  return encode_embeddings(model, embedded);
}

Tensor encode_embeddings(const Seq2SeqModel& model, const std::vector<Tensor>& embedded) {
  Tensor h = Tensor::zeros({model.encoder_cell.rnn_hidden()});
  for (const Tensor& e : embedded) h = cell_step(model.encoder_cell, e, h).state;
  return h;
}

DecodeTrace greedy_decode_from(const LayerParams& cell, const Vocabulary& vocab,
                               const Tensor& first_input, const Tensor& initial_state,
                               std::int64_t max_unroll) {
  DecodeTrace trace;
  Tensor input = first_input;
  Tensor state = initial_state;
  for (std::int64_t t = 0; t < max_unroll; ++t) {
    CellOut step = cell_step(cell, input, state);
    const std::int64_t y = argmax_lowest(step.logits);
    trace.tokens.push_back(y);
    trace.logits.push_back(step.logits);
    trace.hidden.push_back(step.state);
    if (y == vocab.eos_index) {
      trace.terminated = true;
      break;
    }
    input = vocab.embed(y);
    state = step.state;
  }
  return trace;
}

DecodeTrace greedy_decode(const CaptionerModel& model, const Tensor& x) {
  const Tensor i0 = encode_image(model, x);
  return greedy_decode_from(model.decoder_cell, model.vocab, i0,
                            Tensor::zeros({model.decoder_cell.rnn_hidden()}), model.max_unroll);
}

DecodeTrace greedy_decode(const Seq2SeqModel& model, const std::vector<std::int64_t>& tokens) {
  const Tensor fx = encode_sequence(model, tokens);
  return greedy_decode_from(model.decoder_cell, model.out_vocab,
                            Tensor::zeros({model.decoder_cell.rnn_input()}), fx,
                            model.max_unroll);
}

std::optional<std::int64_t> trace_length(const DecodeTrace& trace) {
  if (!trace.terminated) return std::nullopt;
  return static_cast<std::int64_t>(trace.tokens.size()) - 1;
}

std::optional<std::int64_t> output_length(const CaptionerModel& model, const Tensor& x) {
  return trace_length(greedy_decode(model, x));
}

std::optional<std::int64_t> output_length(const Seq2SeqModel& model,
                                          const std::vector<std::int64_t>& tokens) {
  return trace_length(greedy_decode(model, tokens));
}

namespace {
bool spec_holds(const std::optional<std::int64_t>& len, std::int64_t khat,
                std::int64_t max_unroll) {
  if (khat <= 0 || khat > max_unroll)
    throw std::invalid_argument("check_length_spec: khat must be in [1, max_unroll]");
  return len.has_value() && *len <= khat;
}
}  // namespace

bool check_length_spec(const CaptionerModel& model, const Tensor& x, std::int64_t khat) {
  return spec_holds(output_length(model, x), khat, model.max_unroll);
}

bool check_length_spec(const Seq2SeqModel& model, const std::vector<std::int64_t>& tokens,
                       std::int64_t khat) {
  return spec_holds(output_length(model, tokens), khat, model.max_unroll);
}

ForcedUnroll forced_unroll(const CaptionerModel& model, const Tensor& x, std::int64_t steps) {
  if (steps <= 0) throw std::invalid_argument("forced_unroll: steps must be positive");
  ForcedUnroll out;
  Tensor cur = x;
  encoder_forward(model.encoder, x, &out.encoder_acts);
  out.i0 = out.encoder_acts.back();
  out.i0.shape = {out.i0.numel()};
  Tensor input = out.i0;
  Tensor state = Tensor::zeros({model.decoder_cell.rnn_hidden()});
  for (std::int64_t t = 0; t < steps; ++t) {
    out.inputs.push_back(input);
    CellOut step = cell_step(model.decoder_cell, input, state);
    out.pre_acts.push_back(step.pre);
    out.states.push_back(step.state);
    out.logits.push_back(step.logits);
    const std::int64_t y = argmax_lowest(step.logits);
    out.tokens.push_back(y);
    input = model.vocab.embed(y);
    state = step.state;
  }
  return out;
}

}  // namespace ols
