#include "ols/train.hpp"

#include <cmath>
#include <stdexcept>

#include "ols/adam.hpp"
#include "ols/autodiff.hpp"
#include "ols/rng.hpp"

namespace ols {

namespace {

Tensor init_uniform(std::vector<std::int64_t> shape, double limit, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-limit, limit);
  return t;
}

Tensor init_matrix(std::int64_t rows, std::int64_t cols, Rng& rng) {
  return init_uniform({rows, cols}, std::sqrt(1.0 / static_cast<double>(cols)), rng);
}

LayerParams init_cell(std::int64_t hidden, std::int64_t input, std::int64_t vocab, Rng& rng) {
  return LayerParams::rnn_cell(init_matrix(hidden, input, rng), init_matrix(hidden, hidden, rng),
                               Tensor::zeros({hidden}), init_matrix(vocab, hidden, rng),
                               Tensor::zeros({vocab}));
}

std::vector<std::string> digit_tokens() {
  std::vector<std::string> tokens;
  for (int d = 0; d < 10; ++d) tokens.push_back(std::to_string(d));
  tokens.push_back("<eos>");
  return tokens;
}

// All trainable tensors of a captioner, in a fixed order.
std::vector<Tensor*> captioner_params(CaptionerModel& model) {
  std::vector<Tensor*> out;
  for (LayerParams& l : model.encoder) {
    if (l.kind == LayerKind::ReLU) continue;
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  out.push_back(&model.decoder_cell.w_ih);
  out.push_back(&model.decoder_cell.w_hh);
  out.push_back(&model.decoder_cell.b_h);
  out.push_back(&model.decoder_cell.w_ho);
  out.push_back(&model.decoder_cell.b_o);
  out.push_back(&model.vocab.embedding);
  return out;
}

std::vector<Tensor*> seq2seq_params(Seq2SeqModel& model) {
  std::vector<Tensor*> out;
  out.push_back(&model.in_vocab.embedding);
  for (LayerParams* c : {&model.encoder_cell, &model.decoder_cell}) {
    out.push_back(&c->w_ih);
    out.push_back(&c->w_hh);
    out.push_back(&c->b_h);
    out.push_back(&c->w_ho);
    out.push_back(&c->b_o);
  }
  out.push_back(&model.out_vocab.embedding);
  return out;
}

}  // namespace

CaptionerModel init_captioner(const CaptionerTrainConfig& cfg,
                              const std::vector<std::int64_t>& input_shape) {
  if (input_shape.size() != 3) throw std::invalid_argument("init_captioner: input must be [c,h,w]");
  Rng rng = Rng(cfg.seed).split("captioner-init");
  const std::int64_t c0 = input_shape[0], h0 = input_shape[1], w0 = input_shape[2];
  CaptionerModel model;
  model.input_shape = input_shape;
  model.max_unroll = cfg.max_unroll;

  const std::int64_t c1 = cfg.conv1_channels, c2 = cfg.conv2_channels;
  model.encoder.push_back(LayerParams::conv2d(
      init_uniform({c1, c0, 3, 3}, std::sqrt(1.0 / (9.0 * static_cast<double>(c0))), rng),
      Tensor::zeros({c1}), c0, h0, w0, /*stride=*/2, /*pad=*/1));
  const std::int64_t h1 = model.encoder.back().conv_out_h();
  const std::int64_t w1 = model.encoder.back().conv_out_w();
  model.encoder.push_back(LayerParams::relu());
  model.encoder.push_back(LayerParams::conv2d(
      init_uniform({c2, c1, 3, 3}, std::sqrt(1.0 / (9.0 * static_cast<double>(c1))), rng),
      Tensor::zeros({c2}), c1, h1, w1, /*stride=*/2, /*pad=*/1));
  const std::int64_t h2 = model.encoder.back().conv_out_h();
  const std::int64_t w2 = model.encoder.back().conv_out_w();
  model.encoder.push_back(LayerParams::relu());
  model.encoder.push_back(
      LayerParams::linear(init_matrix(cfg.fc_hidden, c2 * h2 * w2, rng), Tensor::zeros({cfg.fc_hidden})));
  model.encoder.push_back(LayerParams::relu());
  model.encoder.push_back(
      LayerParams::linear(init_matrix(cfg.embed, cfg.fc_hidden, rng), Tensor::zeros({cfg.embed})));

  model.decoder_cell = init_cell(cfg.hidden, cfg.embed, 11, rng);
  model.vocab = Vocabulary::make(digit_tokens(), /*eos=*/10, init_matrix(11, cfg.embed, rng));
  model.validate();
  return model;
}

namespace {

struct TapedCaptioner {
  std::vector<TapedLayer> encoder;
  TapedLayer cell;
  int embedding = -1;
  std::vector<int> param_ids;  // aligned with captioner_params order
};

TapedCaptioner upload_captioner(Tape& tape, const CaptionerModel& model) {
  TapedCaptioner tc;
  for (const LayerParams& l : model.encoder) {
    tc.encoder.push_back(upload_layer(tape, l, /*trainable=*/true));
    if (l.kind == LayerKind::ReLU) continue;
    tc.param_ids.push_back(tc.encoder.back().weight);
    tc.param_ids.push_back(tc.encoder.back().bias);
  }
  tc.cell = upload_layer(tape, model.decoder_cell, /*trainable=*/true);
  tc.param_ids.push_back(tc.cell.w_ih);
  tc.param_ids.push_back(tc.cell.w_hh);
  tc.param_ids.push_back(tc.cell.b_h);
  tc.param_ids.push_back(tc.cell.w_ho);
  tc.param_ids.push_back(tc.cell.b_o);
  tc.embedding = tape.leaf(model.vocab.embedding, /*requires_grad=*/true);
  tc.param_ids.push_back(tc.embedding);
  return tc;
}

}  // namespace

TrainMetrics train_captioner(CaptionerModel& model, const Dataset& dataset,
                             const CaptionerTrainConfig& cfg) {
  model.validate();
  if (dataset.train.empty()) throw std::invalid_argument("train_captioner: empty training set");
  TrainMetrics metrics;
  std::vector<Tensor*> params = captioner_params(model);
  AdamState adam(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  {
    std::vector<Tensor> snapshot;
    for (Tensor* p : params) snapshot.push_back(*p);
    adam.init(snapshot);
  }
  Rng batch_rng = Rng(cfg.seed).split("captioner-batches");

  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    std::vector<Tensor> before;
    before.reserve(params.size());
    for (Tensor* p : params) before.push_back(*p);

    Tape tape;
    TapedCaptioner tc = upload_captioner(tape, model);
    std::vector<int> losses;
    for (std::int64_t b = 0; b < cfg.batch; ++b) {
      const CanvasSample& sample =
          dataset.train[batch_rng.below(dataset.train.size())];
      int cur = tape.leaf(sample.image, /*requires_grad=*/false);
      for (const TapedLayer& l : tc.encoder) cur = apply_layer(tape, l, cur);
      int input = cur;
      int state = tape.leaf(Tensor::zeros({model.decoder_cell.rnn_hidden()}), false);
      std::vector<std::int64_t> targets = sample.label;
      targets.push_back(model.vocab.eos_index);
      for (std::size_t t = 0; t < targets.size(); ++t) {
        auto [logits, next_state] = apply_rnn_cell(tape, tc.cell, input, state);
        losses.push_back(tape.cross_entropy(logits, targets[t]));
        state = next_state;
        if (t + 1 < targets.size()) input = tape.embed_row(tc.embedding, targets[t]);
      }
    }
    const int total = tape.sum_scalars(losses);
    const double loss =
        tape.value(total).at(0) / static_cast<double>(losses.size());
    if (!std::isfinite(loss)) {
      metrics.diverged = true;  // keep the last good parameters
      break;
    }
    metrics.loss_curve.push_back(loss);
    auto grads = tape.backward(
        total, Tensor::scalar(1.0 / static_cast<double>(losses.size())));
    std::vector<Tensor> param_vals, grad_vals;
    for (std::size_t k = 0; k < params.size(); ++k) {
      param_vals.push_back(*params[k]);
      grad_vals.push_back(grads.at(tc.param_ids[k]));
    }
    if (!adam_step(adam, param_vals, grad_vals)) {
      metrics.diverged = true;
      for (std::size_t k = 0; k < params.size(); ++k) *params[k] = before[k];
      break;
    }
    for (std::size_t k = 0; k < params.size(); ++k) *params[k] = param_vals[k];
    metrics.steps_completed += 1;
  }
  metrics.exact_sequence_accuracy = captioner_exact_accuracy(model, dataset.test);
  return metrics;
}

double captioner_exact_accuracy(const CaptionerModel& model,
                                const std::vector<CanvasSample>& samples) {
  if (samples.empty()) return 0.0;
  std::int64_t hits = 0;
  for (const CanvasSample& s : samples) {
    const DecodeTrace trace = greedy_decode(model, s.image);
    if (!trace.terminated) continue;
    const std::size_t len = trace.tokens.size() - 1;
    if (len != s.label.size()) continue;
    bool match = true;
    for (std::size_t i = 0; i < len; ++i) match &= trace.tokens[i] == s.label[i];
    hits += match ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

Seq2SeqModel init_seq2seq(const Seq2SeqTrainConfig& cfg) {
  if (cfg.data_vocab < 1 || cfg.data_vocab > 255)
    throw std::invalid_argument("init_seq2seq: data_vocab out of range");
  Rng rng = Rng(cfg.seed).split("seq2seq-init");
  std::vector<std::string> tokens;
  for (std::int64_t t = 0; t < cfg.data_vocab; ++t) tokens.push_back("t" + std::to_string(t));
  tokens.push_back("<eos>");
  const std::int64_t v = cfg.data_vocab + 1;
  Seq2SeqModel model;
  model.max_unroll = cfg.max_unroll;
  model.in_vocab = Vocabulary::make(tokens, cfg.data_vocab, init_matrix(v, cfg.embed, rng));
  model.out_vocab = Vocabulary::make(tokens, cfg.data_vocab, init_matrix(v, cfg.embed, rng));
  model.encoder_cell = init_cell(cfg.hidden, cfg.embed, v, rng);
  model.decoder_cell = init_cell(cfg.hidden, cfg.embed, v, rng);
  model.validate();
  return model;
}

TrainMetrics train_copy_seq2seq(Seq2SeqModel& model, const Seq2SeqTrainConfig& cfg) {
  model.validate();
  TrainMetrics metrics;
  std::vector<Tensor*> params = seq2seq_params(model);
  AdamState adam(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  {
    std::vector<Tensor> snapshot;
    for (Tensor* p : params) snapshot.push_back(*p);
    adam.init(snapshot);
  }
  Rng data_rng = Rng(cfg.seed).split("seq2seq-data");

  auto sample_sequence = [&](Rng& r) {
    const std::int64_t len = 1 + static_cast<std::int64_t>(r.below(
        static_cast<std::uint64_t>(cfg.length_cap)));
    std::vector<std::int64_t> seq(static_cast<std::size_t>(len));
    for (auto& t : seq)
      t = static_cast<std::int64_t>(r.below(static_cast<std::uint64_t>(cfg.data_vocab)));
    return seq;
  };

  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    std::vector<Tensor> before;
    for (Tensor* p : params) before.push_back(*p);

    Tape tape;
    const int in_emb = tape.leaf(model.in_vocab.embedding, true);
    const TapedLayer enc = upload_layer(tape, model.encoder_cell, true);
    const TapedLayer dec = upload_layer(tape, model.decoder_cell, true);
    const int out_emb = tape.leaf(model.out_vocab.embedding, true);
    std::vector<int> param_ids = {in_emb,  enc.w_ih, enc.w_hh, enc.b_h, enc.w_ho, enc.b_o,
                                  dec.w_ih, dec.w_hh, dec.b_h, dec.w_ho, dec.b_o, out_emb};

    std::vector<int> losses;
    for (std::int64_t b = 0; b < cfg.batch; ++b) {
      const std::vector<std::int64_t> seq = sample_sequence(data_rng);
      int state = tape.leaf(Tensor::zeros({model.encoder_cell.rnn_hidden()}), false);
      for (std::int64_t tok : seq)
        state = apply_rnn_cell(tape, enc, tape.embed_row(in_emb, tok), state).second;
      int input = tape.leaf(Tensor::zeros({model.decoder_cell.rnn_input()}), false);
      std::vector<std::int64_t> targets = seq;
      targets.push_back(model.out_vocab.eos_index);
      for (std::size_t t = 0; t < targets.size(); ++t) {
        auto [logits, next_state] = apply_rnn_cell(tape, dec, input, state);
        losses.push_back(tape.cross_entropy(logits, targets[t]));
        state = next_state;
        if (t + 1 < targets.size()) input = tape.embed_row(out_emb, targets[t]);
      }
    }
    const int total = tape.sum_scalars(losses);
    const double loss = tape.value(total).at(0) / static_cast<double>(losses.size());
    if (!std::isfinite(loss)) {
      metrics.diverged = true;
      break;
    }
    metrics.loss_curve.push_back(loss);
    auto grads = tape.backward(total, Tensor::scalar(1.0 / static_cast<double>(losses.size())));
    std::vector<Tensor> param_vals, grad_vals;
    for (std::size_t k = 0; k < params.size(); ++k) {
      param_vals.push_back(*params[k]);
      grad_vals.push_back(grads.at(param_ids[k]));
    }
    if (!adam_step(adam, param_vals, grad_vals)) {
      metrics.diverged = true;
      for (std::size_t k = 0; k < params.size(); ++k) *params[k] = before[k];
      break;
    }
    for (std::size_t k = 0; k < params.size(); ++k) *params[k] = param_vals[k];
    metrics.steps_completed += 1;
  }

  // Held-out exact-sequence accuracy on fresh draws.
  Rng eval_rng = Rng(cfg.seed).split("seq2seq-eval");
  const std::int64_t n_eval = 200;
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < n_eval; ++i) {
    const std::vector<std::int64_t> seq = sample_sequence(eval_rng);
    const DecodeTrace trace = greedy_decode(model, seq);
    if (!trace.terminated) continue;
    const std::size_t len = trace.tokens.size() - 1;
    if (len != seq.size()) continue;
    bool match = true;
    for (std::size_t k = 0; k < len; ++k) match &= trace.tokens[k] == seq[k];
    hits += match ? 1 : 0;
  }
  metrics.exact_sequence_accuracy = static_cast<double>(hits) / static_cast<double>(n_eval);
  return metrics;
}

}  // namespace ols
