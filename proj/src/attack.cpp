#include "ols/attack.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "ols/adam.hpp"
#include "ols/gumbel.hpp"

namespace ols {

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

}  // namespace

void AttackConfig::check() const {
  if (steps < 0) throw std::invalid_argument("attack: steps must be >= 0");
  if (step_size <= 0.0) throw std::invalid_argument("attack: step size must be positive");
  if (clip_eps <= 0.0) throw std::invalid_argument("attack: clip eps must be positive");
  if (tau <= 0.0 || tau_end <= 0.0) throw std::invalid_argument("attack: tau must be positive");
}

SeqLength SeqLength::of(const std::optional<std::int64_t>& len) {
  SeqLength out;
  out.overflow = !len.has_value();
  out.value = len.value_or(0);
  return out;
}

bool SeqLength::longer_than(const SeqLength& other) const {
  if (overflow) return !other.overflow;
  if (other.overflow) return false;
  return value > other.value;
}

bool SeqLength::exceeds(std::int64_t khat) const { return overflow || value > khat; }

double proxy_length_loss(const std::vector<Tensor>& logits, std::int64_t eos_index, double eps) {
  if (logits.empty()) throw std::invalid_argument("proxy_length_loss: empty trace");
  if (eps <= 0.0) throw std::invalid_argument("proxy_length_loss: eps must be positive");
  double total = 0.0;
  for (const Tensor& o : logits) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::int64_t z = 0; z < o.numel(); ++z) {
      if (z == eos_index) continue;
      best = std::max(best, o.at(z));
    }
    total += std::max(o.at(eos_index) - best, -eps);
  }
  return total;
}

namespace {

// Tape the captioner forward with frozen feedback tokens; returns the J~ node
// and the input leaf.
struct FrozenRollout {
  Tape tape;
  int x_leaf = -1;
  int loss = -1;
};

FrozenRollout build_frozen_rollout(const CaptionerModel& model, const Tensor& x,
                                   const std::vector<std::int64_t>& tokens, double eps) {
  if (tokens.empty()) throw std::invalid_argument("frozen rollout: no steps");
  FrozenRollout fr;
  fr.x_leaf = fr.tape.leaf(x, /*requires_grad=*/true);
  int cur = fr.x_leaf;
  for (const LayerParams& layer : model.encoder) cur = layer_forward(fr.tape, layer, cur);
  const TapedLayer cell = upload_layer(fr.tape, model.decoder_cell, /*trainable=*/false);
  int input = cur;
  int state = fr.tape.leaf(Tensor::zeros({model.decoder_cell.rnn_hidden()}),
                           /*requires_grad=*/false);
  std::vector<int> terms;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    auto [logits, next_state] = apply_rnn_cell(fr.tape, cell, input, state);
    terms.push_back(fr.tape.clip_min(fr.tape.eos_margin(logits, model.vocab.eos_index), -eps));
    state = next_state;
    if (t + 1 < tokens.size())
      input = fr.tape.leaf(model.vocab.embed(tokens[t]), /*requires_grad=*/false);
  }
  fr.loss = fr.tape.sum_scalars(terms);
  return fr;
}

}  // namespace

double proxy_loss_frozen(const CaptionerModel& model, const Tensor& x,
                         const std::vector<std::int64_t>& tokens, double eps) {
  FrozenRollout fr = build_frozen_rollout(model, x, tokens, eps);
  return fr.tape.value(fr.loss).at(0);
}

std::pair<double, Tensor> proxy_loss_frozen_grad(const CaptionerModel& model, const Tensor& x,
                                                 const std::vector<std::int64_t>& tokens,
                                                 double eps) {
  FrozenRollout fr = build_frozen_rollout(model, x, tokens, eps);
  auto grads = fr.tape.backward(fr.loss, Tensor::scalar(1.0));
  return {fr.tape.value(fr.loss).at(0), grads.at(fr.x_leaf)};
}

AttackReport pgd_continuous(const CaptionerModel& model, const ContinuousBox& region,
                            const AttackConfig& cfg) {
  cfg.check();
  const double t0 = now_seconds();
  AttackReport report;
  const DecodeTrace ref_trace = greedy_decode(model, region.reference);
  report.original_length = SeqLength::of(trace_length(ref_trace));
  report.best_input = region.reference;
  report.best_length = report.original_length;
  const std::int64_t khat = cfg.khat.value_or(report.original_length.overflow
                                                  ? model.max_unroll
                                                  : report.original_length.value);
  if (region.radius == 0.0 || cfg.steps == 0) {
    report.success = report.best_length.exceeds(khat);
    report.wall_s = now_seconds() - t0;
    return report;
  }

  Tensor x = region.reference;
  AdamState adam(AdamConfig{cfg.step_size, 0.9, 0.999, 1e-8});
  std::vector<Tensor> params = {x};
  adam.init(params);
  for (std::int64_t it = 0; it < cfg.steps; ++it) {
    const DecodeTrace trace = greedy_decode(model, params[0]);
    FrozenRollout fr = build_frozen_rollout(model, params[0], trace.tokens, cfg.clip_eps);
    report.loss_curve.push_back(fr.tape.value(fr.loss).at(0));
    auto grads = fr.tape.backward(fr.loss, Tensor::scalar(1.0));
    const Tensor& g = grads.at(fr.x_leaf);
    if (!g.all_finite())
      throw std::domain_error("pgd_continuous: non-finite gradient at iteration " +
                              std::to_string(it));
    std::vector<Tensor> gs = {g};
    if (!adam_step(adam, params, gs))
      throw std::domain_error("pgd_continuous: rejected gradient at iteration " +
                              std::to_string(it));
    params[0] = region.project(params[0]);
    const SeqLength len = SeqLength::of(output_length(model, params[0]));
    if (len.longer_than(report.best_length)) {
      report.best_length = len;
      report.best_input = params[0];
    }
    report.iterations += 1;
  }
  // Recompute on the final report input: reported lengths are never stale.
  report.best_length = SeqLength::of(output_length(model, report.best_input));
  report.success = report.best_length.exceeds(khat);
  report.wall_s = now_seconds() - t0;
  return report;
}

namespace {

// Gumbel-relaxed (or embedding-space) seq2seq rollout on a tape.
struct RelaxedRollout {
  Tape tape;
  std::vector<int> pi_leaves;   // per attack position (Gumbel mode)
  std::vector<int> emb_leaves;  // per attack position (embedding mode)
  int loss = -1;
};

RelaxedRollout build_relaxed_rollout(const Seq2SeqModel& model, const DiscreteBudget& region,
                                     const std::vector<Tensor>& pi, double tau, double eps,
                                     bool embedding_space, const std::vector<Tensor>& emb_vecs,
                                     Rng& noise_rng) {
  RelaxedRollout rr;
  const std::int64_t n = static_cast<std::int64_t>(region.reference.size());
  const TapedLayer enc = upload_layer(rr.tape, model.encoder_cell, /*trainable=*/false);
  const int emb_matrix = rr.tape.leaf(model.in_vocab.embedding, /*requires_grad=*/false);
  int state = rr.tape.leaf(Tensor::zeros({model.encoder_cell.rnn_hidden()}),
                           /*requires_grad=*/false);
  std::size_t attack_slot = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    int input;
    const bool attacked = attack_slot < region.positions.size() &&
                          region.positions[attack_slot] == i;
    if (attacked && embedding_space) {
      input = rr.tape.leaf(emb_vecs[attack_slot], /*requires_grad=*/true);
      rr.emb_leaves.push_back(input);
      ++attack_slot;
    } else if (attacked) {
      const int pi_leaf = rr.tape.leaf(pi[attack_slot], /*requires_grad=*/true);
      rr.pi_leaves.push_back(pi_leaf);
      const Tensor noise = gumbel_noise(model.in_vocab.size(), noise_rng);
      const int logp = rr.tape.log_softmax(pi_leaf);
      const int mix = rr.tape.softmax(rr.tape.scale(rr.tape.add_const(logp, noise), 1.0 / tau));
      input = rr.tape.vecmat(mix, emb_matrix);
      ++attack_slot;
    } else {
      input = rr.tape.leaf(model.in_vocab.embed(region.reference[static_cast<std::size_t>(i)]),
                           /*requires_grad=*/false);
    }
    state = apply_rnn_cell(rr.tape, enc, input, state).second;
  }
  // Decoder rollout from f(x); feedback tokens frozen as they are emitted.
  const TapedLayer dec = upload_layer(rr.tape, model.decoder_cell, /*trainable=*/false);
  int input = rr.tape.leaf(Tensor::zeros({model.decoder_cell.rnn_input()}),
                           /*requires_grad=*/false);
  std::vector<int> terms;
  for (std::int64_t t = 0; t < model.max_unroll; ++t) {
    auto [logits, next_state] = apply_rnn_cell(rr.tape, dec, input, state);
    terms.push_back(rr.tape.clip_min(rr.tape.eos_margin(logits, model.out_vocab.eos_index), -eps));
    const std::int64_t y = argmax_lowest(rr.tape.value(logits));
    if (y == model.out_vocab.eos_index) break;
    input = rr.tape.leaf(model.out_vocab.embed(y), /*requires_grad=*/false);
    state = next_state;
  }
  rr.loss = rr.tape.sum_scalars(terms);
  return rr;
}

std::vector<std::int64_t> substitute(const std::vector<std::int64_t>& reference,
                                     const std::vector<std::int64_t>& positions,
                                     const std::vector<std::int64_t>& choices) {
  std::vector<std::int64_t> out = reference;
  for (std::size_t k = 0; k < positions.size(); ++k)
    out[static_cast<std::size_t>(positions[k])] = choices[k];
  return out;
}

}  // namespace

AttackReport pgd_discrete_gumbel(const Seq2SeqModel& model, const DiscreteBudget& region,
                                 const AttackConfig& cfg) {
  cfg.check();
  const double t0 = now_seconds();
  AttackReport report;
  report.original_length = SeqLength::of(output_length(model, region.reference));
  report.best_tokens = region.reference;
  report.best_length = report.original_length;
  const std::int64_t khat = cfg.khat.value_or(report.original_length.overflow
                                                  ? model.max_unroll
                                                  : report.original_length.value);
  const std::size_t k = region.positions.size();
  if (k == 0 || cfg.steps == 0) {
    report.success = report.best_length.exceeds(khat);
    report.wall_s = now_seconds() - t0;
    return report;
  }

  Rng rng(cfg.seed);
  Rng noise_rng = rng.split("gumbel-noise");
  Rng draw_rng = rng.split("final-draw");
  const std::int64_t vocab_n = model.in_vocab.size();

  // pi_i[x_i] = 1, pi_i[z] = -1 elsewhere.
  std::vector<Tensor> params;
  if (cfg.embedding_space) {
    for (std::size_t s = 0; s < k; ++s)
      params.push_back(model.in_vocab.embed(
          region.reference[static_cast<std::size_t>(region.positions[s])]));
  } else {
    for (std::size_t s = 0; s < k; ++s) {
      Tensor pi = Tensor::full({vocab_n}, -1.0);
      pi.at(region.reference[static_cast<std::size_t>(region.positions[s])]) = 1.0;
      params.push_back(std::move(pi));
    }
  }
  AdamState adam(AdamConfig{cfg.step_size, 0.9, 0.999, 1e-8});
  adam.init(params);

  for (std::int64_t it = 0; it < cfg.steps; ++it) {
    const double frac = cfg.steps > 1 ? static_cast<double>(it) / static_cast<double>(cfg.steps - 1)
                                      : 0.0;
    const double tau = cfg.tau + (cfg.tau_end - cfg.tau) * frac;
    RelaxedRollout rr = build_relaxed_rollout(model, region, params, tau, cfg.clip_eps,
                                              cfg.embedding_space, params, noise_rng);
    report.loss_curve.push_back(rr.tape.value(rr.loss).at(0));
    auto grads = rr.tape.backward(rr.loss, Tensor::scalar(1.0));
    const std::vector<int>& leaves = cfg.embedding_space ? rr.emb_leaves : rr.pi_leaves;
    std::vector<Tensor> gs;
    gs.reserve(k);
    for (int leaf : leaves) gs.push_back(grads.at(leaf));
    if (!adam_step(adam, params, gs))
      throw std::domain_error("pgd_discrete_gumbel: non-finite gradient at iteration " +
                              std::to_string(it));
    report.iterations += 1;
  }

  if (cfg.embedding_space) {
    // NON-REALIZABLE: evaluate the decode with the optimized embedding
    // vectors spliced into the encoder inputs.
    std::vector<Tensor> embedded;
    std::size_t slot = 0;
    for (std::size_t i = 0; i < region.reference.size(); ++i) {
      if (slot < k && region.positions[slot] == static_cast<std::int64_t>(i)) {
        embedded.push_back(params[slot]);
        ++slot;
      } else {
        embedded.push_back(model.in_vocab.embed(region.reference[i]));
      }
    }
    const Tensor fx = encode_embeddings(model, embedded);
    const DecodeTrace trace = greedy_decode_from(
        model.decoder_cell, model.out_vocab, Tensor::zeros({model.decoder_cell.rnn_input()}), fx,
        model.max_unroll);
    report.best_length = SeqLength::of(trace_length(trace));
    report.non_realizable = true;
    report.success = false;  // excluded from success statistics
    report.wall_s = now_seconds() - t0;
    return report;
  }

  // Final discrete candidates: categorical draw and mode.
  std::vector<std::int64_t> draw_choice(k), mode_choice(k);
  for (std::size_t s = 0; s < k; ++s) {
    const Tensor p = softmax(params[s]);
    double u = draw_rng.uniform01(), acc = 0.0;
    std::int64_t picked = vocab_n - 1;
    for (std::int64_t y = 0; y < vocab_n; ++y) {
      acc += p.at(y);
      if (u < acc) {
        picked = y;
        break;
      }
    }
    draw_choice[s] = picked;
    mode_choice[s] = argmax_lowest(params[s]);
  }
  const std::vector<std::int64_t> draw_tokens =
      substitute(region.reference, region.positions, draw_choice);
  const std::vector<std::int64_t> mode_tokens =
      substitute(region.reference, region.positions, mode_choice);
  const SeqLength draw_len = SeqLength::of(output_length(model, draw_tokens));
  const SeqLength mode_len = SeqLength::of(output_length(model, mode_tokens));
  report.draw_length = draw_len;
  report.mode_length = mode_len;
  if (draw_len.longer_than(report.best_length)) {
    report.best_length = draw_len;
    report.best_tokens = draw_tokens;
  }
  if (mode_len.longer_than(report.best_length)) {
    report.best_length = mode_len;
    report.best_tokens = mode_tokens;
  }
  report.best_length = SeqLength::of(output_length(model, report.best_tokens));
  report.success = report.best_length.exceeds(khat);
  report.wall_s = now_seconds() - t0;
  return report;
}

void LengthHistogram::add(const SeqLength& len) {
  if (len.overflow || len.value > cap)
    over += 1;
  else
    counts[len.value] += 1;
}

std::int64_t LengthHistogram::total() const {
  std::int64_t t = over;
  for (const auto& [len, c] : counts) t += c;
  return t;
}

RandomSearchResult random_search(const CaptionerModel& model, const ContinuousBox& region,
                                 std::int64_t rounds, Rng& rng, std::int64_t hist_cap,
                                 std::optional<std::int64_t> khat) {
  if (rounds < 1) throw std::invalid_argument("random_search: rounds must be >= 1");
  const double t0 = now_seconds();
  RandomSearchResult result;
  result.histogram.cap = hist_cap;
  result.report.original_length = SeqLength::of(output_length(model, region.reference));
  result.report.best_input = region.reference;
  result.report.best_length = result.report.original_length;
  const Box box = region.box();
  const std::int64_t threshold =
      khat.value_or(result.report.original_length.overflow ? model.max_unroll
                                                           : result.report.original_length.value);
  Tensor x = region.reference;
  for (std::int64_t r = 0; r < rounds; ++r) {
    for (std::int64_t i = 0; i < x.numel(); ++i) x.at(i) = rng.uniform(box.lo.at(i), box.hi.at(i));
    const SeqLength len = SeqLength::of(output_length(model, x));
    result.histogram.add(len);
    if (len.longer_than(result.report.best_length)) {
      result.report.best_length = len;
      result.report.best_input = x;
    }
    result.report.iterations += 1;
  }
  result.report.best_length = SeqLength::of(output_length(model, result.report.best_input));
  result.report.success = result.report.best_length.exceeds(threshold);
  result.report.wall_s = now_seconds() - t0;
  return result;
}

RandomSearchResult random_search(const Seq2SeqModel& model, const DiscreteBudget& region,
                                 std::int64_t rounds, Rng& rng, std::int64_t hist_cap,
                                 std::optional<std::int64_t> khat) {
  if (rounds < 1) throw std::invalid_argument("random_search: rounds must be >= 1");
  const double t0 = now_seconds();
  RandomSearchResult result;
  result.histogram.cap = hist_cap;
  result.report.original_length = SeqLength::of(output_length(model, region.reference));
  result.report.best_tokens = region.reference;
  result.report.best_length = result.report.original_length;
  const std::int64_t threshold =
      khat.value_or(result.report.original_length.overflow ? model.max_unroll
                                                           : result.report.original_length.value);
  for (std::int64_t r = 0; r < rounds; ++r) {
    const std::vector<std::int64_t> cand =
        sample_discrete_neighbor(region.reference, region.fraction, model.in_vocab.size(), rng);
    const SeqLength len = SeqLength::of(output_length(model, cand));
    result.histogram.add(len);
    if (len.longer_than(result.report.best_length)) {
      result.report.best_length = len;
      result.report.best_tokens = cand;
    }
    result.report.iterations += 1;
  }
  result.report.success = result.report.best_length.exceeds(threshold);
  result.report.wall_s = now_seconds() - t0;
  return result;
}

namespace {
nlohmann::json length_json(const SeqLength& len) {
  if (len.overflow) return "OVERFLOW";
  return len.value;
}
}  // namespace

nlohmann::json report_to_json(const AttackReport& report) {
  nlohmann::json j;
  j["original_length"] = length_json(report.original_length);
  j["best_length"] = length_json(report.best_length);
  j["success"] = report.success;
  j["iterations"] = report.iterations;
  j["wall_ms"] = report.wall_s * 1000.0;
  if (report.draw_length) j["draw_length"] = length_json(*report.draw_length);
  if (report.mode_length) j["mode_length"] = length_json(*report.mode_length);
  if (report.non_realizable) j["non_realizable"] = true;
  if (!report.best_tokens.empty()) j["best_tokens"] = report.best_tokens;
  return j;
}

nlohmann::json histogram_to_json(const LengthHistogram& histogram) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [len, c] : histogram.counts) j[std::to_string(len)] = c;
  j[">" + std::to_string(histogram.cap)] = histogram.over;
  return j;
}

}  // namespace ols
