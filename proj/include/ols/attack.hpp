#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ols/models.hpp"
#include "ols/region.hpp"
#include "ols/rng.hpp"

namespace ols {

struct AttackConfig {
  std::int64_t steps = 300;
  double step_size = 5e-4;   // continuous default; discrete runs use 5e-3
  double clip_eps = 0.1;     // proxy-loss clip
  double tau = 1.0;          // Gumbel temperature (start)
  double tau_end = 1.0;      // equal to tau = no annealing
  std::uint64_t seed = 0;
  std::optional<std::int64_t> khat;  // success threshold; default: original length
  bool embedding_space = false;      // optimize embeddings directly (NON-REALIZABLE)

  void check() const;
};

/// Decoded length with the overflow case kept explicit.
struct SeqLength {
  bool overflow = false;
  std::int64_t value = 0;

  static SeqLength of(const std::optional<std::int64_t>& len);
  bool longer_than(const SeqLength& other) const;
  bool exceeds(std::int64_t khat) const;  // overflow counts as exceeding
};

struct AttackReport {
  Tensor best_input;                      // continuous attacks
  std::vector<std::int64_t> best_tokens;  // discrete attacks
  SeqLength original_length, best_length;
  std::vector<double> loss_curve;  // proxy loss per iteration
  bool success = false;            // best_length > khat
  double wall_s = 0.0;
  std::int64_t iterations = 0;
  // Discrete finalization detail: both the categorical draw and the mode are
  // decoded; the better one is reported.
  std::optional<SeqLength> draw_length, mode_length;
  bool non_realizable = false;  // embedding-space variant result
};

/// J~ = sum_t max(o_t[eos] - max_{z != eos} o_t[z], -eps) over the rollout
/// logits. Piecewise differentiable; the taped attack paths differentiate the
/// same expression.
double proxy_length_loss(const std::vector<Tensor>& logits, std::int64_t eos_index, double eps);

/// Proxy loss of the captioner at x with the feedback tokens frozen to
/// `tokens` (the function PGD differentiates within one iteration). Returns
/// the loss and its gradient with respect to x.
double proxy_loss_frozen(const CaptionerModel& model, const Tensor& x,
                         const std::vector<std::int64_t>& tokens, double eps);
std::pair<double, Tensor> proxy_loss_frozen_grad(const CaptionerModel& model, const Tensor& x,
                                                 const std::vector<std::int64_t>& tokens,
                                                 double eps);

/// Adam-driven PGD on the pixels: per iteration a fresh greedy rollout, the
/// proxy loss over its logits, a descent step, then projection into the
/// region. Tracks the iterate with the longest true decode.
AttackReport pgd_continuous(const CaptionerModel& model, const ContinuousBox& region,
                            const AttackConfig& cfg);

/// Gumbel-softmax PGD over the token distributions at the attack positions;
/// the projection step is unnecessary (pi is unconstrained). Finally draws
/// from Categorical(pi) and also decodes the mode, reporting the better.
AttackReport pgd_discrete_gumbel(const Seq2SeqModel& model, const DiscreteBudget& region,
                                 const AttackConfig& cfg);

struct LengthHistogram {
  std::map<std::int64_t, std::int64_t> counts;
  std::int64_t over = 0;  // lengths above the cap, plus decode OVERFLOWs
  std::int64_t cap = 100;

  void add(const SeqLength& len);
  std::int64_t total() const;
};

struct RandomSearchResult {
  AttackReport report;
  LengthHistogram histogram;
};

RandomSearchResult random_search(const CaptionerModel& model, const ContinuousBox& region,
                                 std::int64_t rounds, Rng& rng, std::int64_t hist_cap = 100,
                                 std::optional<std::int64_t> khat = std::nullopt);
RandomSearchResult random_search(const Seq2SeqModel& model, const DiscreteBudget& region,
                                 std::int64_t rounds, Rng& rng, std::int64_t hist_cap = 100,
                                 std::optional<std::int64_t> khat = std::nullopt);

nlohmann::json report_to_json(const AttackReport& report);
nlohmann::json histogram_to_json(const LengthHistogram& histogram);

}  // namespace ols
