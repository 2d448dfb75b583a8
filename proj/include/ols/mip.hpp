#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ols/intervals.hpp"
#include "ols/models.hpp"
#include "ols/region.hpp"

namespace ols {

enum class Cmp { LE, GE, EQ };

struct Variable {
  std::string name;
  double lo = 0.0, hi = 0.0;
  bool binary = false;
};

struct LinTerm {
  int var = -1;
  double coef = 0.0;
};

struct LinearConstraint {
  std::string name;
  std::vector<LinTerm> terms;
  Cmp cmp = Cmp::EQ;
  double rhs = 0.0;
};

/// Maximization problem over box-bounded continuous and binary variables.
/// Immutable once built; solved by milp::branch_and_bound.
struct MixedIntegerProgram {
  std::vector<Variable> vars;
  std::vector<LinearConstraint> cons;
  std::vector<LinTerm> objective;  // sense: maximize
  nlohmann::json metadata;

  int add_var(std::string name, double lo, double hi, bool binary = false);
  void add_con(std::string name, std::vector<LinTerm> terms, Cmp cmp, double rhs);
  std::int64_t binary_count(bool free_only = false) const;
};

/// Structural checks: unique names, live var references, binary bounds
/// inside [0,1], finite numbers, no duplicated var within a row.
/// Returns human-readable violations; empty means valid.
std::vector<std::string> validate(const MixedIntegerProgram& mip);

struct BuildOptions {
  /// When set, ReLUs with u <= 0 collapse to x = 0 and ReLUs with l >= 0 to
  /// x = x_hat, without a binary.
  bool stable_relu_elimination = true;
};

/// Incremental encoder for network constraints. Bounds travel with the
/// variables: each encode_* op reads its input bounds from the vars it is
/// given and stamps bounds on the vars it creates.
class MipBuilder {
 public:
  explicit MipBuilder(BuildOptions options = {}) : options_(options) {}

  MixedIntegerProgram take() { return std::move(mip_); }
  MixedIntegerProgram& program() { return mip_; }

  int add_var(std::string name, double lo, double hi, bool binary = false);
  Box var_bounds(const std::vector<int>& ids) const;

  /// out = W in + b as equality rows; zero coefficients are dropped from the
  /// sparse rows. Output bounds via interval_affine unless given.
  std::vector<int> encode_affine(const Tensor& w, const Tensor& b, const std::vector<int>& in,
                                 const std::string& prefix,
                                 const std::optional<Box>& bounds = std::nullopt);
  /// Convolution encoded as its induced affine map, one sparse row per
  /// output pixel.
  std::vector<int> encode_conv2d(const LayerParams& conv, const std::vector<int>& in,
                                 const std::string& prefix,
                                 const std::optional<Box>& bounds = std::nullopt);

  struct ReluResult {
    int out = -1;
    int delta = -1;  // -1 when a stable shortcut applied
  };
  ReluResult encode_relu_bigM(int xhat, const std::string& prefix);
  std::vector<ReluResult> encode_relu_layer(const std::vector<int>& xhat,
                                            const std::string& prefix);

  struct ArgmaxResult {
    int max_var = -1;
    std::vector<int> deltas;
  };
  /// Big-M max/argmax of Eq-maxencoding shape. A single logit yields a fixed
  /// indicator and the equality max = o_0.
  ArgmaxResult encode_argmax(const std::vector<int>& o, const std::string& prefix);

  /// i_next[j] = sum_y delta[y] * emb[y][j]; bounds from embedding_bounds.
  std::vector<int> encode_vocab_feedback(const std::vector<int>& deltas, const Vocabulary& vocab,
                                         const std::string& prefix);

  /// Mirrored big-M system for m = min_t s_t. A single step returns s_1
  /// itself (no new variable).
  int encode_min_over_steps(const std::vector<int>& margins, const std::string& prefix);

 private:
  BuildOptions options_;
  MixedIntegerProgram mip_;
};

/// Unrolls the model for `steps` decoder applications over the region and
/// encodes: input box, encoder, per-step cell + greedy-feedback argmax, the
/// per-step eos margin s_t = max_{z != eos} o_t[z] - o_t[eos], and the
/// objective max min_t s_t. A positive optimum witnesses an input whose
/// decode keeps eos losing for all `steps` steps (length >= steps); a
/// negative optimum proves no such input exists.
MixedIntegerProgram build_verification_mip(const CaptionerModel& model,
                                           const ContinuousBox& region, std::int64_t steps,
                                           const BuildOptions& options = {});

/// Variable ids of the input pixels inside a built verification MIP.
std::vector<int> input_var_ids(const MixedIntegerProgram& mip, std::int64_t input_numel);

/// CPLEX-LP-format text: Maximize / Subject To / Bounds / Binaries sections,
/// shortest round-trip number printing, '/' in names mapped to '_'.
std::string export_lp(const MixedIntegerProgram& mip);

}  // namespace ols
