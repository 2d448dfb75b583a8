#include "ols/branch_bound.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ols {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Node {
  // Bound overrides, parallel vectors (var id -> fixed value).
  std::vector<int> fixed_vars;
  std::vector<double> fixed_vals;
  double parent_bound = kInf;
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

// Base64 for the verdict JSON counterexample payload.
std::string base64_encode(const unsigned char* data, std::size_t len) {
  static const char* alph = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    unsigned int v = data[i] << 16;
    if (i + 1 < len) v |= data[i + 1] << 8;
    if (i + 2 < len) v |= data[i + 2];
    out += alph[(v >> 18) & 63];
    out += alph[(v >> 12) & 63];
    out += i + 1 < len ? alph[(v >> 6) & 63] : '=';
    out += i + 2 < len ? alph[v & 63] : '=';
  }
  return out;
}

}  // namespace

BnbResult branch_and_bound(const MixedIntegerProgram& mip, const BnbOptions& options) {
  {
    const auto problems = validate(mip);
    if (!problems.empty())
      throw std::invalid_argument("branch_and_bound: invalid program: " + problems.front());
  }
  if (options.timeout_s <= 0.0) throw std::invalid_argument("branch_and_bound: timeout must be positive");

  const double t0 = now_seconds();
  LpProblem base = LpProblem::relaxation_of(mip);
  std::vector<int> binaries;
  for (std::size_t j = 0; j < mip.vars.size(); ++j)
    if (mip.vars[j].binary && mip.vars[j].lo < mip.vars[j].hi)
      binaries.push_back(static_cast<int>(j));

  BnbResult res;
  res.best_bound = kInf;

  std::vector<Node> stack;
  stack.push_back(Node{});
  // Upper bounds of open (not yet solved) subtrees, for the anytime bracket.
  // The stack itself carries parent bounds; the global bound is the max of
  // open parent bounds and the root LP bound once known.
  double incumbent = -kInf;
  bool have_incumbent = false;
  std::vector<double> incumbent_x;
  double root_bound = kInf;
  bool root_solved = false;

  auto open_bound = [&]() {
    double b = -kInf;
    for (const Node& n : stack) b = std::max(b, n.parent_bound);
    if (!root_solved) b = kInf;
    return b;
  };

  while (!stack.empty()) {
    if (now_seconds() - t0 > options.timeout_s) {
      res.status = BnbStatus::Timeout;
      res.note = "timeout";
      break;
    }
    Node node = std::move(stack.back());
    stack.pop_back();
    res.nodes += 1;

    // Prune against the incumbent before paying for the LP.
    if (have_incumbent && node.parent_bound <= incumbent + options.tolerance) continue;

    LpProblem lp = base;
    for (std::size_t k = 0; k < node.fixed_vars.size(); ++k) {
      lp.lo[static_cast<std::size_t>(node.fixed_vars[k])] = node.fixed_vals[k];
      lp.hi[static_cast<std::size_t>(node.fixed_vars[k])] = node.fixed_vals[k];
    }
    const LpSolution sol = simplex_solve(lp, options.lp);
    if (!root_solved) {
      root_solved = true;
      root_bound = sol.status == LpStatus::Optimal ? sol.objective : kInf;
    }
    if (sol.status == LpStatus::Infeasible) continue;
    if (sol.status != LpStatus::Optimal) {
      // Numerical trouble: keep the subtree's bound, do not prune it away.
      res.status = BnbStatus::Timeout;
      res.note = "lp status escalation";
      res.best_bound = std::max(open_bound(), node.parent_bound);
      res.wall_s = now_seconds() - t0;
      res.has_incumbent = have_incumbent;
      res.incumbent = incumbent;
      res.assignment = incumbent_x;
      return res;
    }
    const double bound = std::min(sol.objective, node.parent_bound);
    if (have_incumbent && bound <= incumbent + options.tolerance) continue;

    // Most fractional binary.
    int branch_var = -1;
    double branch_frac = -1.0;
    for (int j : binaries) {
      const double v = sol.x[static_cast<std::size_t>(j)];
      if (lp.lo[static_cast<std::size_t>(j)] == lp.hi[static_cast<std::size_t>(j)]) continue;
      const double frac = std::min(v, 1.0 - v);
      if (frac > 1e-6 && frac > branch_frac) {
        branch_frac = frac;
        branch_var = j;
      }
    }
    if (branch_var < 0) {
      // Integer feasible.
      if (!have_incumbent || sol.objective > incumbent) {
        have_incumbent = true;
        incumbent = sol.objective;
        incumbent_x = sol.x;
      }
      continue;
    }
    const double v = sol.x[static_cast<std::size_t>(branch_var)];
    const double first = v >= 0.5 ? 1.0 : 0.0;
    Node near = node, far = node;
    near.parent_bound = bound;
    far.parent_bound = bound;
    near.fixed_vars.push_back(branch_var);
    near.fixed_vals.push_back(first);
    far.fixed_vars.push_back(branch_var);
    far.fixed_vals.push_back(1.0 - first);
    stack.push_back(std::move(far));
    stack.push_back(std::move(near));  // value-rounding child explored first
  }

  res.wall_s = now_seconds() - t0;
  res.has_incumbent = have_incumbent;
  res.incumbent = incumbent;
  res.assignment = incumbent_x;
  if (stack.empty() && res.note.empty()) {
    res.status = BnbStatus::ProvedOptimal;
    res.best_bound = have_incumbent ? incumbent : -kInf;
  } else if (res.best_bound == kInf || !stack.empty()) {
    double b = open_bound();
    if (have_incumbent) b = std::max(b, incumbent);
    res.best_bound = b;
  }
  return res;
}

Tensor extract_counterexample(const MixedIntegerProgram& mip, const BnbResult& result,
                              const ContinuousBox& region) {
  if (!result.has_incumbent)
    throw std::invalid_argument("extract_counterexample: no incumbent in result");
  const std::int64_t n = region.reference.numel();
  const std::vector<int> ids = input_var_ids(mip, n);
  Tensor x = Tensor::zeros(region.reference.shape);
  const Box box = region.box();
  for (std::int64_t i = 0; i < n; ++i) {
    double v = result.assignment[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])];
    if (v < box.lo.at(i) - 1e-9 || v > box.hi.at(i) + 1e-9)
      throw std::domain_error("extract_counterexample: assignment drifted out of the region");
    x.at(i) = std::clamp(v, box.lo.at(i), box.hi.at(i));
  }
  return x;
}

Replay replay_check(const CaptionerModel& model, const Tensor& x, std::int64_t khat) {
  const std::optional<std::int64_t> len = output_length(model, x);
  const bool longer = !len.has_value() || *len > khat;  // OVERFLOW counts as longer
  return longer ? Replay::Confirmed : Replay::Spurious;
}

VerificationVerdict verify_region(const CaptionerModel& model, const ContinuousBox& region,
                                  std::int64_t khat, const BnbOptions& options) {
  if (khat <= 0 || khat + 1 > model.max_unroll)
    throw std::invalid_argument("verify_region: need 1 <= khat and khat+1 <= max_unroll");
  VerificationVerdict verdict;
  MixedIntegerProgram mip;
  try {
    // A violation needs eos to lose at steps 0..khat, hence khat+1 steps.
    mip = build_verification_mip(model, region, khat + 1);
  } catch (const std::exception& e) {
    verdict.status = VerdictStatus::Unknown;
    verdict.note = std::string("encoding failed: ") + e.what();
    verdict.lower = -kInf;
    verdict.upper = kInf;
    return verdict;
  }
  const BnbResult bnb = branch_and_bound(mip, options);
  verdict.nodes = bnb.nodes;
  verdict.wall_s = bnb.wall_s;
  verdict.lower = bnb.has_incumbent ? bnb.incumbent : -kInf;
  verdict.upper = bnb.status == BnbStatus::ProvedOptimal && bnb.has_incumbent
                      ? std::max(bnb.best_bound, bnb.incumbent)
                      : bnb.best_bound;

  const double tol = 1e-6;
  if (bnb.status == BnbStatus::ProvedOptimal) {
    if (!bnb.has_incumbent) {
      // Infeasible program: empty region cannot happen (the reference is
      // always inside), so surface it.
      verdict.status = VerdictStatus::Unknown;
      verdict.note = "program infeasible";
      return verdict;
    }
    if (bnb.incumbent < -tol) {
      verdict.status = VerdictStatus::Robust;
      return verdict;
    }
    if (bnb.incumbent <= tol) {
      verdict.status = VerdictStatus::Unknown;
      verdict.note = "boundary: optimum within +-1e-6 of zero";
      return verdict;
    }
  }
  // Positive incumbent (proved or not): try to realize it.
  if (bnb.has_incumbent && bnb.incumbent > tol) {
    const Tensor x = extract_counterexample(mip, bnb, region);
    const Replay replay = replay_check(model, x, khat);
    const std::optional<std::int64_t> len = output_length(model, x);
    verdict.replay_length = len;
    verdict.replay_overflow = !len.has_value();
    if (replay == Replay::Confirmed) {
      verdict.status = VerdictStatus::Counterexample;
      verdict.counterexample = x;
      return verdict;
    }
    verdict.status = VerdictStatus::Unknown;
    verdict.note = bnb.status == BnbStatus::ProvedOptimal
                       ? "spurious: replay does not exceed khat (argmax tie in the encoding)"
                       : "spurious incumbent before timeout";
    return verdict;
  }
  if (bnb.status == BnbStatus::Timeout) {
    // A certified negative upper bound still proves robustness.
    if (bnb.best_bound < -tol) {
      verdict.status = VerdictStatus::Robust;
      return verdict;
    }
    verdict.status = VerdictStatus::Timeout;
    verdict.note = bnb.note;
    return verdict;
  }
  verdict.status = VerdictStatus::Unknown;
  return verdict;
}

const char* to_string(VerdictStatus status) {
  switch (status) {
    case VerdictStatus::Robust:
      return "ROBUST";
    case VerdictStatus::Counterexample:
      return "COUNTEREXAMPLE";
    case VerdictStatus::Unknown:
      return "UNKNOWN";
    case VerdictStatus::Timeout:
      return "TIMEOUT";
  }
  return "UNKNOWN";
}

nlohmann::json verdict_to_json(const VerificationVerdict& verdict) {
  nlohmann::json j;
  j["status"] = to_string(verdict.status);
  j["lower"] = std::isfinite(verdict.lower) ? nlohmann::json(verdict.lower) : nlohmann::json();
  j["upper"] = std::isfinite(verdict.upper) ? nlohmann::json(verdict.upper) : nlohmann::json();
  j["nodes"] = verdict.nodes;
  j["wall_ms"] = verdict.wall_s * 1000.0;
  if (!verdict.note.empty()) j["note"] = verdict.note;
  if (verdict.counterexample) {
    const Tensor& t = *verdict.counterexample;
    j["counterexample"] = base64_encode(
        reinterpret_cast<const unsigned char*>(t.data.data()), t.data.size() * sizeof(double));
    j["counterexample_shape"] = t.shape;
  }
  if (verdict.replay_length)
    j["replay_length"] = *verdict.replay_length;
  else if (verdict.replay_overflow)
    j["replay_length"] = "OVERFLOW";
  return j;
}

}  // namespace ols
