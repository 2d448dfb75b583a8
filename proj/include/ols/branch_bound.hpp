#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ols/mip.hpp"
#include "ols/simplex.hpp"

namespace ols {

struct BnbOptions {
  double timeout_s = 60.0;
  double tolerance = 1e-6;
  SimplexOptions lp;
};

enum class BnbStatus { ProvedOptimal, Timeout };

struct BnbResult {
  BnbStatus status = BnbStatus::Timeout;
  bool has_incumbent = false;
  double incumbent = 0.0;
  std::vector<double> assignment;
  double best_bound = 0.0;  // valid upper bound on the true optimum
  std::int64_t nodes = 0;
  double wall_s = 0.0;
  std::string note;
};

/// Depth-first branch and bound on the binary variables: most-fractional
/// branching, the value-rounding child explored first, nodes pruned when
/// their LP bound cannot beat the incumbent by more than `tolerance`.
/// Deterministic for a fixed program and options.
BnbResult branch_and_bound(const MixedIntegerProgram& mip, const BnbOptions& options = {});

/// Input assignment of an incumbent, clipped into the region (<= 1e-9 drift).
Tensor extract_counterexample(const MixedIntegerProgram& mip, const BnbResult& result,
                              const ContinuousBox& region);

enum class Replay { Confirmed, Spurious };

/// Concrete greedy decode of x; Confirmed iff the decoded length strictly
/// exceeds khat (OVERFLOW counts as longer).
Replay replay_check(const CaptionerModel& model, const Tensor& x, std::int64_t khat);

enum class VerdictStatus { Robust, Counterexample, Unknown, Timeout };

struct VerificationVerdict {
  VerdictStatus status = VerdictStatus::Unknown;
  double lower = 0.0, upper = 0.0;  // bracket on the MIP optimum
  std::optional<Tensor> counterexample;
  std::optional<std::int64_t> replay_length;  // nullopt with replay_overflow set = OVERFLOW
  bool replay_overflow = false;
  std::int64_t nodes = 0;
  double wall_s = 0.0;
  std::string note;
};

/// Full pipeline for the length spec l(x) <= khat over the region: bounds,
/// MIP over khat+1 decoder steps, branch and bound, replay validation.
/// ROBUST only with a certified bound, COUNTEREXAMPLE only after replay.
VerificationVerdict verify_region(const CaptionerModel& model, const ContinuousBox& region,
                                  std::int64_t khat, const BnbOptions& options = {});

const char* to_string(VerdictStatus status);
nlohmann::json verdict_to_json(const VerificationVerdict& verdict);

}  // namespace ols
