#pragma once

#include <cstdint>
#include <vector>

#include "ols/mip.hpp"

namespace ols {

enum class LpStatus {
  Optimal,
  Infeasible,
  Unbounded,
  IterLimit,   // iteration cap hit; caller must treat conservatively
  TooLarge,    // tableau would exceed the memory guard
  Numerical,   // final validation failed
};

/// Box-bounded LP in maximization form. Bounds may be +-infinity.
struct LpProblem {
  std::vector<double> lo, hi;
  std::vector<LinearConstraint> cons;
  std::vector<LinTerm> objective;

  std::size_t num_vars() const { return lo.size(); }
  static LpProblem relaxation_of(const MixedIntegerProgram& mip);
};

struct LpSolution {
  LpStatus status = LpStatus::Numerical;
  double objective = 0.0;
  std::vector<double> x;
};

struct SimplexOptions {
  double feas_tol = 1e-9;
  double opt_tol = 1e-9;
  std::int64_t max_iters = 50000;
  /// Dense tableau entries allowed before refusing with TooLarge.
  std::int64_t max_entries = 160'000'000;
};

/// Bounded-variable primal simplex, two phases with artificials, Dantzig
/// pricing with a Bland's-rule fallback once degeneracy stalls. The returned
/// assignment is re-validated against every constraint and bound before
/// Optimal is reported.
LpSolution simplex_solve(const LpProblem& lp, const SimplexOptions& options = {});

}  // namespace ols
