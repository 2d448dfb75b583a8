#include "ols/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ols {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class NbState { AtLower, AtUpper, Free, Basic };

struct Tableau {
  // Dense row-major T = B^-1 A over all columns (structural + slack + artificial).
  std::size_t rows = 0, cols = 0;
  std::vector<double> t;
  std::vector<double> rhs0;     // original b
  std::vector<double> lo, hi;   // per column
  std::vector<double> value;    // current value per column
  std::vector<NbState> state;   // Basic or nonbasic position
  std::vector<int> basis;       // column of each basic row
  std::vector<double> cost;     // active objective

  double& at(std::size_t r, std::size_t c) { return t[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return t[r * cols + c]; }
};

// Recompute basic values from scratch: x_B = B^-1 b - sum_nonbasic T_j x_j.
// With T = B^-1 A maintained by row reduction, B^-1 b is rhs (also maintained),
// so we keep a dedicated rhs vector updated alongside the eliminations.
struct Engine {
  Tableau tab;
  std::vector<double> rhs;  // B^-1 b
  SimplexOptions opt;
  std::int64_t degenerate_run = 0;
  bool bland = false;

  void refresh_basic_values() {
    for (std::size_t r = 0; r < tab.rows; ++r) {
      double v = rhs[r];
      for (std::size_t j = 0; j < tab.cols; ++j) {
        if (tab.state[j] == NbState::Basic) continue;
        const double xj = tab.value[j];
        if (xj != 0.0) v -= tab.at(r, j) * xj;
      }
      tab.value[static_cast<std::size_t>(tab.basis[r])] = v;
    }
  }

  // Reduced cost vector d = c - c_B^T T.
  void reduced_costs(std::vector<double>& d) const {
    d.assign(tab.cols, 0.0);
    for (std::size_t j = 0; j < tab.cols; ++j) d[j] = tab.cost[j];
    for (std::size_t r = 0; r < tab.rows; ++r) {
      const double cb = tab.cost[static_cast<std::size_t>(tab.basis[r])];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < tab.cols; ++j) d[j] -= cb * tab.at(r, j);
    }
    for (std::size_t r = 0; r < tab.rows; ++r) d[static_cast<std::size_t>(tab.basis[r])] = 0.0;
  }

  LpStatus iterate() {
    std::vector<double> d;
    for (std::int64_t it = 0; it < opt.max_iters; ++it) {
      reduced_costs(d);
      // Entering column.
      int enter = -1;
      double best = opt.opt_tol;
      int sigma = +1;
      for (std::size_t j = 0; j < tab.cols; ++j) {
        if (tab.state[j] == NbState::Basic) continue;
        if (tab.lo[j] == tab.hi[j]) continue;  // pinned
        const double dj = d[j];
        const bool up_ok = (tab.state[j] != NbState::AtUpper) && dj > opt.opt_tol;
        const bool dn_ok = (tab.state[j] != NbState::AtLower) && dj < -opt.opt_tol;
        if (!up_ok && !dn_ok) continue;
        if (bland) {
          enter = static_cast<int>(j);
          sigma = up_ok ? +1 : -1;
          break;
        }
        const double mag = std::abs(dj);
        if (mag > best) {
          best = mag;
          enter = static_cast<int>(j);
          sigma = up_ok ? +1 : -1;
        }
      }
      if (enter < 0) return LpStatus::Optimal;

      const auto ej = static_cast<std::size_t>(enter);
      // Ratio test: entering moves by sigma * t, basics by -sigma * t * T(:,j).
      double t_max = kInf;
      if (std::isfinite(tab.lo[ej]) && std::isfinite(tab.hi[ej]))
        t_max = tab.hi[ej] - tab.lo[ej];  // bound flip distance
      int leave_row = -1;
      double leave_target = 0.0;
      for (std::size_t r = 0; r < tab.rows; ++r) {
        const double a = tab.at(r, ej);
        const double delta = -static_cast<double>(sigma) * a;
        if (std::abs(delta) < 1e-11) continue;
        const auto bcol = static_cast<std::size_t>(tab.basis[r]);
        const double xb = tab.value[bcol];
        double limit, target;
        if (delta > 0.0) {
          if (!std::isfinite(tab.hi[bcol])) continue;
          limit = (tab.hi[bcol] - xb) / delta;
          target = tab.hi[bcol];
        } else {
          if (!std::isfinite(tab.lo[bcol])) continue;
          limit = (tab.lo[bcol] - xb) / delta;
          target = tab.lo[bcol];
        }
        if (limit < -opt.feas_tol) limit = 0.0;  // numerical dust
        limit = std::max(limit, 0.0);
        const bool better =
            limit < t_max - 1e-12 ||
            (limit < t_max + 1e-12 && leave_row >= 0 &&
             tab.basis[r] < tab.basis[static_cast<std::size_t>(leave_row)]);
        if (leave_row < 0 ? limit < t_max - 1e-12 : better) {
          t_max = limit;
          leave_row = static_cast<int>(r);
          leave_target = target;
        }
      }
      if (!std::isfinite(t_max)) return LpStatus::Unbounded;

      if (t_max < 1e-12)
        ++degenerate_run;
      else
        degenerate_run = 0;
      if (degenerate_run > static_cast<std::int64_t>(2 * (tab.rows + tab.cols))) bland = true;

      // Apply the move.
      const double step = static_cast<double>(sigma) * t_max;
      for (std::size_t r = 0; r < tab.rows; ++r) {
        const double a = tab.at(r, ej);
        if (a != 0.0) tab.value[static_cast<std::size_t>(tab.basis[r])] -= step * a;
      }
      tab.value[ej] += step;

      if (leave_row < 0) {
        // Bound flip: entering switches side, basis unchanged.
        tab.state[ej] = sigma > 0 ? NbState::AtUpper : NbState::AtLower;
        tab.value[ej] = sigma > 0 ? tab.hi[ej] : tab.lo[ej];
        refresh_basic_values();
        continue;
      }

      const auto lr = static_cast<std::size_t>(leave_row);
      const auto lcol = static_cast<std::size_t>(tab.basis[lr]);
      const double pivot = tab.at(lr, ej);
      if (std::abs(pivot) < 1e-11) return LpStatus::Numerical;
      tab.value[lcol] = leave_target;  // lands exactly on its bound
      tab.state[lcol] = (leave_target == tab.lo[lcol]) ? NbState::AtLower : NbState::AtUpper;
      if (tab.lo[lcol] == tab.hi[lcol]) tab.state[lcol] = NbState::AtLower;
      tab.state[ej] = NbState::Basic;
      tab.basis[lr] = enter;

      // Row reduction.
      const double inv = 1.0 / pivot;
      for (std::size_t j = 0; j < tab.cols; ++j) tab.at(lr, j) *= inv;
      rhs[lr] *= inv;
      for (std::size_t r = 0; r < tab.rows; ++r) {
        if (r == lr) continue;
        const double f = tab.at(r, ej);
        if (f == 0.0) continue;
        for (std::size_t j = 0; j < tab.cols; ++j) tab.at(r, j) -= f * tab.at(lr, j);
        rhs[r] -= f * rhs[lr];
      }
      refresh_basic_values();
    }
    return LpStatus::IterLimit;
  }
};

}  // namespace

LpProblem LpProblem::relaxation_of(const MixedIntegerProgram& mip) {
  LpProblem lp;
  lp.lo.reserve(mip.vars.size());
  lp.hi.reserve(mip.vars.size());
  for (const Variable& v : mip.vars) {
    lp.lo.push_back(v.lo);
    lp.hi.push_back(v.hi);
  }
  lp.cons = mip.cons;
  lp.objective = mip.objective;
  return lp;
}

LpSolution simplex_solve(const LpProblem& lp, const SimplexOptions& options) {
  const std::size_t n = lp.num_vars();
  const std::size_t m = lp.cons.size();
  const std::size_t cols = n + m + m;  // structural + slack + artificial
  LpSolution sol;
  if (static_cast<std::int64_t>(m) * static_cast<std::int64_t>(cols) > options.max_entries) {
    sol.status = LpStatus::TooLarge;
    return sol;
  }

  Engine eng;
  eng.opt = options;
  Tableau& tab = eng.tab;
  tab.rows = m;
  tab.cols = cols;
  tab.t.assign(m * cols, 0.0);
  tab.lo.assign(cols, 0.0);
  tab.hi.assign(cols, 0.0);
  tab.value.assign(cols, 0.0);
  tab.state.assign(cols, NbState::AtLower);
  tab.cost.assign(cols, 0.0);
  tab.basis.assign(m, -1);
  eng.rhs.assign(m, 0.0);

  for (std::size_t j = 0; j < n; ++j) {
    tab.lo[j] = lp.lo[j];
    tab.hi[j] = lp.hi[j];
    if (std::isfinite(lp.lo[j])) {
      tab.state[j] = NbState::AtLower;
      tab.value[j] = lp.lo[j];
    } else if (std::isfinite(lp.hi[j])) {
      tab.state[j] = NbState::AtUpper;
      tab.value[j] = lp.hi[j];
    } else {
      tab.state[j] = NbState::Free;
      tab.value[j] = 0.0;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    const LinearConstraint& c = lp.cons[i];
    for (const LinTerm& t : c.terms) {
      if (t.var < 0 || static_cast<std::size_t>(t.var) >= n)
        throw std::invalid_argument("simplex: constraint references missing variable");
      tab.at(i, static_cast<std::size_t>(t.var)) += t.coef;
    }
    eng.rhs[i] = c.rhs;
    const std::size_t sj = n + i;
    tab.at(i, sj) = 1.0;
    switch (c.cmp) {
      case Cmp::LE:
        tab.lo[sj] = 0.0;
        tab.hi[sj] = kInf;
        break;
      case Cmp::GE:
        tab.lo[sj] = -kInf;
        tab.hi[sj] = 0.0;
        break;
      case Cmp::EQ:
        tab.lo[sj] = 0.0;
        tab.hi[sj] = 0.0;
        break;
    }
    tab.state[sj] = std::isfinite(tab.lo[sj]) ? NbState::AtLower : NbState::AtUpper;
    tab.value[sj] = std::isfinite(tab.lo[sj]) ? tab.lo[sj] : tab.hi[sj];
  }

  // Residuals decide row orientation; rows with negative residual are
  // negated so every artificial enters with coefficient +1 and the starting
  // basis matrix is the identity (T = B^-1 A from the first pivot).
  for (std::size_t i = 0; i < m; ++i) {
    double r = eng.rhs[i];
    for (std::size_t j = 0; j < n + m; ++j) {
      const double a = tab.at(i, j);
      if (a != 0.0 && tab.value[j] != 0.0) r -= a * tab.value[j];
    }
    if (r < 0.0) {
      for (std::size_t j = 0; j < n + m; ++j) tab.at(i, j) = -tab.at(i, j);
      eng.rhs[i] = -eng.rhs[i];
    }
    const std::size_t aj = n + m + i;
    tab.at(i, aj) = 1.0;
    tab.lo[aj] = 0.0;
    tab.hi[aj] = kInf;
    tab.state[aj] = NbState::Basic;
    tab.value[aj] = std::abs(r);
    tab.basis[i] = static_cast<int>(aj);
    tab.cost[aj] = -1.0;  // phase 1: maximize -sum(artificials)
  }

  LpStatus st = eng.iterate();
  if (st != LpStatus::Optimal) {
    // Phase 1 cannot legitimately be unbounded; escalate anything unusual.
    sol.status = st == LpStatus::Unbounded ? LpStatus::Numerical : st;
    return sol;
  }
  double infeas = 0.0;
  for (std::size_t i = 0; i < m; ++i) infeas += tab.value[n + m + i];
  if (infeas > 1e-7) {
    sol.status = LpStatus::Infeasible;
    return sol;
  }

  // Phase 2: pin artificials at zero, restore the real objective.
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t aj = n + m + i;
    tab.lo[aj] = 0.0;
    tab.hi[aj] = 0.0;
    tab.cost[aj] = 0.0;
    if (tab.state[aj] != NbState::Basic) {
      tab.state[aj] = NbState::AtLower;
      tab.value[aj] = 0.0;
    }
  }
  for (std::size_t j = 0; j < cols; ++j)
    if (j < n) tab.cost[j] = 0.0;
  for (const LinTerm& t : lp.objective) tab.cost[static_cast<std::size_t>(t.var)] += t.coef;
  eng.degenerate_run = 0;
  eng.bland = false;

  st = eng.iterate();
  if (st != LpStatus::Optimal) {
    sol.status = st;
    return sol;
  }

  sol.x.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) sol.x[j] = tab.value[j];
  // Validation: bounds, constraints, objective recomputation.
  for (std::size_t j = 0; j < n; ++j) {
    if (sol.x[j] < lp.lo[j] - 1e-7 || sol.x[j] > lp.hi[j] + 1e-7) {
      sol.status = LpStatus::Numerical;
      return sol;
    }
    sol.x[j] = std::clamp(sol.x[j], lp.lo[j], lp.hi[j]);
  }
  for (const LinearConstraint& c : lp.cons) {
    double act = 0.0;
    double scale = 1.0;
    for (const LinTerm& t : c.terms) {
      act += t.coef * sol.x[static_cast<std::size_t>(t.var)];
      scale = std::max(scale, std::abs(t.coef));
    }
    const double slack = act - c.rhs;
    const double tol = 1e-7 * scale;
    const bool ok = (c.cmp == Cmp::LE && slack <= tol) || (c.cmp == Cmp::GE && slack >= -tol) ||
                    (c.cmp == Cmp::EQ && std::abs(slack) <= tol);
    if (!ok) {
      sol.status = LpStatus::Numerical;
      return sol;
    }
  }
  double obj = 0.0;
  for (const LinTerm& t : lp.objective) obj += t.coef * sol.x[static_cast<std::size_t>(t.var)];
  sol.objective = obj;
  sol.status = LpStatus::Optimal;
  return sol;
}

}  // namespace ols
