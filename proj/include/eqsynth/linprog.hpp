#pragma once

// Self-contained dense linear programming and linear algebra:
//  - two-phase primal simplex with Bland's rule, so runs are deterministic
//    for a given input ordering and cannot cycle,
//  - a lexicographic multi-objective wrapper,
//  - Gaussian elimination with partial pivoting for square/rectangular
//    systems with rank and consistency reporting.
//
// Variables default to [0, +inf); finite or infinite bounds on either side
// are supported. Maximisation is handled by negating the objective.

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>
#include <vector>

#include "eqsynth/common.hpp"

namespace eqsynth {

enum class Sense { kMaximize, kMinimize };
enum class Relation { kLe, kEq, kGe };

struct Constraint {
  std::vector<double> coeffs;
  Relation rel = Relation::kLe;
  double rhs = 0.0;
};

struct VarBounds {
  double lo = 0.0;
  double hi = kInf;
};

struct LinearProgram {
  Sense sense = Sense::kMaximize;
  std::vector<double> objective;
  std::vector<Constraint> constraints;
  // Optional; empty means every variable is [0, +inf).
  std::vector<VarBounds> bounds;

  int num_vars() const { return int(objective.size()); }

  Constraint& add_row(Relation rel, double rhs) {
    constraints.push_back(Constraint{
        std::vector<double>(objective.size(), 0.0), rel, rhs});
    return constraints.back();
  }
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<double> x;
  double objective_value = 0.0;
};

// Numerical breakdown: the only eligible pivots fell below kPivotTol.
class DegeneratePivotError : public Error {
 public:
  explicit DegeneratePivotError(const std::string& what) : Error(what) {}
};

namespace lp_detail {

// Standard-form working problem: minimise c.y subject to T y rel b, y >= 0.
struct Standard {
  // column j of the working problem corresponds to original variable
  // orig_var[j] with multiplier orig_sign[j]; -1 marks slack columns.
  std::vector<int> orig_var;
  std::vector<double> orig_sign;
  std::vector<double> shift;  // x = sign*y + shift contribution
  std::vector<std::vector<double>> rows;
  std::vector<Relation> rels;
  std::vector<double> rhs;
  std::vector<double> cost;
  int n = 0;
};

inline Standard to_standard(const LinearProgram& lp) {
  const int nv = lp.num_vars();
  std::vector<VarBounds> bounds = lp.bounds;
  if (bounds.empty()) bounds.assign(size_t(nv), VarBounds{});
  if (int(bounds.size()) != nv) throw Error("bounds length mismatch");

  Standard st;
  // Column layout per original variable.
  std::vector<int> first_col(size_t(nv), -1);
  std::vector<int> second_col(size_t(nv), -1);
  for (int j = 0; j < nv; ++j) {
    const auto& b = bounds[size_t(j)];
    if (b.lo > b.hi) throw Error("variable bound lo > hi");
    first_col[size_t(j)] = st.n;
    if (std::isfinite(b.lo)) {
      // x = y + lo
      st.orig_var.push_back(j);
      st.orig_sign.push_back(1.0);
      st.shift.push_back(b.lo);
      ++st.n;
    } else if (std::isfinite(b.hi)) {
      // x = hi - y
      st.orig_var.push_back(j);
      st.orig_sign.push_back(-1.0);
      st.shift.push_back(b.hi);
      ++st.n;
    } else {
      // free: x = y+ - y-
      st.orig_var.push_back(j);
      st.orig_sign.push_back(1.0);
      st.shift.push_back(0.0);
      second_col[size_t(j)] = st.n + 1;
      st.orig_var.push_back(j);
      st.orig_sign.push_back(-1.0);
      st.shift.push_back(0.0);
      st.n += 2;
    }
  }

  auto add_std_row = [&](const std::vector<double>& coeffs, Relation rel,
                         double rhs_in) {
    std::vector<double> row(size_t(st.n), 0.0);
    double rhs = rhs_in;
    for (int j = 0; j < nv; ++j) {
      double a = coeffs[size_t(j)];
      if (a == 0.0) continue;
      int c = first_col[size_t(j)];
      row[size_t(c)] += a * st.orig_sign[size_t(c)];
      rhs -= a * st.shift[size_t(c)];
      if (second_col[size_t(j)] >= 0)
        row[size_t(second_col[size_t(j)])] += a * st.orig_sign[size_t(second_col[size_t(j)])];
    }
    st.rows.push_back(std::move(row));
    st.rels.push_back(rel);
    st.rhs.push_back(rhs);
  };

  for (const auto& c : lp.constraints) {
    if (int(c.coeffs.size()) != nv) throw Error("constraint length mismatch");
    add_std_row(c.coeffs, c.rel, c.rhs);
  }
  // Finite upper bounds for shifted-lo variables become explicit rows.
  for (int j = 0; j < nv; ++j) {
    const auto& b = bounds[size_t(j)];
    if (std::isfinite(b.lo) && std::isfinite(b.hi)) {
      std::vector<double> unit(size_t(nv), 0.0);
      unit[size_t(j)] = 1.0;
      add_std_row(unit, Relation::kLe, b.hi);
    }
  }

  st.cost.assign(size_t(st.n), 0.0);
  double sgn = lp.sense == Sense::kMaximize ? -1.0 : 1.0;
  for (int j = 0; j < nv; ++j) {
    double c = sgn * lp.objective[size_t(j)];
    if (c == 0.0) continue;
    int col = first_col[size_t(j)];
    st.cost[size_t(col)] += c * st.orig_sign[size_t(col)];
    if (second_col[size_t(j)] >= 0)
      st.cost[size_t(second_col[size_t(j)])] +=
          c * st.orig_sign[size_t(second_col[size_t(j)])];
  }
  return st;
}

// Dense tableau simplex. Columns: structural | slack/surplus | artificial,
// then rhs held separately.
class Tableau {
 public:
  explicit Tableau(Standard st, long refactor_every = 40)
      : st_(std::move(st)), refactor_every_(refactor_every) {
    const int m = int(st_.rows.size());
    // Scale rows to unit max coefficient; keeps pivot thresholds meaningful.
    for (int i = 0; i < m; ++i) {
      double mx = 0.0;
      for (double a : st_.rows[size_t(i)]) mx = std::max(mx, std::fabs(a));
      if (mx > 0.0) {
        for (double& a : st_.rows[size_t(i)]) a /= mx;
        st_.rhs[size_t(i)] /= mx;
      }
    }
    // rhs must be nonnegative for the artificial basis.
    for (int i = 0; i < m; ++i) {
      if (st_.rhs[size_t(i)] < 0.0) {
        for (double& a : st_.rows[size_t(i)]) a = -a;
        st_.rhs[size_t(i)] = -st_.rhs[size_t(i)];
        st_.rels[size_t(i)] = st_.rels[size_t(i)] == Relation::kLe ? Relation::kGe
                              : st_.rels[size_t(i)] == Relation::kGe ? Relation::kLe
                                                                     : Relation::kEq;
      }
    }
    n_struct_ = st_.n;
    int n_slack = 0;
    for (auto r : st_.rels)
      if (r != Relation::kEq) ++n_slack;
    n_total_ = n_struct_ + n_slack;
    std::vector<int> art_rows;
    tab_.assign(size_t(m), {});
    basis_.assign(size_t(m), -1);
    rhs_ = st_.rhs;
    int slack_at = n_struct_;
    for (int i = 0; i < m; ++i) {
      tab_[size_t(i)].assign(size_t(n_total_), 0.0);
      for (int j = 0; j < n_struct_; ++j) tab_[size_t(i)][size_t(j)] = st_.rows[size_t(i)][size_t(j)];
      switch (st_.rels[size_t(i)]) {
        case Relation::kLe:
          tab_[size_t(i)][size_t(slack_at)] = 1.0;
          basis_[size_t(i)] = slack_at++;
          break;
        case Relation::kGe:
          tab_[size_t(i)][size_t(slack_at)] = -1.0;
          ++slack_at;
          art_rows.push_back(i);
          break;
        case Relation::kEq:
          art_rows.push_back(i);
          break;
      }
    }
    n_before_art_ = n_total_;
    for (int i : art_rows) {
      for (auto& row : tab_) row.push_back(0.0);
      tab_[size_t(i)][size_t(n_total_)] = 1.0;
      basis_[size_t(i)] = n_total_;
      art_src_.push_back(i);
      ++n_total_;
    }
    // Pristine copy of the system; refactor() rebuilds the working tableau
    // from it to shed accumulated floating-point drift.
    clean_rows_ = tab_;
    clean_rhs_ = rhs_;
    alive_.assign(tab_.size(), true);
  }

  LpStatus solve() {
    const int m = int(tab_.size());
    // Phase 1: minimise the sum of artificials.
    if (n_total_ > n_before_art_) {
      std::vector<double> cost(size_t(n_total_), 0.0);
      for (int j = n_before_art_; j < n_total_; ++j) cost[size_t(j)] = 1.0;
      set_cost(cost);
      // The artificial objective is bounded below by zero, so anything but
      // optimality here is numerical breakdown, not a property of the input.
      if (run_simplex(n_total_) != LpStatus::kOptimal)
        throw DegeneratePivotError("phase 1 failed to reach optimality");
      if (objective() > 1e-7) return LpStatus::kInfeasible;
      // Pivot artificials out of the basis or drop redundant rows. A basic
      // artificial carries at most the phase-1 residual (<= 1e-7); zero it
      // first so the exchange is exactly degenerate, and pivot on the
      // largest eligible element rather than dividing residuals by a value
      // near kPivotTol.
      for (int i = m - 1; i >= 0; --i) {
        if (basis_[size_t(i)] < n_before_art_) continue;
        rhs_[size_t(i)] = 0.0;
        int enter = -1;
        double enter_mag = kPivotTol;
        for (int j = 0; j < n_before_art_; ++j) {
          double mag = std::fabs(tab_[size_t(i)][size_t(j)]);
          if (mag > enter_mag && !basic_col(j)) {
            enter = j;
            enter_mag = mag;
          }
        }
        if (enter >= 0) {
          pivot(i, enter);
        } else {
          drop_row(i);
        }
      }
      refactor();
    }
    // Phase 2.
    set_cost(st_.cost);
    return run_simplex(n_before_art_);
  }

  double objective() const { return -cost_rhs_; }

  std::vector<double> solution(const LinearProgram& lp) const {
    std::vector<double> y(size_t(n_total_), 0.0);
    for (size_t i = 0; i < basis_.size(); ++i) y[size_t(basis_[i])] = rhs_[i];
    std::vector<double> x(size_t(lp.num_vars()), 0.0);
    std::vector<bool> seeded(size_t(lp.num_vars()), false);
    for (int j = 0; j < st_.n; ++j) {
      int v = st_.orig_var[size_t(j)];
      if (!seeded[size_t(v)]) {
        x[size_t(v)] = st_.shift[size_t(j)];
        seeded[size_t(v)] = true;
      }
      x[size_t(v)] += st_.orig_sign[size_t(j)] * y[size_t(j)];
    }
    return x;
  }

 private:
  bool basic_col(int j) const {
    for (int b : basis_)
      if (b == j) return true;
    return false;
  }

  void build_cost_row(const std::vector<double>& cost) {
    cost_.assign(size_t(n_total_), 0.0);
    for (size_t j = 0; j < cost.size(); ++j) cost_[j] = cost[j];
    cost_rhs_ = 0.0;
    for (size_t i = 0; i < basis_.size(); ++i) {
      double cb = cost_[size_t(basis_[i])];
      if (cb == 0.0) continue;
      for (int j = 0; j < n_total_; ++j) cost_[size_t(j)] -= cb * tab_[i][size_t(j)];
      cost_rhs_ -= cb * rhs_[i];
    }
  }

  void set_cost(const std::vector<double>& cost) {
    cur_cost_.assign(size_t(n_total_), 0.0);
    for (size_t j = 0; j < cost.size(); ++j) cur_cost_[j] = cost[j];
    build_cost_row(cur_cost_);
  }

  // Entries that fall below kSnapRel of a row's largest magnitude after
  // elimination are cancellation residue; snapping them to zero keeps them
  // out of the pivot eligibility test, which otherwise divides by noise and
  // destroys the factorisation.
  static constexpr double kSnapRel = 1e-12;

  void snap_row(std::vector<double>& v) {
    double mx = 1.0;
    for (double a : v) mx = std::max(mx, std::fabs(a));
    double thr = kSnapRel * mx;
    for (double& a : v)
      if (a != 0.0 && std::fabs(a) <= thr) a = 0.0;
  }

  void pivot(int row, int col) {
    double p = tab_[size_t(row)][size_t(col)];
    for (double& a : tab_[size_t(row)]) a /= p;
    rhs_[size_t(row)] /= p;
    for (size_t i = 0; i < tab_.size(); ++i) {
      if (int(i) == row) continue;
      double f = tab_[i][size_t(col)];
      if (f == 0.0) continue;
      for (int j = 0; j < n_total_; ++j) tab_[i][size_t(j)] -= f * tab_[size_t(row)][size_t(j)];
      tab_[i][size_t(col)] = 0.0;  // cancel residual rounding
      snap_row(tab_[i]);
      rhs_[i] -= f * rhs_[size_t(row)];
      if (std::fabs(rhs_[i]) <= 1e-11) rhs_[i] = 0.0;
    }
    double f = cost_[size_t(col)];
    if (f != 0.0) {
      for (int j = 0; j < n_total_; ++j) cost_[size_t(j)] -= f * tab_[size_t(row)][size_t(j)];
      cost_[size_t(col)] = 0.0;
      cost_rhs_ -= f * rhs_[size_t(row)];
    }
    basis_[size_t(row)] = col;
  }

  void drop_row(int row) {
    // Only redundant rows are dropped, always with an artificial basic; the
    // artificial column identifies the pristine row to retire.
    alive_[size_t(art_src_[size_t(basis_[size_t(row)] - n_before_art_)])] = false;
    tab_.erase(tab_.begin() + row);
    rhs_.erase(rhs_.begin() + row);
    basis_.erase(basis_.begin() + row);
  }

  // Rebuilds the working tableau for the current basis from the pristine
  // rows by Gauss-Jordan elimination with partial pivoting, then restores
  // the active cost row. Run periodically, this bounds how much rounding
  // error a long pivot sequence can accumulate.
  void refactor() {
    std::vector<std::vector<double>> work;
    std::vector<double> wrhs;
    for (size_t r = 0; r < clean_rows_.size(); ++r) {
      if (!alive_[r]) continue;
      work.push_back(clean_rows_[r]);
      wrhs.push_back(clean_rhs_[r]);
    }
    const int m = int(work.size());
    if (m != int(tab_.size())) throw Error("internal: refactor row mismatch");
    std::vector<int> slot_of(size_t(m), -1);
    std::vector<bool> taken(size_t(m), false);
    for (int slot = 0; slot < m; ++slot) {
      int c = basis_[size_t(slot)];
      int pick = -1;
      double mag = kPivotTol;
      for (int r = 0; r < m; ++r) {
        if (taken[size_t(r)]) continue;
        double v = std::fabs(work[size_t(r)][size_t(c)]);
        if (v > mag) {
          mag = v;
          pick = r;
        }
      }
      if (pick < 0)
        throw DegeneratePivotError("singular basis during refactorisation");
      double p = work[size_t(pick)][size_t(c)];
      for (double& a : work[size_t(pick)]) a /= p;
      work[size_t(pick)][size_t(c)] = 1.0;
      wrhs[size_t(pick)] /= p;
      for (int r = 0; r < m; ++r) {
        if (r == pick) continue;
        double f = work[size_t(r)][size_t(c)];
        if (f == 0.0) continue;
        for (int j = 0; j < n_total_; ++j)
          work[size_t(r)][size_t(j)] -= f * work[size_t(pick)][size_t(j)];
        work[size_t(r)][size_t(c)] = 0.0;
        wrhs[size_t(r)] -= f * wrhs[size_t(pick)];
      }
      taken[size_t(pick)] = true;
      slot_of[size_t(pick)] = slot;
    }
    for (int r = 0; r < m; ++r) {
      int slot = slot_of[size_t(r)];
      snap_row(work[size_t(r)]);
      tab_[size_t(slot)] = std::move(work[size_t(r)]);
      double v = wrhs[size_t(r)];
      if (v < 0.0) {
        if (v < -1e-7)
          throw DegeneratePivotError("refactorisation exposed an infeasible basis");
        v = 0.0;
      }
      rhs_[size_t(slot)] = v;
    }
    build_cost_row(cur_cost_);
  }

  // Bland's rule: smallest improving column index enters; among minimal
  // ratios the row with the smallest basic variable index leaves. Every
  // refactor_every_ pivots the tableau is rebuilt from pristine rows, and
  // no terminal verdict (optimal, unbounded, degenerate) is accepted from a
  // drifted tableau: refactor first, then re-examine.
  LpStatus run_simplex(int allowed_cols) {
    const long max_pivots = 20000 + 200L * (long(tab_.size()) + n_total_);
    long since_refactor = 0;
    for (long iter = 0; iter < max_pivots; ++iter) {
      int enter = -1;
      for (int j = 0; j < allowed_cols; ++j) {
        if (cost_[size_t(j)] < -1e-9) {
          enter = j;
          break;
        }
      }
      if (enter < 0) {
        if (since_refactor == 0) return LpStatus::kOptimal;
        refactor();
        since_refactor = 0;
        continue;
      }
      // A coefficient below kUsablePivot cannot anchor a numerically
      // meaningful basis exchange (observed survivors of cancellation sit
      // around 1e-11 on a unit-scaled tableau), so such rows do not take
      // part in the ratio test at all. Rounding can also leave a basic
      // value a hair below zero; treating it as zero keeps the ratio from
      // exploding through a small pivot.
      constexpr double kUsablePivot = 1e-9;
      double best = kInf;
      double tie_max_a = 0.0;
      bool tiny_positive = false;
      for (size_t i = 0; i < tab_.size(); ++i) {
        double a = tab_[i][size_t(enter)];
        if (a > kUsablePivot) {
          double ratio = std::max(rhs_[i], 0.0) / a;
          if (ratio < best - 1e-12) {
            best = ratio;
            tie_max_a = a;
          } else if (ratio <= best + 1e-12) {
            tie_max_a = std::max(tie_max_a, a);
          }
        } else if (a > 0.0) {
          tiny_positive = true;
        }
      }
      // Degenerate vertices tie many rows at the minimal ratio; picking a
      // pivot orders of magnitude below the best available one wrecks the
      // basis conditioning, so the smallest-basic-index rule only applies
      // among rows whose pivot is within a sane factor of the largest tied
      // pivot.
      int leave = -1;
      for (size_t i = 0; i < tab_.size(); ++i) {
        double a = tab_[i][size_t(enter)];
        if (a <= kUsablePivot || a < 1e-6 * tie_max_a) continue;
        double ratio = std::max(rhs_[i], 0.0) / a;
        if (ratio > best + 1e-12) continue;
        if (leave < 0 || basis_[i] < basis_[size_t(leave)]) leave = int(i);
      }
      if (leave < 0) {
        if (since_refactor > 0) {
          refactor();
          since_refactor = 0;
          continue;
        }
        if (tiny_positive)
          throw DegeneratePivotError(
              "simplex pivot below tolerance 1e-11 after scaling");
        return LpStatus::kUnbounded;
      }
      pivot(leave, enter);
      if (++since_refactor >= refactor_every_) {
        refactor();
        since_refactor = 0;
      }
    }
    throw Error("simplex iteration limit exceeded");
  }

  Standard st_;
  std::vector<std::vector<double>> tab_;
  std::vector<double> rhs_;
  std::vector<double> cost_;
  std::vector<double> cur_cost_;  // active objective, full tableau width
  double cost_rhs_ = 0.0;
  std::vector<int> basis_;
  std::vector<std::vector<double>> clean_rows_;  // initial tableau rows
  std::vector<double> clean_rhs_;
  std::vector<bool> alive_;     // pristine rows not dropped as redundant
  std::vector<int> art_src_;    // artificial column k -> pristine row
  long refactor_every_ = 40;
  int n_struct_ = 0;
  int n_before_art_ = 0;
  int n_total_ = 0;
};

}  // namespace lp_detail

// Fast cadence first; if the run degenerates numerically, retry with a
// refactorisation after every pivot, which keeps every ratio test within
// one pivot of freshly computed values. As a last resort the right-hand
// side is perturbed by deterministic amounts far below the feasibility
// tolerance, which removes the degenerate ties that cause the breakdowns.
inline LpSolution solve_lp(const LinearProgram& lp) {
  const lp_detail::Standard st = lp_detail::to_standard(lp);
  struct Attempt {
    long cadence;
    double perturb;
  };
  const Attempt attempts[] = {{40, 0.0}, {1, 0.0}, {40, 1e-9}, {1, 1e-9}};
  for (size_t attempt = 0;; ++attempt) {
    try {
      lp_detail::Standard run = st;
      if (attempts[attempt].perturb > 0.0) {
        const double eps = attempts[attempt].perturb;
        for (size_t i = 0; i < run.rhs.size(); ++i)
          run.rhs[i] += eps * double(i + 1) / double(run.rhs.size()) *
                        std::max(1.0, std::fabs(run.rhs[i]));
      }
      lp_detail::Tableau tab(std::move(run), attempts[attempt].cadence);
      LpSolution sol;
      sol.status = tab.solve();
      if (sol.status != LpStatus::kOptimal) return sol;
      sol.x = tab.solution(lp);
      sol.objective_value = 0.0;
      for (int j = 0; j < lp.num_vars(); ++j)
        sol.objective_value += lp.objective[size_t(j)] * sol.x[size_t(j)];
      return sol;
    } catch (const DegeneratePivotError&) {
      if (attempt + 1 >= std::size(attempts)) throw;
    }
  }
}

// Optimises lp's objective, then refines over the optimal face by each soft
// objective in turn. Soft objectives share lp.sense. Each level is pinned by
// an inequality that permits at most kLexSlack degradation of the previous
// level, which keeps the augmented programs numerically feasible.
inline constexpr double kLexSlack = 1e-9;

inline LpSolution solve_lp_lexicographic(
    LinearProgram lp, const std::vector<std::vector<double>>& soft) {
  LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::kOptimal) return sol;
  const std::vector<double> primary = lp.objective;
  double primary_value = sol.objective_value;
  for (const auto& obj : soft) {
    if (int(obj.size()) != lp.num_vars())
      throw Error("soft objective length mismatch");
    Constraint pin;
    pin.coeffs = lp.objective;
    if (lp.sense == Sense::kMaximize) {
      pin.rel = Relation::kGe;
      pin.rhs = sol.objective_value - kLexSlack;
    } else {
      pin.rel = Relation::kLe;
      pin.rhs = sol.objective_value + kLexSlack;
    }
    lp.constraints.push_back(std::move(pin));
    lp.objective = obj;
    LpSolution next = solve_lp(lp);
    if (next.status != LpStatus::kOptimal) break;  // keep previous level
    sol = next;
  }
  sol.objective_value = 0.0;
  for (int j = 0; j < int(primary.size()); ++j)
    sol.objective_value += primary[size_t(j)] * sol.x[size_t(j)];
  // The pins bound each level's drift by kLexSlack per refinement.
  (void)primary_value;
  return sol;
}

// ---------------------------------------------------------------------------
// Linear systems.

struct LinearSystemSolution {
  bool consistent = false;
  int rank = 0;
  std::vector<double> x;  // particular solution, free variables at 0
};

// Gaussian elimination with partial pivoting on the augmented matrix.
// Handles rectangular systems; reports rank and inconsistency.
inline LinearSystemSolution solve_linear_system(
    std::vector<std::vector<double>> a, std::vector<double> b,
    double tol = 1e-10) {
  const int m = int(a.size());
  const int n = m == 0 ? 0 : int(a[0].size());
  for (const auto& row : a)
    if (int(row.size()) != n) throw Error("ragged matrix");
  if (int(b.size()) != m) throw Error("rhs length mismatch");

  LinearSystemSolution out;
  std::vector<int> pivot_col_of_row(size_t(m), -1);
  int row = 0;
  for (int col = 0; col < n && row < m; ++col) {
    int best = -1;
    double best_abs = tol;
    for (int i = row; i < m; ++i) {
      double v = std::fabs(a[size_t(i)][size_t(col)]);
      if (v > best_abs) {
        best_abs = v;
        best = i;
      }
    }
    if (best < 0) continue;
    std::swap(a[size_t(row)], a[size_t(best)]);
    std::swap(b[size_t(row)], b[size_t(best)]);
    double p = a[size_t(row)][size_t(col)];
    for (int i = 0; i < m; ++i) {
      if (i == row) continue;
      double f = a[size_t(i)][size_t(col)] / p;
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j)
        a[size_t(i)][size_t(j)] -= f * a[size_t(row)][size_t(j)];
      a[size_t(i)][size_t(col)] = 0.0;
      b[size_t(i)] -= f * b[size_t(row)];
    }
    pivot_col_of_row[size_t(row)] = col;
    ++row;
  }
  out.rank = row;
  // Inconsistent iff a zero row has a nonzero rhs.
  for (int i = row; i < m; ++i) {
    if (std::fabs(b[size_t(i)]) > tol * 1e3) {
      out.consistent = false;
      return out;
    }
  }
  out.consistent = true;
  out.x.assign(size_t(n), 0.0);
  for (int i = 0; i < row; ++i) {
    int c = pivot_col_of_row[size_t(i)];
    out.x[size_t(c)] = b[size_t(i)] / a[size_t(i)][size_t(c)];
  }
  return out;
}

}  // namespace eqsynth
