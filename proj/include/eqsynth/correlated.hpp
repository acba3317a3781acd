#pragma once

// Correlated equilibria of normal form games by linear programming.
//
// A joint distribution p over action tuples is a correlated equilibrium iff
// for every player i and ordered action pair (a, a'):
//
//   sum_{opponents' tuples} (u_i(..a..) - u_i(..a'..)) * p(..a..) >= 0
//
// i.e. no player gains by deviating from a recommended action, conditioned
// on the recommendation. Welfare-optimal and fairness-optimal selections are
// single LPs over this polytope; fairness additionally introduces the
// per-player value variables and a max/min pair, which minimisation makes
// tight, so no disjunctive constraints are needed.

#include <string>
#include <vector>

#include "eqsynth/common.hpp"
#include "eqsynth/linprog.hpp"
#include "eqsynth/nfg.hpp"

namespace eqsynth {

struct CeResult {
  JointStrategy joint;
  std::vector<double> values;
  double welfare = 0.0;
  double spread = 0.0;
};

struct CeCheck {
  // slack per incentive row, ordered by (player, recommended, deviation)
  std::vector<double> slacks;
  double min_slack = 0.0;
  double max_violation = 0.0;

  bool ok(double tol = kEqTol) const { return min_slack >= -tol; }
};

namespace ce_detail {

// Appends the incentive rows, the p <= 1 caps and the distribution row for
// a game whose joint-action probabilities live at [0, num_joint) of an LP
// with num_vars >= num_joint variables. Keeping the caps explicit mirrors
// the usual statement of the program; they are implied by the simplex
// constraint but harmless.
inline void append_ce_rows(LinearProgram& lp, const NormalFormGame& game) {
  const int64_t na = game.num_joint();
  std::vector<int> digits;
  for (int i = 0; i < game.num_players; ++i) {
    for (int a = 0; a < game.num_actions(i); ++a) {
      for (int a2 = 0; a2 < game.num_actions(i); ++a2) {
        if (a2 == a) continue;
        auto& row = lp.add_row(Relation::kGe, 0.0);
        for (int64_t j = 0; j < na; ++j) {
          game.indexer.decode(j, digits);
          if (digits[size_t(i)] != a) continue;
          double u_follow = game.utility(j, i);
          digits[size_t(i)] = a2;
          double u_dev = game.utility(game.indexer.index(digits), i);
          row.coeffs[size_t(j)] = u_follow - u_dev;
        }
      }
    }
  }
  for (int64_t j = 0; j < na; ++j) {
    auto& cap = lp.add_row(Relation::kLe, 1.0);
    cap.coeffs[size_t(j)] = 1.0;
  }
  auto& sum = lp.add_row(Relation::kEq, 1.0);
  for (int64_t j = 0; j < na; ++j) sum.coeffs[size_t(j)] = 1.0;
}

inline JointStrategy extract_joint(const NormalFormGame& game,
                                   const std::vector<double>& x) {
  JointStrategy tau;
  tau.probs.assign(size_t(game.num_joint()), 0.0);
  double sum = 0.0;
  for (int64_t j = 0; j < game.num_joint(); ++j) {
    double p = x[size_t(j)];
    if (p < 0.0) p = 0.0;
    tau.probs[size_t(j)] = p;
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-6)
    throw Error("equilibrium LP produced probabilities summing to " +
                format_double(sum));
  for (double& p : tau.probs) p /= sum;
  return tau;
}

inline CeResult finish(const NormalFormGame& game,
                       const std::vector<double>& x) {
  CeResult r;
  r.joint = extract_joint(game, x);
  r.values = expected_utility_joint(game, r.joint);
  r.welfare = welfare(r.values);
  r.spread = spread(r.values);
  return r;
}

}  // namespace ce_detail

// The correlated-equilibrium feasibility program with the joint-action
// probabilities as variables and a zero objective; callers fill in the
// objective. Row count is sum_i |A_i|(|A_i|-1) + |A| + 1.
inline LinearProgram build_ce_constraints(const NormalFormGame& game) {
  game.validate();
  LinearProgram lp;
  lp.sense = Sense::kMaximize;
  lp.objective.assign(size_t(game.num_joint()), 0.0);
  ce_detail::append_ce_rows(lp, game);
  return lp;
}

// Welfare-maximal correlated equilibrium. Ties are resolved by maximising
// player values lexicographically, which keeps the output independent of
// row ordering.
inline CeResult solve_swce(const NormalFormGame& game) {
  LinearProgram lp = build_ce_constraints(game);
  const int64_t na = game.num_joint();
  for (int64_t j = 0; j < na; ++j)
    for (int i = 0; i < game.num_players; ++i)
      lp.objective[size_t(j)] += game.utility(j, i);
  std::vector<std::vector<double>> soft;
  for (int i = 0; i < game.num_players; ++i) {
    std::vector<double> v(size_t(na), 0.0);
    for (int64_t j = 0; j < na; ++j) v[size_t(j)] = game.utility(j, i);
    soft.push_back(std::move(v));
  }
  LpSolution sol = solve_lp_lexicographic(lp, soft);
  if (sol.status != LpStatus::kOptimal)
    throw Error("correlated equilibrium LP failed unexpectedly");
  return ce_detail::finish(game, sol.x);
}

// Fairness-optimal correlated equilibrium: minimises the difference between
// the best- and worst-off players' expected utilities. Among minimal-spread
// equilibria, welfare and then player values are maximised as soft
// objectives.
inline CeResult solve_sfce(const NormalFormGame& game) {
  game.validate();
  const int64_t na = game.num_joint();
  const int n = game.num_players;
  // variables: p_0..p_{na-1}, v_1..v_n, vmax, vmin
  const int nv = int(na) + n + 2;
  const int v_at = int(na);
  const int vmax_at = int(na) + n;
  const int vmin_at = vmax_at + 1;

  LinearProgram lp;
  lp.sense = Sense::kMinimize;
  lp.objective.assign(size_t(nv), 0.0);
  lp.objective[size_t(vmax_at)] = 1.0;
  lp.objective[size_t(vmin_at)] = -1.0;
  lp.bounds.assign(size_t(nv), VarBounds{});
  for (int k = v_at; k < nv; ++k) lp.bounds[size_t(k)] = VarBounds{-kInf, kInf};
  ce_detail::append_ce_rows(lp, game);
  for (int i = 0; i < n; ++i) {
    auto& def = lp.add_row(Relation::kEq, 0.0);  // v_i = sum_j u_i(j) p_j
    for (int64_t j = 0; j < na; ++j) def.coeffs[size_t(j)] = game.utility(j, i);
    def.coeffs[size_t(v_at + i)] = -1.0;
    auto& ub = lp.add_row(Relation::kGe, 0.0);  // vmax >= v_i
    ub.coeffs[size_t(vmax_at)] = 1.0;
    ub.coeffs[size_t(v_at + i)] = -1.0;
    auto& lb = lp.add_row(Relation::kLe, 0.0);  // vmin <= v_i
    lb.coeffs[size_t(vmin_at)] = 1.0;
    lb.coeffs[size_t(v_at + i)] = -1.0;
  }
  std::vector<std::vector<double>> soft;
  {
    std::vector<double> w(size_t(nv), 0.0);  // minimise -sum v_i
    for (int i = 0; i < n; ++i) w[size_t(v_at + i)] = -1.0;
    soft.push_back(std::move(w));
    for (int i = 0; i < n; ++i) {
      std::vector<double> e(size_t(nv), 0.0);
      e[size_t(v_at + i)] = -1.0;
      soft.push_back(std::move(e));
    }
  }
  LpSolution sol = solve_lp_lexicographic(lp, soft);
  if (sol.status != LpStatus::kOptimal)
    throw Error("fair correlated equilibrium LP failed unexpectedly");
  return ce_detail::finish(game, sol.x);
}

inline CeResult solve_ce(const NormalFormGame& game, Criterion crit) {
  return crit == Criterion::kSocialWelfare ? solve_swce(game) : solve_sfce(game);
}

// Cost variant: equilibria of the negated game, reported in the original
// orientation (values are costs to be minimised).
inline CeResult solve_cost_ce(const NormalFormGame& game, Criterion crit) {
  CeResult r = solve_ce(negate_utilities(game), crit);
  for (double& v : r.values) v = -v;
  r.welfare = welfare(r.values);
  r.spread = spread(r.values);
  return r;
}

// Evaluates every incentive row at `joint`. The joint is a correlated
// equilibrium iff the most negative slack is above -tol.
inline CeCheck verify_ce(const NormalFormGame& game, const JointStrategy& joint) {
  validate_joint(game, joint);
  CeCheck check;
  check.min_slack = kInf;
  std::vector<int> digits;
  for (int i = 0; i < game.num_players; ++i) {
    for (int a = 0; a < game.num_actions(i); ++a) {
      for (int a2 = 0; a2 < game.num_actions(i); ++a2) {
        if (a2 == a) continue;
        double slack = 0.0;
        for (int64_t j = 0; j < game.num_joint(); ++j) {
          game.indexer.decode(j, digits);
          if (digits[size_t(i)] != a) continue;
          double p = joint.probs[size_t(j)];
          if (p == 0.0) continue;
          double u_follow = game.utility(j, i);
          digits[size_t(i)] = a2;
          slack += p * (u_follow - game.utility(game.indexer.index(digits), i));
        }
        check.slacks.push_back(slack);
        check.min_slack = std::min(check.min_slack, slack);
      }
    }
  }
  if (check.slacks.empty()) check.min_slack = 0.0;  // single-action players
  check.max_violation = std::max(0.0, -check.min_slack);
  return check;
}

}  // namespace eqsynth
