#pragma once

// Nash equilibria of normal-form games. Two players get exhaustive support
// enumeration (each candidate support pair reduces to a linear indifference
// system); three or more get a best-effort small-support search that solves
// the polynomial indifference system with damped Newton iteration. Both
// paths report exact supports and verified utility vectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "eqsynth/common.hpp"
#include "eqsynth/nfg.hpp"

namespace eqsynth {

struct NeResult {
  StrategyProfile profile;
  std::vector<double> values;            // expected utility per player
  std::vector<std::vector<int>> support; // actions with positive probability
  bool degenerate = false; // support admits a continuum; one representative
};

// Best pure deviation gain per player. The profile is an equilibrium iff
// every gain is at most the tolerance. Gains are never materially negative:
// the best pure response is at least as good as any mixture.
struct NeCheck {
  std::vector<double> gains;
  double max_gain = 0.0;
  double tolerance = kEqTol;
  bool ok() const { return max_gain <= tolerance; }
};

namespace ne_detail {

// resp[i][a] = player i's expected utility for pure action a against the
// other players' mixtures. One sweep over the joint table.
inline std::vector<std::vector<double>> pure_response_table(
    const NormalFormGame& game, const StrategyProfile& sigma) {
  std::vector<std::vector<double>> resp(static_cast<size_t>(game.num_players));
  for (int i = 0; i < game.num_players; ++i)
    resp[size_t(i)].assign(size_t(game.num_actions(i)), 0.0);
  std::vector<int> digits;
  for (int64_t j = 0; j < game.indexer.total; ++j) {
    game.indexer.decode(j, digits);
    for (int i = 0; i < game.num_players; ++i) {
      double w = 1.0;
      for (int k = 0; k < game.num_players; ++k)
        if (k != i) w *= sigma.probs[size_t(k)][size_t(digits[size_t(k)])];
      if (w != 0.0)
        resp[size_t(i)][size_t(digits[size_t(i)])] += w * game.utility(j, i);
    }
  }
  return resp;
}

struct LinSolve {
  bool consistent = false;
  bool unique = false;
  std::vector<double> x;
};

// Row-reduces [m | rhs] with partial pivoting after scaling each row to unit
// max magnitude. Free columns take the caller's default values (probability
// columns get an equal share, so a rank-deficient support still produces an
// interior representative); pivot columns are then solved against them.
inline LinSolve solve_linear(std::vector<std::vector<double>> m,
                             std::vector<double> rhs,
                             const std::vector<double>& free_defaults) {
  const size_t rows = m.size();
  const size_t cols = rows ? m[0].size() : 0;
  for (size_t i = 0; i < rows; ++i) {
    double mx = std::fabs(rhs[i]);
    for (double a : m[i]) mx = std::max(mx, std::fabs(a));
    if (mx > 0.0) {
      for (double& a : m[i]) a /= mx;
      rhs[i] /= mx;
    }
  }
  std::vector<int> pivot_row(cols, -1);
  size_t r = 0;
  for (size_t c = 0; c < cols && r < rows; ++c) {
    size_t best = r;
    for (size_t i = r + 1; i < rows; ++i)
      if (std::fabs(m[i][c]) > std::fabs(m[best][c])) best = i;
    if (std::fabs(m[best][c]) <= 1e-9) continue;
    std::swap(m[r], m[best]);
    std::swap(rhs[r], rhs[best]);
    const double piv = m[r][c];
    for (size_t j = c; j < cols; ++j) m[r][j] /= piv;
    rhs[r] /= piv;
    for (size_t i = 0; i < rows; ++i) {
      if (i == r) continue;
      const double f = m[i][c];
      if (f == 0.0) continue;
      for (size_t j = c; j < cols; ++j) m[i][j] -= f * m[r][j];
      rhs[i] -= f * rhs[r];
    }
    pivot_row[c] = int(r);
    ++r;
  }
  LinSolve out;
  for (size_t i = r; i < rows; ++i)
    if (std::fabs(rhs[i]) > 1e-7) return out;
  out.consistent = true;
  out.unique = (r == cols);
  out.x.assign(cols, 0.0);
  for (size_t c = 0; c < cols; ++c)
    if (pivot_row[c] < 0) out.x[c] = free_defaults[c];
  for (size_t c = 0; c < cols; ++c) {
    if (pivot_row[c] < 0) continue;
    double v = rhs[size_t(pivot_row[c])];
    for (size_t c2 = 0; c2 < cols; ++c2)
      if (pivot_row[c2] < 0) v -= m[size_t(pivot_row[c])][c2] * out.x[c2];
    out.x[c] = v;
  }
  return out;
}

// Mixture for `mixer` (over mix_support, plus the common value as the last
// unknown) that makes every action in target_support worth the same to
// `target`. Rows: one indifference per supported action, then the sum-to-1.
inline LinSolve indifference_mixture(const NormalFormGame& game, int target,
                                     const std::vector<int>& target_support,
                                     int mixer,
                                     const std::vector<int>& mix_support) {
  const size_t k = mix_support.size();
  std::vector<std::vector<double>> m;
  std::vector<double> rhs;
  std::vector<int> digits(2, 0);
  for (int a : target_support) {
    std::vector<double> row(k + 1, 0.0);
    for (size_t b = 0; b < k; ++b) {
      digits[size_t(target)] = a;
      digits[size_t(mixer)] = mix_support[b];
      row[b] = game.utility(game.indexer.index(digits), target);
    }
    row[k] = -1.0;
    m.push_back(std::move(row));
    rhs.push_back(0.0);
  }
  std::vector<double> sum_row(k + 1, 0.0);
  for (size_t b = 0; b < k; ++b) sum_row[b] = 1.0;
  m.push_back(std::move(sum_row));
  rhs.push_back(1.0);
  std::vector<double> defaults(k + 1, 0.0);
  for (size_t b = 0; b < k; ++b) defaults[b] = 1.0 / double(k);
  return solve_linear(std::move(m), std::move(rhs), defaults);
}

inline std::vector<int> mask_to_actions(uint32_t mask, int n) {
  std::vector<int> out;
  for (int a = 0; a < n; ++a)
    if (mask & (1u << a)) out.push_back(a);
  return out;
}

// Clamps stray negatives from the linear solve and renormalizes. Rejects
// mixtures that are not positive on every support action: those belong to a
// smaller support and are found there.
inline bool adopt_mixture(const std::vector<double>& raw,
                          const std::vector<int>& support, int num_actions,
                          std::vector<double>& out) {
  double sum = 0.0;
  for (size_t b = 0; b < support.size(); ++b) {
    if (raw[b] < 1e-9) return false;
    sum += raw[b];
  }
  out.assign(size_t(num_actions), 0.0);
  for (size_t b = 0; b < support.size(); ++b)
    out[size_t(support[b])] = raw[b] / sum;
  return true;
}

}  // namespace ne_detail

inline NeCheck verify_ne(const NormalFormGame& game,
                         const StrategyProfile& sigma,
                         double tolerance = kEqTol) {
  validate_profile(game, sigma);
  auto resp = ne_detail::pure_response_table(game, sigma);
  NeCheck out;
  out.tolerance = tolerance;
  out.gains.assign(size_t(game.num_players), 0.0);
  for (int i = 0; i < game.num_players; ++i) {
    double mixed = 0.0, best = -kInf;
    for (int a = 0; a < game.num_actions(i); ++a) {
      mixed += sigma.probs[size_t(i)][size_t(a)] * resp[size_t(i)][size_t(a)];
      best = std::max(best, resp[size_t(i)][size_t(a)]);
    }
    out.gains[size_t(i)] = best - mixed;
  }
  out.max_gain = *std::max_element(out.gains.begin(), out.gains.end());
  return out;
}

// All equilibria of a two-player game, one support pair at a time: player
// 2's mixture comes from player 1's indifference system and vice versa. A
// rank-deficient system contributes one interior representative, flagged.
inline std::vector<NeResult> enumerate_ne_2p(const NormalFormGame& game) {
  if (game.num_players != 2)
    throw Error("enumerate_ne_2p needs exactly two players");
  const int n1 = game.num_actions(0);
  const int n2 = game.num_actions(1);
  if (n1 > 20 || n2 > 20)
    throw Error("support enumeration is limited to 20 actions per player");
  std::vector<NeResult> out;
  for (uint32_t m1 = 1; m1 < (1u << n1); ++m1) {
    const std::vector<int> s1 = ne_detail::mask_to_actions(m1, n1);
    for (uint32_t m2 = 1; m2 < (1u << n2); ++m2) {
      const std::vector<int> s2 = ne_detail::mask_to_actions(m2, n2);
      auto ls_y = ne_detail::indifference_mixture(game, 0, s1, 1, s2);
      if (!ls_y.consistent) continue;
      auto ls_x = ne_detail::indifference_mixture(game, 1, s2, 0, s1);
      if (!ls_x.consistent) continue;
      NeResult r;
      r.profile.probs.resize(2);
      if (!ne_detail::adopt_mixture(ls_x.x, s1, n1, r.profile.probs[0]))
        continue;
      if (!ne_detail::adopt_mixture(ls_y.x, s2, n2, r.profile.probs[1]))
        continue;
      NeCheck check = verify_ne(game, r.profile, 1e-7);
      if (!check.ok()) continue;
      r.values = expected_utility_profile(game, r.profile);
      r.support = {s1, s2};
      r.degenerate = !ls_x.unique || !ls_y.unique;
      out.push_back(std::move(r));
    }
  }
  if (out.empty())
    throw Error("no equilibrium found; the game is numerically degenerate");
  return out;
}

inline NeResult select_optimal_ne(const std::vector<NeResult>& results,
                                  Criterion crit) {
  if (results.empty()) throw Error("select_optimal_ne: empty equilibrium list");
  auto score = [crit](const NeResult& r) {
    // Lower is better for both criteria.
    return crit == Criterion::kSocialWelfare ? -welfare(r.values)
                                             : spread(r.values);
  };
  auto better = [&](const NeResult& a, const NeResult& b) {
    const double sa = score(a), sb = score(b);
    if (sa < sb - 1e-9) return true;
    if (sb < sa - 1e-9) return false;
    // Tie: prefer the lexicographically larger value vector.
    for (size_t i = 0; i < a.values.size(); ++i) {
      if (a.values[i] > b.values[i] + 1e-9) return true;
      if (b.values[i] > a.values[i] + 1e-9) return false;
    }
    return false;
  };
  const NeResult* best = &results[0];
  for (const NeResult& r : results)
    if (better(r, *best)) best = &r;
  return *best;
}

namespace ne_detail {

// State for one support tuple of the n-player search: probabilities per
// supported action plus one value variable per player, in that order.
struct NewtonSystem {
  const NormalFormGame* game;
  std::vector<std::vector<int>> support;
  std::vector<int> offset;  // variable index of each player's first action
  int num_vars = 0;

  int value_var(int i) const {
    return num_vars - game->num_players + i;
  }

  // Residuals: indifference of every supported action with the player's
  // value variable, then each player's sum-to-1 row.
  std::vector<double> residual(const std::vector<double>& z) const {
    const int n = game->num_players;
    std::vector<double> f(static_cast<size_t>(num_vars), 0.0);
    std::vector<int> digits(static_cast<size_t>(n), 0);
    std::vector<size_t> pos(support.size(), 0);
    for (;;) {  // odometer over the support subgame
      for (int i = 0; i < n; ++i)
        digits[size_t(i)] = support[size_t(i)][pos[size_t(i)]];
      const int64_t j = game->indexer.index(digits);
      for (int i = 0; i < n; ++i) {
        double w = 1.0;
        for (int k = 0; k < n; ++k)
          if (k != i) w *= z[size_t(offset[size_t(k)]) + pos[size_t(k)]];
        f[size_t(offset[size_t(i)]) + pos[size_t(i)]] +=
            w * game->utility(j, i);
      }
      int carry = n - 1;
      while (carry >= 0 &&
             ++pos[size_t(carry)] == support[size_t(carry)].size()) {
        pos[size_t(carry)] = 0;
        --carry;
      }
      if (carry < 0) break;
    }
    for (int i = 0; i < n; ++i) {
      double sum = 0.0;
      for (size_t a = 0; a < support[size_t(i)].size(); ++a) {
        f[size_t(offset[size_t(i)]) + a] -= z[size_t(value_var(i))];
        sum += z[size_t(offset[size_t(i)]) + a];
      }
      f[size_t(value_var(i))] = sum - 1.0;
    }
    return f;
  }

  // Analytic Jacobian over the same support odometer.
  std::vector<std::vector<double>> jacobian(const std::vector<double>& z) const {
    const int n = game->num_players;
    std::vector<std::vector<double>> jac(
        static_cast<size_t>(num_vars),
        std::vector<double>(static_cast<size_t>(num_vars), 0.0));
    std::vector<int> digits(static_cast<size_t>(n), 0);
    std::vector<size_t> pos(support.size(), 0);
    for (;;) {
      for (int i = 0; i < n; ++i)
        digits[size_t(i)] = support[size_t(i)][pos[size_t(i)]];
      const int64_t j = game->indexer.index(digits);
      for (int i = 0; i < n; ++i) {
        const double u = game->utility(j, i);
        if (u == 0.0) continue;
        const size_t row = size_t(offset[size_t(i)]) + pos[size_t(i)];
        for (int k = 0; k < n; ++k) {
          if (k == i) continue;
          double w = 1.0;
          for (int l = 0; l < n; ++l)
            if (l != i && l != k)
              w *= z[size_t(offset[size_t(l)]) + pos[size_t(l)]];
          jac[row][size_t(offset[size_t(k)]) + pos[size_t(k)]] += w * u;
        }
      }
      int carry = n - 1;
      while (carry >= 0 &&
             ++pos[size_t(carry)] == support[size_t(carry)].size()) {
        pos[size_t(carry)] = 0;
        --carry;
      }
      if (carry < 0) break;
    }
    for (int i = 0; i < n; ++i) {
      for (size_t a = 0; a < support[size_t(i)].size(); ++a) {
        jac[size_t(offset[size_t(i)]) + a][size_t(value_var(i))] = -1.0;
        jac[size_t(value_var(i))][size_t(offset[size_t(i)]) + a] = 1.0;
      }
    }
    return jac;
  }
};

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double a : v) m = std::max(m, std::fabs(a));
  return m;
}

}  // namespace ne_detail

// Best-effort equilibrium search for three or more players. Enumerates
// support tuples up to the given size and runs damped Newton iteration with
// eight deterministic restarts on each tuple's indifference system. Accepted
// solutions have best-deviation gain at most 1e-6; duplicates within 1e-5
// are merged. An empty result does not prove non-existence.
inline std::vector<NeResult> search_ne_np(const NormalFormGame& game,
                                          int max_support_size = 3,
                                          int inner_iterations = 100) {
  if (game.num_players < 3)
    throw Error("search_ne_np needs at least three players");
  const int n = game.num_players;
  constexpr int kStarts = 8;
  SplitMix64 rng(0xC0FFEE);

  // Per-player candidate supports in canonical mask order.
  std::vector<std::vector<std::vector<int>>> cand(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int ni = game.num_actions(i);
    for (uint32_t m = 1; m < (1u << ni); ++m) {
      auto s = ne_detail::mask_to_actions(m, ni);
      if (int(s.size()) <= max_support_size) cand[size_t(i)].push_back(std::move(s));
    }
  }

  std::vector<NeResult> out;
  auto flat = [&](const StrategyProfile& p) {
    std::vector<double> v;
    for (const auto& row : p.probs) v.insert(v.end(), row.begin(), row.end());
    return v;
  };

  std::vector<size_t> pick(static_cast<size_t>(n), 0);
  for (;;) {  // odometer over support tuples
    ne_detail::NewtonSystem sys;
    sys.game = &game;
    sys.offset.assign(static_cast<size_t>(n), 0);
    int vars = 0;
    for (int i = 0; i < n; ++i) {
      sys.support.push_back(cand[size_t(i)][pick[size_t(i)]]);
      sys.offset[size_t(i)] = vars;
      vars += int(sys.support.back().size());
    }
    sys.num_vars = vars + n;

    for (int start = 0; start < kStarts; ++start) {
      std::vector<double> z(static_cast<size_t>(sys.num_vars), 0.0);
      for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        const size_t k = sys.support[size_t(i)].size();
        for (size_t a = 0; a < k; ++a) {
          const double e = 1e-9 - std::log(1.0 - rng.next_double());
          z[size_t(sys.offset[size_t(i)]) + a] = e;
          sum += e;
        }
        for (size_t a = 0; a < k; ++a)
          z[size_t(sys.offset[size_t(i)]) + a] /= sum;
      }
      std::vector<double> f = sys.residual(z);
      for (int i = 0; i < n; ++i) {  // start each value at the implied mean
        const size_t k = sys.support[size_t(i)].size();
        double mean = 0.0;
        for (size_t a = 0; a < k; ++a)
          mean += f[size_t(sys.offset[size_t(i)]) + a] + z[size_t(sys.value_var(i))];
        z[size_t(sys.value_var(i))] = mean / double(k);
      }
      f = sys.residual(z);

      bool converged = ne_detail::max_abs(f) <= 1e-10;
      for (int it = 0; it < inner_iterations && !converged; ++it) {
        auto jac = sys.jacobian(z);
        std::vector<double> rhs(f.size());
        for (size_t r = 0; r < f.size(); ++r) rhs[r] = -f[r];
        auto step = ne_detail::solve_linear(
            jac, rhs, std::vector<double>(f.size(), 0.0));
        if (!step.consistent || !step.unique) break;
        const double f0 = ne_detail::max_abs(f);
        double lambda = 1.0;
        std::vector<double> zn(z.size());
        for (;;) {
          for (size_t v = 0; v < z.size(); ++v)
            zn[v] = z[v] + lambda * step.x[v];
          auto fn = sys.residual(zn);
          if (ne_detail::max_abs(fn) <= (1.0 - 0.5 * lambda) * f0 ||
              lambda < 1e-3) {
            z.swap(zn);
            f.swap(fn);
            break;
          }
          lambda *= 0.5;
        }
        converged = ne_detail::max_abs(f) <= 1e-10;
      }
      if (!converged) continue;

      NeResult r;
      r.profile.probs.resize(static_cast<size_t>(n));
      bool usable = true;
      for (int i = 0; i < n && usable; ++i) {
        const size_t k = sys.support[size_t(i)].size();
        std::vector<double> raw(k);
        for (size_t a = 0; a < k; ++a)
          raw[a] = z[size_t(sys.offset[size_t(i)]) + a];
        usable = ne_detail::adopt_mixture(raw, sys.support[size_t(i)],
                                          game.num_actions(i),
                                          r.profile.probs[size_t(i)]);
      }
      if (!usable) continue;
      if (!verify_ne(game, r.profile, 1e-6).ok()) continue;
      r.values = expected_utility_profile(game, r.profile);
      r.support = sys.support;
      const auto rf = flat(r.profile);
      bool dup = false;
      for (const NeResult& seen : out) {
        const auto sf = flat(seen.profile);
        double d = 0.0;
        for (size_t v = 0; v < rf.size(); ++v)
          d = std::max(d, std::fabs(rf[v] - sf[v]));
        if (d <= 1e-5) {
          dup = true;
          break;
        }
      }
      if (!dup) out.push_back(std::move(r));
    }

    int carry = n - 1;
    while (carry >= 0 && ++pick[size_t(carry)] == cand[size_t(carry)].size()) {
      pick[size_t(carry)] = 0;
      --carry;
    }
    if (carry < 0) break;
  }
  return out;
}

}  // namespace eqsynth
