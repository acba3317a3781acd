#pragma once

// Finite normal form games with dense utility tables, plus the strategy
// objects the solvers exchange: independent per-player profiles, joint
// distributions over action tuples, and signal-based correlated profiles.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "eqsynth/common.hpp"

namespace eqsynth {

struct NormalFormGame {
  int num_players = 0;
  std::vector<std::vector<std::string>> actions;  // [player][action]
  JointIndexer indexer;                           // over action counts
  std::vector<double> utils;  // [joint * num_players + player]

  NormalFormGame() = default;
  explicit NormalFormGame(std::vector<std::vector<std::string>> action_names)
      : num_players(int(action_names.size())), actions(std::move(action_names)) {
    std::vector<int> sizes;
    sizes.reserve(actions.size());
    for (const auto& a : actions) sizes.push_back(int(a.size()));
    indexer = JointIndexer(sizes);
    utils.assign(size_t(indexer.total) * size_t(num_players), 0.0);
  }

  int num_actions(int player) const { return indexer.sizes[size_t(player)]; }
  int64_t num_joint() const { return indexer.total; }

  double utility(int64_t joint, int player) const {
    return utils[size_t(joint) * size_t(num_players) + size_t(player)];
  }
  double& utility(int64_t joint, int player) {
    return utils[size_t(joint) * size_t(num_players) + size_t(player)];
  }

  void set_utilities(const std::vector<int>& digits,
                     const std::vector<double>& per_player) {
    int64_t j = indexer.index(digits);
    for (int i = 0; i < num_players; ++i) utility(j, i) = per_player[size_t(i)];
  }

  int action_index(int player, const std::string& name) const {
    const auto& list = actions[size_t(player)];
    auto it = std::find(list.begin(), list.end(), name);
    if (it == list.end())
      throw Error("unknown action '" + name + "' for player " +
                  std::to_string(player + 1));
    return int(it - list.begin());
  }

  // Shape and content checks: at least one action per player, unique action
  // names within a player, finite utilities.
  void validate() const {
    if (num_players <= 0) throw Error("game needs at least one player");
    for (int i = 0; i < num_players; ++i) {
      if (actions[size_t(i)].empty())
        throw Error("player " + std::to_string(i + 1) + " has no actions");
      std::set<std::string> seen;
      for (const auto& a : actions[size_t(i)])
        if (!seen.insert(a).second)
          throw Error("duplicate action '" + a + "' for player " +
                      std::to_string(i + 1));
    }
    for (double u : utils)
      if (!std::isfinite(u)) throw Error("utilities must be finite");
  }
};

// One independent mixed strategy per player.
struct StrategyProfile {
  std::vector<std::vector<double>> probs;  // [player][action]
};

// A single distribution over joint action tuples, indexed like the game's
// utility table.
struct JointStrategy {
  std::vector<double> probs;  // [joint]
};

// Signal-based correlated profile: a distribution over signal tuples plus a
// per-player decoder mapping that player's signal to an action.
struct CorrelatedProfile {
  std::vector<int> signal_counts;          // [player] size of D_i
  JointIndexer signal_indexer;             // over signal_counts
  std::vector<double> signal_dist;         // [signal tuple]
  std::vector<std::vector<int>> decoders;  // [player][signal] -> action

  CorrelatedProfile() = default;
  explicit CorrelatedProfile(std::vector<int> counts)
      : signal_counts(std::move(counts)), signal_indexer(signal_counts) {
    signal_dist.assign(size_t(signal_indexer.total), 0.0);
    decoders.resize(signal_counts.size());
    for (size_t i = 0; i < signal_counts.size(); ++i)
      decoders[i].assign(size_t(signal_counts[i]), 0);
  }
};

inline void check_distribution(const std::vector<double>& p,
                               const std::string& what,
                               double tol = kProbTol) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= -tol)) throw Error(what + ": negative probability");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > tol)
    throw Error(what + ": probabilities sum to " + format_double(sum) +
                ", expected 1");
}

inline void validate_profile(const NormalFormGame& game,
                             const StrategyProfile& sigma) {
  if (int(sigma.probs.size()) != game.num_players)
    throw Error("profile has wrong number of players");
  for (int i = 0; i < game.num_players; ++i) {
    if (int(sigma.probs[size_t(i)].size()) != game.num_actions(i))
      throw Error("profile strategy for player " + std::to_string(i + 1) +
                  " has wrong length");
    check_distribution(sigma.probs[size_t(i)],
                       "player " + std::to_string(i + 1) + " strategy");
  }
}

inline void validate_joint(const NormalFormGame& game,
                           const JointStrategy& tau) {
  if (int64_t(tau.probs.size()) != game.num_joint())
    throw Error("joint strategy has wrong length");
  check_distribution(tau.probs, "joint strategy");
}

// Expected utility vector under independent mixing.
inline std::vector<double> expected_utility_profile(
    const NormalFormGame& game, const StrategyProfile& sigma) {
  validate_profile(game, sigma);
  std::vector<double> out(size_t(game.num_players), 0.0);
  std::vector<int> digits;
  for (int64_t j = 0; j < game.num_joint(); ++j) {
    game.indexer.decode(j, digits);
    double w = 1.0;
    for (int i = 0; i < game.num_players && w != 0.0; ++i)
      w *= sigma.probs[size_t(i)][size_t(digits[size_t(i)])];
    if (w == 0.0) continue;
    for (int i = 0; i < game.num_players; ++i)
      out[size_t(i)] += w * game.utility(j, i);
  }
  return out;
}

// Expected utility vector under a joint distribution.
inline std::vector<double> expected_utility_joint(const NormalFormGame& game,
                                                  const JointStrategy& tau) {
  validate_joint(game, tau);
  std::vector<double> out(size_t(game.num_players), 0.0);
  for (int64_t j = 0; j < game.num_joint(); ++j) {
    double w = tau.probs[size_t(j)];
    if (w == 0.0) continue;
    for (int i = 0; i < game.num_players; ++i)
      out[size_t(i)] += w * game.utility(j, i);
  }
  return out;
}

// Product distribution induced by an independent profile. The converse has
// no preimage in general; correlation cannot be expressed as a profile.
inline JointStrategy profile_to_joint(const NormalFormGame& game,
                                      const StrategyProfile& sigma) {
  validate_profile(game, sigma);
  JointStrategy tau;
  tau.probs.assign(size_t(game.num_joint()), 0.0);
  std::vector<int> digits;
  for (int64_t j = 0; j < game.num_joint(); ++j) {
    game.indexer.decode(j, digits);
    double w = 1.0;
    for (int i = 0; i < game.num_players; ++i)
      w *= sigma.probs[size_t(i)][size_t(digits[size_t(i)])];
    tau.probs[size_t(j)] = w;
  }
  return tau;
}

// Pushes the signal distribution through the decoders. Signals mapping to
// the same action tuple accumulate.
inline JointStrategy correlated_to_joint(const NormalFormGame& game,
                                         const CorrelatedProfile& cp) {
  if (int(cp.decoders.size()) != game.num_players)
    throw Error("correlated profile has wrong number of players");
  check_distribution(cp.signal_dist, "signal distribution");
  for (int i = 0; i < game.num_players; ++i)
    for (int a : cp.decoders[size_t(i)])
      if (a < 0 || a >= game.num_actions(i))
        throw Error("decoder for player " + std::to_string(i + 1) +
                    " maps to an invalid action");
  JointStrategy tau;
  tau.probs.assign(size_t(game.num_joint()), 0.0);
  std::vector<int> sig, act(static_cast<size_t>(game.num_players));
  for (int64_t d = 0; d < cp.signal_indexer.total; ++d) {
    double w = cp.signal_dist[size_t(d)];
    if (w == 0.0) continue;
    cp.signal_indexer.decode(d, sig);
    for (int i = 0; i < game.num_players; ++i)
      act[size_t(i)] = cp.decoders[size_t(i)][size_t(sig[size_t(i)])];
    tau.probs[size_t(game.indexer.index(act))] += w;
  }
  return tau;
}

// Iterated removal of strictly dominated pure actions (pure dominators
// only). original_index maps reduced action ids back to the input game.
struct ReducedGame {
  NormalFormGame game;
  std::vector<std::vector<int>> original_index;  // [player][reduced action]
};

namespace detail {

// True if action `a` strictly dominates `b` for `player`, over the joint
// actions of the currently alive opponents.
inline bool dominates(const NormalFormGame& game,
                      const std::vector<std::vector<int>>& alive, int player,
                      int a, int b) {
  std::vector<size_t> pick(alive.size(), 0);
  std::vector<int> digits(alive.size());
  while (true) {
    for (size_t i = 0; i < alive.size(); ++i) digits[i] = alive[i][pick[i]];
    digits[size_t(player)] = a;
    double ua = game.utility(game.indexer.index(digits), player);
    digits[size_t(player)] = b;
    double ub = game.utility(game.indexer.index(digits), player);
    if (!(ua > ub)) return false;
    // advance over opponents only
    size_t i = 0;
    for (; i < alive.size(); ++i) {
      if (int(i) == player) continue;
      if (++pick[i] < alive[i].size()) break;
      pick[i] = 0;
    }
    if (i == alive.size()) return true;
  }
}

}  // namespace detail

inline ReducedGame remove_dominated(const NormalFormGame& game) {
  game.validate();
  std::vector<std::vector<int>> alive(static_cast<size_t>(game.num_players));
  for (int i = 0; i < game.num_players; ++i) {
    alive[size_t(i)].resize(size_t(game.num_actions(i)));
    std::iota(alive[size_t(i)].begin(), alive[size_t(i)].end(), 0);
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = 0; i < game.num_players && !changed; ++i) {
      auto& mine = alive[size_t(i)];
      if (mine.size() <= 1) continue;
      for (size_t bi = 0; bi < mine.size() && !changed; ++bi) {
        for (size_t ai = 0; ai < mine.size(); ++ai) {
          if (ai == bi) continue;
          if (detail::dominates(game, alive, i, mine[ai], mine[bi])) {
            mine.erase(mine.begin() + long(bi));
            changed = true;
            break;
          }
        }
      }
    }
  }
  ReducedGame out;
  std::vector<std::vector<std::string>> names(static_cast<size_t>(game.num_players));
  for (int i = 0; i < game.num_players; ++i)
    for (int a : alive[size_t(i)])
      names[size_t(i)].push_back(game.actions[size_t(i)][size_t(a)]);
  out.game = NormalFormGame(std::move(names));
  out.original_index = alive;
  std::vector<int> digits, orig(static_cast<size_t>(game.num_players));
  for (int64_t j = 0; j < out.game.num_joint(); ++j) {
    out.game.indexer.decode(j, digits);
    for (int i = 0; i < game.num_players; ++i)
      orig[size_t(i)] = alive[size_t(i)][size_t(digits[size_t(i)])];
    int64_t oj = game.indexer.index(orig);
    for (int i = 0; i < game.num_players; ++i)
      out.game.utility(j, i) = game.utility(oj, i);
  }
  return out;
}

// Utility negation; used to turn cost minimisation into the usual
// maximisation problems.
inline NormalFormGame negate_utilities(const NormalFormGame& game) {
  NormalFormGame g = game;
  for (double& u : g.utils) u = -u;
  return g;
}

inline double welfare(const std::vector<double>& values) {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

inline double spread(const std::vector<double>& values) {
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

// Which optimum to pick among equilibria: total utility or smallest gap
// between the best- and worst-off player.
enum class Criterion { kSocialWelfare, kSocialFairness };

}  // namespace eqsynth
