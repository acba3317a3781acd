#pragma once

// Concurrent stochastic games: states, per-player action alphabets with an
// implicit idle action, an action assignment per state, and a partial
// probabilistic transition function defined exactly on the consistent joint
// actions. Also: reward structures, coalition-game construction, and the
// qualitative sure-reachability check that gates unbounded objectives.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "eqsynth/common.hpp"

namespace eqsynth {

// Joint actions are mixed-radix codes over per-player digits where digit 0
// is the idle action and digit a+1 is the player's action a. A player's
// digit must be 0 exactly when it has no enabled action in the state.
struct Csg {
  int num_players = 0;
  int num_states = 0;
  std::vector<int> initial_states;
  std::vector<std::vector<std::string>> action_names;  // [player][action]
  std::vector<std::vector<std::vector<int>>> enabled;  // [state][player]
  std::vector<std::string> atoms;
  std::vector<std::vector<bool>> labels;  // [state][atom]
  JointIndexer aidx;                      // radix |A_i|+1 per player

  // trans[state]: joint code -> distribution, entries sorted by target.
  std::vector<std::map<int64_t, std::vector<std::pair<int, double>>>> trans;

  Csg() = default;
  Csg(int players, int states,
      std::vector<std::vector<std::string>> names)
      : num_players(players),
        num_states(states),
        action_names(std::move(names)) {
    std::vector<int> radix(static_cast<size_t>(players));
    for (int i = 0; i < players; ++i)
      radix[size_t(i)] = int(action_names[size_t(i)].size()) + 1;
    aidx = JointIndexer(radix);
    enabled.assign(size_t(states),
                   std::vector<std::vector<int>>(static_cast<size_t>(players)));
    labels.assign(size_t(states), {});
    trans.assign(size_t(states), {});
  }

  int num_actions(int player) const {
    return int(action_names[size_t(player)].size());
  }

  int atom_index(const std::string& name) const {
    for (size_t k = 0; k < atoms.size(); ++k)
      if (atoms[k] == name) return int(k);
    return -1;
  }

  int add_atom(const std::string& name) {
    int k = atom_index(name);
    if (k >= 0) return k;
    atoms.push_back(name);
    for (auto& row : labels) row.push_back(false);
    return int(atoms.size()) - 1;
  }

  bool has_label(int s, int atom) const {
    return labels[size_t(s)][size_t(atom)];
  }

  void set_label(int s, int atom) { labels[size_t(s)][size_t(atom)] = true; }

  // Digits player i may choose in s: the enabled actions, or the idle digit
  // when nothing is enabled.
  std::vector<int> enabled_digits(int s, int i) const {
    const auto& acts = enabled[size_t(s)][size_t(i)];
    if (acts.empty()) return {0};
    std::vector<int> d;
    d.reserve(acts.size());
    for (int a : acts) d.push_back(a + 1);
    return d;
  }

  bool idles(int s, int i) const { return enabled[size_t(s)][size_t(i)].empty(); }

  // All consistent joint codes of a state, ascending.
  std::vector<int64_t> consistent_joints(int s) const {
    std::vector<std::vector<int>> choice(static_cast<size_t>(num_players));
    int64_t count = 1;
    for (int i = 0; i < num_players; ++i) {
      choice[size_t(i)] = enabled_digits(s, i);
      count *= int64_t(choice[size_t(i)].size());
    }
    std::vector<int64_t> out;
    out.reserve(size_t(count));
    std::vector<size_t> pick(static_cast<size_t>(num_players), 0);
    std::vector<int> digits(static_cast<size_t>(num_players));
    for (;;) {
      for (int i = 0; i < num_players; ++i)
        digits[size_t(i)] = choice[size_t(i)][pick[size_t(i)]];
      out.push_back(aidx.index(digits));
      int carry = num_players - 1;
      while (carry >= 0 &&
             ++pick[size_t(carry)] == choice[size_t(carry)].size()) {
        pick[size_t(carry)] = 0;
        --carry;
      }
      if (carry < 0) break;
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::string format_joint(int64_t code) const {
    std::vector<int> d = aidx.decode(code);
    std::string out = "(";
    for (int i = 0; i < num_players; ++i) {
      if (i) out += ",";
      out += d[size_t(i)] == 0
                 ? "-"
                 : action_names[size_t(i)][size_t(d[size_t(i)] - 1)];
    }
    return out + ")";
  }

  const std::vector<std::pair<int, double>>& dist(int s, int64_t code) const {
    auto it = trans[size_t(s)].find(code);
    if (it == trans[size_t(s)].end())
      throw Error("no transition from state " + std::to_string(s) +
                  " under " + format_joint(code));
    return it->second;
  }

  void validate() const {
    if (num_players <= 0) throw Error("game needs at least one player");
    if (num_states <= 0) throw Error("game needs at least one state");
    if (initial_states.empty()) throw Error("no initial state");
    for (int s : initial_states)
      if (s < 0 || s >= num_states)
        throw Error("initial state " + std::to_string(s) + " out of range");
    for (int s = 0; s < num_states; ++s) {
      for (int i = 0; i < num_players; ++i) {
        const auto& acts = enabled[size_t(s)][size_t(i)];
        for (size_t k = 0; k < acts.size(); ++k) {
          if (acts[k] < 0 || acts[k] >= num_actions(i))
            throw Error("enabled action out of range in state " +
                        std::to_string(s));
          if (k > 0 && acts[k] <= acts[k - 1])
            throw Error("enabled actions must be sorted and unique");
        }
      }
      auto joints = consistent_joints(s);
      if (trans[size_t(s)].size() != joints.size())
        throw Error("state " + std::to_string(s) + " defines " +
                    std::to_string(trans[size_t(s)].size()) +
                    " transitions for " + std::to_string(joints.size()) +
                    " consistent joint actions");
      for (int64_t code : joints) {
        auto it = trans[size_t(s)].find(code);
        if (it == trans[size_t(s)].end())
          throw Error("state " + std::to_string(s) +
                      " is missing a transition under " + format_joint(code));
        double sum = 0.0;
        int prev = -1;
        for (auto [t, p] : it->second) {
          if (t < 0 || t >= num_states)
            throw Error("transition target out of range in state " +
                        std::to_string(s));
          if (t <= prev) throw Error("distribution entries must be sorted");
          if (p < 0.0) throw Error("negative transition probability");
          prev = t;
          sum += p;
        }
        if (std::fabs(sum - 1.0) > kProbTol)
          throw Error("distribution from state " + std::to_string(s) +
                      " under " + format_joint(code) + " sums to " +
                      format_double(sum));
      }
    }
  }
};

// Action and state rewards, default zero where unspecified.
struct RewardStructure {
  std::string name;
  std::vector<double> state_rewards;                      // [state]
  std::vector<std::map<int64_t, double>> action_rewards;  // [state][code]

  RewardStructure() = default;
  RewardStructure(std::string n, int num_states)
      : name(std::move(n)),
        state_rewards(static_cast<size_t>(num_states), 0.0),
        action_rewards(static_cast<size_t>(num_states)) {}

  double state_reward(int s) const { return state_rewards[size_t(s)]; }

  double action_reward(int s, int64_t code) const {
    auto it = action_rewards[size_t(s)].find(code);
    return it == action_rewards[size_t(s)].end() ? 0.0 : it->second;
  }
};

struct CoalitionPartition {
  std::vector<std::vector<int>> coalitions;  // ordered; position = j_C

  friend bool operator==(const CoalitionPartition&,
                         const CoalitionPartition&) = default;

  void validate(int num_players) const {
    std::vector<int> owner(static_cast<size_t>(num_players), -1);
    for (size_t c = 0; c < coalitions.size(); ++c) {
      if (coalitions[c].empty()) throw Error("empty coalition");
      for (int j : coalitions[c]) {
        if (j < 0 || j >= num_players)
          throw Error("player " + std::to_string(j + 1) +
                      " out of range in coalition");
        if (owner[size_t(j)] >= 0)
          throw Error("player " + std::to_string(j + 1) +
                      " appears in two coalitions");
        owner[size_t(j)] = int(c);
      }
    }
    for (int j = 0; j < num_players; ++j)
      if (owner[size_t(j)] < 0)
        throw Error("player " + std::to_string(j + 1) +
                    " belongs to no coalition");
  }
};

// The m-player game whose player i plays tuples of coalition C_i's member
// actions. Composite action c of coalition i stands for member digits
// member_digits[i][c]; the all-idle tuple is excluded, so a coalition idles
// as a whole exactly when none of its members has an enabled action.
struct CoalitionGame {
  Csg game;
  CoalitionPartition partition;
  std::vector<std::vector<std::vector<int>>> member_digits;  // [i][c][pos]
  std::vector<int64_t> to_original;  // coalition joint code -> original code

  // Reward structure over composite joint actions; state rewards carry over.
  RewardStructure translate(const RewardStructure& r) const {
    RewardStructure out(r.name, game.num_states);
    out.state_rewards = r.state_rewards;
    for (int s = 0; s < game.num_states; ++s) {
      for (const auto& [code, d] : game.trans[size_t(s)]) {
        (void)d;
        double v = r.action_reward(s, to_original[size_t(code)]);
        if (v != 0.0) out.action_rewards[size_t(s)][code] = v;
      }
    }
    return out;
  }
};

inline CoalitionGame build_coalition_game(const Csg& g,
                                          const CoalitionPartition& part) {
  part.validate(g.num_players);
  const int m = int(part.coalitions.size());

  // Composite alphabets: all member-digit tuples except all-idle. A
  // one-member coalition keeps the member's own action names.
  std::vector<std::vector<std::string>> names(static_cast<size_t>(m));
  std::vector<std::vector<std::vector<int>>> member_digits(
      static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    const auto& members = part.coalitions[size_t(i)];
    std::vector<int> radix(members.size());
    for (size_t k = 0; k < members.size(); ++k)
      radix[k] = g.num_actions(members[k]) + 1;
    JointIndexer midx(radix);
    for (int64_t code = 1; code < midx.total; ++code) {
      std::vector<int> d = midx.decode(code);
      std::string label;
      if (members.size() == 1) {
        label = g.action_names[size_t(members[0])][size_t(d[0] - 1)];
      } else {
        label = "(";
        for (size_t k = 0; k < members.size(); ++k) {
          if (k) label += ",";
          label += d[k] == 0 ? "-"
                             : g.action_names[size_t(members[k])][size_t(d[k] - 1)];
        }
        label += ")";
      }
      names[size_t(i)].push_back(std::move(label));
      member_digits[size_t(i)].push_back(std::move(d));
    }
  }

  CoalitionGame cg;
  cg.partition = part;
  cg.member_digits = member_digits;
  cg.game = Csg(m, g.num_states, names);
  cg.game.initial_states = g.initial_states;
  cg.game.atoms = g.atoms;
  cg.game.labels = g.labels;

  // The coalition joint-code space and the original one have equal size;
  // decomposition is a permutation between them.
  cg.to_original.assign(size_t(cg.game.aidx.total), 0);
  std::vector<int> orig(static_cast<size_t>(g.num_players), 0);
  for (int64_t code = 0; code < cg.game.aidx.total; ++code) {
    std::vector<int> d = cg.game.aidx.decode(code);
    for (int i = 0; i < m; ++i) {
      const auto& members = part.coalitions[size_t(i)];
      for (size_t k = 0; k < members.size(); ++k)
        orig[size_t(members[k])] =
            d[size_t(i)] == 0 ? 0
                              : member_digits[size_t(i)][size_t(d[size_t(i)] - 1)][k];
    }
    cg.to_original[size_t(code)] = g.aidx.index(orig);
  }

  for (int s = 0; s < g.num_states; ++s) {
    for (int i = 0; i < m; ++i) {
      const auto& members = part.coalitions[size_t(i)];
      auto& out = cg.game.enabled[size_t(s)][size_t(i)];
      for (size_t c = 0; c < member_digits[size_t(i)].size(); ++c) {
        bool consistent = true;
        for (size_t k = 0; k < members.size() && consistent; ++k) {
          const auto& en = g.enabled[size_t(s)][size_t(members[k])];
          const int digit = member_digits[size_t(i)][c][k];
          if (en.empty())
            consistent = digit == 0;
          else
            consistent = digit != 0 &&
                         std::binary_search(en.begin(), en.end(), digit - 1);
        }
        if (consistent) out.push_back(int(c));
      }
    }
    for (int64_t code : cg.game.consistent_joints(s))
      cg.game.trans[size_t(s)][code] = g.dist(s, cg.to_original[size_t(code)]);
  }
  return cg;
}

struct AssumptionCheck {
  bool ok = true;
  int avoiding_state = -1;  // can dodge the target forever when not ok
};

// True iff the target is reached with probability 1 from every state no
// matter how all players behave. Qualitative only: first shrink to the
// largest non-target set whose states can surely stay inside it (iterated
// removal), then anything that can reach that set while avoiding the target
// witnesses a violation.
inline AssumptionCheck check_assumption(const Csg& g,
                                        const std::vector<bool>& target) {
  std::vector<bool> in_u(static_cast<size_t>(g.num_states));
  for (int s = 0; s < g.num_states; ++s) in_u[size_t(s)] = !target[size_t(s)];
  bool changed = true;
  while (changed) {
    changed = false;
    for (int s = 0; s < g.num_states; ++s) {
      if (!in_u[size_t(s)]) continue;
      bool can_stay = false;
      for (const auto& [code, d] : g.trans[size_t(s)]) {
        (void)code;
        bool inside = true;
        for (auto [t, p] : d)
          if (p > 0.0 && !in_u[size_t(t)]) {
            inside = false;
            break;
          }
        if (inside) {
          can_stay = true;
          break;
        }
      }
      if (!can_stay) {
        in_u[size_t(s)] = false;
        changed = true;
      }
    }
  }

  // Any state that can reach this set while avoiding the target also
  // violates the assumption, but such states exist only when the set itself
  // is non-empty, so scanning it both decides the check and yields the
  // sharpest counterexample.
  AssumptionCheck out;
  for (int s = 0; s < g.num_states; ++s)
    if (in_u[size_t(s)]) {
      out.ok = false;
      out.avoiding_state = s;
      break;
    }
  return out;
}

}  // namespace eqsynth
