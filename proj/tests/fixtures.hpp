#pragma once

// Shared fixtures and generators for the test suite.

#include <string>
#include <vector>

#include "eqsynth/common.hpp"
#include "eqsynth/csg.hpp"
#include "eqsynth/nfg.hpp"

namespace fixtures {

using eqsynth::NormalFormGame;
using eqsynth::SplitMix64;

// Three cars meeting at an intersection; each either proceeds or yields.
// Car 3 has right of way over car 1's lane, car 1 over car 2's. Crashing is
// far worse for the car that should have yielded; everyone yielding wastes
// time for all.
inline NormalFormGame intersection_game() {
  NormalFormGame g({{"pro", "yld"}, {"pro", "yld"}, {"pro", "yld"}});
  auto set = [&](const char* a1, const char* a2, const char* a3, double u1,
                 double u2, double u3) {
    std::vector<int> d = {g.action_index(0, a1), g.action_index(1, a2),
                          g.action_index(2, a3)};
    g.set_utilities(d, {u1, u2, u3});
  };
  set("pro", "pro", "pro", -1000, -1000, -100);
  set("pro", "pro", "yld", -1000, -100, -5);
  set("pro", "yld", "pro", 5, -5, 5);
  set("pro", "yld", "yld", 5, -5, -5);
  set("yld", "pro", "pro", -5, -1000, -100);
  set("yld", "pro", "yld", -5, 5, -5);
  set("yld", "yld", "pro", -5, -5, 5);
  set("yld", "yld", "yld", -10, -10, -10);
  return g;
}

// Variant where car 2 barely minds a three-way crash.
inline NormalFormGame intersection_reckless_game() {
  NormalFormGame g = intersection_game();
  std::vector<int> d = {0, 0, 0};  // (pro,pro,pro)
  g.utility(g.indexer.index(d), 1) = -4.5;
  return g;
}

// The fair mixed equilibrium of the intersection game: car 1 yields surely,
// cars 2 and 3 mix; derived by hand from the two indifference conditions
//   -1000 q + 5 (1-q) = -5 q - 10 (1-q)   (car 2 between pro/yld, q = P3(pro))
//   -100 r + 5 (1-r)  = -5 r - 10 (1-r)   (car 3 between pro/yld, r = P2(pro))
// giving r = 3/22 and q = 3/202.
inline eqsynth::StrategyProfile intersection_fair_ne() {
  eqsynth::StrategyProfile sp;
  sp.probs = {{0.0, 1.0}, {3.0 / 22, 19.0 / 22}, {3.0 / 202, 199.0 / 202}};
  return sp;
}

inline std::vector<double> intersection_fair_ne_values() {
  return {-41125.0 / 4444, -2005.0 / 202, -205.0 / 22};
}

// Uniform random utilities in [-10, 10).
inline NormalFormGame random_game(SplitMix64& rng,
                                  const std::vector<int>& action_counts) {
  std::vector<std::vector<std::string>> names(action_counts.size());
  for (size_t i = 0; i < action_counts.size(); ++i)
    for (int a = 0; a < action_counts[i]; ++a)
      names[i].push_back("a" + std::to_string(a + 1));
  NormalFormGame g(std::move(names));
  for (double& u : g.utils) u = rng.next_double(-10.0, 10.0);
  return g;
}

inline std::string source_dir() { return EQSYNTH_SOURCE_DIR; }

// The intersection scenario as a two-state game: one simultaneous choice,
// then an absorbing sink. Utilities become action rewards on the first step.
struct OneShotCsg {
  eqsynth::Csg game;
  std::vector<eqsynth::RewardStructure> rewards;  // one per player
};

inline OneShotCsg one_shot_intersection_csg() {
  NormalFormGame nfg = intersection_game();
  OneShotCsg out;
  out.game = eqsynth::Csg(
      3, 2, {{"pro", "yld"}, {"pro", "yld"}, {"pro", "yld"}});
  eqsynth::Csg& g = out.game;
  g.initial_states = {0};
  for (int i = 0; i < 3; ++i) g.enabled[0][size_t(i)] = {0, 1};
  int done = g.add_atom("done");
  g.set_label(1, done);
  for (int i = 0; i < 3; ++i)
    out.rewards.emplace_back("u" + std::to_string(i + 1), 2);
  std::vector<int> digits(3);
  for (int64_t j = 0; j < nfg.indexer.total; ++j) {
    nfg.indexer.decode(j, digits);
    std::vector<int> csg_digits = {digits[0] + 1, digits[1] + 1,
                                   digits[2] + 1};
    int64_t code = g.aidx.index(csg_digits);
    g.trans[0][code] = {{1, 1.0}};
    for (int i = 0; i < 3; ++i) {
      double u = nfg.utility(j, i);
      if (u != 0.0) out.rewards[size_t(i)].action_rewards[0][code] = u;
    }
  }
  g.trans[1][0] = {{1, 1.0}};  // everyone idles in the sink
  return out;
}

/// Random ordered partition of the player set.
inline eqsynth::CoalitionPartition random_partition(SplitMix64& rng,
                                                    int num_players) {
  std::vector<int> perm(static_cast<size_t>(num_players));
  for (int i = 0; i < num_players; ++i) perm[size_t(i)] = i;
  for (int i = num_players - 1; i > 0; --i)
    std::swap(perm[size_t(i)], perm[rng.next_below(uint64_t(i) + 1)]);
  eqsynth::CoalitionPartition part;
  std::vector<int> cur;
  for (int i = 0; i < num_players; ++i) {
    cur.push_back(perm[size_t(i)]);
    if (i + 1 == num_players || rng.next_below(2)) {
      part.coalitions.push_back(cur);
      cur.clear();
    }
  }
  return part;
}

// Random game structure: arbitrary action assignment (players may have
// nothing enabled), sparse random distributions over up to three targets.
inline eqsynth::Csg random_csg(SplitMix64& rng, int num_states,
                               const std::vector<int>& action_counts) {
  std::vector<std::vector<std::string>> names(action_counts.size());
  for (size_t i = 0; i < action_counts.size(); ++i)
    for (int a = 0; a < action_counts[i]; ++a)
      names[i].push_back("a" + std::to_string(a + 1));
  eqsynth::Csg g(int(action_counts.size()), num_states, std::move(names));
  g.initial_states = {0};
  for (int s = 0; s < num_states; ++s) {
    for (int i = 0; i < g.num_players; ++i) {
      uint64_t mask = rng.next_below(1u << g.num_actions(i));
      for (int a = 0; a < g.num_actions(i); ++a)
        if (mask & (1u << a)) g.enabled[size_t(s)][size_t(i)].push_back(a);
    }
    for (int64_t code : g.consistent_joints(s)) {
      int width = 1 + int(rng.next_below(3));
      std::map<int, double> acc;
      for (int b = 0; b < width; ++b)
        acc[int(rng.next_below(uint64_t(num_states)))] +=
            rng.next_double(0.1, 1.0);
      double sum = 0.0;
      for (auto [t, p] : acc) {
        (void)t;
        sum += p;
      }
      auto& dist = g.trans[size_t(s)][code];
      for (auto [t, p] : acc) dist.emplace_back(t, p / sum);
    }
  }
  return g;
}

// Redirect a slice of every branch toward `tstar` so that any state set
// containing tstar is reached almost surely under every strategy.
inline void force_reach(eqsynth::Csg& g, int tstar, double p = 0.2) {
  for (int s = 0; s < g.num_states; ++s)
    for (auto& [code, dist] : g.trans[size_t(s)]) {
      std::map<int, double> acc;
      for (auto& [t, pr] : dist) acc[t] += pr * (1.0 - p);
      acc[tstar] += p;
      dist.clear();
      for (auto& [t, pr] : acc) dist.emplace_back(t, pr);
    }
}

inline eqsynth::RewardStructure random_reward(SplitMix64& rng,
                                              const eqsynth::Csg& g,
                                              const std::string& name) {
  eqsynth::RewardStructure r(name, g.num_states);
  for (int s = 0; s < g.num_states; ++s) {
    r.state_rewards[size_t(s)] = rng.next_double(0.0, 2.0);
    for (int64_t code : g.consistent_joints(s))
      if (rng.next_below(2) == 0)
        r.action_rewards[size_t(s)][code] = rng.next_double(0.0, 1.0);
  }
  return r;
}

}  // namespace fixtures
