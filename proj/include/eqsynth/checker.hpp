#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "eqsynth/common.hpp"
#include "eqsynth/correlated.hpp"
#include "eqsynth/csg.hpp"
#include "eqsynth/csg_io.hpp"
#include "eqsynth/nash.hpp"
#include "eqsynth/nfg.hpp"
#include "eqsynth/property.hpp"

// Equilibrium model checking over coalition games. Every routine here works
// on a Csg whose players are the coalitions (the output of
// build_coalition_game) and an objective vector with one entry per coalition.
//
// Minimising properties are handled by negating stage utilities and
// maximising; reported values are negated back, so callers always see the
// surface orientation.

namespace eqsynth {

using ValueVector = std::vector<double>;

inline ValueVector value_ones(int m) {
  return ValueVector(static_cast<size_t>(m), 1.0);
}
inline ValueVector value_zeros(int m) {
  return ValueVector(static_cast<size_t>(m), 0.0);
}

struct CheckerConfig {
  double epsilon = 1e-6;  // absolute sup-norm over all table entries
  int max_iterations = 10000;
  int threads = 1;
};

// Raised when a reachability precondition fails (CLI exit code 4).
class AssumptionError : public Error {
 public:
  AssumptionError(const std::string& what, int objective, int state)
      : Error(what), objective_(objective), state_(state) {}
  int objective() const { return objective_; }
  int state() const { return state_; }

 private:
  int objective_;
  int state_;
};

// Raised when value iteration hits max_iterations (CLI exit code 5).
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, int iterations, double residual)
      : Error(what), iterations_(iterations), residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

// One objective with atoms resolved to state sets and the reward structure
// translated to composite actions. rhs is the goal set for every kind that
// has one (next target, until right operand, reachability target); lhs is
// only meaningful for untils.
struct CheckObjective {
  enum class Kind {
    kNext,
    kBoundedUntil,
    kUntil,
    kInstant,
    kCumulative,
    kReachReward,
  };

  Kind kind = Kind::kNext;
  int bound = 0;  // BoundedUntil, Instant, Cumulative
  std::vector<bool> lhs;
  std::vector<bool> rhs;
  RewardStructure reward{"", 0};

  bool is_reward() const {
    return kind == Kind::kInstant || kind == Kind::kCumulative ||
           kind == Kind::kReachReward;
  }
  bool is_finite() const {
    return kind != Kind::kUntil && kind != Kind::kReachReward;
  }
};

// Witness keys unify the memory modes: step level n for finite-horizon and
// transformed checks, (D, E) context masks for until-type objectives.
struct WitnessKey {
  int state = 0;
  int step = 0;
  uint32_t d = 0;
  uint32_t e = 0;

  friend bool operator==(const WitnessKey&, const WitnessKey&) = default;
};

struct WitnessKeyHash {
  size_t operator()(const WitnessKey& k) const {
    uint64_t h = (uint64_t(uint32_t(k.state)) << 34) ^
                 (uint64_t(uint32_t(k.step)) << 20) ^ (uint64_t(k.d) << 10) ^
                 uint64_t(k.e);
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return static_cast<size_t>(h);
  }
};

// The equilibrium of one stage game. digits[i][a] maps coalition i's local
// action index a to its composite digit, so the witness is self-contained.
struct StageWitness {
  bool is_ce = false;
  std::vector<std::vector<int>> digits;
  StrategyProfile profile;  // NE: one mixture per coalition
  JointStrategy joint;      // CE: mixed-radix over local action counts

  int local_count(int i) const { return int(digits[size_t(i)].size()); }
};

using WitnessTable = std::unordered_map<WitnessKey, StageWitness, WitnessKeyHash>;

// Converged value-table entry for one (state, D, E) context, in the internal
// (possibly negated) orientation.
struct ContextEntry {
  int state = 0;
  uint32_t d = 0;
  uint32_t e = 0;
  ValueVector values;
};

struct CheckResult {
  std::vector<ValueVector> values;  // [state][coalition], surface orientation
  int iterations = 0;
  double residual = 0.0;
  WitnessTable witnesses;
  std::vector<ContextEntry> contexts;  // unbounded checks only
};

// Witness masks are stored in 16-bit halves.
inline constexpr int kMaxCoalitions = 16;

namespace checker_detail {

// Immutable per-state description of the stage game: local action lists and
// the composite joint code for every local joint.
struct StageShape {
  std::vector<std::vector<std::string>> names;
  std::vector<std::vector<int>> digits;  // [coalition][local] -> digit
  std::vector<int64_t> codes;            // [local joint] -> csg joint code
};

inline StageShape make_stage_shape(const Csg& g, int s) {
  StageShape shape;
  const int m = g.num_players;
  shape.names.resize(static_cast<size_t>(m));
  shape.digits.resize(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    shape.digits[size_t(i)] = g.enabled_digits(s, i);
    for (int d : shape.digits[size_t(i)])
      shape.names[size_t(i)].push_back(
          d == 0 ? "-" : g.action_names[size_t(i)][size_t(d - 1)]);
  }
  std::vector<int> sizes(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i)
    sizes[size_t(i)] = int(shape.digits[size_t(i)].size());
  JointIndexer local(sizes);
  std::vector<int> local_digits(static_cast<size_t>(m));
  for (int64_t j = 0; j < local.total; ++j) {
    std::vector<int> pick = local.decode(j);
    for (int i = 0; i < m; ++i)
      local_digits[size_t(i)] = shape.digits[size_t(i)][size_t(pick[size_t(i)])];
    shape.codes.push_back(g.aidx.index(local_digits));
  }
  return shape;
}

inline std::vector<StageShape> make_all_shapes(const Csg& g) {
  std::vector<StageShape> shapes;
  shapes.reserve(static_cast<size_t>(g.num_states));
  for (int s = 0; s < g.num_states; ++s) shapes.push_back(make_stage_shape(g, s));
  return shapes;
}

struct StageSolution {
  ValueVector values;
  StageWitness witness;
};

// Deterministic point mass for contexts where every objective is frozen and
// the choice cannot affect any value.
inline StageWitness frozen_witness(const StageShape& shape, EqType eq) {
  StageWitness w;
  w.is_ce = (eq == EqType::kCorrelated);
  w.digits = shape.digits;
  if (w.is_ce) {
    w.joint.probs.assign(shape.codes.size(), 0.0);
    w.joint.probs[0] = 1.0;
  } else {
    for (const auto& d : shape.digits) {
      std::vector<double> p(d.size(), 0.0);
      p[0] = 1.0;
      w.profile.probs.push_back(std::move(p));
    }
  }
  return w;
}

inline StageSolution solve_stage(const NormalFormGame& nfg, EqType eq,
                                 Criterion crit, int state) {
  StageSolution sol;
  if (eq == EqType::kCorrelated) {
    CeResult r = solve_ce(nfg, crit);
    sol.values = r.values;
    sol.witness.is_ce = true;
    sol.witness.joint = std::move(r.joint);
    return sol;
  }
  if (nfg.num_players == 1) {
    int best = 0;
    for (int a = 1; a < nfg.num_actions(0); ++a)
      if (nfg.utility(a, 0) > nfg.utility(best, 0)) best = a;
    sol.values = {nfg.utility(best, 0)};
    std::vector<double> p(static_cast<size_t>(nfg.num_actions(0)), 0.0);
    p[size_t(best)] = 1.0;
    sol.witness.profile.probs.push_back(std::move(p));
    return sol;
  }
  std::vector<NeResult> found = nfg.num_players == 2 ? enumerate_ne_2p(nfg)
                                                     : search_ne_np(nfg);
  if (found.empty())
    throw Error("stage NE not found at state " + std::to_string(state) + " (" +
                std::to_string(nfg.num_players) +
                " coalitions); refusing to substitute a correlated solution");
  NeResult r = select_optimal_ne(found, crit);
  sol.values = std::move(r.values);
  sol.witness.profile = std::move(r.profile);
  return sol;
}

inline void run_parallel(int count, int threads,
                         const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int width = std::min(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(width));
  for (int w = 0; w < width; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += width) fn(i);
    });
  for (auto& t : pool) t.join();
}

// Probabilistic table entries stay inside the utility range, which is [0,1]
// when maximising and [-1,0] when negated.
inline double clamp_prob(double v, double sgn) {
  const double lo = sgn < 0 ? -1.0 : 0.0;
  const double hi = sgn < 0 ? 0.0 : 1.0;
  return v < lo ? lo : (v > hi ? hi : v);
}

// D/E stabilisation for probabilistic objectives. Next objectives resolve
// exactly at level 1; untils resolve wherever their atoms dictate. level < 0
// means an unbounded check where no Next can appear.
inline void stabilize_prob(const std::vector<CheckObjective>& objs, int s,
                           int level, uint32_t& d, uint32_t& e) {
  for (size_t l = 0; l < objs.size(); ++l) {
    const uint32_t bit = 1u << l;
    if ((d | e) & bit) continue;
    const CheckObjective& o = objs[l];
    if (o.kind == CheckObjective::Kind::kNext) {
      if (level == 1) {
        if (o.rhs[size_t(s)]) d |= bit; else e |= bit;
      }
    } else {
      if (o.rhs[size_t(s)]) d |= bit;
      else if (!o.lhs[size_t(s)]) e |= bit;
    }
  }
}

inline void stabilize_reach(const std::vector<CheckObjective>& objs, int s,
                            uint32_t& d) {
  for (size_t l = 0; l < objs.size(); ++l)
    if (!((d >> l) & 1u) && objs[l].rhs[size_t(s)]) d |= 1u << l;
}

inline void require_matching(const Csg& g,
                             const std::vector<CheckObjective>& objs) {
  if (int(objs.size()) != g.num_players)
    throw Error("objective count " + std::to_string(objs.size()) +
                " does not match coalition count " +
                std::to_string(g.num_players));
  if (g.num_players > kMaxCoalitions)
    throw Error("more than " + std::to_string(kMaxCoalitions) +
                " coalitions are not supported");
}

}  // namespace checker_detail

// Resolves a property's atoms and reward names against a model, producing
// objectives over the coalition game's composite actions.
inline std::vector<CheckObjective> resolve_objectives(
    const PropertyAst& ast, const CsgModel& model, const CoalitionGame& cg) {
  const Csg& g = cg.game;
  auto sat = [&g](const std::string& atom) {
    if (atom == "true") return std::vector<bool>(size_t(g.num_states), true);
    const int idx = g.atom_index(atom);
    if (idx < 0) throw Error("unknown atom '" + atom + "' in property");
    std::vector<bool> out(static_cast<size_t>(g.num_states));
    for (int s = 0; s < g.num_states; ++s) out[size_t(s)] = g.labels[size_t(s)][size_t(idx)];
    return out;
  };

  std::vector<CheckObjective> objs;
  for (const Objective& o : ast.objectives) {
    CheckObjective c;
    if (o.kind == Objective::Kind::kProbability) {
      switch (o.path.kind) {
        case PathFormula::Kind::kNext:
          c.kind = CheckObjective::Kind::kNext;
          c.rhs = sat(o.path.rhs);
          break;
        case PathFormula::Kind::kBoundedUntil:
          c.kind = CheckObjective::Kind::kBoundedUntil;
          c.bound = o.path.bound;
          c.lhs = sat(o.path.lhs);
          c.rhs = sat(o.path.rhs);
          break;
        case PathFormula::Kind::kUntil:
          c.kind = CheckObjective::Kind::kUntil;
          c.lhs = sat(o.path.lhs);
          c.rhs = sat(o.path.rhs);
          break;
      }
    } else {
      const RewardStructure* r = model.find_reward(o.reward_name);
      if (r == nullptr)
        throw Error("unknown reward structure '" + o.reward_name + "'");
      c.reward = cg.translate(*r);
      switch (o.reward.kind) {
        case RewardFormula::Kind::kInstant:
          c.kind = CheckObjective::Kind::kInstant;
          c.bound = o.reward.bound;
          break;
        case RewardFormula::Kind::kCumulative:
          c.kind = CheckObjective::Kind::kCumulative;
          c.bound = o.reward.bound;
          break;
        case RewardFormula::Kind::kReachability:
          c.kind = CheckObjective::Kind::kReachReward;
          c.rhs = sat(o.reward.goal);
          break;
      }
    }
    objs.push_back(std::move(c));
  }
  return objs;
}

// One stage-game solve per state: utility l is the one-step probability of
// hitting the goal set of objective l.
inline CheckResult check_next(const Csg& g,
                              const std::vector<CheckObjective>& objs,
                              EqType eq, Criterion crit, bool negate = false,
                              const CheckerConfig& cfg = {}) {
  using namespace checker_detail;
  require_matching(g, objs);
  for (const CheckObjective& o : objs)
    if (o.kind != CheckObjective::Kind::kNext)
      throw Error("check_next requires next objectives only");
  const int m = g.num_players;
  const double sgn = negate ? -1.0 : 1.0;

  CheckResult out;
  out.values.assign(static_cast<size_t>(g.num_states), {});
  std::vector<StageWitness> wit(static_cast<size_t>(g.num_states));
  run_parallel(g.num_states, cfg.threads, [&](int s) {
    StageShape shape = make_stage_shape(g, s);
    NormalFormGame nfg(shape.names);
    for (int64_t j = 0; j < nfg.indexer.total; ++j) {
      const auto& branch = g.dist(s, shape.codes[size_t(j)]);
      for (int l = 0; l < m; ++l) {
        double p = 0.0;
        for (const auto& [t, pr] : branch)
          if (objs[size_t(l)].rhs[size_t(t)]) p += pr;
        nfg.utility(j, l) = sgn * p;
      }
    }
    StageSolution sol = solve_stage(nfg, eq, crit, s);
    sol.witness.digits = shape.digits;
    wit[size_t(s)] = std::move(sol.witness);
    ValueVector v(static_cast<size_t>(m));
    for (int l = 0; l < m; ++l)
      v[size_t(l)] = sgn * clamp_prob(sol.values[size_t(l)], sgn);
    out.values[size_t(s)] = std::move(v);
  });
  for (int s = 0; s < g.num_states; ++s)
    out.witnesses[{s, 0, 0, 0}] = std::move(wit[size_t(s)]);
  return out;
}

// Exact backward induction for finite-horizon objectives. Probabilistic
// mixes (next / bounded until) carry (D, E) contexts stabilised per level;
// reward mixes (instantaneous / cumulative) need no contexts. No convergence
// loop is involved, so results do not depend on epsilon.
inline CheckResult check_bounded(const Csg& g,
                                 const std::vector<CheckObjective>& objs,
                                 EqType eq, Criterion crit, bool negate = false,
                                 const CheckerConfig& cfg = {}) {
  using namespace checker_detail;
  (void)cfg;
  require_matching(g, objs);
  for (const CheckObjective& o : objs)
    if (!o.is_finite())
      throw Error("check_bounded requires finite-horizon objectives only");
  const int m = g.num_players;
  const double sgn = negate ? -1.0 : 1.0;
  const uint32_t full = (1u << m) - 1u;
  const bool reward = objs[0].is_reward();

  CheckResult out;
  out.values.assign(static_cast<size_t>(g.num_states), {});
  std::vector<StageShape> shapes = make_all_shapes(g);

  if (!reward) {
    int k_eff = 1;
    for (const CheckObjective& o : objs)
      if (o.kind == CheckObjective::Kind::kBoundedUntil)
        k_eff = std::max(k_eff, o.bound);

    std::unordered_map<WitnessKey, ValueVector, WitnessKeyHash> memo;
    std::function<ValueVector(int, int, uint32_t, uint32_t)> eval =
        [&](int s, int n, uint32_t d, uint32_t e) -> ValueVector {
      stabilize_prob(objs, s, n, d, e);
      const WitnessKey key{s, n, d, e};
      if (auto it = memo.find(key); it != memo.end()) return it->second;

      ValueVector v(static_cast<size_t>(m));
      if ((d | e) == full) {
        for (int l = 0; l < m; ++l) v[size_t(l)] = ((d >> l) & 1u) ? sgn : 0.0;
        out.witnesses[key] = frozen_witness(shapes[size_t(s)], eq);
      } else {
        const StageShape& shape = shapes[size_t(s)];
        NormalFormGame nfg(shape.names);
        for (int64_t j = 0; j < nfg.indexer.total; ++j) {
          const auto& branch = g.dist(s, shape.codes[size_t(j)]);
          for (int l = 0; l < m; ++l) {
            const uint32_t bit = 1u << l;
            double u;
            if (d & bit) {
              u = sgn;
            } else if (e & bit) {
              u = 0.0;
            } else if (objs[size_t(l)].kind ==
                           CheckObjective::Kind::kBoundedUntil &&
                       objs[size_t(l)].bound - n <= 0) {
              u = 0.0;  // budget exhausted before the goal was hit
            } else {
              u = 0.0;
              for (const auto& [t, pr] : branch) u += pr * eval(t, n + 1, d, e)[size_t(l)];
            }
            nfg.utility(j, l) = u;
          }
        }
        StageSolution sol = solve_stage(nfg, eq, crit, s);
        for (int l = 0; l < m; ++l)
          v[size_t(l)] = clamp_prob(sol.values[size_t(l)], sgn);
        sol.witness.digits = shape.digits;
        out.witnesses[key] = std::move(sol.witness);
      }
      memo.emplace(key, v);
      return v;
    };

    for (int s = 0; s < g.num_states; ++s) {
      ValueVector v = eval(s, 0, 0, 0);
      for (double& x : v) x *= sgn;
      out.values[size_t(s)] = std::move(v);
    }
    return out;
  }

  // Reward mix: iterative tables over levels k_eff..0. At a level where an
  // instantaneous budget hits zero the stage pays the current state's reward
  // (the horizon state itself), and an expired cumulative budget pays zero.
  int k_eff = 0;
  for (const CheckObjective& o : objs) k_eff = std::max(k_eff, o.bound);
  std::vector<ValueVector> next(static_cast<size_t>(g.num_states),
                                value_zeros(m));
  std::vector<ValueVector> cur(static_cast<size_t>(g.num_states));
  for (int n = k_eff; n >= 0; --n) {
    for (int s = 0; s < g.num_states; ++s) {
      const StageShape& shape = shapes[size_t(s)];
      NormalFormGame nfg(shape.names);
      for (int64_t j = 0; j < nfg.indexer.total; ++j) {
        const int64_t code = shape.codes[size_t(j)];
        const auto& branch = g.dist(s, code);
        for (int l = 0; l < m; ++l) {
          const CheckObjective& o = objs[size_t(l)];
          const int budget = o.bound - n;
          double u = 0.0;
          if (o.kind == CheckObjective::Kind::kInstant) {
            if (budget == 0) {
              u = sgn * o.reward.state_reward(s);
            } else if (budget > 0) {
              for (const auto& [t, pr] : branch) u += pr * next[size_t(t)][size_t(l)];
            }
          } else {
            if (budget > 0) {
              u = sgn * (o.reward.state_reward(s) + o.reward.action_reward(s, code));
              for (const auto& [t, pr] : branch) u += pr * next[size_t(t)][size_t(l)];
            }
          }
          nfg.utility(j, l) = u;
        }
      }
      StageSolution sol = solve_stage(nfg, eq, crit, s);
      sol.witness.digits = shape.digits;
      out.witnesses[{s, n, 0, 0}] = std::move(sol.witness);
      cur[size_t(s)] = std::move(sol.values);
    }
    std::swap(cur, next);
  }
  for (int s = 0; s < g.num_states; ++s) {
    ValueVector v = next[size_t(s)];
    for (double& x : v) x *= sgn;
    out.values[size_t(s)] = std::move(v);
  }
  return out;
}

// Value iteration over (state, D, E) contexts for unbounded untils or
// reachability rewards. Jacobi sweeps keep results independent of the
// parallelism degree; convergence is an absolute sup-norm test.
inline CheckResult check_unbounded(const Csg& g,
                                   const std::vector<CheckObjective>& objs,
                                   EqType eq, Criterion crit,
                                   bool negate = false,
                                   const CheckerConfig& cfg = {},
                                   bool verify_assumption = true) {
  using namespace checker_detail;
  require_matching(g, objs);
  const int m = g.num_players;
  const double sgn = negate ? -1.0 : 1.0;
  const uint32_t full = (1u << m) - 1u;
  const bool reward = objs[0].is_reward();
  for (const CheckObjective& o : objs)
    if (o.kind != (reward ? CheckObjective::Kind::kReachReward
                          : CheckObjective::Kind::kUntil))
      throw Error("check_unbounded requires all-until or all-reachability objectives");

  if (verify_assumption) {
    for (int l = 0; l < m; ++l) {
      std::vector<bool> target(static_cast<size_t>(g.num_states));
      for (int s = 0; s < g.num_states; ++s)
        target[size_t(s)] = reward ? objs[size_t(l)].rhs[size_t(s)]
                                   : (objs[size_t(l)].rhs[size_t(s)] ||
                                      !objs[size_t(l)].lhs[size_t(s)]);
      AssumptionCheck chk = check_assumption(g, target);
      if (!chk.ok)
        throw AssumptionError(
            "objective " + std::to_string(l + 1) +
                " violates the almost-sure resolution assumption: from state " +
                std::to_string(chk.avoiding_state) +
                " the game can avoid every resolving state forever",
            l, chk.avoiding_state);
    }
  }

  auto stab = [&](int s, uint32_t d, uint32_t e) {
    if (reward)
      stabilize_reach(objs, s, d);
    else
      stabilize_prob(objs, s, -1, d, e);
    return std::pair<uint32_t, uint32_t>(d, e);
  };
  auto pack = [](int s, uint32_t d, uint32_t e) {
    return (uint64_t(uint32_t(s)) << 32) | (uint64_t(d) << 16) | uint64_t(e);
  };

  // Context discovery: (D, E) only grow along a run, so the reachable set is
  // closed under per-state stabilisation of successors.
  std::vector<StageShape> shapes = make_all_shapes(g);
  struct Entry {
    int s;
    uint32_t d, e;
    bool frozen;
  };
  std::vector<Entry> entries;
  std::unordered_map<uint64_t, int> index;
  std::vector<uint64_t> queue;
  auto discover = [&](int s, uint32_t d0, uint32_t e0) {
    auto [d, e] = stab(s, d0, e0);
    const uint64_t key = pack(s, d, e);
    if (index.emplace(key, int(entries.size())).second) {
      entries.push_back({s, d, e, (d | e) == full});
      queue.push_back(key);
    }
  };
  for (int s = 0; s < g.num_states; ++s) discover(s, 0, 0);
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    const uint64_t key = queue[qi];
    const Entry ent = entries[size_t(index[key])];
    if (ent.frozen) continue;
    for (int64_t code : shapes[size_t(ent.s)].codes)
      for (const auto& [t, pr] : g.dist(ent.s, code)) {
        (void)pr;
        discover(t, ent.d, ent.e);
      }
  }
  const int n_entries = int(entries.size());
  auto entry_at = [&](int s, uint32_t d, uint32_t e) {
    auto [d2, e2] = stab(s, d, e);
    return index.at(pack(s, d2, e2));
  };

  std::vector<ValueVector> cur(static_cast<size_t>(n_entries));
  for (int i = 0; i < n_entries; ++i) {
    const Entry& ent = entries[size_t(i)];
    ValueVector v(static_cast<size_t>(m), 0.0);
    for (int l = 0; l < m; ++l) {
      if ((ent.d >> l) & 1u)
        v[size_t(l)] = reward ? 0.0 : sgn;
      else if (!reward && !((ent.e >> l) & 1u) && objs[size_t(l)].rhs[size_t(ent.s)])
        v[size_t(l)] = sgn;
    }
    cur[size_t(i)] = std::move(v);
  }

  std::vector<ValueVector> nxt(static_cast<size_t>(n_entries));
  std::vector<StageWitness> wit(static_cast<size_t>(n_entries));
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  while (iterations < cfg.max_iterations) {
    ++iterations;
    run_parallel(n_entries, cfg.threads, [&](int i) {
      const Entry& ent = entries[size_t(i)];
      if (ent.frozen) {
        nxt[size_t(i)] = cur[size_t(i)];
        return;
      }
      const StageShape& shape = shapes[size_t(ent.s)];
      NormalFormGame nfg(shape.names);
      for (int64_t j = 0; j < nfg.indexer.total; ++j) {
        const int64_t code = shape.codes[size_t(j)];
        const auto& branch = g.dist(ent.s, code);
        for (int l = 0; l < m; ++l) {
          const uint32_t bit = 1u << l;
          double u;
          if (ent.d & bit) {
            u = reward ? 0.0 : sgn;
          } else if (!reward && (ent.e & bit)) {
            u = 0.0;
          } else {
            u = reward ? sgn * (objs[size_t(l)].reward.state_reward(ent.s) +
                                objs[size_t(l)].reward.action_reward(ent.s, code))
                       : 0.0;
            for (const auto& [t, pr] : branch)
              u += pr * cur[size_t(entry_at(t, ent.d, ent.e))][size_t(l)];
          }
          nfg.utility(j, l) = u;
        }
      }
      StageSolution sol = solve_stage(nfg, eq, crit, ent.s);
      if (!reward)
        for (double& x : sol.values) x = clamp_prob(x, sgn);
      sol.witness.digits = shape.digits;
      wit[size_t(i)] = std::move(sol.witness);
      nxt[size_t(i)] = std::move(sol.values);
    });
    residual = 0.0;
    for (int i = 0; i < n_entries; ++i)
      for (int l = 0; l < m; ++l)
        residual = std::max(residual, std::fabs(nxt[size_t(i)][size_t(l)] -
                                                cur[size_t(i)][size_t(l)]));
    std::swap(cur, nxt);
    if (residual <= cfg.epsilon) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ConvergenceError(
        "value iteration did not converge within " +
            std::to_string(cfg.max_iterations) + " iterations; last residual " +
            format_double(residual) + " exceeds epsilon " +
            format_double(cfg.epsilon),
        iterations, residual);

  CheckResult out;
  out.iterations = iterations;
  out.residual = residual;
  out.values.assign(static_cast<size_t>(g.num_states), {});
  for (int s = 0; s < g.num_states; ++s) {
    ValueVector v = cur[size_t(entry_at(s, 0, 0))];
    for (double& x : v) x *= sgn;
    out.values[size_t(s)] = std::move(v);
  }
  for (int i = 0; i < n_entries; ++i) {
    const Entry& ent = entries[size_t(i)];
    out.contexts.push_back({ent.s, ent.d, ent.e, cur[size_t(i)]});
    StageWitness w = ent.frozen ? frozen_witness(shapes[size_t(ent.s)], eq)
                                : std::move(wit[size_t(i)]);
    out.witnesses[{ent.s, 0, ent.d, ent.e}] = std::move(w);
  }
  return out;
}

struct TransformResult {
  Csg game;
  std::vector<CheckObjective> objectives;
  int k_theta = 0;
};

// Product construction (s, n) with a step counter that saturates at
// k_theta + 1, turning every finite-horizon objective into an unbounded one
// over counter-indexed labels. Accepts any mix containing at least one
// finite-horizon objective.
inline TransformResult transform_mixed_horizon(
    const Csg& g, const std::vector<CheckObjective>& objs) {
  checker_detail::require_matching(g, objs);
  bool any_finite = false;
  for (const CheckObjective& o : objs) any_finite |= o.is_finite();
  if (!any_finite)
    throw Error(
        "mixed-horizon transform requires at least one finite-horizon objective");

  int k_theta = 0;
  bool any_bound = false;
  for (const CheckObjective& o : objs)
    if (o.is_finite() && o.kind != CheckObjective::Kind::kNext) {
      k_theta = std::max(k_theta, o.bound);
      any_bound = true;
    }
  if (!any_bound) k_theta = 1;

  const int w = k_theta + 2;  // counter values 0..k_theta+1
  const int S = g.num_states;
  const int m = g.num_players;
  TransformResult out{Csg(m, S * w, g.action_names), {}, k_theta};
  Csg& g2 = out.game;
  auto id = [w](int s, int n) { return s * w + n; };

  for (int s = 0; s < S; ++s) g2.initial_states.push_back(id(s, 0));
  for (int s = 0; s < S; ++s)
    for (int n = 0; n < w; ++n) {
      const int sn = id(s, n);
      for (int i = 0; i < m; ++i)
        g2.enabled[size_t(sn)][size_t(i)] = g.enabled[size_t(s)][size_t(i)];
      const int nn = std::min(n + 1, k_theta + 1);
      for (const auto& [code, branch] : g.trans[size_t(s)]) {
        auto& d2 = g2.trans[size_t(sn)][code];
        for (const auto& [t, pr] : branch) d2.emplace_back(id(t, nn), pr);
      }
    }

  for (const CheckObjective& o : objs) {
    CheckObjective c;
    const size_t total = static_cast<size_t>(S * w);
    switch (o.kind) {
      case CheckObjective::Kind::kNext:
        c.kind = CheckObjective::Kind::kUntil;
        c.lhs.assign(total, true);
        c.rhs.assign(total, false);
        for (int s = 0; s < S; ++s)
          if (o.rhs[size_t(s)]) c.rhs[size_t(id(s, 1))] = true;
        break;
      case CheckObjective::Kind::kBoundedUntil:
        c.kind = CheckObjective::Kind::kUntil;
        c.lhs.assign(total, false);
        c.rhs.assign(total, false);
        for (int s = 0; s < S; ++s)
          for (int n = 0; n <= std::min(o.bound, k_theta + 1); ++n) {
            if (o.lhs[size_t(s)]) c.lhs[size_t(id(s, n))] = true;
            if (o.rhs[size_t(s)]) c.rhs[size_t(id(s, n))] = true;
          }
        break;
      case CheckObjective::Kind::kUntil:
        c.kind = CheckObjective::Kind::kUntil;
        c.lhs.assign(total, false);
        c.rhs.assign(total, false);
        for (int s = 0; s < S; ++s)
          for (int n = 0; n < w; ++n) {
            if (o.lhs[size_t(s)]) c.lhs[size_t(id(s, n))] = true;
            if (o.rhs[size_t(s)]) c.rhs[size_t(id(s, n))] = true;
          }
        break;
      case CheckObjective::Kind::kInstant: {
        c.kind = CheckObjective::Kind::kReachReward;
        c.rhs.assign(total, false);
        c.reward = RewardStructure(o.reward.name, S * w);
        for (int s = 0; s < S; ++s) {
          c.rhs[size_t(id(s, o.bound + 1))] = true;
          c.reward.state_rewards[size_t(id(s, o.bound))] = o.reward.state_reward(s);
        }
        break;
      }
      case CheckObjective::Kind::kCumulative: {
        c.kind = CheckObjective::Kind::kReachReward;
        c.rhs.assign(total, false);
        c.reward = RewardStructure(o.reward.name, S * w);
        for (int s = 0; s < S; ++s) {
          c.rhs[size_t(id(s, o.bound))] = true;
          for (int n = 0; n <= o.bound - 1; ++n) {
            const int sn = id(s, n);
            c.reward.state_rewards[size_t(sn)] = o.reward.state_reward(s);
            c.reward.action_rewards[size_t(sn)] = o.reward.action_rewards[size_t(s)];
          }
        }
        break;
      }
      case CheckObjective::Kind::kReachReward: {
        c.kind = CheckObjective::Kind::kReachReward;
        c.rhs.assign(total, false);
        c.reward = RewardStructure(o.reward.name, S * w);
        for (int s = 0; s < S; ++s)
          for (int n = 0; n < w; ++n) {
            const int sn = id(s, n);
            if (o.rhs[size_t(s)]) c.rhs[size_t(sn)] = true;
            c.reward.state_rewards[size_t(sn)] = o.reward.state_reward(s);
            c.reward.action_rewards[size_t(sn)] = o.reward.action_rewards[size_t(s)];
          }
        break;
      }
    }
    out.objectives.push_back(std::move(c));
  }
  g2.validate();
  return out;
}

enum class CheckMode { kNext, kBounded, kUnbounded, kTransformed };

struct PropertyCheck {
  PropertyAst property;  // normalised to the maximising orientation
  CoalitionGame coalition;
  std::vector<CheckObjective> objectives;  // over the coalition game
  CheckMode mode = CheckMode::kNext;
  int step_cap = 0;  // highest step index a witness key can carry
  CheckResult result;
  std::optional<TransformResult> transform;
};

// Full pipeline: normalise, build the coalition game, resolve objectives,
// dispatch on horizon structure, and map values back to original states.
inline PropertyCheck check_property(const CsgModel& model,
                                    const PropertyAst& input,
                                    const CheckerConfig& cfg = {}) {
  const PropertyAst ast = normalize_min_to_max(input);
  ast.partition.validate(model.game.num_players);

  PropertyCheck pc{ast, build_coalition_game(model.game, ast.partition),
                   {},  CheckMode::kNext, 0, {}, std::nullopt};
  pc.objectives = resolve_objectives(ast, model, pc.coalition);
  const Csg& gc = pc.coalition.game;
  const EqType eq = ast.eq_type;
  const Criterion crit = ast.criterion;
  const bool neg = ast.negate_utilities;

  int finite = 0, nexts = 0, unbounded = 0;
  for (const CheckObjective& o : pc.objectives) {
    if (o.kind == CheckObjective::Kind::kNext) ++nexts;
    if (o.is_finite()) ++finite; else ++unbounded;
  }
  const int m = int(pc.objectives.size());

  if (nexts == m) {
    pc.mode = CheckMode::kNext;
    pc.result = check_next(gc, pc.objectives, eq, crit, neg, cfg);
  } else if (finite == m) {
    pc.mode = CheckMode::kBounded;
    for (const CheckObjective& o : pc.objectives)
      pc.step_cap = std::max(pc.step_cap, o.is_reward() ? o.bound
                                                        : std::max(1, o.bound));
    pc.result = check_bounded(gc, pc.objectives, eq, crit, neg, cfg);
  } else if (unbounded == m) {
    pc.mode = CheckMode::kUnbounded;
    pc.result = check_unbounded(gc, pc.objectives, eq, crit, neg, cfg);
  } else {
    pc.mode = CheckMode::kTransformed;
    // The window construction makes the finite components resolve almost
    // surely by itself; only the genuinely unbounded components need the
    // reachability assumption, checked against the untransformed game where
    // counter labels cannot confound it.
    for (int l = 0; l < m; ++l) {
      const CheckObjective& o = pc.objectives[size_t(l)];
      if (o.is_finite()) continue;
      std::vector<bool> target(static_cast<size_t>(gc.num_states));
      for (int s = 0; s < gc.num_states; ++s)
        target[size_t(s)] =
            o.is_reward() ? o.rhs[size_t(s)]
                          : (o.rhs[size_t(s)] || !o.lhs[size_t(s)]);
      AssumptionCheck chk = check_assumption(gc, target);
      if (!chk.ok)
        throw AssumptionError(
            "objective " + std::to_string(l + 1) +
                " violates the almost-sure resolution assumption: from state " +
                std::to_string(chk.avoiding_state) +
                " the game can avoid every resolving state forever",
            l, chk.avoiding_state);
    }
    pc.transform = transform_mixed_horizon(gc, pc.objectives);
    pc.step_cap = pc.transform->k_theta + 1;
    const int w = pc.transform->k_theta + 2;
    CheckResult inner =
        check_unbounded(pc.transform->game, pc.transform->objectives, eq, crit,
                        neg, cfg, /*verify_assumption=*/false);
    pc.result.iterations = inner.iterations;
    pc.result.residual = inner.residual;
    pc.result.contexts = std::move(inner.contexts);
    pc.result.values.assign(static_cast<size_t>(gc.num_states), {});
    for (int s = 0; s < gc.num_states; ++s)
      pc.result.values[size_t(s)] = inner.values[size_t(s * w)];
    for (auto& [key, w2] : inner.witnesses)
      pc.result.witnesses[{key.state / w, key.state % w, key.d, key.e}] =
          std::move(w2);
  }
  return pc;
}

struct BoundOutcome {
  bool is_query = true;
  double sum = 0.0;
  bool holds = true;
};

// Def-style verdict: the sum of per-coalition values compared against the
// property's threshold; a bare query just reports the sum.
inline BoundOutcome evaluate_bound(const ValueVector& values,
                                   const PropertyAst& ast) {
  BoundOutcome o;
  for (double v : values) o.sum += v;
  o.is_query = ast.relation == BoundRel::kQuery;
  switch (ast.relation) {
    case BoundRel::kQuery: o.holds = true; break;
    case BoundRel::kLt: o.holds = o.sum < ast.threshold; break;
    case BoundRel::kLe: o.holds = o.sum <= ast.threshold; break;
    case BoundRel::kGe: o.holds = o.sum >= ast.threshold; break;
    case BoundRel::kGt: o.holds = o.sum > ast.threshold; break;
  }
  return o;
}

}  // namespace eqsynth
