#pragma once
// Finite-memory strategies assembled from stage witnesses, a line-oriented
// text format for them, and Monte-Carlo estimation of the values they induce.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "eqsynth/checker.hpp"
#include "eqsynth/csg.hpp"
#include "eqsynth/csg_io.hpp"
#include "eqsynth/property.hpp"

namespace eqsynth {

// A simulation reached a (state, memory) pair the strategy has no entry for.
class StrategyError : public Error {
 public:
  using Error::Error;
};

// A strategy extracted from a finished check. The property text pins down
// the memory semantics: reparsing it against the same model reconstructs the
// memory-update rule, so the table alone is enough to replay the strategy.
// Keys are (state, step, D, E); bounded modes use the step, the others the
// resolution masks. Every pair reachable under the strategy from an initial
// state has an entry.
struct SynthesizedStrategy {
  std::string property;
  bool is_ce = false;
  CheckMode mode = CheckMode::kNext;
  int step_cap = 0;
  WitnessTable table;
};

namespace strategy_detail {

// Everything needed to step a strategy's memory, rebuilt deterministically
// from the property text and the model. Mirrors the dispatch in
// check_property so keys land exactly on the checker's witness keys.
struct Runtime {
  PropertyAst ast;
  CoalitionGame coalition;
  std::vector<CheckObjective> objectives;
  CheckMode mode = CheckMode::kNext;
  int step_cap = 0;
  std::optional<TransformResult> transform;
  bool reward = false;
  int window = 0;  // transformed counter width, k_theta + 2
};

inline Runtime make_runtime(const CsgModel& model, const PropertyAst& input) {
  Runtime rt;
  rt.ast = normalize_min_to_max(input);
  rt.ast.partition.validate(model.game.num_players);
  rt.coalition = build_coalition_game(model.game, rt.ast.partition);
  rt.objectives = resolve_objectives(rt.ast, model, rt.coalition);
  rt.reward = rt.objectives[0].is_reward();

  int finite = 0, nexts = 0;
  for (const CheckObjective& o : rt.objectives) {
    if (o.kind == CheckObjective::Kind::kNext) ++nexts;
    if (o.is_finite()) ++finite;
  }
  const int m = int(rt.objectives.size());
  if (nexts == m) {
    rt.mode = CheckMode::kNext;
  } else if (finite == m) {
    rt.mode = CheckMode::kBounded;
    for (const CheckObjective& o : rt.objectives)
      rt.step_cap = std::max(
          rt.step_cap, o.is_reward() ? o.bound : std::max(1, o.bound));
  } else if (finite == 0) {
    rt.mode = CheckMode::kUnbounded;
  } else {
    rt.mode = CheckMode::kTransformed;
    rt.transform = transform_mixed_horizon(rt.coalition.game, rt.objectives);
    rt.step_cap = rt.transform->k_theta + 1;
    rt.window = rt.transform->k_theta + 2;
  }
  return rt;
}

inline WitnessKey initial_key(const Runtime& rt, int s) {
  uint32_t d = 0, e = 0;
  switch (rt.mode) {
    case CheckMode::kNext:
      break;
    case CheckMode::kBounded:
      if (!rt.reward) checker_detail::stabilize_prob(rt.objectives, s, 0, d, e);
      break;
    case CheckMode::kUnbounded:
      if (rt.reward)
        checker_detail::stabilize_reach(rt.objectives, s, d);
      else
        checker_detail::stabilize_prob(rt.objectives, s, -1, d, e);
      break;
    case CheckMode::kTransformed: {
      const int sn = s * rt.window;
      if (rt.reward)
        checker_detail::stabilize_reach(rt.transform->objectives, sn, d);
      else
        checker_detail::stabilize_prob(rt.transform->objectives, sn, -1, d, e);
      break;
    }
  }
  return {s, 0, d, e};
}

// Memory update after moving from a node keyed `at` into state t. Bounded
// keys stabilise at the next level, unbounded keys carry the masks forward,
// and transformed keys saturate the step counter with the window.
inline WitnessKey advance(const Runtime& rt, const WitnessKey& at, int t) {
  uint32_t d = at.d, e = at.e;
  switch (rt.mode) {
    case CheckMode::kNext:
      return {t, 1, 0, 0};  // never consulted: next-only runs are over
    case CheckMode::kBounded:
      if (!rt.reward)
        checker_detail::stabilize_prob(rt.objectives, t, at.step + 1, d, e);
      return {t, at.step + 1, d, e};
    case CheckMode::kUnbounded:
      if (rt.reward)
        checker_detail::stabilize_reach(rt.objectives, t, d);
      else
        checker_detail::stabilize_prob(rt.objectives, t, -1, d, e);
      return {t, 0, d, e};
    case CheckMode::kTransformed: {
      const int nn = std::min(at.step + 1, rt.step_cap);
      const int sn = t * rt.window + nn;
      if (rt.reward)
        checker_detail::stabilize_reach(rt.transform->objectives, sn, d);
      else
        checker_detail::stabilize_prob(rt.transform->objectives, sn, -1, d, e);
      return {t, nn, d, e};
    }
  }
  return {t, 0, d, e};
}

// Whether a run can still consult the table after acting at this key. Must
// match the checker's recursion exactly: expanding past it would ask for
// witnesses that were never computed.
inline bool expands(const Runtime& rt, const WitnessKey& k) {
  const uint32_t full = (1u << rt.objectives.size()) - 1u;
  switch (rt.mode) {
    case CheckMode::kNext:
      return false;
    case CheckMode::kBounded: {
      if (rt.reward) return k.step < rt.step_cap;
      if ((k.d | k.e) == full) return false;
      for (size_t l = 0; l < rt.objectives.size(); ++l) {
        if ((k.d | k.e) & (1u << l)) continue;
        const CheckObjective& o = rt.objectives[l];
        const int need = o.kind == CheckObjective::Kind::kNext ? 1 : o.bound;
        if (k.step < need) return true;  // a live objective keeps recursing
      }
      return false;
    }
    case CheckMode::kUnbounded:
    case CheckMode::kTransformed:
      return rt.reward ? k.d != full : (k.d | k.e) != full;
  }
  return false;
}

// Joint codes the witness plays with positive probability.
inline std::vector<int64_t> support_codes(const Csg& g,
                                          const StageWitness& w) {
  const int m = int(w.digits.size());
  std::vector<int64_t> out;
  std::vector<int> digits(static_cast<size_t>(m));
  if (w.is_ce) {
    std::vector<int> sizes(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) sizes[size_t(i)] = w.local_count(i);
    JointIndexer ji(sizes);
    std::vector<int> locals;
    for (int64_t idx = 0; idx < ji.total; ++idx) {
      if (idx >= int64_t(w.joint.probs.size()) || w.joint.probs[size_t(idx)] <= 0.0)
        continue;
      ji.decode(idx, locals);
      for (int i = 0; i < m; ++i)
        digits[size_t(i)] = w.digits[size_t(i)][size_t(locals[size_t(i)])];
      out.push_back(g.aidx.index(digits));
    }
  } else {
    std::vector<std::vector<int>> supp(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
      const auto& row = w.profile.probs[size_t(i)];
      for (size_t a = 0; a < row.size(); ++a)
        if (row[a] > 0.0) supp[size_t(i)].push_back(w.digits[size_t(i)][a]);
      if (supp[size_t(i)].empty())
        supp[size_t(i)].push_back(w.digits[size_t(i)][0]);
    }
    std::vector<size_t> pick(static_cast<size_t>(m), 0);
    for (;;) {
      for (int i = 0; i < m; ++i)
        digits[size_t(i)] = supp[size_t(i)][pick[size_t(i)]];
      out.push_back(g.aidx.index(digits));
      int c = m - 1;
      while (c >= 0 && ++pick[size_t(c)] == supp[size_t(c)].size()) {
        pick[size_t(c)] = 0;
        --c;
      }
      if (c < 0) break;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Walks the positive entries; the last one absorbs top-end rounding slack.
inline int sample_index(const std::vector<double>& probs, double u) {
  int last = 0;
  double acc = 0.0;
  for (size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    last = int(k);
    acc += probs[k];
    if (u < acc) return int(k);
  }
  return last;
}

inline int64_t sample_code(const Csg& g, const StageWitness& w,
                           SplitMix64& rng) {
  const int m = int(w.digits.size());
  std::vector<int> digits(static_cast<size_t>(m));
  if (w.is_ce) {
    std::vector<int> sizes(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) sizes[size_t(i)] = w.local_count(i);
    JointIndexer ji(sizes);
    std::vector<int> locals;
    ji.decode(sample_index(w.joint.probs, rng.next_double()), locals);
    for (int i = 0; i < m; ++i)
      digits[size_t(i)] = w.digits[size_t(i)][size_t(locals[size_t(i)])];
  } else {
    for (int i = 0; i < m; ++i) {
      const int a = sample_index(w.profile.probs[size_t(i)], rng.next_double());
      digits[size_t(i)] = w.digits[size_t(i)][size_t(a)];
    }
  }
  return g.aidx.index(digits);
}

inline int sample_branch(const std::vector<std::pair<int, double>>& branch,
                         SplitMix64& rng) {
  const double u = rng.next_double();
  double acc = 0.0;
  int last = branch.front().first;
  for (const auto& [t, pr] : branch) {
    if (pr <= 0.0) continue;
    last = t;
    acc += pr;
    if (u < acc) return t;
  }
  return last;
}

inline std::string describe_key(const WitnessKey& k) {
  return "state " + std::to_string(k.state) + " at memory (step " +
         std::to_string(k.step) + ", D " + std::to_string(k.d) + ", E " +
         std::to_string(k.e) + ")";
}

// One sampled path. Per-objective scoring follows the path semantics:
// next looks at the first move, untils resolve on their atoms (a bounded
// until that exhausts its budget scores zero), instantaneous pays the state
// reward at its horizon, cumulative sums strictly below its bound, and
// reachability sums until the goal, exclusive. A run cut by the horizon
// leaves untils at zero and rewards at the sum so far.
inline void run_once(const Runtime& rt, const WitnessTable& table, int start,
                     int horizon, SplitMix64& rng, std::vector<double>& out,
                     bool& truncated) {
  const Csg& g = rt.coalition.game;
  const auto& objs = rt.objectives;
  const int m = int(objs.size());
  const uint32_t all = (1u << m) - 1u;
  uint32_t fin = 0;
  out.assign(static_cast<size_t>(m), 0.0);
  std::vector<double> acc(static_cast<size_t>(m), 0.0);

  auto resolve = [&](int s, int j) {
    for (int l = 0; l < m; ++l) {
      const uint32_t bit = 1u << l;
      if (fin & bit) continue;
      const CheckObjective& o = objs[size_t(l)];
      switch (o.kind) {
        case CheckObjective::Kind::kNext:
          if (j == 1) {
            out[size_t(l)] = o.rhs[size_t(s)] ? 1.0 : 0.0;
            fin |= bit;
          }
          break;
        case CheckObjective::Kind::kBoundedUntil:
          if (o.rhs[size_t(s)]) {
            out[size_t(l)] = 1.0;
            fin |= bit;
          } else if (!o.lhs[size_t(s)] || j >= o.bound) {
            fin |= bit;
          }
          break;
        case CheckObjective::Kind::kUntil:
          if (o.rhs[size_t(s)]) {
            out[size_t(l)] = 1.0;
            fin |= bit;
          } else if (!o.lhs[size_t(s)]) {
            fin |= bit;
          }
          break;
        case CheckObjective::Kind::kInstant:
          if (j == o.bound) {
            out[size_t(l)] = o.reward.state_reward(s);
            fin |= bit;
          }
          break;
        case CheckObjective::Kind::kCumulative:
          if (j == o.bound) {
            out[size_t(l)] = acc[size_t(l)];
            fin |= bit;
          }
          break;
        case CheckObjective::Kind::kReachReward:
          if (o.rhs[size_t(s)]) {
            out[size_t(l)] = acc[size_t(l)];
            fin |= bit;
          }
          break;
      }
    }
  };

  int s = start;
  resolve(s, 0);
  WitnessKey key = initial_key(rt, s);
  for (int j = 0; fin != all && j < horizon; ++j) {
    auto it = table.find(key);
    if (it == table.end())
      throw StrategyError("no strategy entry for " + describe_key(key));
    const int64_t code = sample_code(g, it->second, rng);
    for (int l = 0; l < m; ++l) {
      if (fin & (1u << l)) continue;
      const CheckObjective& o = objs[size_t(l)];
      if (o.kind == CheckObjective::Kind::kCumulative ||
          o.kind == CheckObjective::Kind::kReachReward)
        acc[size_t(l)] +=
            o.reward.state_reward(s) + o.reward.action_reward(s, code);
    }
    const int t = sample_branch(g.dist(s, code), rng);
    resolve(t, j + 1);
    key = advance(rt, key, t);
    s = t;
  }
  truncated = fin != all;
  for (int l = 0; l < m; ++l)
    if (!(fin & (1u << l)) &&
        objs[size_t(l)].kind == CheckObjective::Kind::kReachReward)
      out[size_t(l)] = acc[size_t(l)];
}

}  // namespace strategy_detail

// Extracts the strategy a finished check certifies: the witness entries at
// every (state, memory) pair reachable from an initial state when play
// follows the witnesses themselves. A missing entry inside that closure is
// a checker bug, not a caller error.
inline SynthesizedStrategy assemble_strategy(const CsgModel& model,
                                             const PropertyCheck& pc) {
  using namespace strategy_detail;
  Runtime rt = make_runtime(model, pc.property);
  const Csg& g = rt.coalition.game;

  SynthesizedStrategy out;
  out.property = print_property(rt.ast);
  out.is_ce = rt.ast.eq_type == EqType::kCorrelated;
  out.mode = rt.mode;
  out.step_cap = rt.step_cap;

  std::unordered_set<WitnessKey, WitnessKeyHash> seen;
  std::vector<WitnessKey> queue;
  auto add = [&](const WitnessKey& k) {
    if (seen.insert(k).second) queue.push_back(k);
  };
  for (int s0 : g.initial_states) add(initial_key(rt, s0));
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    const WitnessKey k = queue[qi];
    auto it = pc.result.witnesses.find(k);
    if (it == pc.result.witnesses.end())
      throw Error("internal error: no stage witness for " + describe_key(k));
    out.table.emplace(k, it->second);
    if (!expands(rt, k)) continue;
    for (int64_t code : support_codes(g, it->second))
      for (const auto& [t, pr] : g.dist(k.state, code))
        if (pr > 0.0) add(advance(rt, k, t));
  }
  return out;
}

struct SimulationConfig {
  int samples = 10000;
  uint64_t seed = 1;
  int horizon_cap = 0;  // 0 picks 100 * |S|; finite horizons always complete
  int threads = 1;
  int start_state = -1;  // -1 starts at the model's first initial state
};

struct SimulationReport {
  std::vector<double> means;        // per coalition, objective order
  std::vector<double> half_widths;  // 95% normal-approximation intervals
  int samples = 0;
  uint64_t seed = 0;
  int horizon_cap = 0;  // effective per-run cap after defaults
  int truncated = 0;    // runs cut by the cap with objectives unresolved
};

// Monte-Carlo estimate of the per-coalition values the strategy induces.
// Sampling is split into a fixed number of batches with seeds derived from
// the batch index and merged in batch order, so the report is a pure
// function of (samples, seed) regardless of the thread count.
inline SimulationReport simulate(const CsgModel& model,
                                 const SynthesizedStrategy& strat,
                                 const SimulationConfig& cfg = {}) {
  using namespace strategy_detail;
  if (cfg.samples <= 0) throw Error("sample count must be positive");
  Runtime rt = make_runtime(model, parse_property(strat.property,
                                                  model.game.num_players));
  const Csg& g = rt.coalition.game;
  const int m = int(rt.objectives.size());
  const int start = cfg.start_state >= 0 ? cfg.start_state
                                         : g.initial_states.front();
  if (start < 0 || start >= g.num_states)
    throw Error("start state " + std::to_string(start) + " is out of range");

  int horizon = 0;
  bool open_ended = false;
  for (const CheckObjective& o : rt.objectives) {
    switch (o.kind) {
      case CheckObjective::Kind::kNext:
        horizon = std::max(horizon, 1);
        break;
      case CheckObjective::Kind::kBoundedUntil:
      case CheckObjective::Kind::kInstant:
      case CheckObjective::Kind::kCumulative:
        horizon = std::max(horizon, o.bound);
        break;
      case CheckObjective::Kind::kUntil:
      case CheckObjective::Kind::kReachReward:
        open_ended = true;
        break;
    }
  }
  if (open_ended) {
    const int cap =
        cfg.horizon_cap > 0 ? cfg.horizon_cap : 100 * g.num_states;
    horizon = std::max(horizon, cap);
  }

  const int nb = std::min(cfg.samples, 64);
  struct Batch {
    std::vector<double> sum, sq;
    int truncated = 0;
  };
  std::vector<Batch> batches(static_cast<size_t>(nb));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(nb));
  checker_detail::run_parallel(nb, cfg.threads, [&](int b) {
    try {
      const int base = cfg.samples / nb;
      const int count = base + (b < cfg.samples % nb ? 1 : 0);
      SplitMix64 rng(cfg.seed + 0x9E3779B97F4A7C15ULL * uint64_t(b + 1));
      Batch& acc = batches[size_t(b)];
      acc.sum.assign(static_cast<size_t>(m), 0.0);
      acc.sq.assign(static_cast<size_t>(m), 0.0);
      std::vector<double> u;
      for (int r = 0; r < count; ++r) {
        bool cut = false;
        run_once(rt, strat.table, start, horizon, rng, u, cut);
        if (cut) ++acc.truncated;
        for (int l = 0; l < m; ++l) {
          acc.sum[size_t(l)] += u[size_t(l)];
          acc.sq[size_t(l)] += u[size_t(l)] * u[size_t(l)];
        }
      }
    } catch (...) {
      errors[size_t(b)] = std::current_exception();
    }
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  SimulationReport rep;
  rep.samples = cfg.samples;
  rep.seed = cfg.seed;
  rep.horizon_cap = horizon;
  rep.means.assign(static_cast<size_t>(m), 0.0);
  rep.half_widths.assign(static_cast<size_t>(m), 0.0);
  const double n = double(cfg.samples);
  for (int l = 0; l < m; ++l) {
    double sum = 0.0, sq = 0.0;
    for (const Batch& b : batches) {
      sum += b.sum[size_t(l)];
      sq += b.sq[size_t(l)];
    }
    const double mean = sum / n;
    rep.means[size_t(l)] = mean;
    if (cfg.samples > 1) {
      const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
      rep.half_widths[size_t(l)] = 1.96 * std::sqrt(var / n);
    }
  }
  for (const Batch& b : batches) rep.truncated += b.truncated;
  return rep;
}

namespace strategy_detail {

inline const char* mode_name(CheckMode mode) {
  switch (mode) {
    case CheckMode::kNext: return "next";
    case CheckMode::kBounded: return "bounded";
    case CheckMode::kUnbounded: return "unbounded";
    case CheckMode::kTransformed: return "windowed";
  }
  return "next";
}

inline std::string digit_name(const Csg& g, int coalition, int digit) {
  return digit == 0 ? "-"
                    : g.action_names[size_t(coalition)][size_t(digit - 1)];
}

// Resolves an action name against a coalition's alphabet at a state; '-' is
// the idle digit and is only legal where the coalition idles.
inline int parse_digit(const Csg& g, int state, int coalition,
                       const std::string& name, int line) {
  int digit = -1;
  if (name == "-") {
    digit = 0;
  } else {
    const auto& names = g.action_names[size_t(coalition)];
    for (size_t a = 0; a < names.size(); ++a)
      if (names[a] == name) {
        digit = int(a) + 1;
        break;
      }
    if (digit < 0)
      throw ParseError("unknown action '" + name + "' for coalition " +
                           std::to_string(coalition + 1),
                       line);
  }
  const std::vector<int> allowed = g.enabled_digits(state, coalition);
  if (std::find(allowed.begin(), allowed.end(), digit) == allowed.end())
    throw ParseError("action '" + name + "' is not enabled for coalition " +
                         std::to_string(coalition + 1) + " at state " +
                         std::to_string(state),
                     line);
  return digit;
}

}  // namespace strategy_detail

// Writes the strategy in a line-oriented text format echoing the model
// syntax: '#' comments, a header, then one distribution per line. CE nodes
// serialise the joint lottery ("joint <key> <action per coalition> <p>"
// groups), NE nodes one product factor per coalition ("act <key> <coalition>
// <action> <p>" pairs). Zero-probability entries are omitted; probabilities
// print with enough digits to round-trip exactly.
inline void export_strategy(const SynthesizedStrategy& strat,
                            const CsgModel& model, std::ostream& out) {
  using namespace strategy_detail;
  Runtime rt = make_runtime(model, parse_property(strat.property,
                                                  model.game.num_players));
  const Csg& g = rt.coalition.game;
  const int m = g.num_players;

  out << "strategy\n";
  out << "property " << strat.property << "\n";
  out << "kind " << (strat.is_ce ? "ce" : "ne") << "\n";
  out << "mode " << mode_name(strat.mode) << "\n";
  out << "stepcap " << strat.step_cap << "\n";

  std::vector<const WitnessTable::value_type*> rows;
  rows.reserve(strat.table.size());
  for (const auto& kv : strat.table) rows.push_back(&kv);
  std::sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) {
    const WitnessKey& x = a->first;
    const WitnessKey& y = b->first;
    return std::tie(x.state, x.step, x.d, x.e) <
           std::tie(y.state, y.step, y.d, y.e);
  });

  for (const auto* row : rows) {
    const WitnessKey& k = row->first;
    const StageWitness& w = row->second;
    const std::string key = std::to_string(k.state) + " " +
                            std::to_string(k.step) + " " +
                            std::to_string(k.d) + " " + std::to_string(k.e);
    if (w.is_ce) {
      std::vector<int> sizes(static_cast<size_t>(m));
      for (int i = 0; i < m; ++i) sizes[size_t(i)] = w.local_count(i);
      JointIndexer ji(sizes);
      std::vector<int> locals;
      out << "joint " << key;
      for (int64_t idx = 0; idx < ji.total; ++idx) {
        if (idx >= int64_t(w.joint.probs.size()) ||
            w.joint.probs[size_t(idx)] <= 0.0)
          continue;
        ji.decode(idx, locals);
        for (int i = 0; i < m; ++i)
          out << " "
              << digit_name(g, i, w.digits[size_t(i)][size_t(locals[size_t(i)])]);
        out << " " << format_double(w.joint.probs[size_t(idx)]);
      }
      out << "\n";
    } else {
      for (int i = 0; i < m; ++i) {
        out << "act " << key << " " << i + 1;
        const auto& row_i = w.profile.probs[size_t(i)];
        for (size_t a = 0; a < row_i.size(); ++a) {
          if (row_i[a] <= 0.0) continue;
          out << " " << digit_name(g, i, w.digits[size_t(i)][a]) << " "
              << format_double(row_i[a]);
        }
        out << "\n";
      }
    }
  }
}

// Inverse of export_strategy. Validates shape only: names must resolve to
// enabled actions, distributions must sum to one within 1e-9, and the
// header must agree with what the property implies on this model. Whether
// the table covers everything a simulation will touch is checked at run
// time, where a miss raises StrategyError with the offending pair.
inline SynthesizedStrategy import_strategy(const CsgModel& model,
                                           std::istream& in) {
  using namespace csg_io_detail;
  using namespace strategy_detail;

  std::ostringstream buf;
  buf << in.rdbuf();
  const std::vector<Line> lines = tokenize(buf.str());
  if (lines.empty() || lines[0].tokens[0] != "strategy")
    throw ParseError("file must start with a 'strategy' header line",
                     lines.empty() ? 1 : lines[0].number);

  SynthesizedStrategy strat;
  std::optional<Runtime> rt;
  bool saw_kind = false, saw_mode = false, saw_cap = false;
  std::string mode_word;
  int declared_cap = 0;

  auto need_runtime = [&](const Line& ln) -> Runtime& {
    if (!rt)
      throw ParseError("the property line must precede strategy entries",
                       ln.number);
    return *rt;
  };

  struct NodeAcc {
    bool is_ce = false;
    std::vector<std::vector<double>> local;  // [coalition][local]
    std::vector<double> joint;
    std::vector<bool> have;  // NE coalitions seen
    int line = 0;
  };
  std::unordered_map<WitnessKey, NodeAcc, WitnessKeyHash> nodes;

  for (size_t li = 1; li < lines.size(); ++li) {
    const Line& ln = lines[li];
    const auto& t = ln.tokens;
    const std::string& dir = t[0];
    if (dir == "property") {
      if (t.size() < 2) throw ParseError("usage: property <text>", ln.number);
      std::string text;
      for (size_t k = 1; k < t.size(); ++k) {
        if (k > 1) text += " ";
        text += t[k];
      }
      try {
        rt = make_runtime(model, parse_property(text, model.game.num_players));
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        throw ParseError(e.what(), ln.number);
      }
      strat.property = print_property(rt->ast);
      strat.mode = rt->mode;
      strat.step_cap = rt->step_cap;
      strat.is_ce = rt->ast.eq_type == EqType::kCorrelated;
    } else if (dir == "kind") {
      if (t.size() != 2 || (t[1] != "ce" && t[1] != "ne"))
        throw ParseError("usage: kind ce|ne", ln.number);
      Runtime& r = need_runtime(ln);
      if ((t[1] == "ce") != (r.ast.eq_type == EqType::kCorrelated))
        throw ParseError("kind '" + t[1] + "' contradicts the property",
                         ln.number);
      saw_kind = true;
    } else if (dir == "mode") {
      if (t.size() != 2) throw ParseError("usage: mode <name>", ln.number);
      Runtime& r = need_runtime(ln);
      if (t[1] != mode_name(r.mode))
        throw ParseError("mode '" + t[1] + "' contradicts the property; " +
                             "expected '" + mode_name(r.mode) + "'",
                         ln.number);
      mode_word = t[1];
      saw_mode = true;
    } else if (dir == "stepcap") {
      if (t.size() != 2) throw ParseError("usage: stepcap N", ln.number);
      Runtime& r = need_runtime(ln);
      declared_cap = parse_int(t[1], ln, "a step cap");
      if (declared_cap != r.step_cap)
        throw ParseError("stepcap " + t[1] + " contradicts the property; " +
                             "expected " + std::to_string(r.step_cap),
                         ln.number);
      saw_cap = true;
    } else if (dir == "joint" || dir == "act") {
      Runtime& r = need_runtime(ln);
      const Csg& g = r.coalition.game;
      const int m = g.num_players;
      const bool is_ce = dir == "joint";
      if (is_ce != (r.ast.eq_type == EqType::kCorrelated))
        throw ParseError(std::string("'") + dir + "' entry in a " +
                             (is_ce ? "ne" : "ce") + " strategy",
                         ln.number);
      const size_t fixed = is_ce ? 5 : 6;
      if (t.size() < fixed)
        throw ParseError(is_ce ? "usage: joint <state> <step> <d> <e> "
                                 "<action...> <p> ..."
                               : "usage: act <state> <step> <d> <e> "
                                 "<coalition> <action> <p> ...",
                         ln.number);
      WitnessKey key{parse_int(t[1], ln, "a state"),
                     parse_int(t[2], ln, "a step"),
                     uint32_t(parse_int(t[3], ln, "a D mask")),
                     uint32_t(parse_int(t[4], ln, "an E mask"))};
      if (key.state < 0 || key.state >= g.num_states)
        throw ParseError("state " + t[1] + " is out of range", ln.number);

      NodeAcc& node = nodes[key];
      if (node.local.empty()) {
        node.is_ce = is_ce;
        node.line = ln.number;
        node.local.assign(static_cast<size_t>(m), {});
        node.have.assign(static_cast<size_t>(m), false);
        std::vector<int> sizes(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) {
          const auto digits = g.enabled_digits(key.state, i);
          node.local[size_t(i)].assign(digits.size(), 0.0);
          sizes[size_t(i)] = int(digits.size());
        }
        if (is_ce) node.joint.assign(size_t(JointIndexer(sizes).total), 0.0);
      }

      if (is_ce) {
        std::vector<int> sizes(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i)
          sizes[size_t(i)] = int(node.local[size_t(i)].size());
        JointIndexer ji(sizes);
        if ((t.size() - fixed) % size_t(m + 1) != 0)
          throw ParseError("joint entries come in groups of " +
                               std::to_string(m) + " actions and one probability",
                           ln.number);
        std::vector<int> locals(static_cast<size_t>(m));
        for (size_t k = fixed; k < t.size(); k += size_t(m + 1)) {
          for (int i = 0; i < m; ++i) {
            const int digit = parse_digit(g, key.state, i, t[k + size_t(i)],
                                          ln.number);
            const auto allowed = g.enabled_digits(key.state, i);
            locals[size_t(i)] = int(std::find(allowed.begin(), allowed.end(),
                                              digit) -
                                    allowed.begin());
          }
          const double p = parse_num(t[k + size_t(m)], ln);
          if (p < 0.0)
            throw ParseError("negative probability " + t[k + size_t(m)],
                             ln.number);
          node.joint[size_t(ji.index(locals))] += p;
        }
      } else {
        const int coalition = parse_int(t[5], ln, "a coalition index") - 1;
        if (coalition < 0 || coalition >= m)
          throw ParseError("coalition " + t[5] + " is out of range",
                           ln.number);
        if ((t.size() - fixed) % 2 != 0)
          throw ParseError("act entries come in action-probability pairs",
                           ln.number);
        node.have[size_t(coalition)] = true;
        for (size_t k = fixed; k < t.size(); k += 2) {
          const int digit =
              parse_digit(g, key.state, coalition, t[k], ln.number);
          const auto allowed = g.enabled_digits(key.state, coalition);
          const int local = int(std::find(allowed.begin(), allowed.end(),
                                          digit) -
                                allowed.begin());
          const double p = parse_num(t[k + 1], ln);
          if (p < 0.0)
            throw ParseError("negative probability " + t[k + 1], ln.number);
          node.local[size_t(coalition)][size_t(local)] += p;
        }
      }
    } else {
      throw ParseError("unknown directive '" + dir + "'", ln.number);
    }
  }

  if (!rt) throw ParseError("missing property line", 1);
  if (!saw_kind) throw ParseError("missing kind line", 1);
  if (!saw_mode) throw ParseError("missing mode line", 1);
  if (!saw_cap) throw ParseError("missing stepcap line", 1);

  const Csg& g = rt->coalition.game;
  const int m = g.num_players;
  for (auto& [key, node] : nodes) {
    StageWitness w;
    w.is_ce = node.is_ce;
    w.digits.assign(static_cast<size_t>(m), {});
    for (int i = 0; i < m; ++i)
      w.digits[size_t(i)] = g.enabled_digits(key.state, i);
    if (node.is_ce) {
      double sum = 0.0;
      for (double p : node.joint) sum += p;
      if (std::abs(sum - 1.0) > 1e-9)
        throw ParseError("joint distribution at state " +
                             std::to_string(key.state) + " sums to " +
                             format_double(sum),
                         node.line);
      w.joint.probs = std::move(node.joint);
    } else {
      for (int i = 0; i < m; ++i) {
        if (!node.have[size_t(i)])
          throw ParseError("missing distribution for coalition " +
                               std::to_string(i + 1) + " at state " +
                               std::to_string(key.state),
                           node.line);
        double sum = 0.0;
        for (double p : node.local[size_t(i)]) sum += p;
        if (std::abs(sum - 1.0) > 1e-9)
          throw ParseError("distribution for coalition " +
                               std::to_string(i + 1) + " at state " +
                               std::to_string(key.state) + " sums to " +
                               format_double(sum),
                           node.line);
      }
      w.profile.probs = std::move(node.local);
    }
    strat.table.emplace(key, std::move(w));
  }
  return strat;
}

}  // namespace eqsynth
