#pragma once
// Command-line surface. Four subcommands share one binary: nfg-solve for
// one-shot games, csg-check and csg-simulate for concurrent games, bench for
// solver timings. run_cli is the testable entry point; exit codes are part
// of the interface: 0 success, 2 parse error, 3 solve failure, 4 resolution
// assumption violated, 5 non-convergence.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "eqsynth/checker.hpp"
#include "eqsynth/csg_io.hpp"
#include "eqsynth/nfg_io.hpp"
#include "eqsynth/property.hpp"
#include "eqsynth/strategy.hpp"

namespace eqsynth {

namespace cli_detail {

using Json = nlohmann::ordered_json;

constexpr int kOk = 0;
constexpr int kParseExit = 2;
constexpr int kSolveExit = 3;
constexpr int kAssumptionExit = 4;
constexpr int kConvergenceExit = 5;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void emit(const Json& doc, std::ostream& out) {
  out << doc.dump(2) << "\n";
}

inline std::string join_values(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += " ";
    s += format_double(v[i]);
  }
  return s;
}

struct NfgSolveArgs {
  std::string game;
  std::string eq = "ce";
  std::string crit = "sw";
  bool minimize = false;
  std::string format = "human";
};

inline int cmd_nfg_solve(const NfgSolveArgs& a, std::ostream& out,
                         std::ostream& err) {
  NormalFormGame game;
  try {
    game = parse_nfg(read_file(a.game));
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kParseExit;
  }

  const EqType eq = a.eq == "ce" ? EqType::kCorrelated : EqType::kNash;
  const Criterion crit =
      a.crit == "sw" ? Criterion::kSocialWelfare : Criterion::kSocialFairness;
  checker_detail::StageSolution sol;
  try {
    sol = checker_detail::solve_stage(
        a.minimize ? negate_utilities(game) : game, eq, crit, 0);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kSolveExit;
  }
  std::vector<double> values = sol.values;
  if (a.minimize)
    for (double& v : values) v = -v;

  if (a.format == "structured") {
    Json doc;
    doc["schema"] = "eqsynth/1";
    doc["command"] = "nfg-solve";
    doc["equilibrium"] = a.eq;
    doc["criterion"] = a.crit;
    doc["minimize"] = a.minimize;
    doc["values"] = values;
    doc["welfare"] = welfare(values);
    doc["spread"] = spread(values);
    Json wit;
    if (sol.witness.is_ce) {
      wit["kind"] = "joint";
      Json support = Json::array();
      std::vector<int> digits;
      for (int64_t j = 0; j < int64_t(sol.witness.joint.probs.size()); ++j) {
        const double p = sol.witness.joint.probs[size_t(j)];
        if (p <= 0.0) continue;
        game.indexer.decode(j, digits);
        Json row;
        Json actions = Json::array();
        for (int i = 0; i < game.num_players; ++i)
          actions.push_back(game.actions[size_t(i)][size_t(digits[size_t(i)])]);
        row["actions"] = actions;
        row["prob"] = p;
        support.push_back(row);
      }
      wit["support"] = support;
    } else {
      wit["kind"] = "profile";
      Json players = Json::array();
      for (int i = 0; i < game.num_players; ++i) {
        Json actions = Json::array();
        const auto& row = sol.witness.profile.probs[size_t(i)];
        for (size_t x = 0; x < row.size(); ++x) {
          if (row[x] <= 0.0) continue;
          Json cell;
          cell["action"] = game.actions[size_t(i)][x];
          cell["prob"] = row[x];
          actions.push_back(cell);
        }
        players.push_back(actions);
      }
      wit["players"] = players;
    }
    doc["witness"] = wit;
    emit(doc, out);
    return kOk;
  }

  out << "equilibrium: " << a.eq << "  criterion: " << a.crit
      << "  direction: " << (a.minimize ? "min" : "max") << "\n";
  out << "values: " << join_values(values) << "\n";
  out << "welfare: " << format_double(welfare(values)) << "\n";
  out << "spread: " << format_double(spread(values)) << "\n";
  if (sol.witness.is_ce) {
    out << "joint lottery:\n";
    std::vector<int> digits;
    for (int64_t j = 0; j < int64_t(sol.witness.joint.probs.size()); ++j) {
      const double p = sol.witness.joint.probs[size_t(j)];
      if (p <= 0.0) continue;
      game.indexer.decode(j, digits);
      out << "  (";
      for (int i = 0; i < game.num_players; ++i) {
        if (i) out << ",";
        out << game.actions[size_t(i)][size_t(digits[size_t(i)])];
      }
      out << ") " << format_double(p) << "\n";
    }
  } else {
    out << "profile:\n";
    for (int i = 0; i < game.num_players; ++i) {
      out << "  player " << i + 1 << ":";
      const auto& row = sol.witness.profile.probs[size_t(i)];
      for (size_t x = 0; x < row.size(); ++x) {
        if (row[x] <= 0.0) continue;
        out << " " << game.actions[size_t(i)][x] << " "
            << format_double(row[x]);
      }
      out << "\n";
    }
  }
  return kOk;
}

inline const char* mode_word(CheckMode mode) {
  switch (mode) {
    case CheckMode::kNext: return "next";
    case CheckMode::kBounded: return "bounded";
    case CheckMode::kUnbounded: return "unbounded";
    case CheckMode::kTransformed: return "windowed";
  }
  return "next";
}

struct CsgCheckArgs {
  std::string model;
  std::string prop;
  std::string synth;
  std::string format = "human";
  double epsilon = 1e-6;
  int max_iters = 10000;
  int threads = 1;
};

inline int cmd_csg_check(const CsgCheckArgs& a, std::ostream& out,
                         std::ostream& err) {
  CsgModel model;
  PropertyAst ast;
  try {
    model = parse_csg(read_file(a.model));
    ast = parse_property(a.prop, model.game.num_players);
    // Semantic validation belongs to the parse phase: a property that names
    // unknown atoms or overlaps coalitions is unusable input, not a solver
    // failure.
    ast.partition.validate(model.game.num_players);
    CoalitionGame cg = build_coalition_game(model.game, ast.partition);
    resolve_objectives(normalize_min_to_max(ast), model, cg);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kParseExit;
  }

  CheckerConfig cfg;
  cfg.epsilon = a.epsilon;
  cfg.max_iterations = a.max_iters;
  cfg.threads = a.threads;
  PropertyCheck pc;
  try {
    pc = check_property(model, ast, cfg);
  } catch (const AssumptionError& e) {
    err << "error: " << e.what() << "\n";
    return kAssumptionExit;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kConvergenceExit;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kSolveExit;
  }

  std::string synth_path;
  if (!a.synth.empty()) {
    try {
      SynthesizedStrategy strat = assemble_strategy(model, pc);
      std::ofstream file(a.synth, std::ios::binary);
      if (!file) throw Error("cannot write '" + a.synth + "'");
      export_strategy(strat, model, file);
      synth_path = a.synth;
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return kSolveExit;
    }
  }

  if (a.format == "structured") {
    Json doc;
    doc["schema"] = "eqsynth/1";
    doc["command"] = "csg-check";
    doc["property"] = print_property(pc.property);
    doc["mode"] = mode_word(pc.mode);
    doc["iterations"] = pc.result.iterations;
    doc["residual"] = pc.result.residual;
    Json states = Json::array();
    for (int s : model.game.initial_states) {
      BoundOutcome o = evaluate_bound(pc.result.values[size_t(s)], pc.property);
      Json row;
      row["state"] = s;
      row["values"] = pc.result.values[size_t(s)];
      row["sum"] = o.sum;
      if (!o.is_query) row["holds"] = o.holds;
      states.push_back(row);
    }
    doc["initial_states"] = states;
    if (!synth_path.empty()) doc["strategy_path"] = synth_path;
    emit(doc, out);
    return kOk;
  }

  out << "property: " << print_property(pc.property) << "\n";
  out << "mode: " << mode_word(pc.mode) << "\n";
  out << "iterations: " << pc.result.iterations
      << "  residual: " << format_double(pc.result.residual) << "\n";
  for (int s : model.game.initial_states) {
    BoundOutcome o = evaluate_bound(pc.result.values[size_t(s)], pc.property);
    out << "state " << s << ": values "
        << join_values(pc.result.values[size_t(s)]) << "  sum "
        << format_double(o.sum);
    if (!o.is_query) out << "  holds " << (o.holds ? "yes" : "no");
    out << "\n";
  }
  if (!synth_path.empty()) out << "strategy written to " << synth_path << "\n";
  return kOk;
}

struct CsgSimulateArgs {
  std::string model;
  std::string strategy;
  std::string format = "human";
  int samples = 10000;
  uint64_t seed = 1;
  int threads = 1;
  int horizon = 0;
};

inline int cmd_csg_simulate(const CsgSimulateArgs& a, std::ostream& out,
                            std::ostream& err) {
  CsgModel model;
  SynthesizedStrategy strat;
  try {
    model = parse_csg(read_file(a.model));
    std::istringstream in(read_file(a.strategy));
    strat = import_strategy(model, in);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kParseExit;
  }

  SimulationConfig cfg;
  cfg.samples = a.samples;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  cfg.horizon_cap = a.horizon;
  SimulationReport rep;
  try {
    rep = simulate(model, strat, cfg);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kSolveExit;
  }

  if (a.format == "structured") {
    Json doc;
    doc["schema"] = "eqsynth/1";
    doc["command"] = "csg-simulate";
    doc["property"] = strat.property;
    doc["samples"] = rep.samples;
    doc["seed"] = rep.seed;
    doc["horizon_cap"] = rep.horizon_cap;
    doc["truncated"] = rep.truncated;
    Json rows = Json::array();
    for (size_t l = 0; l < rep.means.size(); ++l) {
      Json row;
      row["coalition"] = int(l) + 1;
      row["mean"] = rep.means[l];
      row["half_width"] = rep.half_widths[l];
      rows.push_back(row);
    }
    doc["estimates"] = rows;
    emit(doc, out);
    return kOk;
  }

  out << "property: " << strat.property << "\n";
  out << "samples: " << rep.samples << "  seed: " << rep.seed << "\n";
  out << "horizon cap: " << rep.horizon_cap
      << "  truncated: " << rep.truncated << "\n";
  for (size_t l = 0; l < rep.means.size(); ++l)
    out << "coalition " << l + 1 << ": mean " << format_double(rep.means[l])
        << " +- " << format_double(rep.half_widths[l]) << "\n";
  return kOk;
}

struct BenchArgs {
  int players = 2;
  int actions = 2;
  int count = 0;
  uint64_t seed = 1;
  std::string format = "human";
};

inline double median_ms(std::vector<double> ms) {
  std::sort(ms.begin(), ms.end());
  const size_t n = ms.size();
  return n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
}

// Times welfare-optimal CE and (two players only) welfare-optimal NE on
// seeded random games with uniform utilities. NE support enumeration does
// not scale past two players, so larger games report the CE column only.
inline int cmd_bench(const BenchArgs& a, std::ostream& out) {
  using clock = std::chrono::steady_clock;
  SplitMix64 rng(a.seed);
  const bool ne_supported = a.players == 2;
  std::vector<double> ce_ms, ne_ms;
  for (int n = 0; n < a.count; ++n) {
    std::vector<std::vector<std::string>> names(static_cast<size_t>(a.players));
    for (int i = 0; i < a.players; ++i)
      for (int x = 0; x < a.actions; ++x)
        names[size_t(i)].push_back("a" + std::to_string(x + 1));
    NormalFormGame game(names);
    for (int64_t j = 0; j < game.num_joint(); ++j)
      for (int i = 0; i < a.players; ++i)
        game.utility(j, i) = rng.next_double();

    auto t0 = clock::now();
    solve_ce(game, Criterion::kSocialWelfare);
    ce_ms.push_back(
        std::chrono::duration<double, std::milli>(clock::now() - t0).count());
    if (ne_supported) {
      t0 = clock::now();
      select_optimal_ne(enumerate_ne_2p(game), Criterion::kSocialWelfare);
      ne_ms.push_back(
          std::chrono::duration<double, std::milli>(clock::now() - t0).count());
    }
  }

  if (a.format == "structured") {
    Json doc;
    doc["schema"] = "eqsynth/1";
    doc["command"] = "bench";
    doc["players"] = a.players;
    doc["actions"] = a.actions;
    doc["count"] = a.count;
    doc["seed"] = a.seed;
    Json rows = Json::array();
    if (a.count > 0) {
      Json ce;
      ce["solver"] = "swce";
      ce["median_ms"] = median_ms(ce_ms);
      rows.push_back(ce);
      Json ne;
      ne["solver"] = "swne";
      if (ne_supported)
        ne["median_ms"] = median_ms(ne_ms);
      else
        ne["supported"] = false;
      rows.push_back(ne);
    }
    doc["rows"] = rows;
    emit(doc, out);
    return kOk;
  }

  out << "players: " << a.players << "  actions: " << a.actions
      << "  games: " << a.count << "  seed: " << a.seed << "\n";
  if (a.count > 0) {
    out << "swce: median " << format_double(median_ms(ce_ms)) << " ms\n";
    if (ne_supported)
      out << "swne: median " << format_double(median_ms(ne_ms)) << " ms\n";
    else
      out << "swne: unsupported at this scale (two-player enumeration only)\n";
  }
  return kOk;
}

}  // namespace cli_detail

// Parses and dispatches; takes argv without the program name. All output
// goes to the supplied streams so tests can capture it.
inline int run_cli(std::vector<std::string> args, std::ostream& out,
                   std::ostream& err) {
  using namespace cli_detail;
  CLI::App app{"equilibrium synthesis for normal form and concurrent games"};
  app.name("eqsynth");
  app.require_subcommand(1);

  NfgSolveArgs nfg;
  CLI::App* nfg_cmd =
      app.add_subcommand("nfg-solve", "solve a one-shot normal form game");
  nfg_cmd->add_option("--game", nfg.game, "game file")->required();
  nfg_cmd->add_option("--eq", nfg.eq, "equilibrium kind")
      ->check(CLI::IsMember({"ne", "ce"}));
  nfg_cmd->add_option("--crit", nfg.crit, "selection criterion")
      ->check(CLI::IsMember({"sw", "sf"}));
  nfg_cmd->add_flag("--minimize", nfg.minimize, "minimise instead of maximise");
  nfg_cmd->add_option("--format", nfg.format, "output format")
      ->check(CLI::IsMember({"human", "structured"}));

  CsgCheckArgs chk;
  CLI::App* chk_cmd =
      app.add_subcommand("csg-check", "check a property of a concurrent game");
  chk_cmd->add_option("--model", chk.model, "model file")->required();
  chk_cmd->add_option("--prop", chk.prop, "property")->required();
  chk_cmd->add_option("--synth", chk.synth, "write the strategy here");
  chk_cmd->add_option("--epsilon", chk.epsilon, "convergence tolerance");
  chk_cmd->add_option("--max-iters", chk.max_iters, "iteration cap")
      ->check(CLI::PositiveNumber);
  chk_cmd->add_option("--threads", chk.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  chk_cmd->add_option("--format", chk.format, "output format")
      ->check(CLI::IsMember({"human", "structured"}));

  CsgSimulateArgs sim;
  CLI::App* sim_cmd = app.add_subcommand(
      "csg-simulate", "estimate a strategy's values by sampling");
  sim_cmd->add_option("--model", sim.model, "model file")->required();
  sim_cmd->add_option("--strategy", sim.strategy, "strategy file")->required();
  sim_cmd->add_option("--samples", sim.samples, "sampled runs")
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim.seed, "random seed");
  sim_cmd->add_option("--threads", sim.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--horizon", sim.horizon,
                      "cap on open-ended runs (0 picks 100x states)");
  sim_cmd->add_option("--format", sim.format, "output format")
      ->check(CLI::IsMember({"human", "structured"}));

  BenchArgs bench;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "time the one-shot solvers on random games");
  bench_cmd->add_option("--players", bench.players, "players per game")
      ->check(CLI::Range(1, 8));
  bench_cmd->add_option("--actions", bench.actions, "actions per player")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--count", bench.count, "number of games")
      ->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--seed", bench.seed, "random seed");
  bench_cmd->add_option("--format", bench.format, "output format")
      ->check(CLI::IsMember({"human", "structured"}));

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(std::move(rev));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kParseExit;
  }

  if (nfg_cmd->parsed()) return cmd_nfg_solve(nfg, out, err);
  if (chk_cmd->parsed()) return cmd_csg_check(chk, out, err);
  if (sim_cmd->parsed()) return cmd_csg_simulate(sim, out, err);
  return cmd_bench(bench, out);
}

inline int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(std::move(args), std::cout, std::cerr);
}

}  // namespace eqsynth
