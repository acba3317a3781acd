#pragma once

// Text format for normal form games. Line oriented, '#' starts a comment.
//
//   nfg
//   players 3
//   actions 1 pro yld
//   actions 2 pro yld
//   actions 3 pro yld
//   u (pro,pro,pro) -1000 -1000 -100
//   ...one `u` line per joint action tuple...
//
// The header line may carry a format version ("nfg 1"); bare "nfg" means
// version 1.

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "eqsynth/common.hpp"
#include "eqsynth/nfg.hpp"

namespace eqsynth {

namespace io_detail {

inline std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

inline std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> toks;
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

inline double parse_number(const std::string& tok, int lineno) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == nullptr || *end != '\0')
    throw ParseError("expected a number, got '" + tok + "'", lineno);
  return v;
}

inline int parse_int(const std::string& tok, int lineno) {
  char* end = nullptr;
  long v = std::strtol(tok.c_str(), &end, 10);
  if (end == nullptr || *end != '\0')
    throw ParseError("expected an integer, got '" + tok + "'", lineno);
  return int(v);
}

// "(a,b,c)" -> {"a","b","c"}
inline std::vector<std::string> parse_tuple(const std::string& tok,
                                            int lineno) {
  if (tok.size() < 2 || tok.front() != '(' || tok.back() != ')')
    throw ParseError("expected a tuple '(...)', got '" + tok + "'", lineno);
  std::vector<std::string> parts;
  std::string cur;
  for (size_t i = 1; i + 1 < tok.size(); ++i) {
    if (tok[i] == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += tok[i];
    }
  }
  parts.push_back(cur);
  for (const auto& p : parts)
    if (p.empty()) throw ParseError("empty tuple entry in '" + tok + "'", lineno);
  return parts;
}

}  // namespace io_detail

inline NormalFormGame parse_nfg(const std::string& text) {
  using namespace io_detail;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  bool saw_header = false;
  int num_players = -1;
  std::vector<std::vector<std::string>> actions;
  NormalFormGame game;
  std::vector<bool> filled;
  int64_t filled_count = 0;
  bool built = false;

  auto build_if_ready = [&](int at_line) {
    if (built || num_players < 0) return;
    for (const auto& a : actions)
      if (a.empty()) return;
    game = NormalFormGame(actions);
    filled.assign(size_t(game.num_joint()), false);
    (void)at_line;
    built = true;
  };

  while (std::getline(in, raw)) {
    ++lineno;
    auto toks = tokenize(strip_comment(raw));
    if (toks.empty()) continue;
    const std::string& kw = toks[0];
    if (!saw_header) {
      if (kw != "nfg") throw ParseError("expected 'nfg' header", lineno);
      if (toks.size() > 2) throw ParseError("bad header", lineno);
      if (toks.size() == 2 && parse_int(toks[1], lineno) != 1)
        throw ParseError("unsupported nfg format version " + toks[1], lineno);
      saw_header = true;
      continue;
    }
    if (kw == "players") {
      if (toks.size() != 2) throw ParseError("players takes one argument", lineno);
      num_players = parse_int(toks[1], lineno);
      if (num_players < 1) throw ParseError("need at least one player", lineno);
      actions.assign(size_t(num_players), {});
    } else if (kw == "actions") {
      if (num_players < 0) throw ParseError("'players' must come first", lineno);
      if (toks.size() < 3)
        throw ParseError("actions needs a player and at least one name", lineno);
      int p = parse_int(toks[1], lineno);
      if (p < 1 || p > num_players)
        throw ParseError("player index out of range", lineno);
      if (!actions[size_t(p - 1)].empty())
        throw ParseError("duplicate actions line for player " + toks[1], lineno);
      actions[size_t(p - 1)].assign(toks.begin() + 2, toks.end());
      build_if_ready(lineno);
    } else if (kw == "u") {
      if (!built)
        throw ParseError("'u' lines must follow all 'actions' lines", lineno);
      if (int(toks.size()) != 2 + num_players)
        throw ParseError("expected tuple plus " + std::to_string(num_players) +
                             " utilities",
                         lineno);
      auto names = parse_tuple(toks[1], lineno);
      if (int(names.size()) != num_players)
        throw ParseError("tuple arity mismatch", lineno);
      std::vector<int> digits(static_cast<size_t>(num_players));
      for (int i = 0; i < num_players; ++i) {
        try {
          digits[size_t(i)] = game.action_index(i, names[size_t(i)]);
        } catch (const Error& e) {
          throw ParseError(e.what(), lineno);
        }
      }
      int64_t j = game.indexer.index(digits);
      if (filled[size_t(j)])
        throw ParseError("duplicate utility line for " + toks[1], lineno);
      filled[size_t(j)] = true;
      ++filled_count;
      for (int i = 0; i < num_players; ++i)
        game.utility(j, i) = parse_number(toks[size_t(2 + i)], lineno);
    } else {
      throw ParseError("unknown directive '" + kw + "'", lineno);
    }
  }
  if (!saw_header) throw ParseError("empty input, expected 'nfg' header");
  if (!built) throw ParseError("incomplete game: missing players or actions");
  if (filled_count != game.num_joint())
    throw ParseError("missing utility lines: got " +
                     std::to_string(filled_count) + " of " +
                     std::to_string(game.num_joint()));
  game.validate();
  return game;
}

inline std::string write_nfg(const NormalFormGame& game) {
  std::string out = "nfg 1\n";
  out += "players " + std::to_string(game.num_players) + "\n";
  for (int i = 0; i < game.num_players; ++i) {
    out += "actions " + std::to_string(i + 1);
    for (const auto& a : game.actions[size_t(i)]) out += " " + a;
    out += "\n";
  }
  std::vector<int> digits;
  for (int64_t j = 0; j < game.num_joint(); ++j) {
    game.indexer.decode(j, digits);
    out += "u (";
    for (int i = 0; i < game.num_players; ++i) {
      if (i) out += ",";
      out += game.actions[size_t(i)][size_t(digits[size_t(i)])];
    }
    out += ")";
    for (int i = 0; i < game.num_players; ++i)
      out += " " + format_double(game.utility(j, i));
    out += "\n";
  }
  return out;
}

}  // namespace eqsynth
