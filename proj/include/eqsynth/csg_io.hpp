#pragma once

// Text format for concurrent stochastic games. Line-oriented, UTF-8, '#'
// starts a comment. The header line is the literal word "csg"; after it the
// directives may appear in any order:
//
//   players N
//   actions <player> <name>...
//   states N
//   initial <state>...
//   label <atom> <state>...
//   enabled <state> <player> <name>...
//   trans <state> (<name|->,...) p:target [+ p:target ...]
//   reward <name> state <state> <value>
//   reward <name> action <state> (<name|->,...) <value>
//
// Players are 1-based in the format, states 0-based. '-' inside a joint
// action tuple is the idle action and is only consistent for a player with
// nothing enabled in that state. Every consistent (state, joint action)
// needs exactly one trans line and every distribution must sum to 1.

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "eqsynth/common.hpp"
#include "eqsynth/csg.hpp"

namespace eqsynth {

struct CsgModel {
  Csg game;
  std::vector<RewardStructure> rewards;  // ordered by first appearance

  const RewardStructure* find_reward(const std::string& name) const {
    for (const auto& r : rewards)
      if (r.name == name) return &r;
    return nullptr;
  }
};

namespace csg_io_detail {

struct Line {
  int number = 0;
  std::vector<std::string> tokens;
};

inline std::vector<Line> tokenize(const std::string& text) {
  std::vector<Line> out;
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (auto hash = raw.find('#'); hash != std::string::npos)
      raw.erase(hash);
    std::istringstream ls(raw);
    Line line;
    line.number = number;
    std::string tok;
    while (ls >> tok) line.tokens.push_back(tok);
    if (!line.tokens.empty()) out.push_back(std::move(line));
  }
  return out;
}

inline int parse_int(const std::string& tok, const Line& ln,
                     const char* what) {
  size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(tok, &used);
  } catch (...) {
    throw ParseError(std::string("expected ") + what + ", got '" + tok + "'",
                     ln.number);
  }
  if (used != tok.size())
    throw ParseError(std::string("expected ") + what + ", got '" + tok + "'",
                     ln.number);
  return v;
}

inline double parse_num(const std::string& tok, const Line& ln) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + tok.size())
    throw ParseError("expected a number, got '" + tok + "'", ln.number);
  return v;
}

// "(send,-)" -> joint code; '-' must line up with an idle player.
inline int64_t parse_joint(const Csg& g, int state, const std::string& tok,
                           const Line& ln) {
  if (tok.size() < 2 || tok.front() != '(' || tok.back() != ')')
    throw ParseError("expected a joint action tuple, got '" + tok + "'",
                     ln.number);
  std::vector<std::string> parts;
  std::string cur;
  for (size_t k = 1; k + 1 < tok.size(); ++k) {
    if (tok[k] == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += tok[k];
    }
  }
  parts.push_back(cur);
  if (int(parts.size()) != g.num_players)
    throw ParseError("joint action has " + std::to_string(parts.size()) +
                         " entries for " + std::to_string(g.num_players) +
                         " players",
                     ln.number);
  std::vector<int> digits(static_cast<size_t>(g.num_players));
  for (int i = 0; i < g.num_players; ++i) {
    const std::string& name = parts[size_t(i)];
    if (name == "-") {
      if (!g.idles(state, i))
        throw ParseError("player " + std::to_string(i + 1) +
                             " cannot idle in state " + std::to_string(state),
                         ln.number);
      digits[size_t(i)] = 0;
      continue;
    }
    const auto& all = g.action_names[size_t(i)];
    int a = -1;
    for (size_t k = 0; k < all.size(); ++k)
      if (all[k] == name) a = int(k);
    if (a < 0)
      throw ParseError("player " + std::to_string(i + 1) +
                           " has no action '" + name + "'",
                       ln.number);
    const auto& en = g.enabled[size_t(state)][size_t(i)];
    if (!std::binary_search(en.begin(), en.end(), a))
      throw ParseError("action '" + name + "' is not enabled for player " +
                           std::to_string(i + 1) + " in state " +
                           std::to_string(state),
                       ln.number);
    digits[size_t(i)] = a + 1;
  }
  return g.aidx.index(digits);
}

}  // namespace csg_io_detail

inline CsgModel parse_csg(const std::string& text) {
  using csg_io_detail::Line;
  auto lines = csg_io_detail::tokenize(text);
  if (lines.empty() || lines[0].tokens != std::vector<std::string>{"csg"})
    throw ParseError("file must start with a 'csg' header line",
                     lines.empty() ? 1 : lines[0].number);

  // Pass 1: alphabet-shaping directives.
  int num_players = -1, num_states = -1;
  std::vector<std::vector<std::string>> action_names;
  for (size_t k = 1; k < lines.size(); ++k) {
    const Line& ln = lines[k];
    const std::string& d = ln.tokens[0];
    if (d == "players") {
      if (ln.tokens.size() != 2)
        throw ParseError("usage: players N", ln.number);
      if (num_players > 0) throw ParseError("duplicate players line", ln.number);
      num_players = csg_io_detail::parse_int(ln.tokens[1], ln, "player count");
      if (num_players <= 0)
        throw ParseError("player count must be positive", ln.number);
      action_names.assign(size_t(num_players), {});
    } else if (d == "states") {
      if (ln.tokens.size() != 2) throw ParseError("usage: states N", ln.number);
      if (num_states > 0) throw ParseError("duplicate states line", ln.number);
      num_states = csg_io_detail::parse_int(ln.tokens[1], ln, "state count");
      if (num_states <= 0)
        throw ParseError("state count must be positive", ln.number);
    } else if (d == "actions") {
      if (num_players < 0)
        throw ParseError("actions before players line", ln.number);
      if (ln.tokens.size() < 3)
        throw ParseError("usage: actions <player> <name>...", ln.number);
      int p = csg_io_detail::parse_int(ln.tokens[1], ln, "player id");
      if (p < 1 || p > num_players)
        throw ParseError("player id out of range", ln.number);
      auto& names = action_names[size_t(p - 1)];
      if (!names.empty())
        throw ParseError("duplicate actions line for player " +
                             std::to_string(p),
                         ln.number);
      for (size_t t = 2; t < ln.tokens.size(); ++t) {
        const std::string& name = ln.tokens[t];
        if (name == "-" || name.find_first_of("(),:#") != std::string::npos)
          throw ParseError("invalid action name '" + name + "'", ln.number);
        for (const auto& seen : names)
          if (seen == name)
            throw ParseError("duplicate action name '" + name + "'",
                             ln.number);
        names.push_back(name);
      }
    }
  }
  if (num_players < 0) throw ParseError("missing players line", 0);
  if (num_states < 0) throw ParseError("missing states line", 0);

  CsgModel model;
  model.game = Csg(num_players, num_states, std::move(action_names));
  Csg& g = model.game;

  auto state_id = [&](const std::string& tok, const Line& ln) {
    int s = csg_io_detail::parse_int(tok, ln, "state id");
    if (s < 0 || s >= num_states)
      throw ParseError("state " + tok + " out of range", ln.number);
    return s;
  };

  // Pass 2: initial states, labels and action assignment.
  for (size_t k = 1; k < lines.size(); ++k) {
    const Line& ln = lines[k];
    const std::string& d = ln.tokens[0];
    if (d == "initial") {
      if (ln.tokens.size() < 2)
        throw ParseError("usage: initial <state>...", ln.number);
      for (size_t t = 1; t < ln.tokens.size(); ++t)
        g.initial_states.push_back(state_id(ln.tokens[t], ln));
    } else if (d == "label") {
      if (ln.tokens.size() < 3)
        throw ParseError("usage: label <atom> <state>...", ln.number);
      int atom = g.add_atom(ln.tokens[1]);
      for (size_t t = 2; t < ln.tokens.size(); ++t)
        g.set_label(state_id(ln.tokens[t], ln), atom);
    } else if (d == "enabled") {
      if (ln.tokens.size() < 4)
        throw ParseError("usage: enabled <state> <player> <name>...",
                         ln.number);
      int s = state_id(ln.tokens[1], ln);
      int p = csg_io_detail::parse_int(ln.tokens[2], ln, "player id");
      if (p < 1 || p > num_players)
        throw ParseError("player id out of range", ln.number);
      auto& en = g.enabled[size_t(s)][size_t(p - 1)];
      if (!en.empty())
        throw ParseError("duplicate enabled line for state " +
                             std::to_string(s) + " player " +
                             std::to_string(p),
                         ln.number);
      for (size_t t = 3; t < ln.tokens.size(); ++t) {
        const auto& all = g.action_names[size_t(p - 1)];
        int a = -1;
        for (size_t q = 0; q < all.size(); ++q)
          if (all[q] == ln.tokens[t]) a = int(q);
        if (a < 0)
          throw ParseError("player " + std::to_string(p) +
                               " has no action '" + ln.tokens[t] + "'",
                           ln.number);
        en.push_back(a);
      }
      std::sort(en.begin(), en.end());
      for (size_t q = 1; q < en.size(); ++q)
        if (en[q] == en[q - 1])
          throw ParseError("action enabled twice", ln.number);
    }
  }

  // Pass 3: transitions and rewards, which reference the action assignment.
  for (size_t k = 1; k < lines.size(); ++k) {
    const Line& ln = lines[k];
    const std::string& d = ln.tokens[0];
    if (d == "trans") {
      if (ln.tokens.size() < 4)
        throw ParseError("usage: trans <state> <joint> p:target ...",
                         ln.number);
      int s = state_id(ln.tokens[1], ln);
      int64_t code = csg_io_detail::parse_joint(g, s, ln.tokens[2], ln);
      if (g.trans[size_t(s)].count(code))
        throw ParseError("duplicate transition for state " +
                             std::to_string(s) + " under " +
                             g.format_joint(code),
                         ln.number);
      std::map<int, double> acc;
      bool expect_entry = true;
      for (size_t t = 3; t < ln.tokens.size(); ++t) {
        const std::string& tok = ln.tokens[t];
        if (!expect_entry) {
          if (tok != "+")
            throw ParseError("expected '+' between branches", ln.number);
          expect_entry = true;
          continue;
        }
        auto colon = tok.find(':');
        if (colon == std::string::npos)
          throw ParseError("expected p:target, got '" + tok + "'", ln.number);
        double p = csg_io_detail::parse_num(tok.substr(0, colon), ln);
        int target = state_id(tok.substr(colon + 1), ln);
        if (p < 0.0)
          throw ParseError("negative branch probability", ln.number);
        acc[target] += p;
        expect_entry = false;
      }
      if (expect_entry)
        throw ParseError("dangling '+' in distribution", ln.number);
      double sum = 0.0;
      auto& dist = g.trans[size_t(s)][code];
      for (auto [t, p] : acc) {
        dist.emplace_back(t, p);
        sum += p;
      }
      if (std::fabs(sum - 1.0) > kProbTol)
        throw ParseError("distribution sums to " + format_double(sum),
                         ln.number);
    } else if (d == "reward") {
      if (ln.tokens.size() < 3)
        throw ParseError("usage: reward <name> state|action ...", ln.number);
      const std::string& name = ln.tokens[1];
      RewardStructure* rs = nullptr;
      for (auto& r : model.rewards)
        if (r.name == name) rs = &r;
      if (!rs) {
        model.rewards.emplace_back(name, num_states);
        rs = &model.rewards.back();
      }
      const std::string& kind = ln.tokens[2];
      if (kind == "state") {
        if (ln.tokens.size() != 5)
          throw ParseError("usage: reward <name> state <state> <value>",
                           ln.number);
        int s = state_id(ln.tokens[3], ln);
        rs->state_rewards[size_t(s)] = csg_io_detail::parse_num(ln.tokens[4], ln);
      } else if (kind == "action") {
        if (ln.tokens.size() != 6)
          throw ParseError(
              "usage: reward <name> action <state> <joint> <value>",
              ln.number);
        int s = state_id(ln.tokens[3], ln);
        int64_t code = csg_io_detail::parse_joint(g, s, ln.tokens[4], ln);
        rs->action_rewards[size_t(s)][code] =
            csg_io_detail::parse_num(ln.tokens[5], ln);
      } else {
        throw ParseError("reward kind must be 'state' or 'action'", ln.number);
      }
    } else if (d != "players" && d != "states" && d != "actions" &&
               d != "initial" && d != "label" && d != "enabled") {
      throw ParseError("unknown directive '" + d + "'", ln.number);
    }
  }

  g.validate();
  return model;
}

inline CsgModel load_csg(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csg(buf.str());
}

}  // namespace eqsynth
