#pragma once

// Property language for equilibrium queries. A property names a coalition
// partition, the equilibrium type and optimality criterion, an optimisation
// direction with either a numeric query or a threshold, and one objective
// per coalition:
//
//   <<1,2:3>>(CE,SW)max=? (P[X goal] + R{time}[F done])   -- shape only;
//
// real properties keep the sum homogeneous: either all P[...] or all
// R{...}[...]. Path formulas are X a, a1 U<=k a2, a1 U a2 with F a sugar
// for true U a; reward formulas are I=k, C<=k, F a. Atoms are bare
// identifiers naming model labels, with `true` reserved for "every state".
// Nesting is not part of the language.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include "eqsynth/common.hpp"
#include "eqsynth/csg.hpp"
#include "eqsynth/nfg.hpp"

namespace eqsynth {

enum class EqType { kNash, kCorrelated };
enum class OptDir { kMin, kMax };

// "=?" asks for the optimal value; the others compare it to a threshold.
enum class BoundRel { kQuery, kLt, kLe, kGe, kGt };

struct PathFormula {
  enum class Kind { kNext, kBoundedUntil, kUntil };
  Kind kind = Kind::kNext;
  std::string lhs;  // empty for Next
  std::string rhs;  // the goal atom
  int bound = 0;    // BoundedUntil only

  friend bool operator==(const PathFormula&, const PathFormula&) = default;
};

struct RewardFormula {
  enum class Kind { kInstant, kCumulative, kReachability };
  Kind kind = Kind::kInstant;
  int bound = 0;     // Instant, Cumulative
  std::string goal;  // Reachability

  friend bool operator==(const RewardFormula&, const RewardFormula&) = default;
};

struct Objective {
  enum class Kind { kProbability, kReward };
  Kind kind = Kind::kProbability;
  PathFormula path;         // kProbability
  std::string reward_name;  // kReward
  RewardFormula reward;     // kReward

  friend bool operator==(const Objective&, const Objective&) = default;
};

struct PropertyAst {
  CoalitionPartition partition;  // player indices stored 0-based
  EqType eq_type = EqType::kNash;
  Criterion criterion = Criterion::kSocialWelfare;
  OptDir opt = OptDir::kMax;
  BoundRel relation = BoundRel::kQuery;
  double threshold = 0.0;  // meaningful unless relation == kQuery

  // The checker works on negated utilities when set; the printed property
  // keeps the original surface direction.
  bool negate_utilities = false;

  std::vector<Objective> objectives;  // one per coalition, same order

  friend bool operator==(const PropertyAst&, const PropertyAst&) = default;
};

namespace property_detail {

enum class Tok {
  kLAngles,
  kRAngles,
  kLParen,
  kRParen,
  kLBracket,
  kRBracket,
  kLBrace,
  kRBrace,
  kComma,
  kColon,
  kPlus,
  kMinus,
  kQuery,
  kEq,
  kLt,
  kLe,
  kGt,
  kGe,
  kIdent,
  kNumber,
  kEnd,
};

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  double number = 0.0;
  bool integral = false;
  int line = 1;
  int col = 1;
};

inline bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

inline bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

inline std::vector<Token> lex(const std::string& text) {
  std::vector<Token> out;
  size_t k = 0;
  int line = 1, col = 1;
  auto peek = [&](size_t ahead = 0) {
    return k + ahead < text.size() ? text[k + ahead] : '\0';
  };
  auto take = [&]() {
    char c = text[k++];
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    return c;
  };
  while (k < text.size()) {
    char c = peek();
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      take();
      continue;
    }
    Token tok;
    tok.line = line;
    tok.col = col;
    if (ident_start(c)) {
      while (k < text.size() && ident_char(peek())) tok.text += take();
      tok.kind = Tok::kIdent;
    } else if (c >= '0' && c <= '9') {
      bool plain = true;
      while (k < text.size() &&
             ((peek() >= '0' && peek() <= '9') || peek() == '.'))
        tok.text += take();
      if (tok.text.find('.') != std::string::npos) plain = false;
      if ((peek() == 'e' || peek() == 'E') &&
          ((peek(1) >= '0' && peek(1) <= '9') ||
           ((peek(1) == '+' || peek(1) == '-') && peek(2) >= '0' &&
            peek(2) <= '9'))) {
        plain = false;
        tok.text += take();
        if (peek() == '+' || peek() == '-') tok.text += take();
        while (k < text.size() && peek() >= '0' && peek() <= '9')
          tok.text += take();
      }
      char* end = nullptr;
      tok.number = std::strtod(tok.text.c_str(), &end);
      if (end != tok.text.c_str() + tok.text.size())
        throw ParseError("malformed number '" + tok.text + "'", tok.line,
                         tok.col);
      tok.integral = plain;
      tok.kind = Tok::kNumber;
    } else {
      take();
      switch (c) {
        case '<':
          if (peek() == '<') {
            take();
            tok.kind = Tok::kLAngles;
          } else if (peek() == '=') {
            take();
            tok.kind = Tok::kLe;
          } else {
            tok.kind = Tok::kLt;
          }
          break;
        case '>':
          if (peek() == '>') {
            take();
            tok.kind = Tok::kRAngles;
          } else if (peek() == '=') {
            take();
            tok.kind = Tok::kGe;
          } else {
            tok.kind = Tok::kGt;
          }
          break;
        case '=':
          if (peek() == '?') {
            take();
            tok.kind = Tok::kQuery;
          } else {
            tok.kind = Tok::kEq;
          }
          break;
        case '(': tok.kind = Tok::kLParen; break;
        case ')': tok.kind = Tok::kRParen; break;
        case '[': tok.kind = Tok::kLBracket; break;
        case ']': tok.kind = Tok::kRBracket; break;
        case '{': tok.kind = Tok::kLBrace; break;
        case '}': tok.kind = Tok::kRBrace; break;
        case ',': tok.kind = Tok::kComma; break;
        case ':': tok.kind = Tok::kColon; break;
        case '+': tok.kind = Tok::kPlus; break;
        case '-': tok.kind = Tok::kMinus; break;
        default:
          throw ParseError(std::string("unexpected character '") + c + "'",
                           tok.line, tok.col);
      }
    }
    out.push_back(std::move(tok));
  }
  Token end;
  end.kind = Tok::kEnd;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : toks_(lex(text)) {}

  PropertyAst parse(int declared_players) {
    PropertyAst ast;
    const Token& open = expect(Tok::kLAngles, "'<<'");
    for (;;) {
      ast.partition.coalitions.push_back(parse_coalition());
      if (peek().kind != Tok::kColon) break;
      next();
    }
    expect(Tok::kRAngles, "'>>'");

    expect(Tok::kLParen, "'('");
    const Token& eq = expect(Tok::kIdent, "an equilibrium type");
    if (eq.text == "NE")
      ast.eq_type = EqType::kNash;
    else if (eq.text == "CE")
      ast.eq_type = EqType::kCorrelated;
    else
      fail(eq, "equilibrium type must be NE or CE");
    expect(Tok::kComma, "','");
    const Token& crit = expect(Tok::kIdent, "an optimality criterion");
    if (crit.text == "SW")
      ast.criterion = Criterion::kSocialWelfare;
    else if (crit.text == "SF")
      ast.criterion = Criterion::kSocialFairness;
    else
      fail(crit, "optimality criterion must be SW or SF");
    expect(Tok::kRParen, "')'");

    const Token& dir = expect(Tok::kIdent, "'min' or 'max'");
    if (dir.text == "min")
      ast.opt = OptDir::kMin;
    else if (dir.text == "max")
      ast.opt = OptDir::kMax;
    else
      fail(dir, "optimisation direction must be min or max");

    if (peek().kind == Tok::kQuery) {
      next();
      ast.relation = BoundRel::kQuery;
    } else {
      switch (peek().kind) {
        case Tok::kLt: ast.relation = BoundRel::kLt; break;
        case Tok::kLe: ast.relation = BoundRel::kLe; break;
        case Tok::kGe: ast.relation = BoundRel::kGe; break;
        case Tok::kGt: ast.relation = BoundRel::kGt; break;
        default:
          fail(peek(), "expected '=?' or a threshold relation (<, <=, >=, >)");
      }
      next();
      double sign = 1.0;
      if (peek().kind == Tok::kMinus) {
        next();
        sign = -1.0;
      }
      const Token& x = expect(Tok::kNumber, "a threshold value");
      ast.threshold = sign * x.number;
    }

    expect(Tok::kLParen, "'('");
    for (;;) {
      ast.objectives.push_back(parse_objective());
      if (peek().kind != Tok::kPlus) break;
      next();
    }
    expect(Tok::kRParen, "')'");
    if (peek().kind != Tok::kEnd) fail(peek(), "trailing input after property");

    for (const Objective& o : ast.objectives)
      if (o.kind != ast.objectives[0].kind)
        fail(open, "objectives must be all P[...] or all R{...}[...]");
    if (ast.objectives.size() != ast.partition.coalitions.size())
      fail(open, "property lists " + std::to_string(ast.objectives.size()) +
                     " objectives for " +
                     std::to_string(ast.partition.coalitions.size()) +
                     " coalitions");

    int players = declared_players;
    if (players < 0) {
      for (const auto& c : ast.partition.coalitions)
        for (int j : c) players = std::max(players, j + 1);
    }
    try {
      ast.partition.validate(players);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      fail(open, e.what());
    }
    return ast;
  }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }

  [[noreturn]] void fail(const Token& at, const std::string& msg) const {
    throw ParseError(msg, at.line, at.col);
  }

  const Token& expect(Tok kind, const char* what) {
    if (peek().kind != kind)
      fail(peek(), std::string("expected ") + what +
                       (peek().kind == Tok::kEnd
                            ? " before the end of the property"
                            : ", got '" + describe(peek()) + "'"));
    return next();
  }

  static std::string describe(const Token& t) {
    if (t.kind == Tok::kIdent || t.kind == Tok::kNumber) return t.text;
    switch (t.kind) {
      case Tok::kLAngles: return "<<";
      case Tok::kRAngles: return ">>";
      case Tok::kLParen: return "(";
      case Tok::kRParen: return ")";
      case Tok::kLBracket: return "[";
      case Tok::kRBracket: return "]";
      case Tok::kLBrace: return "{";
      case Tok::kRBrace: return "}";
      case Tok::kComma: return ",";
      case Tok::kColon: return ":";
      case Tok::kPlus: return "+";
      case Tok::kMinus: return "-";
      case Tok::kQuery: return "=?";
      case Tok::kEq: return "=";
      case Tok::kLt: return "<";
      case Tok::kLe: return "<=";
      case Tok::kGt: return ">";
      case Tok::kGe: return ">=";
      default: return "end of input";
    }
  }

  std::vector<int> parse_coalition() {
    std::vector<int> members;
    for (;;) {
      const Token& n = expect(Tok::kNumber, "a player index");
      if (!n.integral || n.number < 1.0 || n.number > 1e6)
        fail(n, "player indices are positive integers starting at 1");
      members.push_back(int(n.number) - 1);
      if (peek().kind != Tok::kComma) break;
      next();
    }
    return members;
  }

  int parse_nat(const char* what) {
    const Token& n = expect(Tok::kNumber, what);
    if (!n.integral || n.number < 0.0 || n.number > 1e9)
      fail(n, std::string("expected a non-negative integer ") + what);
    return int(n.number);
  }

  std::string parse_atom() {
    return expect(Tok::kIdent, "an atomic proposition").text;
  }

  Objective parse_objective() {
    Objective obj;
    const Token& head = expect(Tok::kIdent, "an objective (P or R)");
    if (head.text == "P") {
      obj.kind = Objective::Kind::kProbability;
      expect(Tok::kLBracket, "'['");
      obj.path = parse_path();
      expect(Tok::kRBracket, "']'");
    } else if (head.text == "R") {
      obj.kind = Objective::Kind::kReward;
      expect(Tok::kLBrace, "'{'");
      obj.reward_name = expect(Tok::kIdent, "a reward name").text;
      expect(Tok::kRBrace, "'}'");
      expect(Tok::kLBracket, "'['");
      obj.reward = parse_reward_formula();
      expect(Tok::kRBracket, "']'");
    } else {
      fail(head, "objective must be P[...] or R{name}[...]");
    }
    return obj;
  }

  PathFormula parse_path() {
    PathFormula f;
    const Token& head = expect(Tok::kIdent, "a path formula");
    if (head.text == "X") {
      f.kind = PathFormula::Kind::kNext;
      f.rhs = parse_atom();
      return f;
    }
    if (head.text == "F") {
      f.kind = PathFormula::Kind::kUntil;
      f.lhs = "true";
      f.rhs = parse_atom();
      return f;
    }
    f.lhs = head.text;
    const Token& until = expect(Tok::kIdent, "'U'");
    if (until.text != "U") fail(until, "expected 'U' in the path formula");
    if (peek().kind == Tok::kLe) {
      next();
      f.kind = PathFormula::Kind::kBoundedUntil;
      f.bound = parse_nat("step bound");
    } else {
      f.kind = PathFormula::Kind::kUntil;
    }
    f.rhs = parse_atom();
    return f;
  }

  RewardFormula parse_reward_formula() {
    RewardFormula f;
    const Token& head = expect(Tok::kIdent, "a reward formula");
    if (head.text == "I") {
      expect(Tok::kEq, "'='");
      f.kind = RewardFormula::Kind::kInstant;
      f.bound = parse_nat("reward horizon");
    } else if (head.text == "C") {
      expect(Tok::kLe, "'<='");
      f.kind = RewardFormula::Kind::kCumulative;
      f.bound = parse_nat("reward horizon");
    } else if (head.text == "F") {
      f.kind = RewardFormula::Kind::kReachability;
      f.goal = parse_atom();
    } else {
      fail(head, "reward formula must be I=k, C<=k or F atom");
    }
    return f;
  }
};

}  // namespace property_detail

// Coalition coverage is checked against the player count inferred from the
// largest index mentioned; the overload below pins it explicitly.
inline PropertyAst parse_property(const std::string& text) {
  return property_detail::Parser(text).parse(-1);
}

inline PropertyAst parse_property(const std::string& text, int num_players) {
  return property_detail::Parser(text).parse(num_players);
}

inline std::string print_property(const PropertyAst& ast) {
  std::string out = "<<";
  for (size_t c = 0; c < ast.partition.coalitions.size(); ++c) {
    if (c) out += ":";
    const auto& members = ast.partition.coalitions[c];
    for (size_t k = 0; k < members.size(); ++k) {
      if (k) out += ",";
      out += std::to_string(members[k] + 1);
    }
  }
  out += ">>(";
  out += ast.eq_type == EqType::kNash ? "NE" : "CE";
  out += ",";
  out += ast.criterion == Criterion::kSocialWelfare ? "SW" : "SF";
  out += ")";
  const bool surface_min = (ast.opt == OptDir::kMin) != ast.negate_utilities;
  out += surface_min ? "min" : "max";
  switch (ast.relation) {
    case BoundRel::kQuery: out += "=?"; break;
    case BoundRel::kLt: out += "<" + format_double(ast.threshold); break;
    case BoundRel::kLe: out += "<=" + format_double(ast.threshold); break;
    case BoundRel::kGe: out += ">=" + format_double(ast.threshold); break;
    case BoundRel::kGt: out += ">" + format_double(ast.threshold); break;
  }
  out += " (";
  for (size_t i = 0; i < ast.objectives.size(); ++i) {
    if (i) out += " + ";
    const Objective& o = ast.objectives[i];
    if (o.kind == Objective::Kind::kProbability) {
      out += "P[";
      switch (o.path.kind) {
        case PathFormula::Kind::kNext:
          out += "X " + o.path.rhs;
          break;
        case PathFormula::Kind::kBoundedUntil:
          out += o.path.lhs + " U<=" + std::to_string(o.path.bound) + " " +
                 o.path.rhs;
          break;
        case PathFormula::Kind::kUntil:
          out += o.path.lhs == "true" ? "F " + o.path.rhs
                                      : o.path.lhs + " U " + o.path.rhs;
          break;
      }
      out += "]";
    } else {
      out += "R{" + o.reward_name + "}[";
      switch (o.reward.kind) {
        case RewardFormula::Kind::kInstant:
          out += "I=" + std::to_string(o.reward.bound);
          break;
        case RewardFormula::Kind::kCumulative:
          out += "C<=" + std::to_string(o.reward.bound);
          break;
        case RewardFormula::Kind::kReachability:
          out += "F " + o.reward.goal;
          break;
      }
      out += "]";
    }
  }
  return out + ")";
}

// Minimisation becomes maximisation of negated utilities; applying this to
// an already normalized property changes nothing.
inline PropertyAst normalize_min_to_max(PropertyAst ast) {
  if (ast.opt == OptDir::kMin) {
    ast.opt = OptDir::kMax;
    ast.negate_utilities = !ast.negate_utilities;
  }
  return ast;
}

}  // namespace eqsynth
