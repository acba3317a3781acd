#include "eqsynth/nfg.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "eqsynth/nfg_io.hpp"
#include "fixtures.hpp"

using namespace eqsynth;
using Catch::Approx;

namespace {

// Direct summation over tuples, kept separate from the library path.
std::vector<double> brute_profile_values(const NormalFormGame& g,
                                         const StrategyProfile& sp) {
  std::vector<double> out(size_t(g.num_players), 0.0);
  std::vector<int> d;
  for (int64_t j = 0; j < g.num_joint(); ++j) {
    g.indexer.decode(j, d);
    double w = 1.0;
    for (int i = 0; i < g.num_players; ++i) w *= sp.probs[size_t(i)][size_t(d[size_t(i)])];
    for (int i = 0; i < g.num_players; ++i) out[size_t(i)] += w * g.utility(j, i);
  }
  return out;
}

StrategyProfile random_profile(const NormalFormGame& g, SplitMix64& rng) {
  StrategyProfile sp;
  sp.probs.resize(size_t(g.num_players));
  for (int i = 0; i < g.num_players; ++i) {
    auto& v = sp.probs[size_t(i)];
    v.resize(size_t(g.num_actions(i)));
    double sum = 0;
    for (double& p : v) sum += (p = rng.next_double() + 1e-3);
    for (double& p : v) p /= sum;
  }
  return sp;
}

}  // namespace

TEST_CASE("joint index uses player-major order") {
  NormalFormGame g({{"a", "b"}, {"x", "y", "z"}});
  REQUIRE(g.num_joint() == 6);
  REQUIRE(g.indexer.index({0, 0}) == 0);
  REQUIRE(g.indexer.index({0, 2}) == 2);
  REQUIRE(g.indexer.index({1, 0}) == 3);
  REQUIRE(g.indexer.decode(5) == std::vector<int>{1, 2});
}

TEST_CASE("expected utilities of pure profile pick the table row") {
  auto g = fixtures::intersection_game();
  StrategyProfile sp;
  sp.probs = {{1, 0}, {0, 1}, {1, 0}};  // (pro, yld, pro)
  auto v = expected_utility_profile(g, sp);
  REQUIRE(v == std::vector<double>{5, -5, 5});
}

TEST_CASE("uniform profile on a zero game gives zero") {
  NormalFormGame g({{"a", "b"}, {"a", "b"}});
  StrategyProfile sp;
  sp.probs = {{0.5, 0.5}, {0.5, 0.5}};
  auto v = expected_utility_profile(g, sp);
  REQUIRE(v[0] == 0.0);
  REQUIRE(v[1] == 0.0);
}

TEST_CASE("fair mixed equilibrium of the intersection game evaluates to its known values") {
  auto g = fixtures::intersection_game();
  auto v = expected_utility_profile(g, fixtures::intersection_fair_ne());
  auto expect = fixtures::intersection_fair_ne_values();
  for (int i = 0; i < 3; ++i) REQUIRE(v[size_t(i)] == Approx(expect[size_t(i)]).margin(1e-9));
  // the six-figure decimals seen in reports
  REQUIRE(v[0] == Approx(-9.254050).margin(1e-4));
  REQUIRE(v[1] == Approx(-9.925742).margin(1e-4));
  REQUIRE(v[2] == Approx(-9.318182).margin(1e-4));
}

TEST_CASE("joint expectation matches manual mixtures") {
  auto g = fixtures::intersection_game();
  JointStrategy tau;
  tau.probs.assign(8, 0.0);
  tau.probs[size_t(g.indexer.index({0, 1, 0}))] = 0.5;  // (pro,yld,pro)
  tau.probs[size_t(g.indexer.index({1, 0, 1}))] = 0.5;  // (yld,pro,yld)
  auto v = expected_utility_joint(g, tau);
  for (double x : v) REQUIRE(x == Approx(0.0).margin(1e-12));

  SECTION("uniform joint averages the table") {
    JointStrategy u;
    u.probs.assign(8, 1.0 / 8);
    auto w = expected_utility_joint(g, u);
    std::vector<double> expect(3, 0.0);
    for (int64_t j = 0; j < 8; ++j)
      for (int i = 0; i < 3; ++i) expect[size_t(i)] += g.utility(j, i) / 8;
    for (int i = 0; i < 3; ++i) REQUIRE(w[size_t(i)] == Approx(expect[size_t(i)]));
  }
}

TEST_CASE("profile and induced joint agree on expected utilities") {
  SplitMix64 rng(1234);
  for (int it = 0; it < 40; ++it) {
    std::vector<int> counts;
    int players = 2 + int(rng.next_below(2));
    for (int i = 0; i < players; ++i) counts.push_back(2 + int(rng.next_below(3)));
    auto g = fixtures::random_game(rng, counts);
    auto sp = random_profile(g, rng);
    auto direct = expected_utility_profile(g, sp);
    auto via_joint = expected_utility_joint(g, profile_to_joint(g, sp));
    auto brute = brute_profile_values(g, sp);
    for (int i = 0; i < players; ++i) {
      REQUIRE(direct[size_t(i)] == Approx(via_joint[size_t(i)]).margin(1e-9));
      REQUIRE(direct[size_t(i)] == Approx(brute[size_t(i)]).margin(1e-9));
    }
  }
}

TEST_CASE("profile_to_joint of pure profile is a point mass") {
  auto g = fixtures::intersection_game();
  StrategyProfile sp;
  sp.probs = {{1, 0}, {0, 1}, {1, 0}};
  auto tau = profile_to_joint(g, sp);
  for (int64_t j = 0; j < g.num_joint(); ++j)
    REQUIRE(tau.probs[size_t(j)] == (j == g.indexer.index({0, 1, 0}) ? 1.0 : 0.0));
}

TEST_CASE("two fair coins induce the uniform joint") {
  NormalFormGame g({{"h", "t"}, {"h", "t"}});
  StrategyProfile sp;
  sp.probs = {{0.5, 0.5}, {0.5, 0.5}};
  auto tau = profile_to_joint(g, sp);
  for (double p : tau.probs) REQUIRE(p == Approx(0.25));
}

TEST_CASE("correlated diagonal joint is not a product of its marginals") {
  // Both players receive the same fair coin; no independent profile induces
  // this joint.
  NormalFormGame g({{"a1", "a2"}, {"a1", "a2"}});
  JointStrategy tau;
  tau.probs = {0.5, 0.0, 0.0, 0.5};
  std::vector<double> m1 = {tau.probs[0] + tau.probs[1], tau.probs[2] + tau.probs[3]};
  std::vector<double> m2 = {tau.probs[0] + tau.probs[2], tau.probs[1] + tau.probs[3]};
  StrategyProfile sp;
  sp.probs = {m1, m2};
  auto prod = profile_to_joint(g, sp);
  double dist = 0;
  for (int j = 0; j < 4; ++j) dist = std::max(dist, std::fabs(prod.probs[size_t(j)] - tau.probs[size_t(j)]));
  REQUIRE(dist > 0.2);
}

TEST_CASE("correlated_to_joint pushes signals through decoders") {
  auto g = fixtures::intersection_game();
  // Two signals per player, same signal tuple drawn for everyone.
  CorrelatedProfile cp(std::vector<int>{2, 2, 2});
  cp.signal_dist.assign(8, 0.0);
  cp.signal_dist[size_t(cp.signal_indexer.index({0, 0, 0}))] = 0.5;
  cp.signal_dist[size_t(cp.signal_indexer.index({1, 1, 1}))] = 0.5;
  cp.decoders[0] = {0, 1};  // signal 0 -> pro, signal 1 -> yld
  cp.decoders[1] = {1, 0};
  cp.decoders[2] = {0, 1};
  auto tau = correlated_to_joint(g, cp);
  REQUIRE(tau.probs[size_t(g.indexer.index({0, 1, 0}))] == Approx(0.5));
  REQUIRE(tau.probs[size_t(g.indexer.index({1, 0, 1}))] == Approx(0.5));

  SECTION("signals decoding to the same tuple accumulate") {
    cp.decoders[0] = {0, 0};
    cp.decoders[1] = {1, 1};
    cp.decoders[2] = {0, 0};
    auto t2 = correlated_to_joint(g, cp);
    REQUIRE(t2.probs[size_t(g.indexer.index({0, 1, 0}))] == Approx(1.0));
  }
}

TEST_CASE("identity decoders over action-valued signals reproduce the joint") {
  NormalFormGame g({{"a", "b"}, {"x", "y"}});
  SplitMix64 rng(77);
  CorrelatedProfile cp(std::vector<int>{2, 2});
  double sum = 0;
  for (double& p : cp.signal_dist) sum += (p = rng.next_double());
  for (double& p : cp.signal_dist) p /= sum;
  cp.decoders = {{0, 1}, {0, 1}};
  auto tau = correlated_to_joint(g, cp);
  for (int j = 0; j < 4; ++j) REQUIRE(tau.probs[size_t(j)] == Approx(cp.signal_dist[size_t(j)]));
}

TEST_CASE("strictly dominated duplicate-minus-epsilon action is removed") {
  NormalFormGame g({{"a", "a_worse"}, {"x", "y"}});
  for (int b = 0; b < 2; ++b) {
    g.utility(g.indexer.index({0, b}), 0) = 3.0;
    g.utility(g.indexer.index({1, b}), 0) = 3.0 - 0.25;
    g.utility(g.indexer.index({0, b}), 1) = 1.0;  // indifferent, survives
    g.utility(g.indexer.index({1, b}), 1) = 1.0;
  }
  auto red = remove_dominated(g);
  REQUIRE(red.game.num_actions(0) == 1);
  REQUIRE(red.original_index[0] == std::vector<int>{0});
  REQUIRE(red.game.num_actions(1) == 2);
}

TEST_CASE("iterated dominance solves the defect game completely") {
  // Classic two-prisoner dilemma: defect strictly dominates, then the
  // opponent's column collapses too.
  NormalFormGame g({{"coop", "defect"}, {"coop", "defect"}});
  auto set = [&](int a, int b, double u1, double u2) {
    g.utility(g.indexer.index({a, b}), 0) = u1;
    g.utility(g.indexer.index({a, b}), 1) = u2;
  };
  set(0, 0, 3, 3);
  set(0, 1, 0, 5);
  set(1, 0, 5, 0);
  set(1, 1, 1, 1);
  auto red = remove_dominated(g);
  REQUIRE(red.game.num_joint() == 1);
  REQUIRE(red.original_index[0] == std::vector<int>{1});
  REQUIRE(red.original_index[1] == std::vector<int>{1});
}

TEST_CASE("intersection game has no strictly dominated actions") {
  auto red = remove_dominated(fixtures::intersection_game());
  REQUIRE(red.game.num_joint() == 8);
}

TEST_CASE("dominance never removes a best response") {
  // For every opponent pure joint action, the argmax reply must survive.
  SplitMix64 rng(4321);
  for (int it = 0; it < 50; ++it) {
    std::vector<int> counts = {2 + int(rng.next_below(3)), 2 + int(rng.next_below(3))};
    auto g = fixtures::random_game(rng, counts);
    auto red = remove_dominated(g);
    for (int i = 0; i < 2; ++i) {
      int other = 1 - i;
      for (int b = 0; b < g.num_actions(other); ++b) {
        int best = 0;
        double best_u = -1e300;
        for (int a = 0; a < g.num_actions(i); ++a) {
          std::vector<int> d(2);
          d[size_t(i)] = a;
          d[size_t(other)] = b;
          double u = g.utility(g.indexer.index(d), i);
          if (u > best_u) {
            best_u = u;
            best = a;
          }
        }
        bool survived =
            std::find(red.original_index[size_t(i)].begin(), red.original_index[size_t(i)].end(),
                      best) != red.original_index[size_t(i)].end();
        // Only guaranteed if the opponent action survived as well.
        bool opp_survived =
            std::find(red.original_index[size_t(other)].begin(),
                      red.original_index[size_t(other)].end(), b) !=
            red.original_index[size_t(other)].end();
        if (opp_survived) REQUIRE(survived);
      }
    }
  }
}

TEST_CASE("negate_utilities is an involution and fixes the zero game") {
  auto g = fixtures::intersection_game();
  auto gg = negate_utilities(negate_utilities(g));
  REQUIRE(gg.utils == g.utils);
  NormalFormGame z({{"a"}, {"b"}});
  REQUIRE(negate_utilities(z).utils == z.utils);
  REQUIRE(negate_utilities(g).utility(0, 0) == 1000.0);
}

TEST_CASE("validation rejects malformed inputs") {
  auto g = fixtures::intersection_game();
  StrategyProfile sp;
  sp.probs = {{0.7, 0.7}, {1, 0}, {1, 0}};
  REQUIRE_THROWS_AS(expected_utility_profile(g, sp), Error);
  sp.probs = {{1, 0}, {1, 0}};
  REQUIRE_THROWS_AS(expected_utility_profile(g, sp), Error);
  JointStrategy tau;
  tau.probs.assign(8, 0.0);
  REQUIRE_THROWS_AS(expected_utility_joint(g, tau), Error);
  NormalFormGame dup({{"a", "a"}, {"x", "y"}});
  REQUIRE_THROWS_AS(dup.validate(), Error);
}

TEST_CASE("nfg text round-trips") {
  auto g = fixtures::intersection_game();
  auto text = write_nfg(g);
  auto h = parse_nfg(text);
  REQUIRE(h.actions == g.actions);
  REQUIRE(h.utils == g.utils);
}

TEST_CASE("nfg parser reports malformed input with line numbers") {
  REQUIRE_THROWS_AS(parse_nfg("players 2\n"), ParseError);
  std::string missing =
      "nfg\nplayers 2\nactions 1 a b\nactions 2 x y\nu (a,x) 1 2\n";
  REQUIRE_THROWS_AS(parse_nfg(missing), ParseError);
  std::string dup =
      "nfg\nplayers 1\nactions 1 a\nu (a) 1\nu (a) 2\n";
  try {
    parse_nfg(dup);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line() == 5);
  }
}
