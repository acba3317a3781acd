#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "eqsynth/checker.hpp"
#include "eqsynth/csg.hpp"
#include "eqsynth/property.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace eqsynth;
using Catch::Matchers::ContainsSubstring;

namespace {

CoalitionPartition parts(std::vector<std::vector<int>> cs) {
  CoalitionPartition p;
  p.coalitions = std::move(cs);
  return p;
}

CoalitionPartition grand(int players) {
  std::vector<int> all;
  for (int i = 0; i < players; ++i) all.push_back(i);
  return parts({all});
}

CoalitionPartition singletons(int players) {
  CoalitionPartition p;
  for (int i = 0; i < players; ++i) p.coalitions.push_back({i});
  return p;
}

using fixtures::force_reach;
using fixtures::random_reward;

std::vector<bool> random_set(SplitMix64& rng, int n, int permille) {
  std::vector<bool> out(static_cast<size_t>(n), false);
  for (int i = 0; i < n; ++i)
    out[size_t(i)] = rng.next_below(1000) < uint64_t(permille);
  return out;
}

CheckObjective until_obj(std::vector<bool> lhs, std::vector<bool> rhs) {
  CheckObjective o;
  o.kind = CheckObjective::Kind::kUntil;
  o.lhs = std::move(lhs);
  o.rhs = std::move(rhs);
  return o;
}

CheckObjective reach_obj(std::vector<bool> goal, RewardStructure r) {
  CheckObjective o;
  o.kind = CheckObjective::Kind::kReachReward;
  o.rhs = std::move(goal);
  o.reward = std::move(r);
  return o;
}

CheckerConfig tight() {
  CheckerConfig cfg;
  cfg.epsilon = 1e-10;
  cfg.max_iterations = 200000;
  return cfg;
}

// Product of two single-player factors: player 1 drives factor one, player 2
// factor two, transitions independent. Objectives built on one factor each
// stay decoupled, so every equilibrium hands each coalition its solo optimum.
struct Product {
  Csg game;
  int s2 = 0;  // factor-two state count, for index arithmetic

  int id(int x, int y) const { return x * s2 + y; }
};

Product product_csg(const Csg& f1, const Csg& f2) {
  Product out{Csg(2, f1.num_states * f2.num_states,
                  {f1.action_names[0], f2.action_names[0]}),
              f2.num_states};
  Csg& g = out.game;
  g.initial_states = {0};
  for (int x = 0; x < f1.num_states; ++x)
    for (int y = 0; y < f2.num_states; ++y) {
      const int s = out.id(x, y);
      g.enabled[size_t(s)][0] = f1.enabled[size_t(x)][0];
      g.enabled[size_t(s)][1] = f2.enabled[size_t(y)][0];
      for (int64_t c1 : f1.consistent_joints(x))
        for (int64_t c2 : f2.consistent_joints(y)) {
          const int64_t code = g.aidx.index({int(c1), int(c2)});
          auto& dist = g.trans[size_t(s)][code];
          for (const auto& [t1, p1] : f1.dist(x, c1))
            for (const auto& [t2, p2] : f2.dist(y, c2))
              dist.emplace_back(out.id(t1, t2), p1 * p2);
          std::sort(dist.begin(), dist.end());
        }
    }
  g.validate();
  return out;
}

std::vector<bool> lift_set(const Product& p, const std::vector<bool>& s,
                           bool first) {
  std::vector<bool> out(static_cast<size_t>(p.game.num_states));
  for (int x = 0; x * p.s2 < p.game.num_states; ++x)
    for (int y = 0; y < p.s2; ++y)
      out[size_t(p.id(x, y))] = first ? s[size_t(x)] : s[size_t(y)];
  return out;
}

RewardStructure lift_reward(const Product& p, const RewardStructure& r,
                            bool first) {
  RewardStructure out(r.name, p.game.num_states);
  for (int x = 0; x * p.s2 < p.game.num_states; ++x)
    for (int y = 0; y < p.s2; ++y) {
      const int s = p.id(x, y);
      out.state_rewards[size_t(s)] = r.state_reward(first ? x : y);
      for (int64_t code : p.game.consistent_joints(s)) {
        std::vector<int> d = p.game.aidx.decode(code);
        const double v = r.action_reward(first ? x : y, first ? d[0] : d[1]);
        if (v != 0.0) out.action_rewards[size_t(s)][code] = v;
      }
    }
  return out;
}

Csg random_mdp(SplitMix64& rng, int states, int actions) {
  return fixtures::random_csg(rng, states, std::vector<int>{actions});
}

}  // namespace

TEST_CASE("next objectives score one-step goal probabilities") {
  // State 0: player 1 picks a coin branch or a sure branch, player 2 has no
  // choice. Branch a: 0.5 each to states 1 and 2; branch b: surely state 2.
  Csg g(2, 3, {{"a", "b"}, {"x"}});
  g.initial_states = {0};
  g.enabled[0][0] = {0, 1};
  g.enabled[0][1] = {0};
  g.trans[0][g.aidx.index({1, 1})] = {{1, 0.5}, {2, 0.5}};
  g.trans[0][g.aidx.index({2, 1})] = {{2, 1.0}};
  g.trans[1][0] = {{1, 1.0}};
  g.trans[2][0] = {{2, 1.0}};
  g.validate();

  CheckObjective o1, o2;
  o1.kind = o2.kind = CheckObjective::Kind::kNext;
  o1.rhs = {false, true, false};
  o2.rhs = {false, false, true};

  // Joint a gives (0.5, 0.5), joint b gives (0, 1); player 1 strictly
  // prefers a, so the unique equilibrium plays a.
  CheckResult ne =
      check_next(g, {o1, o2}, EqType::kNash, Criterion::kSocialWelfare);
  CHECK(ne.values[0][0] == Catch::Approx(0.5).margin(1e-9));
  CHECK(ne.values[0][1] == Catch::Approx(0.5).margin(1e-9));

  CheckResult ce =
      check_next(g, {o1, o2}, EqType::kCorrelated, Criterion::kSocialWelfare);
  CHECK(ce.values[0][0] == Catch::Approx(0.5).margin(1e-9));
  CHECK(ce.values[0][1] == Catch::Approx(0.5).margin(1e-9));

  CheckObjective all = o1, none = o1;
  all.rhs = {true, true, true};
  none.rhs = {false, false, false};
  CheckResult ones =
      check_next(g, {all, all}, EqType::kNash, Criterion::kSocialWelfare);
  CheckResult zeros =
      check_next(g, {none, none}, EqType::kNash, Criterion::kSocialWelfare);
  for (int s = 0; s < 3; ++s)
    for (int l = 0; l < 2; ++l) {
      CHECK(ones.values[size_t(s)][size_t(l)] ==
            Catch::Approx(1.0).margin(1e-9));
      CHECK(zeros.values[size_t(s)][size_t(l)] ==
            Catch::Approx(0.0).margin(1e-9));
    }
}

TEST_CASE("one-shot intersection rewards reproduce the known equilibria") {
  fixtures::OneShotCsg fx = fixtures::one_shot_intersection_csg();
  CsgModel model{fx.game, fx.rewards};

  PropertyAst sw = parse_property(
      "<<1:2:3>>(CE,SW)max=? (R{u1}[F done] + R{u2}[F done] + R{u3}[F done])");
  PropertyCheck swc = check_property(model, sw, tight());
  REQUIRE(swc.mode == CheckMode::kUnbounded);
  CHECK(swc.result.values[0][0] == Catch::Approx(5.0).margin(1e-6));
  CHECK(swc.result.values[0][1] == Catch::Approx(-5.0).margin(1e-6));
  CHECK(swc.result.values[0][2] == Catch::Approx(5.0).margin(1e-6));
  BoundOutcome sum = evaluate_bound(swc.result.values[0], sw);
  CHECK(sum.is_query);
  CHECK(sum.sum == Catch::Approx(5.0).margin(1e-6));

  PropertyAst sf = parse_property(
      "<<1:2:3>>(CE,SF)max=? (R{u1}[F done] + R{u2}[F done] + R{u3}[F done])");
  PropertyCheck sfc = check_property(model, sf, tight());
  for (int l = 0; l < 3; ++l)
    CHECK(std::fabs(sfc.result.values[0][size_t(l)]) < 1e-6);

  // The three-coalition search may settle on any equilibrium, but a
  // welfare-optimal correlated one can never be worse.
  PropertyAst ne = parse_property(
      "<<1:2:3>>(NE,SW)max=? (R{u1}[F done] + R{u2}[F done] + R{u3}[F done])");
  PropertyCheck nec = check_property(model, ne, tight());
  const double ce_welfare = swc.result.values[0][0] + swc.result.values[0][1] +
                            swc.result.values[0][2];
  const double ne_welfare = nec.result.values[0][0] + nec.result.values[0][1] +
                            nec.result.values[0][2];
  CHECK(ce_welfare >= ne_welfare - 1e-5);
}

TEST_CASE("grand coalition until values match the MDP oracle") {
  SplitMix64 rng(0xCEC10001ULL);
  for (int iter = 0; iter < 10; ++iter) {
    const int states = 4 + int(rng.next_below(5));
    Csg g = fixtures::random_csg(rng, states, {2, 2});
    std::vector<bool> lhs = random_set(rng, states, 850);
    std::vector<bool> rhs = random_set(rng, states, 250);
    rhs[size_t(states - 1)] = true;
    force_reach(g, states - 1);
    g.validate();

    CoalitionGame cg = build_coalition_game(g, grand(2));
    for (EqType eq : {EqType::kNash, EqType::kCorrelated}) {
      CheckResult r = check_unbounded(cg.game, {until_obj(lhs, rhs)}, eq,
                                      Criterion::kSocialWelfare, false, tight());
      std::vector<double> want = oracles::mdp_until(g, lhs, rhs);
      for (int s = 0; s < states; ++s)
        CHECK(r.values[size_t(s)][0] ==
              Catch::Approx(want[size_t(s)]).margin(1e-6));
    }

    // Minimising goes through negated utilities and back.
    CheckResult rmin =
        check_unbounded(cg.game, {until_obj(lhs, rhs)}, EqType::kNash,
                        Criterion::kSocialWelfare, true, tight());
    std::vector<double> wmin = oracles::mdp_until(g, lhs, rhs, true);
    for (int s = 0; s < states; ++s)
      CHECK(rmin.values[size_t(s)][0] ==
            Catch::Approx(wmin[size_t(s)]).margin(1e-6));
  }
}

TEST_CASE("grand coalition reachability rewards match the MDP oracle") {
  SplitMix64 rng(0xCEC10002ULL);
  for (int iter = 0; iter < 10; ++iter) {
    const int states = 4 + int(rng.next_below(5));
    Csg g = fixtures::random_csg(rng, states, {2, 2});
    std::vector<bool> goal = random_set(rng, states, 200);
    goal[size_t(states - 1)] = true;
    force_reach(g, states - 1);
    g.validate();
    RewardStructure r = random_reward(rng, g, "c");

    CoalitionGame cg = build_coalition_game(g, grand(2));
    RewardStructure rc = cg.translate(r);
    for (bool minimize : {false, true}) {
      CheckResult got =
          check_unbounded(cg.game, {reach_obj(goal, rc)}, EqType::kNash,
                          Criterion::kSocialWelfare, minimize, tight());
      std::vector<double> want = oracles::mdp_reach_reward(g, goal, r, minimize);
      for (int s = 0; s < states; ++s)
        CHECK(got.values[size_t(s)][0] ==
              Catch::Approx(want[size_t(s)]).margin(1e-6));
    }
  }
}

TEST_CASE("decoupled coalitions keep their solo optima") {
  SplitMix64 rng(0xDEC0091EULL);
  for (int iter = 0; iter < 3; ++iter) {
    Csg f1 = random_mdp(rng, 3, 2);
    Csg f2 = random_mdp(rng, 3, 2);
    force_reach(f1, 2);
    force_reach(f2, 1);
    std::vector<bool> t1 = {false, false, true};
    std::vector<bool> t2 = {false, true, false};
    RewardStructure r1 = random_reward(rng, f1, "r1");
    RewardStructure r2 = random_reward(rng, f2, "r2");

    Product p = product_csg(f1, f2);
    CoalitionGame cg = build_coalition_game(p.game, singletons(2));
    std::vector<bool> all1(3, true);

    std::vector<double> w1 = oracles::mdp_until(f1, all1, t1);
    std::vector<double> w2 = oracles::mdp_until(f2, all1, t2);
    std::vector<double> v1 = oracles::mdp_reach_reward(f1, t1, r1);
    std::vector<double> v2 = oracles::mdp_reach_reward(f2, t2, r2);

    for (EqType eq : {EqType::kNash, EqType::kCorrelated}) {
      CheckResult pr = check_unbounded(
          cg.game,
          {until_obj(lift_set(p, all1, true), lift_set(p, t1, true)),
           until_obj(lift_set(p, all1, false), lift_set(p, t2, false))},
          eq, Criterion::kSocialWelfare, false, tight());
      CheckResult rr = check_unbounded(
          cg.game,
          {reach_obj(lift_set(p, t1, true), lift_reward(p, r1, true)),
           reach_obj(lift_set(p, t2, false), lift_reward(p, r2, false))},
          eq, Criterion::kSocialWelfare, false, tight());
      for (int x = 0; x < f1.num_states; ++x)
        for (int y = 0; y < f2.num_states; ++y) {
          const int s = p.id(x, y);
          CHECK(pr.values[size_t(s)][0] ==
                Catch::Approx(w1[size_t(x)]).margin(1e-5));
          CHECK(pr.values[size_t(s)][1] ==
                Catch::Approx(w2[size_t(y)]).margin(1e-5));
          CHECK(rr.values[size_t(s)][0] ==
                Catch::Approx(v1[size_t(x)]).margin(1e-5));
          CHECK(rr.values[size_t(s)][1] ==
                Catch::Approx(v2[size_t(y)]).margin(1e-5));
        }
    }
  }
}

TEST_CASE("bounded until with budget zero is the goal indicator") {
  SplitMix64 rng(0xB0B0B0B0ULL);
  Csg g = fixtures::random_csg(rng, 5, {2, 2});
  g.validate();
  CheckObjective o1, o2;
  o1.kind = o2.kind = CheckObjective::Kind::kBoundedUntil;
  o1.bound = o2.bound = 0;
  o1.lhs = random_set(rng, 5, 500);
  o1.rhs = random_set(rng, 5, 400);
  o2.lhs = random_set(rng, 5, 500);
  o2.rhs = random_set(rng, 5, 400);

  CoalitionGame cg = build_coalition_game(g, singletons(2));
  CheckResult r = check_bounded(cg.game, {o1, o2}, EqType::kCorrelated,
                                Criterion::kSocialWelfare);
  for (int s = 0; s < 5; ++s) {
    CHECK(r.values[size_t(s)][0] ==
          Catch::Approx(o1.rhs[size_t(s)] ? 1.0 : 0.0).margin(1e-9));
    CHECK(r.values[size_t(s)][1] ==
          Catch::Approx(o2.rhs[size_t(s)] ? 1.0 : 0.0).margin(1e-9));
  }
}

TEST_CASE("grand coalition bounded checks match backward induction") {
  SplitMix64 rng(0x0F111173ULL);
  for (int iter = 0; iter < 6; ++iter) {
    const int states = 3 + int(rng.next_below(4));
    Csg g = fixtures::random_csg(rng, states, {2, 2});
    g.validate();
    CoalitionGame cg = build_coalition_game(g, grand(2));
    const int k = int(rng.next_below(4));
    const bool minimize = rng.next_below(2) == 0;

    CheckObjective bu;
    bu.kind = CheckObjective::Kind::kBoundedUntil;
    bu.bound = k;
    bu.lhs = random_set(rng, states, 800);
    bu.rhs = random_set(rng, states, 300);
    CheckResult got = check_bounded(cg.game, {bu}, EqType::kNash,
                                    Criterion::kSocialWelfare, minimize);
    std::vector<double> want =
        oracles::mdp_bounded_until(g, bu.lhs, bu.rhs, k, minimize);
    for (int s = 0; s < states; ++s)
      CHECK(got.values[size_t(s)][0] ==
            Catch::Approx(want[size_t(s)]).margin(1e-9));

    RewardStructure r = random_reward(rng, g, "c");
    RewardStructure rc = cg.translate(r);
    CheckObjective inst;
    inst.kind = CheckObjective::Kind::kInstant;
    inst.bound = k;
    inst.reward = rc;
    CheckResult gi = check_bounded(cg.game, {inst}, EqType::kNash,
                                   Criterion::kSocialWelfare, minimize);
    std::vector<double> wi = oracles::mdp_instant(g, r, k, minimize);
    for (int s = 0; s < states; ++s)
      CHECK(gi.values[size_t(s)][0] ==
            Catch::Approx(wi[size_t(s)]).margin(1e-9));

    CheckObjective cum;
    cum.kind = CheckObjective::Kind::kCumulative;
    cum.bound = k;
    cum.reward = rc;
    CheckResult gc2 = check_bounded(cg.game, {cum}, EqType::kNash,
                                    Criterion::kSocialWelfare, minimize);
    std::vector<double> wc = oracles::mdp_cumulative(g, r, k, minimize);
    for (int s = 0; s < states; ++s)
      CHECK(gc2.values[size_t(s)][0] ==
            Catch::Approx(wc[size_t(s)]).margin(1e-9));
  }
}

TEST_CASE("horizon-zero instantaneous reward is the state reward itself") {
  SplitMix64 rng(0x019E0A7AULL);
  Csg g = fixtures::random_csg(rng, 4, {2});
  g.validate();
  RewardStructure r = random_reward(rng, g, "c");
  CoalitionGame cg = build_coalition_game(g, grand(1));
  CheckObjective inst;
  inst.kind = CheckObjective::Kind::kInstant;
  inst.bound = 0;
  inst.reward = cg.translate(r);
  CheckResult got = check_bounded(cg.game, {inst}, EqType::kNash,
                                  Criterion::kSocialWelfare);
  for (int s = 0; s < 4; ++s)
    CHECK(got.values[size_t(s)][0] == r.state_reward(s));
}

TEST_CASE("two-step chain rewards equal the enumerated optimum") {
  // Chain 0 -> 1 -> 2(sink). Player 1 picks between two first moves whose
  // action rewards differ; player 2 never has a real choice. Decoupled
  // coalitions, so each value is its own best pure plan.
  Csg g(2, 3, {{"slow", "fast"}, {"go"}});
  g.initial_states = {0};
  g.enabled[0][0] = {0, 1};
  g.enabled[0][1] = {0};
  g.enabled[1][1] = {0};
  g.trans[0][g.aidx.index({1, 1})] = {{1, 1.0}};
  g.trans[0][g.aidx.index({2, 1})] = {{1, 1.0}};
  g.trans[1][g.aidx.index({0, 1})] = {{2, 1.0}};
  g.trans[2][0] = {{2, 1.0}};
  g.validate();

  RewardStructure r1("r1", 3), r2("r2", 3);
  r1.state_rewards = {1.0, 1.0, 1.0};
  r2.state_rewards = {1.0, 1.0, 1.0};
  r1.action_rewards[0][g.aidx.index({1, 1})] = 0.25;
  r1.action_rewards[0][g.aidx.index({2, 1})] = 0.75;

  CoalitionGame cg = build_coalition_game(g, singletons(2));
  CheckObjective c1, c2;
  c1.kind = c2.kind = CheckObjective::Kind::kCumulative;
  c1.bound = c2.bound = 2;
  c1.reward = cg.translate(r1);
  c2.reward = cg.translate(r2);
  CheckResult got = check_bounded(cg.game, {c1, c2}, EqType::kNash,
                                  Criterion::kSocialWelfare);

  // Both of player 1's pure plans pay the unit state rewards at steps 0 and
  // 1 plus the chosen first move's action reward; fast wins.
  CHECK(got.values[0][0] == Catch::Approx(2.75).margin(1e-9));
  CHECK(got.values[0][1] == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("finite reward mixes agree between direct and windowed checks") {
  SplitMix64 rng(0x010CE27EULL);
  for (int iter = 0; iter < 5; ++iter) {
    const int states = 3 + int(rng.next_below(3));
    Csg g = fixtures::random_csg(rng, states, {2, 2});
    g.validate();
    CoalitionGame cg = build_coalition_game(g, singletons(2));
    RewardStructure ra = cg.translate(random_reward(rng, g, "ra"));
    RewardStructure rb = cg.translate(random_reward(rng, g, "rb"));

    CheckObjective inst;
    inst.kind = CheckObjective::Kind::kInstant;
    inst.bound = int(rng.next_below(4));
    inst.reward = ra;
    CheckObjective cum;
    cum.kind = CheckObjective::Kind::kCumulative;
    cum.bound = int(rng.next_below(4));
    cum.reward = rb;

    const EqType eq = iter % 2 == 0 ? EqType::kCorrelated : EqType::kNash;
    CheckResult direct =
        check_bounded(cg.game, {inst, cum}, eq, Criterion::kSocialWelfare);

    TransformResult tr = transform_mixed_horizon(cg.game, {inst, cum});
    CHECK(tr.k_theta == std::max(inst.bound, cum.bound));
    CHECK(tr.game.num_states == states * (tr.k_theta + 2));
    CheckResult windowed =
        check_unbounded(tr.game, tr.objectives, eq, Criterion::kSocialWelfare,
                        false, tight(), /*verify_assumption=*/false);
    const int w = tr.k_theta + 2;
    for (int s = 0; s < states; ++s)
      for (int l = 0; l < 2; ++l)
        CHECK(windowed.values[size_t(s * w)][size_t(l)] ==
              Catch::Approx(direct.values[size_t(s)][size_t(l)]).margin(1e-6));
  }
}

TEST_CASE("probabilistic mixes agree between direct and windowed checks") {
  SplitMix64 rng(0x010CE27FULL);
  for (int iter = 0; iter < 5; ++iter) {
    const int states = 3 + int(rng.next_below(3));
    Csg g = fixtures::random_csg(rng, states, {2, 2});
    g.validate();
    CoalitionGame cg = build_coalition_game(g, singletons(2));

    CheckObjective nx;
    nx.kind = CheckObjective::Kind::kNext;
    nx.rhs = random_set(rng, states, 400);
    CheckObjective bu;
    bu.kind = CheckObjective::Kind::kBoundedUntil;
    bu.bound = 1 + int(rng.next_below(3));
    bu.lhs = random_set(rng, states, 800);
    bu.rhs = random_set(rng, states, 300);

    const EqType eq = iter % 2 == 0 ? EqType::kCorrelated : EqType::kNash;
    CheckResult direct =
        check_bounded(cg.game, {nx, bu}, eq, Criterion::kSocialWelfare);
    TransformResult tr = transform_mixed_horizon(cg.game, {nx, bu});
    CheckResult windowed =
        check_unbounded(tr.game, tr.objectives, eq, Criterion::kSocialWelfare,
                        false, tight(), /*verify_assumption=*/false);
    const int w = tr.k_theta + 2;
    for (int s = 0; s < states; ++s)
      for (int l = 0; l < 2; ++l)
        CHECK(windowed.values[size_t(s * w)][size_t(l)] ==
              Catch::Approx(direct.values[size_t(s)][size_t(l)]).margin(1e-6));
  }
}

TEST_CASE("window construction sizes and rejections") {
  SplitMix64 rng(0x512E0001ULL);
  Csg g = fixtures::random_csg(rng, 3, {2, 2});
  g.validate();
  CoalitionGame cg = build_coalition_game(g, singletons(2));

  CheckObjective nx;
  nx.kind = CheckObjective::Kind::kNext;
  nx.rhs = {true, false, false};
  CheckObjective un = until_obj({true, true, true}, {false, true, false});

  // No finite bound beyond the next-step: the window still needs one live
  // counter level plus the absorbing one.
  TransformResult tr = transform_mixed_horizon(cg.game, {nx, un});
  CHECK(tr.k_theta == 1);
  CHECK(tr.game.num_states == 9);

  CHECK_THROWS_WITH(transform_mixed_horizon(cg.game, {un, un}),
                    ContainsSubstring("finite-horizon"));
}

TEST_CASE("mixed horizons via the window match decoupled oracles") {
  SplitMix64 rng(0x03172A9EULL);
  Csg f1 = random_mdp(rng, 3, 2);
  Csg f2 = random_mdp(rng, 3, 2);
  force_reach(f2, 1);
  std::vector<bool> t1 = {false, false, true};
  std::vector<bool> t2 = {false, true, false};
  std::vector<bool> all1(3, true);

  Product p = product_csg(f1, f2);
  int a1 = p.game.add_atom("g1");
  int a2 = p.game.add_atom("g2");
  std::vector<bool> l1 = lift_set(p, t1, true), l2 = lift_set(p, t2, false);
  for (int s = 0; s < p.game.num_states; ++s) {
    if (l1[size_t(s)]) p.game.set_label(s, a1);
    if (l2[size_t(s)]) p.game.set_label(s, a2);
  }
  CsgModel model{p.game, {}};

  PropertyAst ast =
      parse_property("<<1:2>>(NE,SW)max=? (P[X g1] + P[true U g2])");
  PropertyCheck pc = check_property(model, ast, tight());
  REQUIRE(pc.mode == CheckMode::kTransformed);
  CHECK(pc.step_cap == 2);

  std::vector<double> w2 = oracles::mdp_until(f2, all1, t2);
  for (int x = 0; x < 3; ++x) {
    // One-step factor-one optimum, scanned directly.
    double best = -1.0;
    for (int64_t c : f1.consistent_joints(x)) {
      double e = 0.0;
      for (const auto& [t, pr] : f1.dist(x, c))
        e += pr * (t1[size_t(t)] ? 1.0 : 0.0);
      best = std::max(best, e);
    }
    for (int y = 0; y < 3; ++y) {
      const int s = p.id(x, y);
      CHECK(pc.result.values[size_t(s)][0] == Catch::Approx(best).margin(1e-6));
      CHECK(pc.result.values[size_t(s)][1] ==
            Catch::Approx(w2[size_t(y)]).margin(1e-6));
    }
  }
  int max_step = 0;
  for (const auto& [key, witness] : pc.result.witnesses) {
    (void)witness;
    max_step = std::max(max_step, key.step);
    CHECK(key.step <= pc.step_cap);
  }
  CHECK(max_step == pc.step_cap);
}

TEST_CASE("stalling games are refused with objective and state") {
  Csg g(1, 2, {{"wait", "go"}});
  g.initial_states = {0};
  g.enabled[0][0] = {0, 1};
  g.trans[0][g.aidx.index({1})] = {{0, 1.0}};
  g.trans[0][g.aidx.index({2})] = {{1, 1.0}};
  g.trans[1][0] = {{1, 1.0}};
  g.validate();

  CoalitionGame cg = build_coalition_game(g, grand(1));
  std::vector<bool> all1 = {true, true};
  std::vector<bool> goal = {false, true};

  try {
    check_unbounded(cg.game, {until_obj(all1, goal)}, EqType::kNash,
                    Criterion::kSocialWelfare);
    FAIL("expected an assumption violation");
  } catch (const AssumptionError& e) {
    CHECK(e.objective() == 0);
    CHECK(e.state() == 0);
    CHECK_THAT(e.what(), ContainsSubstring("objective 1"));
    CHECK_THAT(e.what(), ContainsSubstring("state 0"));
  }

  // With the gate off the value still converges: the player can always go.
  CheckResult r =
      check_unbounded(cg.game, {until_obj(all1, goal)}, EqType::kNash,
                      Criterion::kSocialWelfare, false, tight(), false);
  CHECK(r.values[0][0] == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("non-convergence reports iterations and residual") {
  // A fair coin toward the goal halves the gap each sweep, so two sweeps
  // leave residual 0.25.
  Csg g(1, 2, {{"flip"}});
  g.initial_states = {0};
  g.enabled[0][0] = {0};
  g.trans[0][g.aidx.index({1})] = {{0, 0.5}, {1, 0.5}};
  g.trans[1][0] = {{1, 1.0}};
  g.validate();

  CoalitionGame cg = build_coalition_game(g, grand(1));
  CheckerConfig strict;
  strict.epsilon = 1e-12;
  strict.max_iterations = 2;
  try {
    check_unbounded(cg.game, {until_obj({true, true}, {false, true})},
                    EqType::kNash, Criterion::kSocialWelfare, false, strict);
    FAIL("expected non-convergence");
  } catch (const ConvergenceError& e) {
    CHECK(e.iterations() == 2);
    CHECK(e.residual() == Catch::Approx(0.25).margin(1e-12));
    CHECK_THAT(e.what(), ContainsSubstring("did not converge"));
  }
}

TEST_CASE("values are monotone when the target grows") {
  SplitMix64 rng(0x00303030ULL);
  for (int iter = 0; iter < 10; ++iter) {
    const int states = 4 + int(rng.next_below(4));
    Csg g = fixtures::random_csg(rng, states, {2, 2});
    std::vector<bool> lhs(static_cast<size_t>(states), true);
    std::vector<bool> rhs = random_set(rng, states, 250);
    rhs[size_t(states - 1)] = true;
    force_reach(g, states - 1);
    g.validate();
    CoalitionGame cg = build_coalition_game(g, grand(2));

    std::vector<bool> bigger = rhs;
    bigger[size_t(rng.next_below(uint64_t(states)))] = true;

    CheckResult small =
        check_unbounded(cg.game, {until_obj(lhs, rhs)}, EqType::kNash,
                        Criterion::kSocialWelfare, false, tight());
    CheckResult large =
        check_unbounded(cg.game, {until_obj(lhs, bigger)}, EqType::kNash,
                        Criterion::kSocialWelfare, false, tight());
    for (int s = 0; s < states; ++s)
      CHECK(large.values[size_t(s)][0] >= small.values[size_t(s)][0] - 1e-6);
  }
}

TEST_CASE("converged tables satisfy their own one-step equations") {
  SplitMix64 rng(0x002E7A11ULL);
  for (int iter = 0; iter < 5; ++iter) {
    const int states = 4 + int(rng.next_below(4));
    Csg g = fixtures::random_csg(rng, states, {2, 2});
    std::vector<bool> lhs(static_cast<size_t>(states), true);
    std::vector<bool> rhs = random_set(rng, states, 250);
    rhs[size_t(states - 1)] = true;
    force_reach(g, states - 1);
    g.validate();
    CoalitionGame cg = build_coalition_game(g, grand(2));

    CheckResult r = check_unbounded(cg.game, {until_obj(lhs, rhs)},
                                    EqType::kNash, Criterion::kSocialWelfare,
                                    false, tight());
    for (int s = 0; s < states; ++s) {
      if (rhs[size_t(s)]) {
        CHECK(r.values[size_t(s)][0] == Catch::Approx(1.0).margin(1e-12));
        continue;
      }
      double best = 0.0;
      for (int64_t code : cg.game.consistent_joints(s)) {
        double e = 0.0;
        for (const auto& [t, pr] : cg.game.dist(s, code))
          e += pr * r.values[size_t(t)][0];
        best = std::max(best, e);
      }
      CHECK(r.values[size_t(s)][0] == Catch::Approx(best).margin(1e-6));
    }
  }
}

TEST_CASE("bounded checks ignore epsilon and thread count") {
  SplitMix64 rng(0x00D17E55ULL);
  Csg g = fixtures::random_csg(rng, 5, {2, 2});
  g.validate();
  CoalitionGame cg = build_coalition_game(g, singletons(2));

  CheckObjective b1, b2;
  b1.kind = b2.kind = CheckObjective::Kind::kBoundedUntil;
  b1.bound = 2;
  b2.bound = 3;
  b1.lhs = random_set(rng, 5, 800);
  b1.rhs = random_set(rng, 5, 300);
  b2.lhs = random_set(rng, 5, 800);
  b2.rhs = random_set(rng, 5, 300);

  CheckerConfig loose{1e-3, 10, 1};
  CheckerConfig dense{1e-12, 100000, 8};
  CheckResult a = check_bounded(cg.game, {b1, b2}, EqType::kCorrelated,
                                Criterion::kSocialWelfare, false, loose);
  CheckResult b = check_bounded(cg.game, {b1, b2}, EqType::kCorrelated,
                                Criterion::kSocialWelfare, false, dense);
  REQUIRE(a.values.size() == b.values.size());
  for (size_t s = 0; s < a.values.size(); ++s)
    for (size_t l = 0; l < a.values[s].size(); ++l)
      CHECK(a.values[s][l] == b.values[s][l]);
}

TEST_CASE("unbounded results are identical across thread counts") {
  SplitMix64 rng(0x007EAD50ULL);
  Csg g = fixtures::random_csg(rng, 6, {2, 2});
  std::vector<bool> lhs(6, true);
  std::vector<bool> rhs = {false, false, true, false, false, true};
  force_reach(g, 5);
  g.validate();
  CoalitionGame cg = build_coalition_game(g, grand(2));

  CheckerConfig one = tight();
  CheckerConfig eight = tight();
  eight.threads = 8;
  CheckResult a = check_unbounded(cg.game, {until_obj(lhs, rhs)},
                                  EqType::kNash, Criterion::kSocialWelfare,
                                  false, one);
  CheckResult b = check_unbounded(cg.game, {until_obj(lhs, rhs)},
                                  EqType::kNash, Criterion::kSocialWelfare,
                                  false, eight);
  CHECK(a.iterations == b.iterations);
  for (size_t s = 0; s < a.values.size(); ++s)
    CHECK(a.values[s][0] == b.values[s][0]);
  REQUIRE(a.contexts.size() == b.contexts.size());
  for (size_t i = 0; i < a.contexts.size(); ++i) {
    CHECK(a.contexts[i].state == b.contexts[i].state);
    CHECK(a.contexts[i].d == b.contexts[i].d);
    CHECK(a.contexts[i].e == b.contexts[i].e);
    CHECK(a.contexts[i].values == b.contexts[i].values);
  }
}

TEST_CASE("bound relations compare the summed coalition values") {
  ValueVector vals = {5.0, -5.0, 5.0};
  PropertyAst ge =
      parse_property("<<1:2:3>>(CE,SW)max>=4 (P[X a] + P[X a] + P[X a])");
  BoundOutcome o1 = evaluate_bound(vals, ge);
  CHECK_FALSE(o1.is_query);
  CHECK(o1.sum == Catch::Approx(5.0));
  CHECK(o1.holds);

  PropertyAst gt =
      parse_property("<<1:2:3>>(CE,SW)max>5 (P[X a] + P[X a] + P[X a])");
  CHECK_FALSE(evaluate_bound(vals, gt).holds);

  PropertyAst lt =
      parse_property("<<1:2:3>>(CE,SW)max<0 (P[X a] + P[X a] + P[X a])");
  CHECK_FALSE(evaluate_bound(vals, lt).holds);
  CHECK(evaluate_bound({-1.0, -1.0, -1.0}, lt).holds);

  PropertyAst query =
      parse_property("<<1:2:3>>(CE,SW)max=? (P[X a] + P[X a] + P[X a])");
  CHECK(evaluate_bound(vals, query).is_query);
  CHECK(evaluate_bound(vals, query).holds);
}

TEST_CASE("unknown atoms and reward structures are reported by name") {
  fixtures::OneShotCsg fx = fixtures::one_shot_intersection_csg();
  CsgModel model{fx.game, fx.rewards};

  PropertyAst bad_atom = parse_property(
      "<<1:2:3>>(CE,SW)max=? (P[F nope] + P[F done] + P[F done])");
  CHECK_THROWS_WITH(check_property(model, bad_atom),
                    ContainsSubstring("unknown atom 'nope'"));

  PropertyAst bad_reward = parse_property(
      "<<1:2:3>>(CE,SW)max=? (R{zz}[F done] + R{u2}[F done] + R{u3}[F done])");
  CHECK_THROWS_WITH(check_property(model, bad_reward),
                    ContainsSubstring("unknown reward structure 'zz'"));
}

TEST_CASE("minimising properties run through negation end to end") {
  SplitMix64 rng(0x00A11D0EULL);
  Csg g = fixtures::random_csg(rng, 4, {2, 2});
  g.validate();
  RewardStructure r = random_reward(rng, g, "c");
  CsgModel model{g, {r}};

  PropertyAst ast = parse_property("<<1,2>>(NE,SW)min=? (R{c}[C<=3])");
  PropertyCheck pc = check_property(model, ast);
  REQUIRE(pc.mode == CheckMode::kBounded);
  CHECK(pc.step_cap == 3);
  CHECK(pc.property.opt == OptDir::kMax);
  CHECK(pc.property.negate_utilities);

  std::vector<double> want = oracles::mdp_cumulative(g, r, 3, true);
  for (int s = 0; s < 4; ++s)
    CHECK(pc.result.values[size_t(s)][0] ==
          Catch::Approx(want[size_t(s)]).margin(1e-9));
}
