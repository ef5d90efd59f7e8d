#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"
#include "wfa/automata.hpp"

using namespace wfa;

namespace {

double total(const Vector& p) { return std::accumulate(p.values().begin(), p.values().end(), 0.0); }

void expect_simplex(const Vector& p) {
  for (double v : p.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_NEAR(total(p), 1.0, 1e-12);
}

AutomatonState one_hot(std::size_t i) {
  AutomatonState s({}, 1);
  Vector p(5);
  p[i] = 1.0;
  s.set_probs(p);
  return s;
}

}  // namespace

TEST(SelectAction, StartsUniform) {
  AutomatonState s({}, 1);
  for (double v : s.probs().values()) EXPECT_EQ(v, 0.2);
}

TEST(SelectAction, OneHotAlwaysPicksIt) {
  auto s = one_hot(3);
  const Vector before = s.probs();
  for (int i = 0; i < 1000; ++i) {
    const auto a = select_action(s);
    EXPECT_EQ(a.index, 3u);
    EXPECT_EQ(a.epsilon, 0.0025);
  }
  EXPECT_EQ(s.probs(), before);
}

TEST(SelectAction, UniformFrequencies) {
  AutomatonState s({}, 99);
  std::vector<int> counts(5, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[select_action(s).index];
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 0.2, 0.01);
}

TEST(Reward, HandExample) {
  AutomatonState s({}, 1);
  reward(s, 2, 0.1);
  // 0.2 + 0.1 * 0.8 = 0.28; others share 0.72 equally
  const std::vector<double> expect{0.18, 0.18, 0.28, 0.18, 0.18};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(s.probs()[i], expect[i], 1e-15);
  EXPECT_NEAR(total(s.probs()), 1.0, 1e-15);
}

TEST(Reward, FixedPointsAndErrors) {
  auto s = one_hot(1);
  reward(s, 1, 0.1);
  EXPECT_EQ(s.probs(), one_hot(1).probs());
  AutomatonState u({}, 1);
  reward(u, 4, 0.0);
  for (double v : u.probs().values()) EXPECT_EQ(v, 0.2);
  EXPECT_THROW(reward(u, 5, 0.1), ArgumentError);
  EXPECT_THROW(reward(u, 0, 1.0), ArgumentError);
  EXPECT_THROW(reward(u, 0, -0.1), ArgumentError);
}

TEST(Penalize, HandExample) {
  AutomatonState s({}, 1);
  penalize(s, 0, 0.1);
  EXPECT_NEAR(s.probs()[0], 0.18 / 0.98, 1e-15);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_NEAR(s.probs()[i], 0.2 / 0.98, 1e-15);
  EXPECT_NEAR(s.probs()[0], 0.18367, 1e-5);
  EXPECT_NEAR(s.probs()[1], 0.20408, 1e-5);
}

TEST(Penalize, ZeroIsIdentityAndRepeatsDecay) {
  AutomatonState s({}, 1);
  penalize(s, 2, 0.0);
  for (double v : s.probs().values()) EXPECT_EQ(v, 0.2);
  for (int i = 0; i < 200; ++i) penalize(s, 2, 0.1);
  EXPECT_LT(s.probs()[2], 1e-9);
  expect_simplex(s.probs());
  EXPECT_THROW(penalize(s, 7, 0.1), ArgumentError);
}

TEST(Updates, PreserveSimplexAndAreMonotone) {
  AutomatonState s({}, 3);
  Rng rng(4);
  for (int step = 0; step < 5000; ++step) {
    const std::size_t i = rng.index(5);
    const double before = s.probs()[i];
    if (rng.uniform01() < 0.5) {
      reward(s, i, rng.uniform(0.01, 0.5));
      if (before < 1.0) {
        EXPECT_GT(s.probs()[i], before);
      }
    } else {
      penalize(s, i, rng.uniform(0.01, 0.5));
      if (before > 0.0) {
        EXPECT_LT(s.probs()[i], before);
      }
    }
    expect_simplex(s.probs());
    if (HasFailure()) return;
  }
}

TEST(AdaptivePenalty, BranchTable) {
  const RewardPolicy pol;
  EXPECT_EQ(adaptive_penalty(pol, 120, -50), 3 * pol.p);
  EXPECT_EQ(adaptive_penalty(pol, 120, 50), 3 * pol.p);
  EXPECT_EQ(adaptive_penalty(pol, 40, 6), 1.5 * pol.p);
  EXPECT_EQ(adaptive_penalty(pol, 40, 2), pol.p);
}

TEST(Judge, Examples) {
  const RewardPolicy pol;
  EXPECT_EQ(judge(pol, 40, 1).verdict, Verdict::Reward);
  EXPECT_EQ(judge(pol, 150, 0), (Judgement{Verdict::Penalize, 3 * pol.p}));
  EXPECT_EQ(judge(pol, 20, 1).verdict, Verdict::NoOp);
  EXPECT_EQ(judge(pol, 20, 6), (Judgement{Verdict::Penalize, 1.5 * pol.p}));
  // band is open at both ends
  EXPECT_EQ(judge(pol, 30, 0).verdict, Verdict::NoOp);
  EXPECT_EQ(judge(pol, 50, 0).verdict, Verdict::NoOp);
  EXPECT_EQ(judge(pol, 100, 0).verdict, Verdict::NoOp);
}

TEST(Judge, EveryInputMapsToExactlyOnePenalty) {
  const RewardPolicy pol;
  Rng rng(5);
  for (int i = 0; i < 20000; ++i) {
    const double m = rng.uniform(0, 200), d = rng.uniform(-20, 20);
    const double ap = adaptive_penalty(pol, m, d);
    const int branches = (m > 100) + (m <= 100 && d > 5) + (m <= 100 && d <= 5);
    ASSERT_EQ(branches, 1);
    ASSERT_TRUE(ap == 3 * pol.p || ap == 1.5 * pol.p || ap == pol.p);
    const auto j = judge(pol, m, d);
    if (j.verdict == Verdict::Penalize) {
      ASSERT_EQ(j.penalty, ap);
    }
  }
}

TEST(SelectMulti, SingletonDomainGivesSingletons) {
  AutomatonState s({}, 6);
  const RlaConfig cfg{{1}};
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(select_multi(cfg, s).size(), 1u);
}

TEST(SelectMulti, DistinctSortedIndicesAndUniformK) {
  AutomatonState s({}, 7);
  const RlaConfig cfg;
  std::vector<int> k_counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto set = select_multi(cfg, s);
    ++k_counts[set.size()];
    for (std::size_t a = 1; a < set.size(); ++a) {
      ASSERT_LT(set[a - 1].epsilon, set[a].epsilon);
      ASSERT_NE(set[a - 1].index, set[a].index);
    }
  }
  for (int k = 1; k <= 3; ++k) EXPECT_NEAR(static_cast<double>(k_counts[k]) / n, 1.0 / 3.0, 0.01);
}

TEST(SelectMulti, ZeroMassFallsBackToUniformOverTheRest) {
  auto s = one_hot(0);
  const RlaConfig cfg{{3}};
  for (int i = 0; i < 100; ++i) {
    const auto set = select_multi(cfg, s);
    ASSERT_EQ(set.size(), 3u);
    EXPECT_EQ(set[0].index, 0u);
  }
}

TEST(SelectMulti, KLargerThanActionSetIsAnError) {
  AutomatonState s(ActionSet{{0.1, 0.2}}, 1);
  EXPECT_THROW(select_multi(RlaConfig{{3}}, s), ArgumentError);
  EXPECT_THROW(select_multi(RlaConfig{{}}, s), ArgumentError);
  EXPECT_THROW(select_multi(RlaConfig{{4}}, s), ArgumentError);
}

TEST(ActionSetTest, MustBeStrictlyIncreasingAndPositive) {
  EXPECT_THROW(AutomatonState(ActionSet{{0.1, 0.1}}, 1), ArgumentError);
  EXPECT_THROW(AutomatonState(ActionSet{{0.0, 0.1}}, 1), ArgumentError);
  EXPECT_THROW(AutomatonState(ActionSet{{}}, 1), ArgumentError);
}

TEST(ApplyMulti, SingletonIsFgsmAndDisplacementIsBounded) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = LstmParams::init(3, 2, rng);
    Matrix X(6, 2);
    for (double& v : X.values()) v = rng.uniform(0, 1);
    const double y = rng.uniform(0, 1);
    EXPECT_EQ(apply_multi(p, X, y, {0.01}), fgsm(p, X, y, 0.01));
    const auto two = apply_multi(p, X, y, {0.02, 0.005});
    EXPECT_LE(linf_distance(two, X), 0.025 + 1e-12);
    EXPECT_EQ(two, apply_multi(p, X, y, {0.005, 0.02}));
    EXPECT_EQ(two, fgsm(p, fgsm(p, X, y, 0.005), y, 0.02));
    const auto summed = apply_multi(p, X, y, {0.02, 0.005}, {}, MultiEpsilonMode::Summed);
    EXPECT_EQ(summed, fgsm(p, X, y, 0.025));
  }
  EXPECT_THROW(apply_multi(oracle::Doubler{}, Matrix{{0.5}}, 0.0, {}), ArgumentError);
}

TEST(Delay, ZeroIsPassthrough) {
  DelayBuffer<int> b(0);
  for (int t = 0; t < 10; ++t) EXPECT_EQ(b.push_pop(t, -1), t);
}

TEST(Delay, EmitsWhatWasStoredAPushesAgo) {
  DelayBuffer<int> b(2);
  std::vector<int> out;
  for (int t = 0; t < 8; ++t) out.push_back(b.push_pop(100 + t, -1));
  EXPECT_EQ(out[0], -1);
  EXPECT_EQ(out[1], -1);
  EXPECT_EQ(out[5], 103);
  for (int t = 2; t < 8; ++t) EXPECT_EQ(out[t], 100 + t - 2);
}

TEST(LaLoop, ConcentratesOnTheBandActionOfTheStub) {
  auto env = oracle::banded_stub();
  AutomatonState s({}, 11);
  CampaignConfig cfg;
  const auto trace = la_attack_loop(env, s, cfg);
  ASSERT_EQ(trace.size(), 300u);
  std::optional<std::size_t> hit;
  for (const auto& row : trace) {
    EXPECT_NEAR(std::accumulate(row.probs.begin(), row.probs.end(), 0.0), 1.0, 1e-12);
    if (!hit && row.probs[2] >= 0.9) hit = row.iteration;
  }
  ASSERT_TRUE(hit.has_value());
  EXPECT_LT(*hit, 100u);
  for (std::size_t t = 100; t < trace.size(); ++t) EXPECT_LT(trace[t].mape, 100.0) << t;
}

TEST(LaLoop, WarmupFeedsCleanAndUpdatesNothing) {
  auto env = oracle::banded_stub();
  AutomatonState s({}, 12);
  CampaignConfig cfg;
  cfg.delay = 3;
  cfg.iterations = 10;
  const auto trace = la_attack_loop(env, s, cfg);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_TRUE(trace[t].applied.empty());
    EXPECT_EQ(trace[t].mape, 25.0);
    EXPECT_EQ(trace[t].verdict, Verdict::NoOp);
    for (double p : trace[t].probs) EXPECT_EQ(p, 0.2);
  }
  EXPECT_EQ(trace[0].delta_mape, 0.0);
  for (std::size_t t = 3; t < 10; ++t) {
    EXPECT_EQ(trace[t].applied, trace[t - 3].chosen);
    EXPECT_EQ(trace[t].delta_mape, trace[t].mape - trace[t - 1].mape);
  }
}

TEST(LaLoop, TraceIsSmoothAfterBurnInOnMostSeeds) {
  // Once converged, the fed MAPE sits on the band action; the only large
  // jumps left come from rare off-band draws.
  const double noise = 1.0;
  int smooth = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto env = oracle::banded_stub(noise, seed);
    AutomatonState s({}, seed);
    const auto trace = la_attack_loop(env, s, {});
    double worst = 0.0;
    for (std::size_t t = 101; t < trace.size(); ++t) worst = std::max(worst, std::abs(trace[t].delta_mape));
    smooth += worst <= RewardPolicy{}.jump_cap + 2 * noise;
  }
  EXPECT_GE(smooth, 90);
}

TEST(RlaLoop, SingletonDomainReducesToLa) {
  auto e1 = oracle::banded_stub();
  auto e2 = oracle::banded_stub();
  AutomatonState a({}, 21), b({}, 21);
  CampaignConfig cfg;
  cfg.rla.k_domain = {1};
  const auto la = la_attack_loop(e1, a, cfg);
  const auto rla = rla_attack_loop(e2, b, cfg);
  ASSERT_EQ(la.size(), rla.size());
  for (std::size_t t = 0; t < la.size(); ++t) {
    EXPECT_EQ(la[t].chosen, rla[t].chosen);
    EXPECT_EQ(la[t].probs, rla[t].probs);
  }
}

TEST(RlaLoop, RecordsSetsAndDiffersAcrossSeeds) {
  auto e1 = oracle::banded_stub();
  auto e2 = oracle::banded_stub();
  AutomatonState a({}, 31), b({}, 32);
  CampaignConfig cfg;
  cfg.iterations = 60;
  const auto r1 = rla_attack_loop(e1, a, cfg);
  const auto r2 = rla_attack_loop(e2, b, cfg);
  bool differ = false, multi = false;
  for (std::size_t t = 0; t < r1.size(); ++t) {
    differ = differ || r1[t].chosen != r2[t].chosen;
    multi = multi || r1[t].chosen.size() > 1;
    EXPECT_NEAR(std::accumulate(r1[t].probs.begin(), r1[t].probs.end(), 0.0), 1.0, 1e-12);
  }
  EXPECT_TRUE(differ);
  EXPECT_TRUE(multi);
}

TEST(RlaLoop, EverySelectedActionSharesTheJudgement) {
  oracle::StubEnv env{{0.1, 0.2, 0.3}, {15, 20, 25}, 0.0, 0.0, Rng(0)};
  AutomatonState s(ActionSet{{0.1, 0.2, 0.3}}, 4);
  CampaignConfig cfg;
  cfg.delay = 0;
  cfg.iterations = 1;
  cfg.rla.k_domain = {2};
  const auto trace = rla_attack_loop(env, s, cfg);
  // any two actions sum into the band: both rewarded, third shrinks
  ASSERT_EQ(trace[0].verdict, Verdict::Reward);
  std::size_t missing = 0;
  for (std::size_t i = 0; i < 3; ++i)
    if (std::find(trace[0].applied.begin(), trace[0].applied.end(), s.actions().epsilons[i]) == trace[0].applied.end())
      missing = i;
  for (std::size_t i = 0; i < 3; ++i) {
    if (i == missing) {
      EXPECT_LT(trace[0].probs[i], 1.0 / 3.0);
    }
  }
  EXPECT_NEAR(std::accumulate(trace[0].probs.begin(), trace[0].probs.end(), 0.0), 1.0, 1e-12);
}
