#include <gtest/gtest.h>

#include <cmath>

#include "dynvcg/online_vcg.hpp"
#include "oracles.hpp"

using namespace dynvcg;

namespace {

MdpModel model(int S, int A, int n, double alpha, std::uint64_t seed) {
  GeneratorConfig g;
  g.num_states = S;
  g.num_actions = A;
  g.num_bidders = n;
  g.alpha = alpha;
  g.family = RewardFamily::kBernoulliScaled;
  return generate_model(g, seed);
}

LearnerConfig config_for(const MdpModel& m, double delta) {
  LearnerConfig c;
  c.num_states = m.num_states;
  c.num_actions = m.num_actions;
  c.num_bidders = m.num_bidders;
  c.alpha = m.alpha;
  c.c_max = m.c_max;
  c.delta = delta;
  c.zeta = 0.05;
  return c;
}

// Plays truthful bidders until the current episode is complete.
void play_episode(const MdpModel& m, OnlineLearner& learner, SimState& sim, Rng& seller_rng) {
  while (!learner.episode_complete()) {
    const int s = sim.state;
    const auto d = learner.act(s, seller_rng);
    const auto out = step(m, sim, d.action);
    std::vector<double> reports(out.rewards.begin() + 1, out.rewards.end());
    learner.observe(s, d.action, out.next_state, out.rewards[0], reports);
  }
}

}  // namespace

TEST(EpisodeLengths, FirstEpisodeClosedForm) {
  const auto e = episode_lengths(1, 0.25, 2, 2, 0.1, 0.05);
  EXPECT_EQ(e.mixing, 1);
  EXPECT_EQ(e.stationary, static_cast<long>(std::ceil(4.0 * std::log(4.0 / 0.05) / (0.25 * 0.1))));
}

TEST(EpisodeLengths, GrowWithEpisode) {
  const double alpha = 0.2, delta = 0.05, zeta = 0.05;
  long previous = 0;
  for (long k = 1; k <= 100; ++k) {
    const auto e = episode_lengths(k, alpha, 3, 3, delta, zeta);
    EXPECT_EQ(e.mixing, std::max(1L, static_cast<long>(std::ceil(std::log(double(k)) / (alpha * 3)))));
    EXPECT_GE(e.stationary, previous);
    previous = e.stationary;
  }
  // sqrt(k) takes over from 4 past k = 16
  const auto e25 = episode_lengths(25, alpha, 3, 3, delta, zeta);
  EXPECT_EQ(e25.stationary, static_cast<long>(std::ceil(5.0 * std::log(9.0 * 25 / zeta) / (alpha * delta))));
}

TEST(Radii, MatchFormulas) {
  const double L = std::log(9.0 / 0.05);
  EXPECT_DOUBLE_EQ(kernel_radius(0.3, 11, L), 2.0 * std::sqrt(0.3 * L / 10.0) + 14.0 * L / 30.0);
  // zero and one visit share the max(1, N-1) denominator
  EXPECT_DOUBLE_EQ(kernel_radius(0.0, 0, L), 14.0 * L / 3.0);
  EXPECT_DOUBLE_EQ(kernel_radius(0.0, 1, L), kernel_radius(0.0, 2, L));
  EXPECT_DOUBLE_EQ(reward_radius(0, L), std::sqrt(2.0 * L));
  EXPECT_DOUBLE_EQ(reward_radius(50, L), std::sqrt(2.0 * L / 50.0));
}

TEST(LearnerConfig, ValidationRejectsBadValues) {
  const MdpModel m = model(3, 3, 2, 0.2, 1);
  LearnerConfig c = config_for(m, 0.05);
  EXPECT_NO_THROW(c.validate());
  c.delta = 0.2;  // > 1/(SA)
  EXPECT_THROW(c.validate(), ConfigError);
  c = config_for(m, 0.05);
  c.zeta = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = config_for(m, 0.05);
  c.alpha = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(payment_variant_from_string("both"), ConfigError);
}

TEST(OnlineLearner, InitialStateIsUniformWithUnitPayments) {
  const MdpModel m = model(3, 2, 2, 0.2, 2);
  OnlineLearner learner(config_for(m, 0.05));
  const auto& st = learner.state();
  EXPECT_EQ(st.episode, 1);
  EXPECT_EQ(st.phase, Phase::kMixing);
  EXPECT_TRUE(st.policy.matrix().isApproxToConstant(0.5));
  for (const auto& p : st.payments_seller_favorable) EXPECT_TRUE(p.isApproxToConstant(1.0));
  for (const auto& p : st.payments_bidder_favorable) EXPECT_TRUE(p.isApproxToConstant(1.0));
}

TEST(OnlineLearner, MixingRoundsAreFreeStationaryRoundsCharge) {
  const MdpModel m = model(2, 2, 1, 0.25, 3);
  LearnerConfig c = config_for(m, 0.1);
  OnlineLearner learner(c);
  Rng rng(1);
  const long d = learner.state().schedule.mixing;
  const long l = learner.state().schedule.stationary;
  for (long t = 0; t < d; ++t) {
    const auto dec = learner.act(0, rng);
    EXPECT_EQ(dec.phase, Phase::kMixing);
    EXPECT_EQ(dec.charges[0], 0.0);
    learner.observe(0, dec.action, 0, 0.5, std::vector<double>{0.5});
  }
  for (long t = 0; t < l; ++t) {
    EXPECT_FALSE(learner.episode_complete());
    const auto dec = learner.act(1, rng);
    EXPECT_EQ(dec.phase, Phase::kStationary);
    EXPECT_EQ(dec.charges[0], 1.0);
    learner.observe(1, dec.action, 1, 0.5, std::vector<double>{0.5});
  }
  EXPECT_TRUE(learner.episode_complete());
  EXPECT_EQ(learner.state().rounds, d + l);
}

TEST(OnlineLearner, EndEpisodeBeforeCompletionThrows) {
  const MdpModel m = model(2, 2, 1, 0.25, 3);
  OnlineLearner learner(config_for(m, 0.1));
  EXPECT_THROW(learner.end_episode(), std::logic_error);
}

TEST(OnlineLearner, UpdateProducesConsistentEstimates) {
  const MdpModel m = model(3, 3, 2, 0.2, 4);
  const double delta = 0.05;
  OnlineLearner learner(config_for(m, delta));
  SimState sim{1, 0, Rng(10)};
  Rng seller_rng(11);
  for (int k = 1; k <= 3; ++k) {
    play_episode(m, learner, sim, seller_rng);
    const long length = learner.state().schedule.total();
    const long start = learner.state().episode_start;
    learner.end_episode();
    const auto& st = learner.state();
    EXPECT_EQ(st.episode, k + 1);
    EXPECT_EQ(st.episode_start, start + length);
    EXPECT_EQ(st.phase, Phase::kMixing);
    EXPECT_EQ(st.episode_visits.sum(), 0);
    EXPECT_EQ(st.visits.sum(), st.rounds);
    EXPECT_GE(st.policy.matrix().minCoeff(), delta - 1e-9);
    for (int i = 0; i <= 2; ++i) {
      EXPECT_TRUE(((st.reward_ucb[i] - st.reward_lcb[i]).array() >= 0.0).all());
      EXPECT_LE(st.reward_ucb[i].maxCoeff(), m.reward_cap(i));
      EXPECT_GE(st.reward_lcb[i].minCoeff(), 0.0);
    }
    for (int i = 0; i < 2; ++i) {
      EXPECT_GE((st.payments_seller_favorable[i] - st.payments_bidder_favorable[i]).minCoeff(), -1e-9);
    }
    // each empirical row is a distribution once the pair was visited
    for (int r = 0; r < 9; ++r) {
      if (st.visits(r / 3, r % 3) > 0) {
        EXPECT_NEAR(st.empirical_kernel.row(r).sum(), 1.0, 1e-12);
      }
    }
  }
}

TEST(OnlineLearner, ConfidenceSetsShrinkAroundTruth) {
  // A single-state model where every action is visited often.
  MdpModel m = model(1, 2, 1, 1.0, 5);
  LearnerConfig c = config_for(m, 0.25);
  OnlineLearner learner(c);
  SimState sim{1, 0, Rng(3)};
  Rng seller_rng(4);
  for (int k = 0; k < 10; ++k) {
    play_episode(m, learner, sim, seller_rng);
    learner.end_episode();
  }
  const auto& st = learner.state();
  for (int i = 0; i <= 1; ++i) {
    for (int a = 0; a < 2; ++a) {
      EXPECT_LE(st.reward_lcb[i](0, a), m.reward_means[i](0, a));
      EXPECT_GE(st.reward_ucb[i](0, a), m.reward_means[i](0, a));
      EXPECT_LT(st.reward_ucb[i](0, a) - st.reward_lcb[i](0, a), 0.6 * m.reward_cap(i));
    }
  }
}

TEST(OnlineLearner, ReportsAreClippedAndCounted) {
  const MdpModel m = model(2, 2, 2, 0.25, 6);
  OnlineLearner learner(config_for(m, 0.1));
  learner.observe(0, 0, 1, 5.0, std::vector<double>{1.5, -0.2});
  learner.observe(0, 0, 1, 0.1, std::vector<double>{std::nan(""), 0.3});
  const auto& st = learner.state();
  EXPECT_EQ(st.clipped_reports, 3);
  EXPECT_DOUBLE_EQ(st.reward_sums[0](0, 0), 1.1);
  EXPECT_DOUBLE_EQ(st.reward_sums[1](0, 0), 1.0);
  EXPECT_DOUBLE_EQ(st.reward_sums[2](0, 0), 0.3);
  EXPECT_THROW(learner.observe(0, 0, 1, 0.0, std::vector<double>{0.1}), std::invalid_argument);
}

TEST(OnlineLearner, CheckpointResumesIdentically) {
  const MdpModel m = model(3, 2, 2, 0.2, 7);
  OnlineLearner a(config_for(m, 0.05));
  SimState sim{1, 0, Rng(20)};
  Rng rng(21);
  play_episode(m, a, sim, rng);
  a.end_episode();
  for (int i = 0; i < 37; ++i) {
    const int s = sim.state;
    const auto d = a.act(s, rng);
    const auto out = step(m, sim, d.action);
    a.observe(s, d.action, out.next_state, out.rewards[0], std::vector<double>(out.rewards.begin() + 1, out.rewards.end()));
  }
  const auto doc = a.checkpoint();
  OnlineLearner b = OnlineLearner::restore(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(b.checkpoint().dump(), doc.dump());

  SimState sim_b = sim;
  Rng rng_b = rng;
  for (int t = 0; t < 3000; ++t) {
    const int s = sim.state;
    const auto da = a.act(s, rng);
    const auto db = b.act(sim_b.state, rng_b);
    ASSERT_EQ(da.action, db.action);
    ASSERT_EQ(da.charges, db.charges);
    const auto oa = step(m, sim, da.action);
    const auto ob = step(m, sim_b, db.action);
    a.observe(s, da.action, oa.next_state, oa.rewards[0], std::vector<double>(oa.rewards.begin() + 1, oa.rewards.end()));
    b.observe(s, db.action, ob.next_state, ob.rewards[0], std::vector<double>(ob.rewards.begin() + 1, ob.rewards.end()));
    if (a.episode_complete()) {
      a.end_episode();
      b.end_episode();
    }
  }
  EXPECT_EQ(a.checkpoint().dump(), b.checkpoint().dump());
}

TEST(OnlineLearner, MalformedCheckpointIsConfigError) {
  const MdpModel m = model(2, 2, 1, 0.25, 8);
  auto doc = OnlineLearner(config_for(m, 0.1)).checkpoint();
  auto bad = doc;
  bad["visits"][0].erase(0);
  EXPECT_THROW(OnlineLearner::restore(bad), ConfigError);
  bad = doc;
  bad["phase"] = "warmup";
  EXPECT_THROW(OnlineLearner::restore(bad), ConfigError);
  bad = doc;
  bad.erase("band_lower");
  EXPECT_THROW(OnlineLearner::restore(bad), ConfigError);
}

TEST(OnlineLearner, BidderFavorableVariantChargesItsTables) {
  const MdpModel m = model(2, 2, 1, 0.25, 9);
  LearnerConfig c = config_for(m, 0.1);
  c.variant = PaymentVariant::kBidderFavorable;
  OnlineLearner learner(c);
  SimState sim{1, 0, Rng(1)};
  Rng rng(2);
  play_episode(m, learner, sim, rng);
  learner.end_episode();
  EXPECT_EQ(&learner.active_payments(), &learner.state().payments_bidder_favorable);
}
