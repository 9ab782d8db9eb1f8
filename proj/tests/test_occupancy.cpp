#include <gtest/gtest.h>

#include "dynvcg/occupancy.hpp"
#include "oracles.hpp"

using namespace dynvcg;

TEST(Policy, RejectsNonStochasticRows) {
  Eigen::MatrixXd p(2, 2);
  p << 0.5, 0.6, 0.5, 0.5;
  EXPECT_THROW(Policy{p}, std::invalid_argument);
  p << 1.2, -0.2, 0.5, 0.5;
  EXPECT_THROW(Policy{p}, std::invalid_argument);
}

TEST(OccupancyFrom, UniformKernelGivesUniformStateMass) {
  Rng rng(1);
  const auto P = TransitionKernel::uniform(4, 3);
  const Policy pi(oracle::random_policy(4, 3, rng));
  const auto nu = occupancy_from(P, pi).state();
  for (int s = 0; s < 4; ++s) EXPECT_NEAR(nu(s), 0.25, 1e-12);
}

TEST(OccupancyFrom, SingleStateRhoIsPolicy) {
  const auto P = TransitionKernel::uniform(1, 3);
  Eigen::MatrixXd p(1, 3);
  p << 0.2, 0.3, 0.5;
  const auto q = occupancy_from(P, Policy(p));
  EXPECT_NEAR(q.state()(0), 1.0, 1e-15);
  EXPECT_LT((q.state_action() - p).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(OccupancyFrom, MatchesPowerIterationOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto P = oracle::random_kernel(3, 3, 0.1, rng);
    const Eigen::MatrixXd pi = oracle::random_policy(3, 3, rng);
    const auto q = occupancy_from(P, Policy(pi));
    const Eigen::VectorXd nu = oracle::power_stationary(oracle::chain(P, pi), 500);
    EXPECT_LT((q.state() - nu).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((q.matrix() - oracle::occupancy(P, pi)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(OccupancyFrom, SatisfiesPolytopeIdentities) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto P = oracle::random_kernel(4, 2, 0.05, rng);
    const auto q = occupancy_from(P, Policy(oracle::random_policy(4, 2, rng)));
    EXPECT_NEAR(q.total_mass(), 1.0, 1e-9);
    EXPECT_LT(q.flow_residual(), 1e-9);
    EXPECT_GE(q.min_entry(), 0.0);
    // the three views agree
    EXPECT_NEAR(q.state_action().sum(), q.total_mass(), 1e-12);
    EXPECT_NEAR(q.state().sum(), q.total_mass(), 1e-12);
  }
}

TEST(Induce, UniformOccupancyInducesUniformPair) {
  const auto pair = induce(OccupancyMeasure::uniform(3, 2));
  EXPECT_LT((pair.policy.matrix().array() - 0.5).abs().maxCoeff(), 1e-15);
  EXPECT_LT((pair.kernel.matrix().array() - 1.0 / 3).abs().maxCoeff(), 1e-15);
}

TEST(Induce, RoundTripRecoversKernelAndPolicy) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto P = oracle::random_kernel(3, 4, 0.1, rng);
    const Policy pi(oracle::random_policy(3, 4, rng));
    const auto q = occupancy_from(P, pi);
    const auto pair = induce(q);
    EXPECT_LT((pair.kernel.matrix() - P.matrix()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((pair.policy.matrix() - pi.matrix()).cwiseAbs().maxCoeff(), 1e-9);
    const auto again = occupancy_from(P, pair.policy);
    EXPECT_LT((again.matrix() - q.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Induce, ZeroMassRowsFallBackToUniform) {
  // state 1 carries no mass at all; (0, 1) has no mass either
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 2);
  m(0, 0) = 1.0;
  const auto pair = induce(OccupancyMeasure(2, 2, m));
  EXPECT_DOUBLE_EQ(pair.policy(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(pair.policy(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(pair.policy(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(pair.kernel(0, 1, 0), 0.5);
  EXPECT_DOUBLE_EQ(pair.kernel(0, 0, 0), 1.0);
}

TEST(Payoff, ConstantAndZeroRewards) {
  Rng rng(5);
  const auto P = oracle::random_kernel(3, 2, 0.1, rng);
  const auto q = occupancy_from(P, Policy(oracle::random_policy(3, 2, rng)));
  EXPECT_NEAR(payoff(q, RewardTable::Constant(3, 2, 0.7)), 0.7, 1e-12);
  EXPECT_EQ(payoff(q, RewardTable::Zero(3, 2)), 0.0);
}

TEST(Payoff, IsLinear) {
  Rng rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto P = oracle::random_kernel(3, 3, 0.1, rng);
    const auto q = occupancy_from(P, Policy(oracle::random_policy(3, 3, rng)));
    const RewardTable r1 = RewardTable::NullaryExpr(3, 3, [&] { return u(rng); });
    const RewardTable r2 = RewardTable::NullaryExpr(3, 3, [&] { return u(rng); });
    const double a = 2.0 * u(rng), b = 3.0 * u(rng);
    EXPECT_NEAR(payoff(q, a * r1 + b * r2), a * payoff(q, r1) + b * payoff(q, r2), 1e-12);
  }
}

TEST(Payoff, MatchesSimulatedLongRunAverage) {
  Rng rng(7);
  GeneratorConfig g;
  g.num_states = 2;
  g.num_actions = 2;
  g.num_bidders = 1;
  g.alpha = 0.2;
  const MdpModel m = generate_model(g, 12);
  const Policy pi = Policy::deterministic({1, 0}, 2);
  const double exact = payoff(occupancy_from(m.kernel, pi), m.total_rewards());
  SimState sim{1, 0, Rng(99)};
  double total = 0.0;
  const int T = 1000000;
  for (int t = 0; t < T; ++t) {
    const auto out = step(m, sim, pi.sample(sim.state, rng));
    for (double r : out.rewards) total += r;
  }
  EXPECT_NEAR(total / T, exact, 0.01);
}

TEST(StationaryDistribution, SingularChainThrows) {
  // two closed classes: no unique stationary law
  const Eigen::MatrixXd chain = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(stationary_distribution(chain), std::runtime_error);
}

TEST(MixingContraction, IdenticalInputsGiveZero) {
  Rng rng(8);
  const auto P = oracle::random_kernel(3, 2, 0.1, rng);
  const Policy pi(oracle::random_policy(3, 2, rng));
  const Eigen::VectorXd nu = oracle::random_distribution(3, rng);
  const auto c = mixing_contraction(nu, nu, state_kernel(P, pi), 0.1);
  EXPECT_EQ(c.measured, 0.0);
  EXPECT_EQ(c.bound, 0.0);
}

TEST(MixingContraction, UniformChainReachesStationarityInOneStep) {
  Rng rng(9);
  const Eigen::MatrixXd chain = Eigen::MatrixXd::Constant(4, 4, 0.25);
  const auto c = mixing_contraction(oracle::random_distribution(4, rng), oracle::random_distribution(4, rng),
                                    chain, 0.25);
  EXPECT_NEAR(c.measured, 0.0, 1e-15);
}

TEST(MixingContraction, RandomTrialsRespectBound) {
  Rng rng(10);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto P = oracle::random_kernel(3, 3, 0.1, rng);
    const Policy pi(oracle::random_policy(3, 3, rng));
    const auto c = mixing_contraction(oracle::random_distribution(3, rng), oracle::random_distribution(3, rng),
                                      state_kernel(P, pi), 0.1);
    ASSERT_LE(c.measured, c.bound + 1e-15) << "trial " << trial;
  }
}
