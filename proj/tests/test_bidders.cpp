#include <gtest/gtest.h>

#include <cmath>

#include "dynvcg/bidders.hpp"

using namespace dynvcg;

namespace {

ReportContext ctx(double realized, long episode = 1, int s = 0, int a = 0) {
  ReportContext c;
  c.realized = realized;
  c.episode = episode;
  c.s = s;
  c.a = a;
  return c;
}

}  // namespace

TEST(BidderStrategy, TruthfulEchoesRealizedReward) {
  Rng rng(1);
  const auto b = BidderStrategy::truthful();
  EXPECT_EQ(b.report(ctx(0.37), rng), 0.37);
  EXPECT_EQ(b.report(ctx(0.0), rng), 0.0);
  EXPECT_TRUE(b.is_stationary());
}

TEST(BidderStrategy, ReportsAreAlwaysInUnitInterval) {
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<BidderStrategy> strategies{
      BidderStrategy::scaled(3.0), BidderStrategy::scaled(-1.0), BidderStrategy::shifted(0.7),
      BidderStrategy::shifted(-0.7),
      BidderStrategy::adversarial({{1, 10, 5.0, 0.5, 0.5}}),
      BidderStrategy::by_bids(RewardTable::Constant(2, 2, 0.4))};
  for (const auto& b : strategies) {
    for (int i = 0; i < 1000; ++i) {
      const double r = b.report(ctx(u(rng), 1 + i % 20, i % 2, (i / 2) % 2), rng);
      ASSERT_GE(r, 0.0);
      ASSERT_LE(r, 1.0);
    }
  }
  EXPECT_EQ(BidderStrategy::truthful().report(ctx(std::nan("")), rng), 0.0);
}

TEST(BidderStrategy, ByBidsIgnoresRealization) {
  Rng rng(3);
  RewardTable bids(2, 2);
  bids << 0.1, 0.2, 0.3, 0.4;
  const auto b = BidderStrategy::by_bids(bids);
  EXPECT_EQ(b.report(ctx(0.9, 1, 1, 0), rng), 0.3);
  EXPECT_EQ(b.report(ctx(0.0, 7, 0, 1), rng), 0.2);
  EXPECT_EQ(b.offline_bids(RewardTable::Zero(2, 2)), bids);
}

TEST(BidderStrategy, ScaledAndShiftedOfflineBids) {
  RewardTable means(1, 3);
  means << 0.2, 0.5, 0.9;
  RewardTable scaled(1, 3);
  scaled << 0.4, 1.0, 1.0;
  EXPECT_TRUE(BidderStrategy::scaled(2.0).offline_bids(means).isApprox(scaled));
  RewardTable shifted(1, 3);
  shifted << 0.0, 0.2, 0.6;
  EXPECT_TRUE(BidderStrategy::shifted(-0.3).offline_bids(means).isApprox(shifted));
}

TEST(BidderStrategy, AdversarialWindowOnlyInsideRange) {
  Rng rng(4);
  const auto b = BidderStrategy::adversarial({{3, 5, 2.0, 0.0, 1.0}});
  EXPECT_FALSE(b.is_stationary());
  EXPECT_EQ(b.report(ctx(0.3, 2), rng), 0.3);
  EXPECT_EQ(b.report(ctx(0.3, 3), rng), 0.6);
  EXPECT_EQ(b.report(ctx(0.3, 5), rng), 0.6);
  EXPECT_EQ(b.report(ctx(0.3, 6), rng), 0.3);
}

TEST(BidderStrategy, AdversarialProbabilityIsRespected) {
  Rng rng(5);
  const auto b = BidderStrategy::adversarial({{1, 1, 0.0, 1.0, 0.3}});
  int hits = 0;
  const int N = 100000;
  for (int i = 0; i < N; ++i) hits += b.report(ctx(0.2), rng) == 1.0;
  EXPECT_NEAR(static_cast<double>(hits) / N, 0.3, 0.01);
}

TEST(BidderStrategy, JsonRoundTrip) {
  RewardTable bids(2, 3);
  bids << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  const std::vector<BidderStrategy> strategies{
      BidderStrategy::truthful(), BidderStrategy::by_bids(bids), BidderStrategy::scaled(1.5),
      BidderStrategy::shifted(0.25), BidderStrategy::adversarial({{2, 4, 1.2, 0.1, 0.5}, {8, 9, 0.0, 0.0, 1.0}})};
  for (const auto& b : strategies) {
    const auto doc = b.to_json();
    const auto back = BidderStrategy::from_json(doc, 2, 3);
    EXPECT_EQ(back.kind(), b.kind());
    EXPECT_EQ(back.to_json().dump(), doc.dump());
  }
  EXPECT_EQ(BidderStrategy::from_json("truthful", 2, 3).kind(), StrategyKind::kTruthful);
}

TEST(BidderStrategy, MalformedJsonIsConfigError) {
  EXPECT_THROW(BidderStrategy::from_json({{"kind", "liar"}}, 2, 2), ConfigError);
  EXPECT_THROW(BidderStrategy::from_json({{"kind", "scaled"}, {"factor", "x"}}, 2, 2), ConfigError);
  EXPECT_THROW(BidderStrategy::from_json({{"kind", "by_bids"}, {"bids", {{0.1, 0.2}}}}, 2, 2), ConfigError);
  EXPECT_THROW(BidderStrategy::from_json({{"kind", "by_bids"}, {"bids", {{0.1, 1.2}, {0.0, 0.0}}}}, 2, 2),
               ConfigError);
  nlohmann::json backwards{{"kind", "adversarial_window"},
                           {"windows", {{{"first_episode", 5}, {"last_episode", 2}}}}};
  EXPECT_THROW(BidderStrategy::from_json(backwards, 2, 2), ConfigError);
}
