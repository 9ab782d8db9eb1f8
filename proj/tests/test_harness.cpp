#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dynvcg/export.hpp"
#include "dynvcg/harness.hpp"
#include "oracles.hpp"

using namespace dynvcg;
namespace fs = std::filesystem;

namespace {

nlohmann::json small_config() {
  return {{"model",
           {{"generator", {{"S", 2}, {"A", 2}, {"n", 2}, {"alpha", 0.25}, {"family", "bernoulli-scaled"}}},
            {"seed", 3}}},
          {"learner", {{"delta", 0.1}, {"zeta", 0.05}}},
          {"horizon", 4000},
          {"seeds", {1, 2}}};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dynvcg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DYNVCG_CLI_PATH) + " --log-level off " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(ExperimentConfig, DefaultsAndGeneratedModel) {
  auto doc = small_config();
  doc.erase("seeds");
  const auto c = experiment_from_json(doc);
  EXPECT_EQ(c.model.num_states, 2);
  EXPECT_EQ(c.learner.num_bidders, 2);
  EXPECT_EQ(c.learner.alpha, 0.25);
  EXPECT_EQ(c.seeds, default_seeds(20));
  EXPECT_EQ(c.bidders.size(), 2u);
  EXPECT_FALSE(c.calibrated_delta);
}

TEST(ExperimentConfig, DeltaIsCalibratedWhenAbsent) {
  auto doc = small_config();
  doc["learner"].erase("delta");
  doc["learner"]["epsilon"] = 0.05;
  const auto c = experiment_from_json(doc);
  EXPECT_TRUE(c.calibrated_delta);
  const auto cal = calibrate_delta(c.model.kernel, c.model.total_rewards(), 0.05);
  EXPECT_EQ(c.learner.delta, cal.delta);
}

TEST(ExperimentConfig, RejectsMalformedDocuments) {
  auto doc = small_config();
  doc.erase("model");
  EXPECT_THROW(experiment_from_json(doc), ConfigError);
  doc = small_config();
  doc["bidders"] = {"truthful"};
  EXPECT_THROW(experiment_from_json(doc), ConfigError);
  doc = small_config();
  doc.erase("horizon");
  EXPECT_THROW(experiment_from_json(doc), ConfigError);
  doc = small_config();
  doc["learner"]["delta"] = 0.5;
  EXPECT_THROW(experiment_from_json(doc), ConfigError);
  doc = small_config();
  doc["output"] = {{"format", "xml"}};
  EXPECT_THROW(experiment_from_json(doc), ConfigError);
  doc = small_config();
  doc["seeds"] = nlohmann::json::array();
  EXPECT_THROW(experiment_from_json(doc), ConfigError);
  doc = small_config();
  doc["model"]["generator"]["alpha"] = 0.9;
  EXPECT_THROW(experiment_from_json(doc), ConfigError);
  EXPECT_THROW(load_experiment("/nonexistent/config.json"), ConfigError);
}

TEST(ExperimentConfig, HashIgnoresSeedsAndOutput) {
  auto doc = small_config();
  const auto a = config_hash(experiment_from_json(doc));
  doc["seeds"] = {7};
  doc["output"] = {{"dir", "elsewhere"}};
  EXPECT_EQ(config_hash(experiment_from_json(doc)), a);
  doc["horizon"] = 4001;
  EXPECT_NE(config_hash(experiment_from_json(doc)), a);
  EXPECT_EQ(a.size(), 16u);
}

TEST(RunOnline, RegretsAddUpAndRoundsAreConsistent) {
  const auto c = experiment_from_json(small_config());
  const auto bench = compute_benchmark(c.model);
  long rounds = 0;
  long mixing_charged = 0;
  double max_residual = 0.0;
  const auto run = run_seed(c, bench, 5, [&](const RoundRecord& r) {
    ++rounds;
    EXPECT_EQ(r.t, rounds);
    if (r.phase == Phase::kMixing)
      for (double p : r.payments) mixing_charged += p != 0.0;
    double total = r.seller_utility;
    for (double u : r.bidder_utilities) total += u;
    max_residual = std::max(max_residual, std::abs(total - r.welfare));
  });
  EXPECT_EQ(rounds, 4000);
  EXPECT_EQ(run.rounds, 4000);
  EXPECT_EQ(mixing_charged, 0);
  EXPECT_LT(max_residual, 1e-12);
  ASSERT_FALSE(run.regrets.empty());
  EXPECT_EQ(run.regrets.back().t, 4000);
  for (const auto& p : run.regrets) EXPECT_LE(std::abs(p.welfare - p.seller - p.bidders), 1e-9) << p.t;
  // powers of two are checkpoints
  for (long t : {1L, 2L, 1024L, 2048L}) {
    EXPECT_TRUE(std::any_of(run.regrets.begin(), run.regrets.end(), [t](const RegretPoint& p) { return p.t == t; }));
  }
  // the last diagnostics entry belongs to the unfinished episode
  ASSERT_FALSE(run.episodes.empty());
  EXPECT_FALSE(run.episodes.back().complete);
  for (std::size_t i = 0; i + 1 < run.episodes.size(); ++i) EXPECT_TRUE(run.episodes[i].complete);
}

TEST(RunOnline, SameSeedSameTrajectory) {
  const auto c = experiment_from_json(small_config());
  const auto bench = compute_benchmark(c.model);
  std::vector<int> a_actions, b_actions;
  const auto a = run_seed(c, bench, 9, [&](const RoundRecord& r) { a_actions.push_back(r.a); });
  const auto b = run_seed(c, bench, 9, [&](const RoundRecord& r) { b_actions.push_back(r.a); });
  EXPECT_EQ(a_actions, b_actions);
  EXPECT_EQ(a.welfare_total, b.welfare_total);
  const auto other = run_seed(c, bench, 10);
  EXPECT_NE(other.welfare_total, a.welfare_total);
}

TEST(RunOnline, EpisodeBudgetStopsAtBoundary) {
  auto doc = small_config();
  doc.erase("horizon");
  doc["episodes"] = 3;
  const auto c = experiment_from_json(doc);
  const auto run = run_seed(c, compute_benchmark(c.model), 1);
  long expected = 0;
  for (long k = 1; k <= 3; ++k) expected += episode_lengths(k, 0.25, 2, 2, 0.1, 0.05).total();
  EXPECT_EQ(run.rounds, expected);
  ASSERT_EQ(run.episodes.size(), 3u);
  EXPECT_EQ(run.episodes[2].start + run.episodes[2].schedule.total() - 1, expected);
}

TEST(RunOnline, ClairvoyantSellerTracksBenchmark) {
  const auto c = experiment_from_json(small_config());
  const auto bench = compute_benchmark(c.model);
  ClairvoyantSeller seller(bench.mechanism);
  RunOptions options;
  options.horizon = 50000;
  const auto run = run_online(c.model, seller, c.bidders, bench, 3, options);
  const double T = 50000.0;
  const double bound = 3.0 * (2 + c.model.c_max) / std::sqrt(T);
  const auto& last = run.regrets.back();
  EXPECT_LE(std::abs(last.welfare) / T, bound);
  EXPECT_LE(std::abs(last.seller) / T, bound);
  EXPECT_LE(std::abs(last.bidders) / T, bound);
}

TEST(Regrets, MeanAndSlope) {
  RunResult a, b;
  for (long t : {10L, 100L, 1000L}) {
    a.regrets.push_back({t, 2.0 * std::sqrt(double(t)), 1.0, 1.0});
    b.regrets.push_back({t, 4.0 * std::sqrt(double(t)), 3.0, 1.0});
  }
  b.regrets.push_back({2000, 1.0, 1.0, 0.0});
  const auto mean = mean_regrets({a, b});
  ASSERT_EQ(mean.size(), 3u);
  EXPECT_DOUBLE_EQ(mean[1].welfare, 3.0 * 10.0);
  EXPECT_DOUBLE_EQ(mean[1].seller, 2.0);
  std::vector<RegretPoint> curve;
  for (long t = 1; t <= 1 << 16; t *= 2) curve.push_back({t, 5.0 * std::pow(double(t), 0.6), 0.0, 0.0});
  EXPECT_NEAR(loglog_slope(curve), 0.6, 1e-12);
  EXPECT_TRUE(std::isnan(loglog_slope({})));
}

TEST(RunExperiment, WritesReproducibleOutputs) {
  const auto dir = scratch("experiment");
  auto doc = small_config();
  doc["output"] = {{"dir", (dir / "a").string()}};
  const auto first = run_experiment(experiment_from_json(doc), true);
  doc["output"] = {{"dir", (dir / "b").string()}};
  run_experiment(experiment_from_json(doc), true);
  for (const char* f : {"rounds_seed1.csv", "rounds_seed2.csv", "regrets.csv", "summary.json"}) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
  }
  EXPECT_EQ(slurp(dir / "a" / "rounds_seed1.csv"), slurp(dir / "b" / "rounds_seed1.csv"));
  EXPECT_EQ(slurp(dir / "a" / "regrets.csv"), slurp(dir / "b" / "regrets.csv"));

  std::ifstream rounds(dir / "a" / "rounds_seed1.csv");
  std::string header;
  std::getline(rounds, header);
  EXPECT_EQ(header, "t,k,phase,s,a,r_0,r_1,r_2,b_1,b_2,p_1,p_2,u_0,u_1,u_2,R");
  long lines = 0;
  for (std::string line; std::getline(rounds, line);) ++lines;
  EXPECT_EQ(lines, 4000);

  const auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
  EXPECT_EQ(summary.at("config_hash"), first.config_hash);
  EXPECT_EQ(summary.at("final_regrets").size(), 2u);
  EXPECT_FALSE(summary.at("episode_schedule").empty());
  fs::remove_all(dir);
}

TEST(RunExperiment, JsonFormat) {
  const auto dir = scratch("json");
  auto doc = small_config();
  doc["horizon"] = 300;
  doc["output"] = {{"dir", dir.string()}, {"format", "json"}};
  run_experiment(experiment_from_json(doc), true);
  const auto rounds = nlohmann::json::parse(slurp(dir / "rounds_seed2.json"));
  ASSERT_EQ(rounds.size(), 300u);
  EXPECT_EQ(rounds[0].at("t"), 1);
  EXPECT_TRUE(rounds[0].at("phase").is_string());
  const auto regrets = nlohmann::json::parse(slurp(dir / "regrets.json"));
  EXPECT_EQ(regrets.back().at("seed"), "mean");
  fs::remove_all(dir);
}

TEST(RunOffline, EmpiricalAveragesApproachExact) {
  GeneratorConfig g;
  g.num_states = 3;
  g.num_actions = 3;
  g.num_bidders = 2;
  g.alpha = 0.2;
  const MdpModel m = generate_model(g, 12);
  const auto report = run_offline(m, std::nullopt, 200000, 4);
  EXPECT_LE(report.identity.residual(), 1e-8);
  EXPECT_NEAR(report.empirical.welfare, report.exact.welfare, 0.02);
  EXPECT_NEAR(report.empirical.seller, report.exact.seller, 0.03);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(report.empirical.bidders[i], report.exact.bidders[i], 0.02);
    const double expected = payoff(report.mechanism.occupancy, report.mechanism.payments[i]);
    EXPECT_NEAR(report.empirical_payments[i], expected, 0.02);
  }
}

TEST(DeviationGain, OneValuePerHorizon) {
  auto doc = small_config();
  doc["seeds"] = {1};
  const auto c = experiment_from_json(doc);
  const auto gains = deviation_gain(c, 0, BidderStrategy::scaled(1.0), {100, 1000});
  ASSERT_EQ(gains.size(), 2u);
  // an identical "deviation" replays the same trajectory
  EXPECT_EQ(gains[0], 0.0);
  EXPECT_EQ(gains[1], 0.0);
  EXPECT_THROW(deviation_gain(c, 5, BidderStrategy::truthful(), {10}), ConfigError);
}

TEST(Export, NumbersRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, 1e-17, 123456.789, 0.0}) EXPECT_EQ(std::stod(format_number(x)), x);
  EXPECT_EQ(format_number(2.0), "2");
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const auto model = (dir / "model.json").string();
  EXPECT_EQ(run_cli("generate-model --states 3 --actions 2 --bidders 2 --alpha 0.2 --seed 4 --out " + model), 0);
  ASSERT_TRUE(fs::exists(model));
  EXPECT_EQ(run_cli("offline-vcg --model " + model + " --out " + (dir / "offline.json").string()), 0);
  const auto offline = nlohmann::json::parse(slurp(dir / "offline.json"));
  EXPECT_LE(offline.at("identity_residual").get<double>(), 1e-8);
  EXPECT_EQ(run_cli("calibrate-delta --model " + model + " --epsilon 0.05 --out " + (dir / "cal.json").string()), 0);
  EXPECT_TRUE(nlohmann::json::parse(slurp(dir / "cal.json")).at("gap_met").get<bool>());

  nlohmann::json cfg = {{"model", {{"file", "model.json"}}}, {"learner", {{"delta", 0.05}}}, {"horizon", 500}};
  std::ofstream(dir / "config.json") << cfg.dump();
  EXPECT_EQ(run_cli("simulate --config " + (dir / "config.json").string() + " --seeds 2 --out " +
                    (dir / "out").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "out" / "regrets.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "rounds_seed2.csv"));

  // configuration errors
  EXPECT_EQ(run_cli("simulate"), 2);
  EXPECT_EQ(run_cli("no-such-command"), 2);
  EXPECT_EQ(run_cli("generate-model --states 4 --alpha 0.3 --out " + (dir / "bad.json").string()), 2);
  std::ofstream(dir / "broken.json") << "{\"model\": ";
  EXPECT_EQ(run_cli("simulate --config " + (dir / "broken.json").string()), 2);
  EXPECT_EQ(run_cli("calibrate-delta --model " + model + " --epsilon -1"), 2);
  // runtime error: output directory cannot be created
  std::ofstream(dir / "blocker") << "x";
  EXPECT_EQ(run_cli("simulate --config " + (dir / "config.json").string() + " --seeds 1 --out " +
                    (dir / "blocker" / "sub").string()),
            3);
  fs::remove_all(dir);
}
