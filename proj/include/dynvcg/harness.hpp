#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dynvcg/bidders.hpp"
#include "dynvcg/mdp.hpp"
#include "dynvcg/offline_vcg.hpp"
#include "dynvcg/online_vcg.hpp"
#include "json.hpp"

namespace dynvcg {

/// Everything needed to run a batch of seeded simulations. Built from a JSON
/// file by `load_experiment`; see README for the layout.
struct ExperimentConfig {
  MdpModel model;
  LearnerConfig learner;
  bool calibrated_delta = false;  // delta came from calibrate_delta
  std::vector<BidderStrategy> bidders;
  long horizon = 0;   // T; 0 means "until the episode budget is spent"
  long episodes = 0;  // K; 0 means no episode budget
  std::vector<std::uint64_t> seeds;
  std::vector<long> checkpoints;  // extra regret checkpoints
  std::string output_dir = "out";
  std::string format = "csv";
  bool write_rounds = true;
  nlohmann::json source;  // the document the config was built from
};

/// `base_dir` resolves a relative model file path.
ExperimentConfig experiment_from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
ExperimentConfig load_experiment(const std::string& path);

/// FNV-1a over the canonical JSON of the config, ignoring seeds and output
/// settings, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Seeds 1..count.
std::vector<std::uint64_t> default_seeds(int count = 20);

struct RoundRecord {
  long t = 0;
  long episode = 0;
  Phase phase = Phase::kMixing;
  int s = 0;
  int a = 0;
  std::vector<double> rewards;   // realized r_0..r_n
  std::vector<double> reports;   // b_1..b_n
  std::vector<double> payments;  // p_1..p_n charged
  double seller_utility = 0.0;   // r_0 + sum p_i
  std::vector<double> bidder_utilities;  // r_i - p_i
  double welfare = 0.0;          // sum of realized rewards
};

using RoundSink = std::function<void(const RoundRecord&)>;

/// Offline VCG on the true model with truthful bids; the per-round values
/// every regret is measured against.
struct Benchmark {
  Mechanism mechanism;
  Utilities utilities;
  double bidders_total() const;
};

Benchmark compute_benchmark(const MdpModel& model);

struct RegretPoint {
  long t = 0;
  double welfare = 0.0;  // Reg_SW
  double seller = 0.0;   // Reg_SELL
  double bidders = 0.0;  // Reg_BID
};

struct EpisodeDiagnostics {
  long episode = 0;
  long start = 0;
  EpisodeSchedule schedule;
  bool complete = false;  // the run reached the episode's last round
  int unvisited_pairs = 0;
  bool kernel_in_band = true;
  bool rewards_in_bounds = true;  // every true mean inside [LCB, UCB]
  double min_payment_gap = 0.0;   // min over i, s, a of p-hat - p-check
  double min_policy_entry = 0.0;  // of the policy computed for the next episode
};

struct RunOptions {
  long horizon = 0;
  long max_episodes = 0;
  std::vector<long> extra_checkpoints;
  RoundSink sink;
};

struct RunResult {
  std::uint64_t seed = 0;
  long rounds = 0;
  std::vector<RegretPoint> regrets;
  std::vector<EpisodeDiagnostics> episodes;
  std::vector<double> bidder_utility_totals;  // sum_t u_i^t
  double seller_utility_total = 0.0;
  double welfare_total = 0.0;
  double seed_runtime_seconds = 0.0;
};

/// Plays (pi*, p*) from round 1; the zero-regret reference.
class ClairvoyantSeller : public Seller {
 public:
  explicit ClairvoyantSeller(Mechanism mechanism) : mechanism_(std::move(mechanism)) {}
  RoundDecision act(int s, Rng& rng) override;
  void observe(int, int, int, double, std::span<const double>) override {}

 private:
  Mechanism mechanism_;
};

/// Protocol loop for one seed: act, environment step, bidder reports,
/// observe, episode transition. Stops at `horizon` rounds or once
/// `max_episodes` episodes are complete, whichever comes first (0 disables a
/// limit; both 0 runs nothing). Diagnostics are recorded when the seller is an
/// OnlineLearner.
RunResult run_online(const MdpModel& model, Seller& seller, const std::vector<BidderStrategy>& bidders,
                     const Benchmark& benchmark, std::uint64_t seed, const RunOptions& options);

/// Builds the learner from the config and runs one seed.
RunResult run_seed(const ExperimentConfig& config, const Benchmark& benchmark, std::uint64_t seed,
                   const RoundSink& sink = {});

struct ExperimentResult {
  std::string config_hash;
  Benchmark benchmark;
  std::vector<RunResult> runs;
  std::vector<RegretPoint> mean_regrets;  // over seeds, at checkpoints shared by all runs
  std::vector<EpisodeSchedule> schedule;  // realized episode lengths
};

/// Runs every seed (in parallel across hardware threads) and writes the
/// configured outputs when `write` is set.
ExperimentResult run_experiment(const ExperimentConfig& config, bool write = true);

std::vector<RegretPoint> mean_regrets(const std::vector<RunResult>& runs);

/// Least-squares slope of log Reg_SW against log t over checkpoints in
/// [t_max / 10, t_max] with positive regret; NaN when fewer than two points.
double loglog_slope(const std::vector<RegretPoint>& curve);

struct OfflineReport {
  Mechanism mechanism;
  Utilities exact;
  IdentityCheck identity;
  long trajectory_length = 0;
  Utilities empirical;  // time averages over a simulated trajectory
  std::vector<double> empirical_payments;  // average charge per bidder per round
};

/// Offline mechanism for the given bids (truthful when empty), exact
/// utilities, and a simulated trajectory under (pi*, p*) with true rewards.
OfflineReport run_offline(const MdpModel& model, const std::optional<BidProfile>& bids, long trajectory_length,
                          std::uint64_t seed);

/// Seed-averaged (1/T) sum_t (u~_i^t - u_i^t) for bidder i deviating to
/// `deviation` while the config's other strategies are unchanged; one value
/// per horizon, same seeds for both arms.
std::vector<double> deviation_gain(const ExperimentConfig& config, int bidder, const BidderStrategy& deviation,
                                   const std::vector<long>& horizons);

}  // namespace dynvcg
