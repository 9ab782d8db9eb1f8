#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynvcg/mdp.hpp"
#include "dynvcg/occupancy.hpp"
#include "dynvcg/polytope.hpp"
#include "json.hpp"

namespace dynvcg {

enum class PaymentVariant { kSellerFavorable, kBidderFavorable };

std::string to_string(PaymentVariant variant);
PaymentVariant payment_variant_from_string(const std::string& name);

struct LearnerConfig {
  double epsilon = 0.1;
  double delta = 0.02;
  double zeta = 0.05;
  double alpha = 0.1;
  double c_max = 1.0;
  PaymentVariant variant = PaymentVariant::kSellerFavorable;
  int num_states = 0;
  int num_actions = 0;
  int num_bidders = 0;

  /// Throws ConfigError unless epsilon, delta, zeta are in (0,1),
  /// delta <= 1/(S*A) and alpha * S <= 1.
  void validate() const;
};

struct EpisodeSchedule {
  long mixing = 0;      // d_k
  long stationary = 0;  // l_k

  long total() const { return mixing + stationary; }
};

/// d_k = max(1, ceil(ln k / (alpha S))),
/// l_k = ceil(max(4, sqrt k) ln(A S k / zeta) / (alpha delta)).
EpisodeSchedule episode_lengths(long k, double alpha, int num_states, int num_actions, double delta,
                                double zeta);

enum class Phase { kMixing, kStationary };

std::string to_string(Phase phase);

struct RoundDecision {
  int action = 0;
  Phase phase = Phase::kMixing;
  std::vector<double> charges;  // one per bidder; all zero while mixing
};

/// Anything that can play the seller's side of the online protocol.
class Seller {
 public:
  virtual ~Seller() = default;
  virtual RoundDecision act(int s, Rng& rng) = 0;
  virtual void observe(int s, int a, int next, double seller_reward, std::span<const double> reports) = 0;
  virtual bool episode_complete() const { return false; }
  virtual void end_episode() {}
  virtual long episode() const { return 1; }
};

using CountTable = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct LearnerState {
  long episode = 1;        // k
  long episode_start = 1;  // tau_k
  long rounds = 0;         // rounds played so far
  EpisodeSchedule schedule;
  Phase phase = Phase::kMixing;
  long phase_round = 0;  // rounds played in the current phase

  CountTable visits;          // N(s,a), S x A, cumulative
  CountTable transitions;     // N(s,a,s'), (S*A) x S, cumulative
  CountTable episode_visits;  // visits within the current episode
  std::vector<RewardTable> reward_sums;  // per player; seller realized, bidders reported

  Eigen::MatrixXd empirical_kernel;  // P-bar, (S*A) x S
  KernelBand band;                   // running intersection of confidence bands
  std::vector<RewardTable> reward_ucb;
  std::vector<RewardTable> reward_lcb;

  OccupancyMeasure occupancy;  // q-hat_k
  Policy policy;               // pi_k
  std::vector<RewardTable> payments_seller_favorable;  // p-hat_k
  std::vector<RewardTable> payments_bidder_favorable;  // p-check_k

  long band_rows_kept = 0;  // rows whose intersection would have been empty
  long clipped_reports = 0;
};

/// Episodic learner for the online dynamic VCG auction: mixing phase
/// without charges, stationary phase with charges, then one update from
/// the accumulated counts (empirical kernel, Bernstein band, reward
/// UCB/LCB, n + 1 LPs over the shrunk confidence polytope).
///
/// Both payment variants are computed every episode; `config.variant`
/// picks which one is charged.
class OnlineLearner : public Seller {
 public:
  explicit OnlineLearner(LearnerConfig config);
  OnlineLearner(LearnerConfig config, LearnerState state);

  RoundDecision act(int s, Rng& rng) override;
  void observe(int s, int a, int next, double seller_reward, std::span<const double> reports) override;
  bool episode_complete() const override;
  void end_episode() override;
  long episode() const override { return state_.episode; }

  const LearnerState& state() const { return state_; }
  const LearnerConfig& config() const { return config_; }
  const std::vector<RewardTable>& active_payments() const;

  nlohmann::json checkpoint() const;
  static OnlineLearner restore(const nlohmann::json& doc);

 private:
  void update_band();
  void update_rewards();
  void update_mechanism();

  LearnerConfig config_;
  LearnerState state_;
};

/// Bernstein radius for one entry:
/// 2 sqrt(pbar L / max(1, N-1)) + 14 L / (3 max(1, N-1)), L = ln(A S k / zeta).
double kernel_radius(double empirical, std::int64_t visits, double log_term);

/// sqrt(2 ln(A S k n / zeta) / max(1, N)).
double reward_radius(std::int64_t visits, double log_term);

nlohmann::json learner_config_to_json(const LearnerConfig& config);
LearnerConfig learner_config_from_json(const nlohmann::json& doc);

}  // namespace dynvcg
