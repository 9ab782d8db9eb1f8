#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynvcg/common.hpp"
#include "json.hpp"

namespace dynvcg {

/// Per-(state, action) table, rows indexed by state and columns by action.
/// Holds reward means, bids, payments and their confidence bounds.
using RewardTable = Eigen::MatrixXd;

/// Transition kernel P(s'|s,a) stored as an (S*A) x S matrix whose row
/// `s * A + a` is the next-state distribution of the pair (s, a).
class TransitionKernel {
 public:
  TransitionKernel() = default;
  TransitionKernel(int num_states, int num_actions);
  TransitionKernel(int num_states, int num_actions, Eigen::MatrixXd rows);

  static TransitionKernel uniform(int num_states, int num_actions);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int row_index(int s, int a) const { return s * num_actions_ + a; }

  double operator()(int s, int a, int next) const { return rows_(row_index(s, a), next); }
  double& operator()(int s, int a, int next) { return rows_(row_index(s, a), next); }

  auto row(int s, int a) const { return rows_.row(row_index(s, a)); }
  auto row(int s, int a) { return rows_.row(row_index(s, a)); }

  const Eigen::MatrixXd& matrix() const { return rows_; }

 private:
  int num_states_ = 0;
  int num_actions_ = 0;
  Eigen::MatrixXd rows_;
};

enum class RewardFamily {
  kDeterministic,    // mass at the mean
  kBernoulliScaled,  // cap with probability mean/cap, else 0
};

std::string to_string(RewardFamily family);
RewardFamily reward_family_from_string(const std::string& name);

enum class AuctionType { kGeneric, kSingleItem, kMultiUnit, kCombinatorial };

std::string to_string(AuctionType type);
AuctionType auction_type_from_string(const std::string& name);

/// Ground-truth environment. Player 0 is the seller, players 1..n are bidders.
/// Immutable once built; share it freely between simulation loops.
struct MdpModel {
  int num_states = 0;
  int num_actions = 0;
  int num_bidders = 0;
  double alpha = 0.0;
  double c_max = 1.0;
  TransitionKernel kernel;
  std::vector<RewardTable> reward_means;      // size n + 1
  std::vector<RewardFamily> reward_families;  // size n + 1

  // Generator metadata only; algorithms never look at action structure.
  AuctionType auction = AuctionType::kGeneric;
  std::vector<std::string> action_labels;

  /// Upper end of player i's reward range: c_max for the seller, 1 for bidders.
  double reward_cap(int player) const { return player == 0 ? c_max : 1.0; }

  RewardTable seller_rewards() const { return reward_means.at(0); }
  std::vector<RewardTable> bidder_rewards() const;
  RewardTable total_rewards() const;
};

struct Violation {
  std::string invariant;
  int s = -1;
  int a = -1;
  int next = -1;
  int player = -1;
  double value = 0.0;

  std::string describe() const;
};

/// Checks every MdpModel invariant; an empty result means the model is valid.
std::vector<Violation> validate_model(const MdpModel& model);

struct GeneratorConfig {
  AuctionType type = AuctionType::kGeneric;
  int num_states = 3;
  int num_actions = 3;  // generic only; derived for auction types
  int num_bidders = 2;
  int num_items = 1;    // multi-unit / combinatorial
  double alpha = 0.1;
  double c_max = 1.0;
  RewardFamily family = RewardFamily::kDeterministic;
};

/// Random model with kernel (1 - S*alpha) * Q + alpha * ones, Q random
/// row-stochastic, so every entry is at least alpha by construction.
/// Throws ConfigError when alpha * S > 1 or dimensions are malformed.
MdpModel generate_model(const GeneratorConfig& config, std::uint64_t seed);

/// {"type", "S", "A", "n", "items", "alpha", "c_max", "family"}; missing keys keep defaults.
GeneratorConfig generator_from_json(const nlohmann::json& doc);
nlohmann::json generator_to_json(const GeneratorConfig& config);

/// Action vectors of an auction type; each inner vector has one entry per
/// bidder (multi-unit) or per item (combinatorial, entry = bidder index or 0).
std::vector<std::vector<int>> auction_actions(const GeneratorConfig& config);

struct SimState {
  long t = 1;
  int state = 0;
  Rng rng;
};

struct StepOutcome {
  int next_state = 0;
  std::vector<double> rewards;  // realized, one per player, seller first
};

/// Samples s' ~ P(.|s,a) and each player's realized reward, then advances t.
StepOutcome step(const MdpModel& model, SimState& sim, int action);

/// Draws one realized reward for `player` at (s, a).
double sample_reward(const MdpModel& model, int player, int s, int a, Rng& rng);

/// Samples an index from a discrete distribution given as any Eigen vector
/// expression of probabilities.
template <typename Row>
int sample_index(const Row& probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  int last_positive = 0;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    if (probs(i) <= 0.0) continue;
    last_positive = i;
    acc += probs(i);
    if (u < acc) return i;
  }
  return last_positive;
}

nlohmann::json model_to_json(const MdpModel& model);
MdpModel model_from_json(const nlohmann::json& doc);
MdpModel load_model(const std::string& path);
void save_model(const MdpModel& model, const std::string& path);

nlohmann::json table_to_json(const Eigen::MatrixXd& table);
Eigen::MatrixXd table_from_json(const nlohmann::json& doc, int rows, int cols, const std::string& what);

}  // namespace dynvcg
