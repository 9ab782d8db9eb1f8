#pragma once

#include <string>
#include <vector>

#include "dynvcg/mdp.hpp"
#include "json.hpp"

namespace dynvcg {

enum class StrategyKind { kTruthful, kByBids, kScaled, kShifted, kAdversarialWindow };

std::string to_string(StrategyKind kind);

struct ReportContext {
  long t = 1;
  long episode = 1;
  int s = 0;
  int a = 0;
  double realized = 0.0;  // the bidder's own realized reward
};

/// Inflate (or deflate) reports to clip(factor * r + offset) during episodes
/// [first_episode, last_episode], with the given probability per round.
struct AdversarialWindow {
  long first_episode = 1;
  long last_episode = 1;
  double factor = 1.0;
  double offset = 0.0;
  double probability = 1.0;
};

/// How one bidder turns a realized reward into a report. Every report is
/// clipped to [0, 1].
class BidderStrategy {
 public:
  static BidderStrategy truthful();
  static BidderStrategy by_bids(RewardTable bids);
  static BidderStrategy scaled(double factor);
  static BidderStrategy shifted(double offset);
  static BidderStrategy adversarial(std::vector<AdversarialWindow> windows);

  StrategyKind kind() const { return kind_; }
  /// Reports depend only on (s, a, realized) and fixed parameters.
  bool is_stationary() const { return kind_ != StrategyKind::kAdversarialWindow; }

  /// `rng` is only consumed by adversarial windows with probability < 1.
  double report(const ReportContext& ctx, Rng& rng) const;

  /// Bid table used when the mechanism is run offline with this strategy:
  /// the strategy applied to each mean (exact for by_bids and truthful).
  RewardTable offline_bids(const RewardTable& true_means) const;

  nlohmann::json to_json() const;
  /// {"kind": "truthful"} | {"kind": "by_bids", "bids": [[..]]} |
  /// {"kind": "scaled", "factor": f} | {"kind": "shifted", "offset": o} |
  /// {"kind": "adversarial_window", "windows": [{"first_episode", "last_episode",
  ///   "factor", "offset", "probability"}]}
  static BidderStrategy from_json(const nlohmann::json& doc, int num_states, int num_actions);

 private:
  StrategyKind kind_ = StrategyKind::kTruthful;
  RewardTable bids_;
  double factor_ = 1.0;
  double offset_ = 0.0;
  std::vector<AdversarialWindow> windows_;
};

}  // namespace dynvcg
