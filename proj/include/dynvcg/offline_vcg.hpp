#pragma once

#include <cmath>
#include <vector>

#include "dynvcg/mdp.hpp"
#include "dynvcg/occupancy.hpp"
#include "dynvcg/polytope.hpp"

namespace dynvcg {

/// One bid table b_i(s,a) in [0,1] per bidder.
struct BidProfile {
  std::vector<RewardTable> bids;

  static BidProfile truthful(const MdpModel& model) { return {model.bidder_rewards()}; }
  int num_bidders() const { return static_cast<int>(bids.size()); }
};

/// Allocation policy plus per-round payment tables.
struct Mechanism {
  Policy allocation;
  OccupancyMeasure occupancy;               // q* over Delta(P)
  double reported_welfare = 0.0;            // <q*, R> under the bids
  std::vector<RewardTable> payments;        // p_i(s,a)
  std::vector<double> counterfactual_values;  // <q*_{-i}, R_{-i}>
  std::vector<OccupancyMeasure> counterfactual_occupancies;

  int num_bidders() const { return static_cast<int>(payments.size()); }
};

/// Sum over players j != excluded of tables[j], where tables[0] is the seller.
/// Pass excluded = -1 for the full sum R.
RewardTable sum_excluding(const std::vector<RewardTable>& tables, int excluded);

/// Welfare LP over Delta(P) for the allocation, one counterfactual LP per
/// bidder for the payments p_i = <q*_{-i}, R_{-i}> - R_{-i}(s,a). Bids stand
/// in for the bidders' rewards.
Mechanism offline_mechanism(const BidProfile& bids, const RewardTable& seller_rewards,
                            const TransitionKernel& kernel);

struct Utilities {
  double seller = 0.0;
  std::vector<double> bidders;
  double welfare = 0.0;
};

/// Exact long-run averages under (P, pi*): welfare <rho, R>, bidder
/// <rho, r_i - p_i>, seller <rho, r_0 + sum p_i>, with true rewards.
Utilities average_utilities(const Mechanism& mechanism, const std::vector<RewardTable>& bidder_rewards,
                            const RewardTable& seller_rewards, const TransitionKernel& kernel);

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual() const { return std::abs(lhs - rhs); }
};

/// lhs: the seller's utility; rhs: -(n-1)<rho*, R> + sum_i <rho*_{-i}, R_{-i}>.
IdentityCheck seller_utility_identity(const Mechanism& mechanism,
                                      const std::vector<RewardTable>& bidder_rewards,
                                      const RewardTable& seller_rewards, const TransitionKernel& kernel);

}  // namespace dynvcg
