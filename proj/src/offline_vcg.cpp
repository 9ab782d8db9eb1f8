#include "dynvcg/offline_vcg.hpp"

#include <cmath>
#include <stdexcept>

namespace dynvcg {

RewardTable sum_excluding(const std::vector<RewardTable>& tables, int excluded) {
  RewardTable total = RewardTable::Zero(tables.front().rows(), tables.front().cols());
  for (int j = 0; j < static_cast<int>(tables.size()); ++j) {
    if (j != excluded) total += tables[j];
  }
  return total;
}

namespace {

std::vector<RewardTable> player_tables(const RewardTable& seller, const std::vector<RewardTable>& bidders) {
  std::vector<RewardTable> tables;
  tables.reserve(bidders.size() + 1);
  tables.push_back(seller);
  tables.insert(tables.end(), bidders.begin(), bidders.end());
  return tables;
}

}  // namespace

Mechanism offline_mechanism(const BidProfile& bids, const RewardTable& seller_rewards,
                            const TransitionKernel& kernel) {
  const int S = kernel.num_states();
  const int A = kernel.num_actions();
  for (const auto& b : bids.bids) {
    if (b.rows() != S || b.cols() != A) throw std::invalid_argument("offline_mechanism: bid shape");
    if (b.minCoeff() < 0.0 || b.maxCoeff() > 1.0) {
      throw std::invalid_argument("offline_mechanism: bids must lie in [0, 1]");
    }
  }
  const auto tables = player_tables(seller_rewards, bids.bids);
  // Delta(P) does not depend on the bids; one constraint system serves all n + 1 LPs.
  const ConstraintSystem polytope = build_constraints(PolytopeSpec::exact(kernel));

  Mechanism mech;
  const LpSolution welfare = maximize(sum_excluding(tables, -1), polytope);
  if (!welfare.optimal()) throw std::runtime_error("offline_mechanism: Delta(P) infeasible");
  mech.occupancy = welfare.q;
  mech.reported_welfare = welfare.objective_value;
  mech.allocation = induce(welfare.q).policy;

  for (int i = 1; i <= bids.num_bidders(); ++i) {
    const RewardTable others = sum_excluding(tables, i);
    const LpSolution counterfactual = maximize(others, polytope);
    if (!counterfactual.optimal()) throw std::runtime_error("offline_mechanism: Delta(P) infeasible");
    mech.counterfactual_values.push_back(counterfactual.objective_value);
    mech.counterfactual_occupancies.push_back(counterfactual.q);
    mech.payments.push_back(RewardTable::Constant(S, A, counterfactual.objective_value) - others);
  }
  return mech;
}

Utilities average_utilities(const Mechanism& mechanism, const std::vector<RewardTable>& bidder_rewards,
                            const RewardTable& seller_rewards, const TransitionKernel& kernel) {
  if (static_cast<int>(bidder_rewards.size()) != mechanism.num_bidders()) {
    throw std::invalid_argument("average_utilities: one reward table per bidder required");
  }
  const Eigen::MatrixXd rho = occupancy_from(kernel, mechanism.allocation).state_action();
  Utilities out;
  RewardTable seller_total = seller_rewards;
  RewardTable welfare = seller_rewards;
  for (int i = 0; i < mechanism.num_bidders(); ++i) {
    out.bidders.push_back(payoff(rho, bidder_rewards[i] - mechanism.payments[i]));
    seller_total += mechanism.payments[i];
    welfare += bidder_rewards[i];
  }
  out.seller = payoff(rho, seller_total);
  out.welfare = payoff(rho, welfare);
  return out;
}

IdentityCheck seller_utility_identity(const Mechanism& mechanism,
                                      const std::vector<RewardTable>& bidder_rewards,
                                      const RewardTable& seller_rewards, const TransitionKernel& kernel) {
  const int n = mechanism.num_bidders();
  const auto tables = player_tables(seller_rewards, bidder_rewards);
  IdentityCheck out;
  out.lhs = average_utilities(mechanism, bidder_rewards, seller_rewards, kernel).seller;
  out.rhs = -(n - 1) * payoff(mechanism.occupancy, sum_excluding(tables, -1));
  for (int i = 1; i <= n; ++i) {
    out.rhs += payoff(mechanism.counterfactual_occupancies[i - 1], sum_excluding(tables, i));
  }
  return out;
}

}  // namespace dynvcg
