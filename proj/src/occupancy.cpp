#include "dynvcg/occupancy.hpp"

#include <cmath>
#include <stdexcept>

namespace dynvcg {

Policy::Policy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    if (std::abs(probs_.row(s).sum() - 1.0) > 1e-9 || probs_.row(s).minCoeff() < -1e-12) {
      throw std::invalid_argument("Policy: rows must be probability distributions");
    }
  }
}

Policy Policy::uniform(int num_states, int num_actions) {
  return Policy(Eigen::MatrixXd::Constant(num_states, num_actions, 1.0 / num_actions));
}

Policy Policy::deterministic(const std::vector<int>& choice, int num_actions) {
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(choice.size()), num_actions);
  for (std::size_t s = 0; s < choice.size(); ++s) probs(static_cast<Eigen::Index>(s), choice[s]) = 1.0;
  return Policy(std::move(probs));
}

OccupancyMeasure::OccupancyMeasure(int num_states, int num_actions, Eigen::MatrixXd q)
    : num_states_(num_states), num_actions_(num_actions), q_(std::move(q)) {
  if (q_.rows() != num_states * num_actions || q_.cols() != num_states) {
    throw std::invalid_argument("OccupancyMeasure: matrix must be (S*A) x S");
  }
}

OccupancyMeasure OccupancyMeasure::uniform(int num_states, int num_actions) {
  const double mass = 1.0 / (static_cast<double>(num_actions) * num_states * num_states);
  return OccupancyMeasure(num_states, num_actions,
                          Eigen::MatrixXd::Constant(num_states * num_actions, num_states, mass));
}

Eigen::MatrixXd OccupancyMeasure::state_action() const {
  const Eigen::VectorXd row_sums = q_.rowwise().sum();
  Eigen::MatrixXd rho(num_states_, num_actions_);
  for (int s = 0; s < num_states_; ++s) {
    for (int a = 0; a < num_actions_; ++a) rho(s, a) = row_sums(s * num_actions_ + a);
  }
  return rho;
}

Eigen::VectorXd OccupancyMeasure::state() const { return state_action().rowwise().sum(); }

double OccupancyMeasure::flow_residual() const {
  const Eigen::VectorXd outflow = state();
  const Eigen::VectorXd inflow = q_.colwise().sum().transpose();
  return (inflow - outflow).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd state_kernel(const TransitionKernel& kernel, const Policy& policy) {
  const int S = kernel.num_states();
  const int A = kernel.num_actions();
  Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(S, S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) chain.row(s) += policy(s, a) * kernel.row(s, a);
  }
  return chain;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& chain) {
  const Eigen::Index S = chain.rows();
  Eigen::MatrixXd system = chain.transpose() - Eigen::MatrixXd::Identity(S, S);
  system.row(S - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(S);
  rhs(S - 1) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) {
    throw std::runtime_error("stationary_distribution: singular chain (no unique stationary law)");
  }
  Eigen::VectorXd nu = lu.solve(rhs);
  // Round-off can leave -1e-17 entries on near-boundary chains.
  nu = nu.cwiseMax(0.0);
  return nu / nu.sum();
}

OccupancyMeasure occupancy_from(const TransitionKernel& kernel, const Policy& policy) {
  const int S = kernel.num_states();
  const int A = kernel.num_actions();
  const Eigen::VectorXd nu = stationary_distribution(state_kernel(kernel, policy));
  Eigen::MatrixXd q(S * A, S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      q.row(s * A + a) = nu(s) * policy(s, a) * kernel.row(s, a);
    }
  }
  return OccupancyMeasure(S, A, std::move(q));
}

InducedPair induce(const OccupancyMeasure& q) {
  const int S = q.num_states();
  const int A = q.num_actions();
  const Eigen::MatrixXd rho = q.state_action();
  const Eigen::VectorXd nu = rho.rowwise().sum();

  Eigen::MatrixXd kernel_rows(S * A, S);
  Eigen::MatrixXd probs(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const int r = s * A + a;
      if (rho(s, a) < Tolerances::kZeroDenominator) {
        kernel_rows.row(r).setConstant(1.0 / S);
      } else {
        kernel_rows.row(r) = q.matrix().row(r).cwiseMax(0.0) / q.matrix().row(r).cwiseMax(0.0).sum();
      }
    }
    if (nu(s) < Tolerances::kZeroDenominator) {
      probs.row(s).setConstant(1.0 / A);
    } else {
      probs.row(s) = rho.row(s).cwiseMax(0.0) / rho.row(s).cwiseMax(0.0).sum();
    }
  }
  return {TransitionKernel(S, A, std::move(kernel_rows)), Policy(std::move(probs))};
}

double payoff(const Eigen::MatrixXd& rho, const RewardTable& r) {
  if (rho.rows() != r.rows() || rho.cols() != r.cols()) {
    throw std::invalid_argument("payoff: shape mismatch");
  }
  return rho.cwiseProduct(r).sum();
}

double payoff(const OccupancyMeasure& q, const RewardTable& r) { return payoff(q.state_action(), r); }

ContractionCheck mixing_contraction(const Eigen::VectorXd& nu, const Eigen::VectorXd& other,
                                    const Eigen::MatrixXd& chain, double alpha) {
  const Eigen::VectorXd diff = nu - other;
  const double S = static_cast<double>(chain.rows());
  ContractionCheck out;
  out.measured = (diff.transpose() * chain).cwiseAbs().sum();
  out.bound = (1.0 - alpha * S) * diff.cwiseAbs().sum();
  return out;
}

}  // namespace dynvcg
