#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dynvcg/mdp.hpp"

namespace dynvcg {

/// Stationary allocation policy pi(a|s), stored S x A.
class Policy {
 public:
  Policy() = default;
  explicit Policy(Eigen::MatrixXd probs);

  static Policy uniform(int num_states, int num_actions);
  static Policy deterministic(const std::vector<int>& choice, int num_actions);

  int num_states() const { return static_cast<int>(probs_.rows()); }
  int num_actions() const { return static_cast<int>(probs_.cols()); }
  double operator()(int s, int a) const { return probs_(s, a); }
  const Eigen::MatrixXd& matrix() const { return probs_; }

  int sample(int s, Rng& rng) const { return sample_index(probs_.row(s), rng); }

 private:
  Eigen::MatrixXd probs_;
};

/// State-action-next-state frequencies q(s,a,s'), stored like a kernel:
/// (S*A) x S with row s * A + a.
class OccupancyMeasure {
 public:
  OccupancyMeasure() = default;
  OccupancyMeasure(int num_states, int num_actions, Eigen::MatrixXd q);

  static OccupancyMeasure uniform(int num_states, int num_actions);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  double operator()(int s, int a, int next) const { return q_(s * num_actions_ + a, next); }
  const Eigen::MatrixXd& matrix() const { return q_; }

  /// rho(s,a) = sum_{s'} q(s,a,s'), S x A.
  Eigen::MatrixXd state_action() const;
  /// nu(s) = sum_a rho(s,a).
  Eigen::VectorXd state() const;

  double total_mass() const { return q_.sum(); }
  /// max_s |inflow(s) - outflow(s)|.
  double flow_residual() const;
  double min_entry() const { return q_.minCoeff(); }

 private:
  int num_states_ = 0;
  int num_actions_ = 0;
  Eigen::MatrixXd q_;
};

/// P^pi(s'|s) = sum_a P(s'|s,a) pi(a|s).
Eigen::MatrixXd state_kernel(const TransitionKernel& kernel, const Policy& policy);

/// Solves nu^T P = nu^T with sum(nu) = 1 by replacing one balance equation
/// with the normalization row. Throws std::runtime_error on a singular system.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& chain);

OccupancyMeasure occupancy_from(const TransitionKernel& kernel, const Policy& policy);

struct InducedPair {
  TransitionKernel kernel;
  Policy policy;
};

/// P^q and pi^q; rows whose denominator is below 1e-12 fall back to uniform.
InducedPair induce(const OccupancyMeasure& q);

/// <rho, r>, which equals <q, r> with r expanded constantly over s'.
double payoff(const OccupancyMeasure& q, const RewardTable& r);
double payoff(const Eigen::MatrixXd& rho, const RewardTable& r);

struct ContractionCheck {
  double measured = 0.0;  // ||(nu - nu')^T P^pi||_1
  double bound = 0.0;     // (1 - alpha S) ||nu - nu'||_1
};

ContractionCheck mixing_contraction(const Eigen::VectorXd& nu, const Eigen::VectorXd& other,
                                    const Eigen::MatrixXd& chain, double alpha);

}  // namespace dynvcg
