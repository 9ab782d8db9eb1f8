#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dynvcg/mdp.hpp"
#include "dynvcg/occupancy.hpp"
#include "dynvcg/simplex.hpp"

namespace dynvcg {

/// Per-entry bounds lower(s,a,s') <= P(s'|s,a) <= upper(s,a,s'), stored like
/// a kernel. Represents a confidence set of transition kernels.
struct KernelBand {
  Eigen::MatrixXd lower;
  Eigen::MatrixXd upper;

  /// [0, 1] everywhere: the set of all kernels.
  static KernelBand vacuous(int num_states, int num_actions);
  /// [P - radius, P + radius] clipped to [0, 1].
  static KernelBand around(const Eigen::MatrixXd& center, const Eigen::MatrixXd& radius);

  /// Entrywise intersection (max of lowers, min of uppers).
  KernelBand intersect(const KernelBand& other) const;

  bool contains(const TransitionKernel& kernel, double tolerance = 0.0) const;
  Eigen::MatrixXd width() const { return upper - lower; }
  /// Some row-stochastic kernel fits inside row r.
  bool row_feasible(Eigen::Index r) const;
};

enum class PolytopeKind {
  kFull,              // Delta
  kExactKernel,       // Delta(P)
  kShrunk,            // Delta_delta
  kShrunkExact,       // Delta_delta(P)
  kShrunkConfidence,  // Delta_delta(band)
};

struct PolytopeSpec {
  PolytopeKind kind = PolytopeKind::kFull;
  int num_states = 0;
  int num_actions = 0;
  double delta = 0.0;
  std::optional<TransitionKernel> kernel;
  std::optional<KernelBand> band;

  static PolytopeSpec full(int num_states, int num_actions);
  static PolytopeSpec exact(const TransitionKernel& kernel);
  static PolytopeSpec shrunk(int num_states, int num_actions, double delta);
  static PolytopeSpec shrunk_exact(const TransitionKernel& kernel, double delta);
  static PolytopeSpec shrunk_confidence(int num_states, int num_actions, KernelBand band, double delta);
};

enum class RowKind { kNormalization, kFlow, kKernelEquality, kShrink, kBandLower, kBandUpper };

struct ConstraintRow {
  RowKind kind;
  std::string name;
  std::vector<std::pair<int, double>> terms;  // (variable, coefficient)
  RowSense sense;
  double rhs;
};

/// Linear constraints over the A*S^2 variables q(s,a,s'), variable index
/// (s * A + a) * S + s'. Every variable is implicitly nonnegative.
struct ConstraintSystem {
  int num_states = 0;
  int num_actions = 0;
  std::vector<ConstraintRow> rows;

  int num_variables() const { return num_actions * num_states * num_states; }
  int variable(int s, int a, int next) const { return (s * num_actions + a) * num_states + next; }
  std::size_t count(RowKind kind) const;
  std::size_t nonnegativity_count() const { return static_cast<std::size_t>(num_variables()); }

  LinearProgram to_program(const RewardTable& objective) const;

  /// Largest violation of any row (and of nonnegativity) at q.
  double max_violation(const OccupancyMeasure& q) const;

  /// CPLEX LP text format: Maximize / Subject To / Bounds / End, with
  /// variables named q_<s>_<a>_<s'>.
  void write_lp(std::ostream& out, const RewardTable& objective) const;
};

/// Throws std::invalid_argument for malformed dims, delta outside
/// (0, 1/(S*A)], or a missing kernel/band.
ConstraintSystem build_constraints(const PolytopeSpec& spec);

enum class LpStatus { kOptimal, kInfeasible };

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  OccupancyMeasure q;
  double objective_value = 0.0;

  bool optimal() const { return status == LpStatus::kOptimal; }
};

LpSolution maximize(const RewardTable& objective, const ConstraintSystem& system);
LpSolution maximize(const RewardTable& objective, const PolytopeSpec& spec);

struct DeltaCalibration {
  double delta = 0.0;
  bool gap_met = false;
  double full_value = 0.0;    // max over Delta(P)
  double shrunk_value = 0.0;  // max over Delta_delta(P) at the returned delta
};

inline constexpr double kMinDelta = 1e-6;

/// Largest delta on the grid 1/(2SA), 1/(4SA), ... (floored at 1e-6) whose
/// shrunk optimum is within epsilon of the unshrunk one.
DeltaCalibration calibrate_delta(const TransitionKernel& kernel, const RewardTable& objective,
                                 double epsilon);

}  // namespace dynvcg
