#pragma once

#include <vector>

#include <Eigen/Dense>

namespace dynvcg {

enum class RowSense { kLessEqual, kEqual, kGreaterEqual };

/// maximize c^T x  subject to  a.row(i) x (sense_i) b_i,  x >= 0.
struct LinearProgram {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  std::vector<RowSense> sense;
  Eigen::VectorXd c;
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

struct SimplexOptions {
  double pivot_tolerance = 1e-9;
  double optimality_tolerance = 1e-10;
  double feasibility_tolerance = 1e-9;
  int max_iterations = 100000;
  // Consecutive degenerate pivots before switching to Bland's rule.
  int stall_limit = 50;
};

struct SimplexResult {
  SolveStatus status = SolveStatus::kInfeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
};

/// Dense two-phase tableau simplex. Deterministic: identical inputs give the
/// identical vertex. Redundant equality rows are detected and dropped after
/// phase one, and the final basic solution is re-solved from the original
/// matrix to strip accumulated pivoting error.
SimplexResult solve_simplex(const LinearProgram& program, const SimplexOptions& options = {});

}  // namespace dynvcg
