#include "dynvcg/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dynvcg {
namespace {

class Tableau {
 public:
  Tableau(const LinearProgram& lp, const SimplexOptions& options) : options_(options) {
    const Eigen::Index m = lp.a.rows();
    num_original_ = static_cast<int>(lp.a.cols());
    if (lp.b.size() != m || static_cast<Eigen::Index>(lp.sense.size()) != m ||
        lp.c.size() != num_original_) {
      throw std::invalid_argument("solve_simplex: inconsistent program dimensions");
    }

    // Normalize to b >= 0, then count auxiliary columns.
    Eigen::MatrixXd rows = lp.a;
    Eigen::VectorXd rhs = lp.b;
    std::vector<RowSense> sense = lp.sense;
    int slacks = 0;
    int artificials = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (rhs(i) < 0.0) {
        rows.row(i) *= -1.0;
        rhs(i) *= -1.0;
        if (sense[i] == RowSense::kLessEqual) {
          sense[i] = RowSense::kGreaterEqual;
        } else if (sense[i] == RowSense::kGreaterEqual) {
          sense[i] = RowSense::kLessEqual;
        }
      }
      if (sense[i] != RowSense::kEqual) ++slacks;
      if (sense[i] != RowSense::kLessEqual) ++artificials;
    }

    first_artificial_ = num_original_ + slacks;
    num_columns_ = first_artificial_ + artificials;
    original_ = Eigen::MatrixXd::Zero(m, num_columns_);
    original_.leftCols(num_original_) = rows;
    rhs_ = rhs;
    basis_.assign(static_cast<std::size_t>(m), -1);

    int slack_col = num_original_;
    int art_col = first_artificial_;
    for (Eigen::Index i = 0; i < m; ++i) {
      switch (sense[i]) {
        case RowSense::kLessEqual:
          original_(i, slack_col) = 1.0;
          basis_[i] = slack_col++;
          break;
        case RowSense::kGreaterEqual:
          original_(i, slack_col++) = -1.0;
          original_(i, art_col) = 1.0;
          basis_[i] = art_col++;
          break;
        case RowSense::kEqual:
          original_(i, art_col) = 1.0;
          basis_[i] = art_col++;
          break;
      }
    }
    table_ = Eigen::MatrixXd(m, num_columns_ + 1);
    table_.leftCols(num_columns_) = original_;
    table_.col(num_columns_) = rhs_;
    active_.assign(static_cast<std::size_t>(m), true);
    cost_ = lp.c;
  }

  SimplexResult solve() {
    SimplexResult result;
    if (first_artificial_ < num_columns_) {
      Eigen::VectorXd phase_one = Eigen::VectorXd::Zero(num_columns_);
      phase_one.tail(num_columns_ - first_artificial_).setConstant(-1.0);
      const SolveStatus status = iterate(phase_one, num_columns_, result.iterations);
      if (status == SolveStatus::kIterationLimit) {
        result.status = status;
        return result;
      }
      double infeasibility = 0.0;
      for (std::size_t i = 0; i < basis_.size(); ++i) {
        if (active_[i] && basis_[i] >= first_artificial_) infeasibility += rhs(i);
      }
      const double scale = 1.0 + rhs_.cwiseAbs().maxCoeff();
      if (infeasibility > options_.feasibility_tolerance * scale) {
        result.status = SolveStatus::kInfeasible;
        return result;
      }
      expel_artificials();
    }

    Eigen::VectorXd phase_two = Eigen::VectorXd::Zero(num_columns_);
    phase_two.head(num_original_) = cost_;
    const SolveStatus status = iterate(phase_two, first_artificial_, result.iterations);
    result.status = status;
    if (status != SolveStatus::kOptimal) return result;

    result.x = polished_solution();
    result.objective = cost_.dot(result.x);
    return result;
  }

 private:
  double rhs(std::size_t i) const { return table_(static_cast<Eigen::Index>(i), num_columns_); }

  // Maximizes cost over columns [0, allowed). Reduced costs are recomputed
  // from the basis each iteration so the objective row never drifts.
  SolveStatus iterate(const Eigen::VectorXd& cost, int allowed, int& iterations) {
    bool bland = false;
    int stalled = 0;
    std::vector<bool> in_basis(static_cast<std::size_t>(num_columns_), false);
    for (std::size_t i = 0; i < basis_.size(); ++i) {
      if (active_[i]) in_basis[static_cast<std::size_t>(basis_[i])] = true;
    }

    while (true) {
      if (iterations >= options_.max_iterations) return SolveStatus::kIterationLimit;

      Eigen::RowVectorXd duals = Eigen::RowVectorXd::Zero(num_columns_);
      for (std::size_t i = 0; i < basis_.size(); ++i) {
        if (!active_[i]) continue;
        const double cb = cost(basis_[i]);
        if (cb != 0.0) duals += cb * table_.row(static_cast<Eigen::Index>(i)).head(num_columns_);
      }

      int entering = -1;
      double best = options_.optimality_tolerance;
      for (int j = 0; j < allowed; ++j) {
        if (in_basis[static_cast<std::size_t>(j)]) continue;
        const double reduced = cost(j) - duals(j);
        if (reduced > best) {
          entering = j;
          if (bland) break;
          best = reduced;
        }
      }
      if (entering < 0) return SolveStatus::kOptimal;

      int leaving = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < basis_.size(); ++i) {
        if (!active_[i]) continue;
        const double coef = table_(static_cast<Eigen::Index>(i), entering);
        if (coef <= options_.pivot_tolerance) continue;
        const double ratio = rhs(i) / coef;
        if (ratio < best_ratio - 1e-12 ||
            (std::abs(ratio - best_ratio) <= 1e-12 && leaving >= 0 &&
             basis_[i] < basis_[static_cast<std::size_t>(leaving)])) {
          best_ratio = ratio;
          leaving = static_cast<int>(i);
        }
      }
      if (leaving < 0) return SolveStatus::kUnbounded;

      if (best_ratio <= 1e-12) {
        if (++stalled >= options_.stall_limit) bland = true;
      } else {
        stalled = 0;
      }
      in_basis[static_cast<std::size_t>(basis_[static_cast<std::size_t>(leaving)])] = false;
      in_basis[static_cast<std::size_t>(entering)] = true;
      pivot(leaving, entering);
      ++iterations;
    }
  }

  void pivot(int row, int col) {
    const Eigen::Index r = row;
    table_.row(r) /= table_(r, col);
    for (Eigen::Index i = 0; i < table_.rows(); ++i) {
      if (i == r || !active_[static_cast<std::size_t>(i)]) continue;
      const double factor = table_(i, col);
      if (factor != 0.0) table_.row(i) -= factor * table_.row(r);
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  // After a feasible phase one, artificial columns still in the basis sit at
  // zero; pivot them out, or drop their row when it is redundant.
  void expel_artificials() {
    for (std::size_t i = 0; i < basis_.size(); ++i) {
      if (!active_[i] || basis_[i] < first_artificial_) continue;
      int replacement = -1;
      double best = options_.pivot_tolerance;
      for (int j = 0; j < first_artificial_; ++j) {
        const double mag = std::abs(table_(static_cast<Eigen::Index>(i), j));
        if (mag > best && std::find(basis_.begin(), basis_.end(), j) == basis_.end()) {
          best = mag;
          replacement = j;
        }
      }
      if (replacement >= 0) {
        pivot(static_cast<int>(i), replacement);
      } else {
        active_[i] = false;
      }
    }
  }

  Eigen::VectorXd polished_solution() const {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < basis_.size(); ++i) {
      if (active_[i]) rows.push_back(static_cast<Eigen::Index>(i));
    }
    const Eigen::Index k = static_cast<Eigen::Index>(rows.size());
    Eigen::VectorXd full = Eigen::VectorXd::Zero(num_columns_);
    Eigen::VectorXd tableau_values(k);
    for (Eigen::Index r = 0; r < k; ++r) tableau_values(r) = rhs(static_cast<std::size_t>(rows[r]));

    Eigen::VectorXd values = tableau_values;
    if (k > 0) {
      Eigen::MatrixXd basis_matrix(k, k);
      Eigen::VectorXd b(k);
      for (Eigen::Index r = 0; r < k; ++r) {
        b(r) = rhs_(rows[r]);
        for (Eigen::Index c = 0; c < k; ++c) {
          basis_matrix(r, c) = original_(rows[r], basis_[static_cast<std::size_t>(rows[c])]);
        }
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_matrix);
      if (lu.isInvertible()) {
        Eigen::VectorXd solved = lu.solve(b);
        if ((solved - tableau_values).cwiseAbs().maxCoeff() < 1e-6) values = solved;
      }
    }
    for (Eigen::Index r = 0; r < k; ++r) {
      full(basis_[static_cast<std::size_t>(rows[r])]) = std::max(0.0, values(r));
    }
    return full.head(num_original_);
  }

  SimplexOptions options_;
  int num_original_ = 0;
  int first_artificial_ = 0;
  int num_columns_ = 0;
  Eigen::MatrixXd original_;
  Eigen::VectorXd rhs_;
  Eigen::MatrixXd table_;
  Eigen::VectorXd cost_;
  std::vector<int> basis_;
  std::vector<bool> active_;
};

}  // namespace

SimplexResult solve_simplex(const LinearProgram& program, const SimplexOptions& options) {
  Tableau tableau(program, options);
  return tableau.solve();
}

}  // namespace dynvcg
