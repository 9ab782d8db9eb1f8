#include "dynvcg/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace dynvcg {

KernelBand KernelBand::vacuous(int num_states, int num_actions) {
  return {Eigen::MatrixXd::Zero(num_states * num_actions, num_states),
          Eigen::MatrixXd::Ones(num_states * num_actions, num_states)};
}

KernelBand KernelBand::around(const Eigen::MatrixXd& center, const Eigen::MatrixXd& radius) {
  return {(center - radius).cwiseMax(0.0).cwiseMin(1.0),
          (center + radius).cwiseMin(1.0).cwiseMax(0.0)};
}

KernelBand KernelBand::intersect(const KernelBand& other) const {
  return {lower.cwiseMax(other.lower), upper.cwiseMin(other.upper)};
}

bool KernelBand::contains(const TransitionKernel& kernel, double tolerance) const {
  const auto& p = kernel.matrix();
  return (p.array() >= lower.array() - tolerance).all() && (p.array() <= upper.array() + tolerance).all();
}

bool KernelBand::row_feasible(Eigen::Index r) const {
  return (lower.row(r).array() <= upper.row(r).array()).all() && lower.row(r).sum() <= 1.0 &&
         upper.row(r).sum() >= 1.0;
}

PolytopeSpec PolytopeSpec::full(int num_states, int num_actions) {
  PolytopeSpec spec;
  spec.kind = PolytopeKind::kFull;
  spec.num_states = num_states;
  spec.num_actions = num_actions;
  return spec;
}

PolytopeSpec PolytopeSpec::exact(const TransitionKernel& kernel) {
  PolytopeSpec spec = full(kernel.num_states(), kernel.num_actions());
  spec.kind = PolytopeKind::kExactKernel;
  spec.kernel = kernel;
  return spec;
}

PolytopeSpec PolytopeSpec::shrunk(int num_states, int num_actions, double delta) {
  PolytopeSpec spec = full(num_states, num_actions);
  spec.kind = PolytopeKind::kShrunk;
  spec.delta = delta;
  return spec;
}

PolytopeSpec PolytopeSpec::shrunk_exact(const TransitionKernel& kernel, double delta) {
  PolytopeSpec spec = exact(kernel);
  spec.kind = PolytopeKind::kShrunkExact;
  spec.delta = delta;
  return spec;
}

PolytopeSpec PolytopeSpec::shrunk_confidence(int num_states, int num_actions, KernelBand band,
                                             double delta) {
  PolytopeSpec spec = full(num_states, num_actions);
  spec.kind = PolytopeKind::kShrunkConfidence;
  spec.delta = delta;
  spec.band = std::move(band);
  return spec;
}

std::size_t ConstraintSystem::count(RowKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [kind](const ConstraintRow& r) { return r.kind == kind; }));
}

LinearProgram ConstraintSystem::to_program(const RewardTable& objective) const {
  const int n = num_variables();
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  LinearProgram lp;
  lp.a = Eigen::MatrixXd::Zero(m, n);
  lp.b.resize(m);
  lp.sense.reserve(rows.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    for (const auto& [var, coef] : row.terms) lp.a(i, var) += coef;
    lp.b(i) = row.rhs;
    lp.sense.push_back(row.sense);
  }
  lp.c.resize(n);
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      for (int next = 0; next < num_states; ++next) lp.c(variable(s, a, next)) = objective(s, a);
    }
  }
  return lp;
}

double ConstraintSystem::max_violation(const OccupancyMeasure& q) const {
  Eigen::VectorXd x(num_variables());
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      for (int next = 0; next < num_states; ++next) x(variable(s, a, next)) = q(s, a, next);
    }
  }
  double worst = std::max(0.0, -x.minCoeff());
  for (const auto& row : rows) {
    double lhs = 0.0;
    for (const auto& [var, coef] : row.terms) lhs += coef * x(var);
    double violation = 0.0;
    switch (row.sense) {
      case RowSense::kLessEqual:
        violation = lhs - row.rhs;
        break;
      case RowSense::kGreaterEqual:
        violation = row.rhs - lhs;
        break;
      case RowSense::kEqual:
        violation = std::abs(lhs - row.rhs);
        break;
    }
    worst = std::max(worst, violation);
  }
  return worst;
}

void ConstraintSystem::write_lp(std::ostream& out, const RewardTable& objective) const {
  auto name = [this](int var) {
    const int next = var % num_states;
    const int sa = var / num_states;
    return "q_" + std::to_string(sa / num_actions) + "_" + std::to_string(sa % num_actions) + "_" +
           std::to_string(next);
  };
  auto write_terms = [&](const std::vector<std::pair<int, double>>& terms) {
    bool first = true;
    for (const auto& [var, coef] : terms) {
      if (coef == 0.0) continue;
      out << (coef < 0 ? " - " : (first ? " " : " + ")) << std::abs(coef) << ' ' << name(var);
      first = false;
    }
    if (first) out << " 0 " << name(0);
  };

  out << "\\ occupancy-measure polytope, " << num_states << " states, " << num_actions << " actions\n";
  out << "Maximize\n obj:";
  std::vector<std::pair<int, double>> obj;
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      for (int next = 0; next < num_states; ++next) obj.emplace_back(variable(s, a, next), objective(s, a));
    }
  }
  write_terms(obj);
  out << "\nSubject To\n";
  for (const auto& row : rows) {
    out << ' ' << row.name << ':';
    write_terms(row.terms);
    switch (row.sense) {
      case RowSense::kLessEqual:
        out << " <= ";
        break;
      case RowSense::kGreaterEqual:
        out << " >= ";
        break;
      case RowSense::kEqual:
        out << " = ";
        break;
    }
    out << row.rhs << '\n';
  }
  out << "Bounds\n";
  for (int v = 0; v < num_variables(); ++v) out << ' ' << name(v) << " >= 0\n";
  out << "End\n";
}

namespace {

// rhs-coefficient form of  q(s,a,s') (sense) coef * sum_x q(s,a,x).
ConstraintRow kernel_row(const ConstraintSystem& sys, RowKind kind, const std::string& name, int s,
                         int a, int next, double coef, RowSense sense) {
  ConstraintRow row{kind, name, {}, sense, 0.0};
  for (int x = 0; x < sys.num_states; ++x) {
    const double c = (x == next ? 1.0 : 0.0) - coef;
    if (c != 0.0) row.terms.emplace_back(sys.variable(s, a, x), c);
  }
  return row;
}

std::string suffix(int s, int a, int next) {
  return std::to_string(s) + "_" + std::to_string(a) + "_" + std::to_string(next);
}

}  // namespace

ConstraintSystem build_constraints(const PolytopeSpec& spec) {
  const int S = spec.num_states;
  const int A = spec.num_actions;
  if (S < 1 || A < 1) throw std::invalid_argument("build_constraints: S and A must be >= 1");
  const bool shrunk = spec.kind == PolytopeKind::kShrunk || spec.kind == PolytopeKind::kShrunkExact ||
                      spec.kind == PolytopeKind::kShrunkConfidence;
  if (shrunk && !(spec.delta > 0.0 && spec.delta <= 1.0 / (S * A) + 1e-15)) {
    throw std::invalid_argument("build_constraints: delta must lie in (0, 1/(S*A)]");
  }
  const bool needs_kernel = spec.kind == PolytopeKind::kExactKernel || spec.kind == PolytopeKind::kShrunkExact;
  if (needs_kernel) {
    if (!spec.kernel || spec.kernel->num_states() != S || spec.kernel->num_actions() != A) {
      throw std::invalid_argument("build_constraints: kernel missing or mis-shaped");
    }
  }
  if (spec.kind == PolytopeKind::kShrunkConfidence) {
    if (!spec.band || spec.band->lower.rows() != S * A || spec.band->lower.cols() != S ||
        spec.band->upper.rows() != S * A || spec.band->upper.cols() != S) {
      throw std::invalid_argument("build_constraints: band missing or mis-shaped");
    }
  }

  ConstraintSystem sys;
  sys.num_states = S;
  sys.num_actions = A;

  ConstraintRow norm{RowKind::kNormalization, "norm", {}, RowSense::kEqual, 1.0};
  for (int v = 0; v < sys.num_variables(); ++v) norm.terms.emplace_back(v, 1.0);
  sys.rows.push_back(std::move(norm));

  // inflow(s) - outflow(s) = 0
  for (int s = 0; s < S; ++s) {
    ConstraintRow flow{RowKind::kFlow, "flow_" + std::to_string(s), {}, RowSense::kEqual, 0.0};
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(sys.num_variables());
    for (int from = 0; from < S; ++from) {
      for (int a = 0; a < A; ++a) coef(sys.variable(from, a, s)) += 1.0;
    }
    for (int a = 0; a < A; ++a) {
      for (int next = 0; next < S; ++next) coef(sys.variable(s, a, next)) -= 1.0;
    }
    for (int v = 0; v < sys.num_variables(); ++v) {
      if (coef(v) != 0.0) flow.terms.emplace_back(v, coef(v));
    }
    sys.rows.push_back(std::move(flow));
  }

  if (needs_kernel) {
    const auto& P = *spec.kernel;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        for (int next = 0; next < S; ++next) {
          sys.rows.push_back(kernel_row(sys, RowKind::kKernelEquality, "kernel_" + suffix(s, a, next), s,
                                        a, next, P(s, a, next), RowSense::kEqual));
        }
      }
    }
  }

  if (shrunk) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        ConstraintRow row{RowKind::kShrink, "shrink_" + std::to_string(s) + "_" + std::to_string(a), {},
                          RowSense::kGreaterEqual, spec.delta};
        for (int next = 0; next < S; ++next) row.terms.emplace_back(sys.variable(s, a, next), 1.0);
        sys.rows.push_back(std::move(row));
      }
    }
  }

  if (spec.kind == PolytopeKind::kShrunkConfidence) {
    const auto& band = *spec.band;
    if ((band.lower.array() < 0.0).any() || (band.upper.array() > 1.0).any()) {
      throw std::invalid_argument("build_constraints: band must lie within [0, 1]");
    }
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const int r = s * A + a;
        for (int next = 0; next < S; ++next) {
          const double lo = band.lower(r, next);
          const double hi = band.upper(r, next);
          // A zero lower coefficient only restates nonnegativity.
          if (lo > 0.0) {
            sys.rows.push_back(kernel_row(sys, RowKind::kBandLower, "band_lo_" + suffix(s, a, next), s, a,
                                          next, lo, RowSense::kGreaterEqual));
          }
          if (hi < 1.0) {
            sys.rows.push_back(kernel_row(sys, RowKind::kBandUpper, "band_hi_" + suffix(s, a, next), s, a,
                                          next, hi, RowSense::kLessEqual));
          }
        }
      }
    }
  }
  return sys;
}

LpSolution maximize(const RewardTable& objective, const ConstraintSystem& system) {
  if (objective.rows() != system.num_states || objective.cols() != system.num_actions) {
    throw std::invalid_argument("maximize: objective shape mismatch");
  }
  if (!objective.allFinite()) throw std::invalid_argument("maximize: objective must be finite");
  const SimplexResult result = solve_simplex(system.to_program(objective));
  LpSolution out;
  if (result.status != SolveStatus::kOptimal) {
    if (result.status == SolveStatus::kIterationLimit) {
      throw std::runtime_error("maximize: simplex iteration limit reached");
    }
    // Occupancy polytopes are bounded, so the only other outcome is infeasible.
    out.status = LpStatus::kInfeasible;
    return out;
  }
  const int S = system.num_states;
  const int A = system.num_actions;
  Eigen::MatrixXd q(S * A, S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      for (int next = 0; next < S; ++next) q(s * A + a, next) = result.x(system.variable(s, a, next));
    }
  }
  out.status = LpStatus::kOptimal;
  out.q = OccupancyMeasure(S, A, std::move(q));
  out.objective_value = payoff(out.q, objective);
  return out;
}

LpSolution maximize(const RewardTable& objective, const PolytopeSpec& spec) {
  return maximize(objective, build_constraints(spec));
}

DeltaCalibration calibrate_delta(const TransitionKernel& kernel, const RewardTable& objective,
                                 double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("calibrate_delta: epsilon must be > 0");
  const int S = kernel.num_states();
  const int A = kernel.num_actions();
  const ConstraintSystem exact = build_constraints(PolytopeSpec::exact(kernel));
  const LpSolution full = maximize(objective, exact);
  if (!full.optimal()) throw std::runtime_error("calibrate_delta: Delta(P) is infeasible");

  // The exact-kernel rows are shared; only the shrink rhs changes per candidate.
  ConstraintSystem shrunk = build_constraints(PolytopeSpec::shrunk_exact(kernel, 1.0 / (2.0 * S * A)));

  DeltaCalibration out;
  out.full_value = full.objective_value;
  double candidate = 1.0 / (2.0 * S * A);
  while (true) {
    const bool last = candidate <= kMinDelta;
    const double delta = std::max(candidate, kMinDelta);
    for (auto& row : shrunk.rows) {
      if (row.kind == RowKind::kShrink) row.rhs = delta;
    }
    const LpSolution sol = maximize(objective, shrunk);
    if (sol.optimal() && sol.objective_value >= full.objective_value - epsilon) {
      out.delta = delta;
      out.gap_met = true;
      out.shrunk_value = sol.objective_value;
      return out;
    }
    if (last) {
      spdlog::warn("calibrate_delta: gap {} not met even at delta = {}", epsilon, kMinDelta);
      out.delta = kMinDelta;
      out.gap_met = false;
      out.shrunk_value = sol.optimal() ? sol.objective_value : 0.0;
      return out;
    }
    candidate /= 2.0;
  }
}

}  // namespace dynvcg
