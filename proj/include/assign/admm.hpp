#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "assign/dense.hpp"
#include "assign/objective.hpp"
#include "assign/problem.hpp"

namespace assign {

class Engine;

// One immutable snapshot per iteration.
struct IterationState {
  std::size_t t = 0;
  MatrixD X;    // I x J, in [0,1]
  MatrixD xi;   // M x J, nonnegative slack
  MatrixD lam;  // M x J inequality duals
  MatrixD mu;   // N x J equality duals
};

IterationState initial_state(const ProblemSpec& spec);

// Unified view of one inequality or equality row: the penalty target d_s
// (b_m minus current slack, or c_n) and the dual nu_s (lambda_m or mu_n).
// The feature column w_s stays implicit via ProblemSpec::w(s, i). Cells
// whose bound carries the infinity sentinel are inactive: they contribute
// nothing to penalties, duals, or metrics.
struct CombinedConstraint {
  std::size_t s;
  bool is_eq;
  std::size_t row;              // m or n
  std::vector<double> d;        // J
  std::vector<double> nu;       // J
  std::vector<std::uint8_t> active;  // J
};

std::vector<CombinedConstraint> combine_constraints(const ProblemSpec& spec,
                                                    const IterationState& state);

// Owner-side J-vectors sw[s] = X^T w_s, reduced order-independently so any
// partitioning of the items gives bit-identical values.
std::vector<std::vector<double>> constraint_lhs(const ProblemSpec& spec,
                                                const MatrixD& X);

// r_s = X^T w_s - d_s + nu_s / rho per combined constraint (zero at
// inactive cells).
std::vector<std::vector<double>> penalty_residuals(
    const ProblemSpec& spec, const MatrixD& X,
    const std::vector<CombinedConstraint>& combined);

// B = -g'(X^t) + f'(X^t) + rho * sum_s w_s r_s^T, materialized. The solver
// itself never builds this matrix; workers form their rows from the
// broadcast r_s vectors. This entry point exists for small instances and
// cross-checks.
MatrixD compute_B(const ProblemSpec& spec, const ObjectiveModel& objective,
                  const MatrixD& X_t,
                  const std::vector<CombinedConstraint>& combined);

// Jacobi step: every item solved against the same snapshot.
MatrixD primal_update(const ProblemSpec& spec, const ObjectiveModel& objective,
                      const IterationState& state);

MatrixD xi_update(const ProblemSpec& spec, const MatrixD& X_next,
                  const MatrixD& lam, double rho);

struct DualUpdateResult {
  MatrixD lam;
  MatrixD mu;
};

DualUpdateResult dual_update(const ProblemSpec& spec, const MatrixD& X_next,
                             const MatrixD& xi_next, const IterationState& state,
                             double rho);

struct SolverConfig {
  std::size_t max_iters = 1000;
  // Negative disables a tolerance; the loop then runs to max_iters.
  double ineq_tol = 1e-3;
  double eq_tol = 1e-3;
  double dual_tol = 1e-6;  // ||X^{t+1}-X^t||_F / sqrt(I*J)
  // 0 = auto: every iteration up to I=1e5, every 10th beyond.
  std::size_t trace_every = 0;
  std::size_t checkpoint_every = 25;
  std::filesystem::path checkpoint_dir;  // empty disables checkpointing
  double dominance = 0.0;                // 0 = default D = I
};

struct TraceRow {
  std::size_t t;
  double objective;
  double ineq_mapd;
  double eq_mapd;
  double dual_residual;
  double wall_ms;
};

struct ConvergenceTrace {
  std::vector<TraceRow> rows;
};

std::string trace_to_csv(const ConvergenceTrace& trace);
ConvergenceTrace trace_from_csv(const std::string& text);

// Relaxed solution as CSV: header item_id,x_0..x_{J-1}, one row per item.
std::string solution_to_csv(const MatrixD& X);
MatrixD solution_from_csv(const std::string& text);

struct SolveResult {
  MatrixD X;
  ConvergenceTrace trace;
  std::size_t iterations = 0;
  bool converged = false;
};

// Runs the full iteration loop (all variables start at zero) until the
// tolerances hold or max_iters is reached. Optionally resumes from a
// checkpoint iteration.
SolveResult solve(const ProblemSpec& spec, const SolverConfig& config,
                  Engine& engine,
                  std::optional<std::size_t> resume_from = std::nullopt);

// Constraint metrics from reduced owner-side sums; shared by the solver
// trace and the eval module. Inactive cells are excluded; an empty family
// reports 0.
double ineq_mapd_from_lhs(const ProblemSpec& spec,
                          const std::vector<std::vector<double>>& sw);
double eq_mapd_from_lhs(const ProblemSpec& spec,
                        const std::vector<std::vector<double>>& sw);

}  // namespace assign
