#pragma once

#include <optional>
#include <string>
#include <vector>

#include "assign/dense.hpp"
#include "assign/problem.hpp"
#include "assign/rounding.hpp"

namespace assign {

// |(sol - reference) / reference|; the reference must be nonzero.
double objective_apd(double sol, double reference);

// Per-cell relative violations: inequality is one-sided (satisfied rows
// score 0), equality is two-sided. Denominators are the targets themselves.
double ineq_apd(std::span<const double> x_col, std::span<const double> u_col,
                double b);
double eq_apd(std::span<const double> x_col, std::span<const double> v_col,
              double c);

struct SolutionReport {
  double objective = 0.0;
  std::optional<double> objective_apd;  // present when a reference was given
  double ineq_mapd = 0.0;
  double eq_mapd = 0.0;
  std::vector<double> ineq_apds;  // active cells, (m, j) row-major
  std::vector<double> eq_apds;    // active cells, (n, j) row-major
};

std::string report_to_json(const SolutionReport& report);

SolutionReport evaluate(const ProblemSpec& spec, const MatrixD& X,
                        std::optional<double> reference = std::nullopt);

SolutionReport evaluate_binary(const ProblemSpec& spec,
                               const BinaryAssignment& asg,
                               std::optional<double> reference = std::nullopt);

struct OracleResult {
  double objective = 0.0;
  MatrixD X;
  double kkt_residual = 0.0;
  double barrier_t = 0.0;  // final barrier weight, for re-certification
  std::size_t newton_steps = 0;
};

// Reference continuous solve: log-barrier Newton over the full relaxation,
// exploiting the per-item block plus low-rank Hessian structure. Starts
// strictly inside the inequalities and drives the equality residual to zero
// with infeasible-start Newton steps. Guarded to I <= 5000; certifies itself
// with an explicit KKT residual before returning.
OracleResult oracle_solve(const ProblemSpec& spec, double kkt_tol = 1e-6);

// Explicit KKT residual of (X, duals) reconstructed from a barrier point;
// exposed so tests can certify the oracle with independent arithmetic.
double kkt_residual(const ProblemSpec& spec, const MatrixD& X,
                    double barrier_t);

struct BruteForceResult {
  bool feasible = false;
  double objective = 0.0;
  BinaryAssignment assignment;
  std::size_t enumerated = 0;
};

// Exhaustive integer optimum over all (J+1)^I assignments; hard constraint
// satisfaction within 1e-9. Guarded to (J+1)^I <= 1e7.
BruteForceResult brute_force_integer(const ProblemSpec& spec);

}  // namespace assign
