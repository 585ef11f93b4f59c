#pragma once

#include <functional>
#include <span>
#include <vector>

namespace assign {

// Per-item diagonal quadratic over the probability simplex:
//   min sum_j gamma_j x_j^2 + eta_j x_j   s.t.  sum_j x_j <= 1, x_j >= 0.
struct SimplexQpInstance {
  std::vector<double> gamma;  // strictly positive
  std::vector<double> eta;
};

// Reusable scratch so the per-item hot loop does not allocate.
class SimplexQpWorkspace {
 public:
  std::vector<double> breakpoints;
};

// Writes the minimizer into x (size J) and returns the optimal multiplier
// pi* >= 0 of the simplex constraint. O(J ln J): sort the thresholds -eta_j,
// binary-search the interval where the concave dual peaks, then take the
// clamped closed-form stationary point with the best dual value.
double solve_simplex_qp_into(std::span<const double> gamma,
                             std::span<const double> eta, std::span<double> x,
                             SimplexQpWorkspace& ws);

std::vector<double> solve_simplex_qp(const SimplexQpInstance& inst);

double dual_search(const SimplexQpInstance& inst);

enum class BlockConstraintKind { simplex_le1, box_only, custom };

struct BlockDescriptor {
  BlockConstraintKind kind = BlockConstraintKind::simplex_le1;
  // Euclidean projection onto the feasible set; required for custom.
  std::function<void(std::span<double>)> project;
  std::size_t max_steps = 10000;
  double tol = 1e-8;
};

// Projected gradient with backtracking for the same diagonal quadratic over
// an arbitrary convex per-item set. Fallback path for constraints other
// than the simplex; also the cross-check for solve_simplex_qp.
std::vector<double> solve_block_generic(const SimplexQpInstance& inst,
                                        const BlockDescriptor& desc);

}  // namespace assign
