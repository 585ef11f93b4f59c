#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "assign/dense.hpp"
#include "assign/problem.hpp"

namespace assign {

// One owner per item or none. Sampling each row of a relaxed solution as a
// probability vector keeps every linear functional unbiased, which is the
// whole argument for rounding this way.
struct BinaryAssignment {
  static constexpr std::int32_t kNone = -1;
  std::vector<std::int32_t> owner;  // per item, in [0, J) or kNone
};

// Samples item i to owner j with probability x_ij, none with the leftover
// mass. Negative entries clamp to 0; row sums in (1, 1+1e-6] renormalize;
// anything larger is a row-sum-exceeds-tolerance error. Each item's draw is
// rng(seed, rounding, repeat * I + i), so results do not depend on item
// order, partitioning, or worker count.
BinaryAssignment round_solution(const ProblemSpec& spec, const MatrixD& X,
                                std::uint64_t seed, std::uint64_t repeat = 0);

// Owner-side sums X_hat^T w_s of a binary assignment, reduced with the same
// fixed-point codec as the continuous path.
std::vector<std::vector<double>> assignment_lhs(const ProblemSpec& spec,
                                                const BinaryAssignment& asg);

struct RoundedPick {
  BinaryAssignment assignment;
  std::uint64_t repeat = 0;  // which sample won
  double ineq_mapd = 0.0;
  double eq_mapd = 0.0;
};

// Draws `repeats` independent samples and keeps the one with the lowest
// combined constraint MAPD (ties to the earlier repeat).
RoundedPick round_best(const ProblemSpec& spec, const MatrixD& X,
                       std::uint64_t seed, std::size_t repeats);

std::string assignment_to_csv(const BinaryAssignment& asg);
BinaryAssignment assignment_from_csv(const std::string& text);

}  // namespace assign
