#include "assign/rounding.hpp"

#include <algorithm>
#include <cmath>

#include "assign/admm.hpp"
#include "assign/errors.hpp"
#include "assign/io_util.hpp"
#include "assign/repro_sum.hpp"
#include "assign/rng.hpp"

namespace assign {

namespace {
constexpr double kRowSumEps = 1e-6;
}

BinaryAssignment round_solution(const ProblemSpec& spec, const MatrixD& X,
                                std::uint64_t seed, std::uint64_t repeat) {
  if (X.rows() != spec.I || X.cols() != spec.J)
    fail("dimension-mismatch", "solution shape does not match the problem");
  BinaryAssignment asg;
  asg.owner.assign(spec.I, BinaryAssignment::kNone);
  std::vector<double> p(spec.J);
  for (std::size_t i = 0; i < spec.I; ++i) {
    auto row = X.row(i);
    double sum = 0.0;
    for (std::size_t j = 0; j < spec.J; ++j) {
      p[j] = std::max(0.0, row[j]);
      sum += p[j];
    }
    if (sum > 1.0 + kRowSumEps)
      fail("row-sum-exceeds-tolerance",
           "item " + std::to_string(i) + " has probability mass " +
               format_double(sum));
    double scale = sum > 1.0 ? 1.0 / sum : 1.0;
    double draw = rng_uniform01(seed, RngStream::rounding,
                                repeat * spec.I + i);
    double acc = 0.0;
    for (std::size_t j = 0; j < spec.J; ++j) {
      acc += p[j] * scale;
      if (draw < acc) {
        asg.owner[i] = static_cast<std::int32_t>(j);
        break;
      }
    }
  }
  return asg;
}

std::vector<std::vector<double>> assignment_lhs(const ProblemSpec& spec,
                                                const BinaryAssignment& asg) {
  if (asg.owner.size() != spec.I)
    fail("dimension-mismatch", "assignment length does not match item count");
  const std::size_t S = spec.M + spec.N;
  ReproSum codec(spec.coeff_bound());
  std::vector<__int128> raw(S * spec.J, 0);
  for (std::size_t i = 0; i < spec.I; ++i) {
    std::int32_t j = asg.owner[i];
    if (j == BinaryAssignment::kNone) continue;
    if (j < 0 || static_cast<std::size_t>(j) >= spec.J)
      fail("dimension-mismatch",
           "item " + std::to_string(i) + " assigned to owner " +
               std::to_string(j) + " outside [0, J)");
    for (std::size_t s = 0; s < S; ++s)
      raw[s * spec.J + static_cast<std::size_t>(j)] +=
          codec.quantize(spec.w(s, i));
  }
  std::vector<std::vector<double>> out(S, std::vector<double>(spec.J));
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t j = 0; j < spec.J; ++j) {
      ReproSum acc = codec;  // same unit, zero accumulator
      acc.merge_raw(raw[s * spec.J + j]);
      out[s][j] = acc.value();
    }
  return out;
}

RoundedPick round_best(const ProblemSpec& spec, const MatrixD& X,
                       std::uint64_t seed, std::size_t repeats) {
  if (repeats == 0) repeats = 1;
  RoundedPick best;
  double best_score = 0.0;
  for (std::uint64_t r = 0; r < repeats; ++r) {
    BinaryAssignment asg = round_solution(spec, X, seed, r);
    auto sw = assignment_lhs(spec, asg);
    double ineq = ineq_mapd_from_lhs(spec, sw);
    double eq = eq_mapd_from_lhs(spec, sw);
    double score = ineq + eq;
    if (r == 0 || score < best_score) {
      best_score = score;
      best.assignment = std::move(asg);
      best.repeat = r;
      best.ineq_mapd = ineq;
      best.eq_mapd = eq;
    }
  }
  return best;
}

std::string assignment_to_csv(const BinaryAssignment& asg) {
  std::string out = "item_id,owner\n";
  for (std::size_t i = 0; i < asg.owner.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += std::to_string(asg.owner[i]);
    out += '\n';
  }
  return out;
}

BinaryAssignment assignment_from_csv(const std::string& text) {
  auto lines = split_lines(text);
  if (lines.empty() || lines[0] != "item_id,owner")
    fail("malformed-assignment", "missing or wrong header row");
  BinaryAssignment asg;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    auto cells = split_csv_line(lines[k]);
    if (cells.size() != 2)
      fail("malformed-assignment", "row " + std::to_string(k) +
                                       " has " + std::to_string(cells.size()) +
                                       " fields, expected 2");
    std::size_t expect = asg.owner.size();
    if (static_cast<std::size_t>(parse_double(cells[0])) != expect)
      fail("malformed-assignment",
           "row " + std::to_string(k) + " is out of order");
    asg.owner.push_back(static_cast<std::int32_t>(parse_double(cells[1])));
  }
  return asg;
}

}  // namespace assign
