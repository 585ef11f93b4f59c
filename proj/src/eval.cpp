#include "assign/eval.hpp"

#include <cmath>

#include "json.hpp"

#include "assign/admm.hpp"
#include "assign/errors.hpp"
#include "assign/objective.hpp"

namespace assign {

double objective_apd(double sol, double reference) {
  if (reference == 0.0)
    fail("zero-reference", "objective APD needs a nonzero reference");
  return std::abs((sol - reference) / reference);
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

double ineq_apd(std::span<const double> x_col, std::span<const double> u_col,
                double b) {
  if (b == 0.0) fail("zero-denominator", "inequality bound is zero");
  return std::max(dot(x_col, u_col) - b, 0.0) / std::abs(b);
}

double eq_apd(std::span<const double> x_col, std::span<const double> v_col,
              double c) {
  if (c == 0.0) fail("zero-denominator", "equality target is zero");
  return std::abs((dot(x_col, v_col) - c) / c);
}

namespace {

SolutionReport report_from_lhs(const ProblemSpec& spec,
                               const std::vector<std::vector<double>>& sw,
                               double objective,
                               std::optional<double> reference) {
  SolutionReport report;
  report.objective = objective;
  if (reference.has_value())
    report.objective_apd = objective_apd(objective, *reference);
  double ineq_sum = 0.0, eq_sum = 0.0;
  for (std::size_t m = 0; m < spec.M; ++m)
    for (std::size_t j = 0; j < spec.J; ++j) {
      double bound = spec.b.at(m, j);
      if (!std::isfinite(bound)) continue;
      if (bound == 0.0) fail("zero-denominator", "inequality bound is zero");
      double apd = std::max(sw[m][j] - bound, 0.0) / std::abs(bound);
      report.ineq_apds.push_back(apd);
      ineq_sum += apd;
    }
  for (std::size_t n = 0; n < spec.N; ++n)
    for (std::size_t j = 0; j < spec.J; ++j) {
      double target = spec.c.at(n, j);
      if (!std::isfinite(target)) continue;
      double apd = std::abs((sw[spec.M + n][j] - target) / target);
      report.eq_apds.push_back(apd);
      eq_sum += apd;
    }
  report.ineq_mapd = report.ineq_apds.empty()
                         ? 0.0
                         : ineq_sum / static_cast<double>(report.ineq_apds.size());
  report.eq_mapd = report.eq_apds.empty()
                       ? 0.0
                       : eq_sum / static_cast<double>(report.eq_apds.size());
  return report;
}

}  // namespace

SolutionReport evaluate(const ProblemSpec& spec, const MatrixD& X,
                        std::optional<double> reference) {
  auto objective = make_objective(spec);
  return report_from_lhs(spec, constraint_lhs(spec, X),
                         objective->f_eval(spec, X), reference);
}

SolutionReport evaluate_binary(const ProblemSpec& spec,
                               const BinaryAssignment& asg,
                               std::optional<double> reference) {
  auto objective = make_objective(spec);
  std::vector<double> sigma(spec.J, 0.0);
  for (std::size_t i = 0; i < spec.I; ++i) {
    std::int32_t j = asg.owner[i];
    if (j == BinaryAssignment::kNone) continue;
    sigma[static_cast<std::size_t>(j)] += spec.omega(i)[static_cast<std::size_t>(j)];
  }
  double f = 0.0;
  for (std::size_t j = 0; j < spec.J; ++j)
    f += objective->phi(spec, j, sigma[j]);
  return report_from_lhs(spec, assignment_lhs(spec, asg), f, reference);
}

std::string report_to_json(const SolutionReport& report) {
  nlohmann::json j;
  j["objective"] = report.objective;
  if (report.objective_apd.has_value())
    j["objective_apd"] = *report.objective_apd;
  else
    j["objective_apd"] = nullptr;
  j["ineq_mapd"] = report.ineq_mapd;
  j["eq_mapd"] = report.eq_mapd;
  j["ineq_apds"] = report.ineq_apds;
  j["eq_apds"] = report.eq_apds;
  return j.dump(2) + "\n";
}

BruteForceResult brute_force_integer(const ProblemSpec& spec) {
  double combos = std::pow(static_cast<double>(spec.J) + 1.0,
                           static_cast<double>(spec.I));
  if (!(combos <= 1e7))
    fail("size-guard", "(J+1)^I = " + std::to_string(combos) +
                           " exceeds the enumeration budget of 1e7");
  auto objective = make_objective(spec);
  const std::size_t S = spec.M + spec.N;
  constexpr double kTol = 1e-9;

  BruteForceResult result;
  BinaryAssignment current;
  current.owner.assign(spec.I, BinaryAssignment::kNone);
  std::vector<double> sw(S * spec.J, 0.0);
  std::vector<double> sigma(spec.J, 0.0);

  // Odometer over owners {-1, 0, .., J-1} per item, with the running
  // owner-side sums updated incrementally.
  auto apply = [&](std::size_t i, std::int32_t j, double sign) {
    if (j == BinaryAssignment::kNone) return;
    auto col = static_cast<std::size_t>(j);
    for (std::size_t s = 0; s < S; ++s) sw[s * spec.J + col] += sign * spec.w(s, i);
    sigma[col] += sign * spec.omega(i)[col];
  };

  std::size_t enumerated = 0;
  for (;;) {
    ++enumerated;
    bool feasible = true;
    for (std::size_t m = 0; m < spec.M && feasible; ++m)
      for (std::size_t j = 0; j < spec.J; ++j) {
        double bound = spec.b.at(m, j);
        if (!std::isfinite(bound)) continue;
        if (sw[m * spec.J + j] > bound + kTol) {
          feasible = false;
          break;
        }
      }
    for (std::size_t n = 0; n < spec.N && feasible; ++n)
      for (std::size_t j = 0; j < spec.J; ++j) {
        double target = spec.c.at(n, j);
        if (!std::isfinite(target)) continue;
        if (std::abs(sw[(spec.M + n) * spec.J + j] - target) > kTol) {
          feasible = false;
          break;
        }
      }
    if (feasible) {
      double f = 0.0;
      for (std::size_t j = 0; j < spec.J; ++j)
        f += objective->phi(spec, j, sigma[j]);
      if (!result.feasible || f < result.objective) {
        result.feasible = true;
        result.objective = f;
        result.assignment = current;
      }
    }
    // advance the odometer
    std::size_t i = 0;
    for (; i < spec.I; ++i) {
      apply(i, current.owner[i], -1.0);
      if (current.owner[i] + 1 < static_cast<std::int32_t>(spec.J)) {
        ++current.owner[i];
        apply(i, current.owner[i], 1.0);
        break;
      }
      current.owner[i] = BinaryAssignment::kNone;
    }
    if (i == spec.I) break;
  }
  result.enumerated = enumerated;
  return result;
}

}  // namespace assign
