#include "assign/subsolver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "assign/errors.hpp"

namespace assign {

namespace {

double coordinate(double gamma, double eta, double pi) {
  double t = eta + pi;
  return t < 0.0 ? -t / (2.0 * gamma) : 0.0;
}

double coordinate_sum(std::span<const double> gamma, std::span<const double> eta,
                      double pi) {
  double s = 0.0;
  for (std::size_t j = 0; j < gamma.size(); ++j)
    s += coordinate(gamma[j], eta[j], pi);
  return s;
}

double dual_value(std::span<const double> gamma, std::span<const double> eta,
                  double pi) {
  double q = -pi;
  for (std::size_t j = 0; j < gamma.size(); ++j) {
    double t = eta[j] + pi;
    if (t < 0.0) q -= t * t / (4.0 * gamma[j]);
  }
  return q;
}

void check_gammas(std::span<const double> gamma) {
  for (double g : gamma)
    if (!(g > 1e-30))
      fail("nonpositive-gamma",
           "gamma " + std::to_string(g) + " is not strictly positive");
}

double search_multiplier(std::span<const double> gamma,
                         std::span<const double> eta,
                         SimplexQpWorkspace& ws) {
  if (coordinate_sum(gamma, eta, 0.0) <= 1.0) return 0.0;

  auto& bp = ws.breakpoints;
  bp.clear();
  bp.push_back(0.0);
  for (double e : eta)
    if (-e > 0.0) bp.push_back(-e);
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

  // The coordinate sum is continuous, piecewise linear, nonincreasing in pi,
  // > 1 at 0 and 0 at the last threshold, so the crossing is bracketed by a
  // pair of consecutive breakpoints. Keep sum(bp[lo]) > 1 >= sum(bp[hi]).
  std::size_t lo = 0, hi = bp.size() - 1;
  while (hi - lo > 1) {
    std::size_t mid = lo + (hi - lo) / 2;
    if (coordinate_sum(gamma, eta, bp[mid]) > 1.0)
      lo = mid;
    else
      hi = mid;
  }

  // Stationary point of the dual on the bracketed piece: the active set
  // holds the coordinates still positive there, and sum x_j(pi) = 1 gives
  // pi = -(sum eta/2gamma + 1)/(sum 1/2gamma).
  double inv_sum = 0.0, ratio_sum = 0.0;
  for (std::size_t j = 0; j < gamma.size(); ++j) {
    if (-eta[j] >= bp[hi]) {
      inv_sum += 1.0 / (2.0 * gamma[j]);
      ratio_sum += eta[j] / (2.0 * gamma[j]);
    }
  }
  double candidate = bp[hi];
  if (inv_sum > 0.0)
    candidate = std::clamp(-(ratio_sum + 1.0) / inv_sum, bp[lo], bp[hi]);

  double best = candidate;
  double best_val = dual_value(gamma, eta, candidate);
  for (double p : {bp[lo], bp[hi]}) {
    double v = dual_value(gamma, eta, p);
    if (v > best_val) {
      best_val = v;
      best = p;
    }
  }
  return best;
}

}  // namespace

double solve_simplex_qp_into(std::span<const double> gamma,
                             std::span<const double> eta, std::span<double> x,
                             SimplexQpWorkspace& ws) {
  check_gammas(gamma);
  double pi = search_multiplier(gamma, eta, ws);
  for (std::size_t j = 0; j < gamma.size(); ++j)
    x[j] = coordinate(gamma[j], eta[j], pi);
  return pi;
}

std::vector<double> solve_simplex_qp(const SimplexQpInstance& inst) {
  std::vector<double> x(inst.gamma.size());
  SimplexQpWorkspace ws;
  solve_simplex_qp_into(inst.gamma, inst.eta, x, ws);
  return x;
}

double dual_search(const SimplexQpInstance& inst) {
  check_gammas(inst.gamma);
  SimplexQpWorkspace ws;
  return search_multiplier(inst.gamma, inst.eta, ws);
}

namespace {

void project_box(std::span<double> x) {
  for (double& v : x) v = std::clamp(v, 0.0, 1.0);
}

// Euclidean projection onto {x >= 0, sum x <= 1}: clamp if that already
// lands inside, otherwise project onto the face sum x = 1.
void project_simplex_le1(std::span<double> x, std::vector<double>& scratch) {
  double clamped_sum = 0.0;
  for (double v : x) clamped_sum += std::max(v, 0.0);
  if (clamped_sum <= 1.0) {
    for (double& v : x) v = std::max(v, 0.0);
    return;
  }
  scratch.assign(x.begin(), x.end());
  std::sort(scratch.begin(), scratch.end(), std::greater<>());
  double running = 0.0, tau = 0.0;
  std::size_t active = 0;
  for (std::size_t k = 0; k < scratch.size(); ++k) {
    running += scratch[k];
    double t = (running - 1.0) / static_cast<double>(k + 1);
    if (scratch[k] - t > 0.0) {
      tau = t;
      active = k + 1;
    }
  }
  (void)active;
  for (double& v : x) v = std::max(v - tau, 0.0);
}

}  // namespace

std::vector<double> solve_block_generic(const SimplexQpInstance& inst,
                                        const BlockDescriptor& desc) {
  check_gammas(inst.gamma);
  const std::size_t J = inst.gamma.size();
  std::vector<double> scratch;
  auto project = [&](std::span<double> x) {
    switch (desc.kind) {
      case BlockConstraintKind::simplex_le1:
        project_simplex_le1(x, scratch);
        break;
      case BlockConstraintKind::box_only:
        project_box(x);
        break;
      case BlockConstraintKind::custom:
        if (!desc.project)
          fail("no-convergence", "custom block descriptor lacks a projection");
        desc.project(x);
        break;
    }
  };
  auto objective = [&](const std::vector<double>& x) {
    double q = 0.0;
    for (std::size_t j = 0; j < J; ++j)
      q += inst.gamma[j] * x[j] * x[j] + inst.eta[j] * x[j];
    return q;
  };

  std::vector<double> x(J, 0.0);
  project(x);
  std::vector<double> grad(J), trial(J), residual(J);
  double step = 1.0;
  // Steps at or below 1/L (L = 2 max gamma) satisfy the descent lemma
  // unconditionally, so the Armijo test is skipped there: near the optimum
  // the objective differences fall under FP noise and would otherwise
  // reject genuine descent steps forever.
  double max_gamma = 0.0;
  for (double g : inst.gamma) max_gamma = std::max(max_gamma, g);
  const double safe_step = 0.5 / max_gamma;
  for (std::size_t iter = 0; iter < desc.max_steps; ++iter) {
    for (std::size_t j = 0; j < J; ++j)
      grad[j] = 2.0 * inst.gamma[j] * x[j] + inst.eta[j];

    residual = x;
    for (std::size_t j = 0; j < J; ++j) residual[j] -= grad[j];
    project(residual);
    double r2 = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      double d = x[j] - residual[j];
      r2 += d * d;
    }
    if (std::sqrt(r2) <= desc.tol) return x;

    double fx = objective(x);
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < J; ++j) trial[j] = x[j] - step * grad[j];
      project(trial);
      double lin = 0.0, dist2 = 0.0;
      for (std::size_t j = 0; j < J; ++j) {
        double d = trial[j] - x[j];
        lin += grad[j] * d;
        dist2 += d * d;
      }
      if (step <= safe_step || objective(trial) <= fx + lin + dist2 / (2.0 * step)) {
        x = trial;
        moved = true;
        step *= 1.5;
        break;
      }
      step *= 0.5;
    }
    if (!moved)
      fail("no-convergence", "backtracking stalled after 60 halvings");
  }
  fail("no-convergence",
       "projected gradient hit the step cap of " +
           std::to_string(desc.max_steps));
}

}  // namespace assign
