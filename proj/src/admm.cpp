#include "assign/admm.hpp"

#include <chrono>
#include <cmath>
#include <string>
#include <utility>

#include "assign/engine.hpp"
#include "assign/errors.hpp"
#include "assign/io_util.hpp"
#include "assign/log.hpp"
#include "assign/repro_sum.hpp"
#include "assign/rng.hpp"
#include "assign/subsolver.hpp"

namespace assign {

IterationState initial_state(const ProblemSpec& spec) {
  IterationState state;
  state.t = 0;
  state.X = MatrixD(spec.I, spec.J);
  state.xi = MatrixD(spec.M, spec.J);
  state.lam = MatrixD(spec.M, spec.J);
  state.mu = MatrixD(spec.N, spec.J);
  return state;
}

std::vector<CombinedConstraint> combine_constraints(const ProblemSpec& spec,
                                                    const IterationState& state) {
  std::vector<CombinedConstraint> out;
  out.reserve(spec.M + spec.N);
  for (std::size_t s = 0; s < spec.M + spec.N; ++s) {
    CombinedConstraint cc;
    cc.s = s;
    cc.is_eq = s >= spec.M;
    cc.row = cc.is_eq ? s - spec.M : s;
    cc.d.assign(spec.J, 0.0);
    cc.nu.assign(spec.J, 0.0);
    cc.active.assign(spec.J, 0);
    for (std::size_t j = 0; j < spec.J; ++j) {
      if (!cc.is_eq) {
        double bound = spec.b.at(cc.row, j);
        if (!std::isfinite(bound)) continue;
        cc.active[j] = 1;
        cc.d[j] = bound - state.xi.at(cc.row, j);
        cc.nu[j] = state.lam.at(cc.row, j);
      } else {
        double target = spec.c.at(cc.row, j);
        if (!std::isfinite(target)) continue;
        cc.active[j] = 1;
        cc.d[j] = target;
        cc.nu[j] = state.mu.at(cc.row, j);
      }
    }
    out.push_back(std::move(cc));
  }
  return out;
}

std::vector<std::vector<double>> constraint_lhs(const ProblemSpec& spec,
                                                const MatrixD& X) {
  const std::size_t S = spec.M + spec.N;
  ReproSum codec(spec.coeff_bound());
  std::vector<__int128> raw(S * spec.J, 0);
  for (std::size_t i = 0; i < spec.I; ++i) {
    auto x = X.row(i);
    for (std::size_t s = 0; s < S; ++s) {
      double w = spec.w(s, i);
      __int128* slot = raw.data() + s * spec.J;
      for (std::size_t j = 0; j < spec.J; ++j)
        slot[j] += codec.quantize(w * x[j]);
    }
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

namespace {

std::vector<double> column_sigma(const ProblemSpec& spec, const MatrixD& X) {
  ReproSum codec(spec.coeff_bound());
  std::vector<__int128> raw(spec.J, 0);
  for (std::size_t i = 0; i < spec.I; ++i) {
    auto x = X.row(i);
    auto omega = spec.omega(i);
    for (std::size_t j = 0; j < spec.J; ++j)
      raw[j] += codec.quantize(omega[j] * x[j]);
  }
  std::vector<double> out(spec.J);
  for (std::size_t j = 0; j < spec.J; ++j) {
    ReproSum acc = codec;  // same unit, zero accumulator
    acc.merge_raw(raw[j]);
    out[j] = acc.value();
  }
  return out;
}

std::vector<std::vector<double>> residuals_from_lhs(
    const ProblemSpec& spec, const std::vector<std::vector<double>>& sw,
    const std::vector<CombinedConstraint>& combined) {
  std::vector<std::vector<double>> r(combined.size(),
                                     std::vector<double>(spec.J, 0.0));
  for (std::size_t s = 0; s < combined.size(); ++s) {
    const auto& cc = combined[s];
    for (std::size_t j = 0; j < spec.J; ++j) {
      if (!cc.active[j]) continue;
      r[s][j] = sw[s][j] - cc.d[j] + cc.nu[j] / spec.rho;
    }
  }
  return r;
}

// One Jacobi sweep over items [lo, hi): form each item's diagonal quadratic
// from the shared snapshot and solve it on the simplex. Identical code runs
// serially (primal_update) and inside engine workers, so both paths produce
// the same doubles.
void update_rows(const ProblemSpec& spec, const ObjectiveModel& obj,
                 const MatrixD& X_old, std::size_t lo, std::size_t hi,
                 const std::vector<std::vector<double>>& r,
                 const std::vector<double>& phi_factor, double beta,
                 double rho, MatrixD& X_new) {
  const std::size_t J = spec.J;
  const std::size_t S = spec.M + spec.N;
  std::vector<double> pen(J), gamma(J), eta(J);
  SimplexQpWorkspace ws;
  for (std::size_t i = lo; i < hi; ++i) {
    auto xo = X_old.row(i);
    auto omega = spec.omega(i);
    std::fill(pen.begin(), pen.end(), 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      double w = spec.w(s, i);
      const auto& rs = r[s];
      for (std::size_t j = 0; j < J; ++j) pen[j] += w * rs[j];
    }
    for (std::size_t j = 0; j < J; ++j) {
      double a = obj.g_coeff(spec, i, j);
      double q = obj.g_lin(spec, i, j);
      double f_prime = phi_factor[j] * omega[j];
      double g_prime = 2.0 * a * xo[j] + q;
      double B = -g_prime + f_prime + rho * pen[j];
      gamma[j] = a + beta;
      eta[j] = q + B - 2.0 * beta * xo[j];
    }
    solve_simplex_qp_into(gamma, eta, X_new.row(i), ws);
  }
}

// Fixed-point partials of the next iteration's owner aggregates: X^T w_s
// per combined constraint, sigma_j per owner, and the squared step for the
// dual residual. Additive into slots so chunked calls compose.
void accumulate_slots(const ProblemSpec& spec, double coeff_bound,
                      const MatrixD& X_old, const MatrixD& X_new,
                      std::size_t lo, std::size_t hi,
                      std::span<__int128> slots) {
  const std::size_t J = spec.J;
  const std::size_t S = spec.M + spec.N;
  // The bound scan is O(I), so the caller hoists it out of the chunk loop.
  ReproSum codec(coeff_bound);
  WideReproSum delta(1.0);
  for (std::size_t i = lo; i < hi; ++i) {
    auto xn = X_new.row(i);
    auto xo = X_old.row(i);
    for (std::size_t s = 0; s < S; ++s) {
      double w = spec.w(s, i);
      __int128* slot = slots.data() + s * J;
      for (std::size_t j = 0; j < J; ++j) slot[j] += codec.quantize(w * xn[j]);
    }
    auto omega = spec.omega(i);
    __int128* sig = slots.data() + S * J;
    for (std::size_t j = 0; j < J; ++j) sig[j] += codec.quantize(omega[j] * xn[j]);
    for (std::size_t j = 0; j < J; ++j) {
      double d = xn[j] - xo[j];
      delta.add(d * d);
    }
  }
  slots[(S + 1) * J] += delta.raw_hi();
  slots[(S + 1) * J + 1] += delta.raw_lo();
}

MatrixD xi_from_lhs(const ProblemSpec& spec,
                    const std::vector<std::vector<double>>& sw,
                    const MatrixD& lam, double rho) {
  MatrixD xi(spec.M, spec.J);
  for (std::size_t m = 0; m < spec.M; ++m)
    for (std::size_t j = 0; j < spec.J; ++j) {
      double bound = spec.b.at(m, j);
      if (!std::isfinite(bound)) continue;
      double l = -sw[m][j] + bound - lam.at(m, j) / rho;
      xi.at(m, j) = std::max(0.0, l);
    }
  return xi;
}

// lambda keyed off the slack sign: a strictly positive slack means the
// unconstrained minimizer was interior, where the multiplier is exactly
// zero. Writing 0 instead of lam + rho*(S + xi - b) keeps complementarity
// exact instead of accurate-to-roundoff.
DualUpdateResult duals_from_lhs(const ProblemSpec& spec,
                                const std::vector<std::vector<double>>& sw,
                                const MatrixD& xi_next, const MatrixD& lam,
                                const MatrixD& mu, double rho) {
  DualUpdateResult out;
  out.lam = MatrixD(spec.M, spec.J);
  out.mu = MatrixD(spec.N, spec.J);
  for (std::size_t m = 0; m < spec.M; ++m)
    for (std::size_t j = 0; j < spec.J; ++j) {
      double bound = spec.b.at(m, j);
      if (!std::isfinite(bound)) continue;
      if (xi_next.at(m, j) > 0.0)
        out.lam.at(m, j) = 0.0;
      else
        out.lam.at(m, j) = lam.at(m, j) + rho * (sw[m][j] - bound);
    }
  for (std::size_t n = 0; n < spec.N; ++n)
    for (std::size_t j = 0; j < spec.J; ++j) {
      double target = spec.c.at(n, j);
      if (!std::isfinite(target)) continue;
      out.mu.at(n, j) = mu.at(n, j) + rho * (sw[spec.M + n][j] - target);
    }
  return out;
}

}  // namespace

std::vector<std::vector<double>> penalty_residuals(
    const ProblemSpec& spec, const MatrixD& X,
    const std::vector<CombinedConstraint>& combined) {
  return residuals_from_lhs(spec, constraint_lhs(spec, X), combined);
}

MatrixD compute_B(const ProblemSpec& spec, const ObjectiveModel& objective,
                  const MatrixD& X_t,
                  const std::vector<CombinedConstraint>& combined) {
  MatrixD B(spec.I, spec.J);
  MatrixD fg = objective.f_grad(spec, X_t);
  MatrixD gg = objective.g_grad(spec, X_t);
  auto r = penalty_residuals(spec, X_t, combined);
  for (std::size_t i = 0; i < spec.I; ++i)
    for (std::size_t j = 0; j < spec.J; ++j) {
      double pen = 0.0;
      for (std::size_t s = 0; s < spec.M + spec.N; ++s)
        pen += spec.w(s, i) * r[s][j];
      B.at(i, j) = -gg.at(i, j) + fg.at(i, j) + spec.rho * pen;
    }
  return B;
}

MatrixD primal_update(const ProblemSpec& spec, const ObjectiveModel& objective,
                      const IterationState& state) {
  auto sw = constraint_lhs(spec, state.X);
  auto combined = combine_constraints(spec, state);
  auto r = residuals_from_lhs(spec, sw, combined);
  auto sigma = column_sigma(spec, state.X);
  std::vector<double> phi(spec.J);
  for (std::size_t j = 0; j < spec.J; ++j)
    phi[j] = objective.phi_prime(spec, j, sigma[j]);
  MatrixD X_new(spec.I, spec.J);
  update_rows(spec, objective, state.X, 0, spec.I, r, phi, spec.beta, spec.rho,
              X_new);
  return X_new;
}

MatrixD xi_update(const ProblemSpec& spec, const MatrixD& X_next,
                  const MatrixD& lam, double rho) {
  return xi_from_lhs(spec, constraint_lhs(spec, X_next), lam, rho);
}

DualUpdateResult dual_update(const ProblemSpec& spec, const MatrixD& X_next,
                             const MatrixD& xi_next, const IterationState& state,
                             double rho) {
  return duals_from_lhs(spec, constraint_lhs(spec, X_next), xi_next, state.lam,
                        state.mu, rho);
}

double ineq_mapd_from_lhs(const ProblemSpec& spec,
                          const std::vector<std::vector<double>>& sw) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t m = 0; m < spec.M; ++m)
    for (std::size_t j = 0; j < spec.J; ++j) {
      double bound = spec.b.at(m, j);
      if (!std::isfinite(bound)) continue;
      if (bound == 0.0)
        fail("zero-denominator", "b[" + std::to_string(m) + "][" +
                                     std::to_string(j) +
                                     "] is zero; cannot form a relative "
                                     "violation");
      sum += std::max(sw[m][j] - bound, 0.0) / std::abs(bound);
      ++count;
    }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double eq_mapd_from_lhs(const ProblemSpec& spec,
                        const std::vector<std::vector<double>>& sw) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < spec.N; ++n)
    for (std::size_t j = 0; j < spec.J; ++j) {
      double target = spec.c.at(n, j);
      if (!std::isfinite(target)) continue;
      sum += std::abs((sw[spec.M + n][j] - target) / target);
      ++count;
    }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::string trace_to_csv(const ConvergenceTrace& trace) {
  std::string out = "iter,objective,ineq_mapd,eq_mapd,dual_residual,wall_ms\n";
  for (const auto& row : trace.rows) {
    out += std::to_string(row.t);
    out += ',';
    out += format_double(row.objective);
    out += ',';
    out += format_double(row.ineq_mapd);
    out += ',';
    out += format_double(row.eq_mapd);
    out += ',';
    out += format_double(row.dual_residual);
    out += ',';
    out += format_double(row.wall_ms);
    out += '\n';
  }
  return out;
}

ConvergenceTrace trace_from_csv(const std::string& text) {
  auto lines = split_lines(text);
  if (lines.empty() ||
      lines[0] != "iter,objective,ineq_mapd,eq_mapd,dual_residual,wall_ms")
    fail("malformed-trace", "missing or wrong header row");
  ConvergenceTrace trace;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    auto cells = split_csv_line(lines[k]);
    if (cells.size() != 6)
      fail("malformed-trace",
           "row " + std::to_string(k) + " has " + std::to_string(cells.size()) +
               " fields, expected 6");
    TraceRow row;
    row.t = static_cast<std::size_t>(parse_double(cells[0]));
    row.objective = parse_double(cells[1]);
    row.ineq_mapd = parse_double(cells[2]);
    row.eq_mapd = parse_double(cells[3]);
    row.dual_residual = parse_double(cells[4]);
    row.wall_ms = parse_double(cells[5]);
    trace.rows.push_back(row);
  }
  return trace;
}

std::string solution_to_csv(const MatrixD& X) {
  std::string out = "item_id";
  for (std::size_t j = 0; j < X.cols(); ++j)
    out += ",x_" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < X.rows(); ++i) {
    out += std::to_string(i);
    auto row = X.row(i);
    for (std::size_t j = 0; j < X.cols(); ++j) {
      out += ',';
      out += format_double(row[j]);
    }
    out += '\n';
  }
  return out;
}

MatrixD solution_from_csv(const std::string& text) {
  auto lines = split_lines(text);
  if (lines.empty() || !lines[0].starts_with("item_id,x_0"))
    fail("malformed-solution", "missing or wrong header row");
  std::size_t cols = split_csv_line(lines[0]).size() - 1;
  std::vector<double> values;
  std::size_t rows = 0;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    auto cells = split_csv_line(lines[k]);
    if (cells.size() != cols + 1)
      fail("malformed-solution",
           "row " + std::to_string(k) + " has " + std::to_string(cells.size()) +
               " fields, expected " + std::to_string(cols + 1));
    if (static_cast<std::size_t>(parse_double(cells[0])) != rows)
      fail("malformed-solution", "row " + std::to_string(k) + " is out of order");
    for (std::size_t j = 0; j < cols; ++j)
      values.push_back(parse_double(cells[j + 1]));
    ++rows;
  }
  MatrixD X(rows, cols);
  X.data() = std::move(values);
  return X;
}

SolveResult solve(const ProblemSpec& spec, const SolverConfig& config,
                  Engine& engine, std::optional<std::size_t> resume_from) {
  validate(spec);
  if (spec.beta <= 1e-30)
    fail("nonpositive-gamma",
         "beta " + format_double(spec.beta) +
             " leaves the per-item quadratic without curvature");
  auto objective = make_objective(spec, config.dominance);

  // Plug-in contract probe, debug builds of a run only: the decomposition is
  // valid iff g - f stays convex, so sample midpoint convexity and warn when
  // a custom model breaks it.
  if (log_level() >= LogLevel::debug) {
    auto omega1 = [&](const MatrixD& X) {
      return objective->g_eval(spec, X) - objective->f_eval(spec, X);
    };
    MatrixD A(spec.I, spec.J), Bm(spec.I, spec.J), mid(spec.I, spec.J);
    for (std::uint64_t pair = 0; pair < 8; ++pair) {
      for (std::size_t k = 0; k < A.data().size(); ++k) {
        A.data()[k] =
            rng_uniform01(spec.seed, RngStream::test, pair * 2000000 + k);
        Bm.data()[k] = rng_uniform01(spec.seed, RngStream::test,
                                     pair * 2000000 + 1000000 + k);
        mid.data()[k] = 0.5 * (A.data()[k] + Bm.data()[k]);
      }
      double gap = omega1(mid) - 0.5 * omega1(A) - 0.5 * omega1(Bm);
      if (gap > 1e-9) {
        log_error("objective model violates midpoint convexity of g - f (gap ",
                  gap, "); the decomposition may diverge");
        break;
      }
    }
  }

  IterationState state;
  if (resume_from.has_value()) {
    if (config.checkpoint_dir.empty())
      fail("missing-record", "resume requested without a checkpoint directory");
    CheckpointData ck =
        read_checkpoint(config.checkpoint_dir, *resume_from, spec);
    state.t = ck.t;
    state.X = std::move(ck.X);
    state.xi = std::move(ck.xi);
    state.lam = std::move(ck.lam);
    state.mu = std::move(ck.mu);
    log_info("resumed from checkpoint at iteration ", state.t);
  } else {
    state = initial_state(spec);
  }

  const std::size_t S = spec.M + spec.N;
  const std::size_t slot_count = (S + 1) * spec.J + 2;
  const double bound = spec.coeff_bound();
  const std::size_t trace_every =
      config.trace_every > 0 ? config.trace_every : (spec.I <= 100000 ? 1 : 10);

  // Owner-side aggregates of the current X; on resume these reductions are
  // bit-identical to the ones the original run had in flight.
  auto sw = constraint_lhs(spec, state.X);
  auto sigma = column_sigma(spec, state.X);

  MatrixD X_new(spec.I, spec.J);
  SolveResult result;
  std::size_t t = state.t;
  bool converged = false;

  while (t < config.max_iters && !converged) {
    auto tick = std::chrono::steady_clock::now();
    auto combined = combine_constraints(spec, state);
    auto r = residuals_from_lhs(spec, sw, combined);
    std::vector<double> phi(spec.J);
    for (std::size_t j = 0; j < spec.J; ++j)
      phi[j] = objective->phi_prime(spec, j, sigma[j]);

    DualBroadcast bcast{t, std::move(r), sigma, spec.beta, spec.rho};
    auto work = [&](const Partition& part, const DualBroadcast& bc,
                    std::span<__int128> slots) {
      update_rows(spec, *objective, state.X, part.lo, part.hi, bc.r, phi,
                  bc.beta, bc.rho, X_new);
      accumulate_slots(spec, bound, state.X, X_new, part.lo, part.hi, slots);
    };
    auto merged = engine.run_iteration(bcast, work, slot_count);

    auto slot_value = [&](std::size_t k) {
      ReproSum acc(bound);
      acc.merge_raw(merged[k]);
      return acc.value();
    };
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t j = 0; j < spec.J; ++j) sw[s][j] = slot_value(s * spec.J + j);
    for (std::size_t j = 0; j < spec.J; ++j) sigma[j] = slot_value(S * spec.J + j);
    WideReproSum delta(1.0);
    delta.merge_raw(merged[(S + 1) * spec.J], merged[(S + 1) * spec.J + 1]);
    double dual_residual = std::sqrt(
        std::max(0.0, delta.value()) /
        (static_cast<double>(spec.I) * static_cast<double>(spec.J)));

    MatrixD xi_next = xi_from_lhs(spec, sw, state.lam, spec.rho);
    DualUpdateResult duals =
        duals_from_lhs(spec, sw, xi_next, state.lam, state.mu, spec.rho);

    ++t;
    std::swap(state.X, X_new);
    state.xi = std::move(xi_next);
    state.lam = std::move(duals.lam);
    state.mu = std::move(duals.mu);
    state.t = t;

    double objective_value = 0.0;
    for (std::size_t j = 0; j < spec.J; ++j)
      objective_value += objective->phi(spec, j, sigma[j]);
    double ineq_mapd = ineq_mapd_from_lhs(spec, sw);
    double eq_mapd = eq_mapd_from_lhs(spec, sw);

    // A disabled (negative) tolerance cannot trigger convergence; with all
    // three disabled the loop always runs to max_iters.
    bool any_enabled = config.ineq_tol >= 0.0 || config.eq_tol >= 0.0 ||
                       config.dual_tol >= 0.0;
    converged = any_enabled &&
                (config.ineq_tol < 0.0 || ineq_mapd <= config.ineq_tol) &&
                (config.eq_tol < 0.0 || eq_mapd <= config.eq_tol) &&
                (config.dual_tol < 0.0 || dual_residual <= config.dual_tol);

    double wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - tick)
                         .count();
    if (t % trace_every == 0 || converged || t == config.max_iters)
      result.trace.rows.push_back(
          {t, objective_value, ineq_mapd, eq_mapd, dual_residual, wall_ms});

    if (!config.checkpoint_dir.empty() && config.checkpoint_every > 0 &&
        t % config.checkpoint_every == 0)
      write_checkpoint(config.checkpoint_dir, t, spec, engine.partitions(),
                       state.X, state.xi, state.lam, state.mu);
  }

  result.X = std::move(state.X);
  result.iterations = t;
  result.converged = converged;
  return result;
}

}  // namespace assign
