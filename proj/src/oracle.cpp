#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "assign/errors.hpp"
#include "assign/eval.hpp"
#include "assign/log.hpp"
#include "assign/objective.hpp"

namespace assign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Cell {
  std::size_t row;  // m or n
  std::size_t j;
  double target;  // b or c
};

// One rank-one Hessian direction supported on a single owner column:
// either the objective curvature (weight t * phi'') with values omega_ij,
// or an inequality barrier term (weight 1/slack^2) with values u_im.
struct LowRankTerm {
  std::size_t j;
  bool is_feature;      // false: omega values, true: u feature
  std::size_t feature;  // m when is_feature
  double weight;
};

struct Slacks {
  std::vector<double> sigma;      // per owner
  std::vector<double> row_slack;  // per item, 1 - sum_j x
  std::vector<double> ineq;       // per active inequality cell
  bool interior = true;
};

class BarrierProblem {
 public:
  BarrierProblem(const ProblemSpec& spec, const ObjectiveModel& obj)
      : spec_(spec), obj_(obj) {
    for (std::size_t m = 0; m < spec.M; ++m)
      for (std::size_t j = 0; j < spec.J; ++j)
        if (std::isfinite(spec.b.at(m, j)))
          ineq_.push_back({m, j, spec.b.at(m, j)});
    for (std::size_t n = 0; n < spec.N; ++n)
      for (std::size_t j = 0; j < spec.J; ++j)
        if (std::isfinite(spec.c.at(n, j)))
          eq_.push_back({n, j, spec.c.at(n, j)});
  }

  const std::vector<Cell>& ineq() const { return ineq_; }
  const std::vector<Cell>& eq() const { return eq_; }

  Slacks slacks(const MatrixD& X) const {
    Slacks s;
    s.sigma.assign(spec_.J, 0.0);
    s.row_slack.assign(spec_.I, 0.0);
    for (std::size_t i = 0; i < spec_.I; ++i) {
      auto x = X.row(i);
      auto om = spec_.omega(i);
      double sum = 0.0;
      for (std::size_t j = 0; j < spec_.J; ++j) {
        if (x[j] <= 0.0) s.interior = false;
        s.sigma[j] += om[j] * x[j];
        sum += x[j];
      }
      s.row_slack[i] = 1.0 - sum;
      if (s.row_slack[i] <= 0.0) s.interior = false;
    }
    std::vector<double> lhs(ineq_.size(), 0.0);
    for (std::size_t i = 0; i < spec_.I; ++i) {
      auto x = X.row(i);
      auto u = spec_.u(i);
      for (std::size_t k = 0; k < ineq_.size(); ++k)
        lhs[k] += u[ineq_[k].row] * x[ineq_[k].j];
    }
    s.ineq.resize(ineq_.size());
    for (std::size_t k = 0; k < ineq_.size(); ++k) {
      s.ineq[k] = ineq_[k].target - lhs[k];
      if (s.ineq[k] <= 0.0) s.interior = false;
    }
    if (obj_.kind() == ObjectiveKind::logarithmic)
      for (std::size_t j = 0; j < spec_.J; ++j)
        if (s.sigma[j] + spec_.objective.a[j] <= 0.0) s.interior = false;
    return s;
  }

  double psi(double t, const MatrixD& X, const Slacks& s) const {
    if (!s.interior) return kInf;
    double f = 0.0;
    for (std::size_t j = 0; j < spec_.J; ++j)
      f += obj_.phi(spec_, j, s.sigma[j]);
    double barrier = 0.0;
    for (double x : X.data()) barrier -= std::log(x);
    for (double r : s.row_slack) barrier -= std::log(r);
    for (double r : s.ineq) barrier -= std::log(r);
    return t * f + barrier;
  }

  MatrixD grad_psi(double t, const MatrixD& X, const Slacks& s) const {
    MatrixD g(spec_.I, spec_.J);
    std::vector<double> phi_p(spec_.J);
    for (std::size_t j = 0; j < spec_.J; ++j)
      phi_p[j] = t * obj_.phi_prime(spec_, j, s.sigma[j]);
    std::vector<double> ineq_w(ineq_.size());
    for (std::size_t k = 0; k < ineq_.size(); ++k)
      ineq_w[k] = 1.0 / s.ineq[k];
    for (std::size_t i = 0; i < spec_.I; ++i) {
      auto x = X.row(i);
      auto om = spec_.omega(i);
      auto u = spec_.u(i);
      auto gr = g.row(i);
      double inv_row = 1.0 / s.row_slack[i];
      for (std::size_t j = 0; j < spec_.J; ++j)
        gr[j] = phi_p[j] * om[j] - 1.0 / x[j] + inv_row;
      for (std::size_t k = 0; k < ineq_.size(); ++k)
        gr[ineq_[k].j] += ineq_w[k] * u[ineq_[k].row];
    }
    return g;
  }

  std::vector<LowRankTerm> hessian_terms(double t, const Slacks& s) const {
    std::vector<LowRankTerm> terms;
    for (std::size_t j = 0; j < spec_.J; ++j) {
      double w = t * obj_.phi_second(spec_, j, s.sigma[j]);
      if (w > 0.0) terms.push_back({j, false, 0, w});
    }
    for (std::size_t k = 0; k < ineq_.size(); ++k)
      terms.push_back(
          {ineq_[k].j, true, ineq_[k].row, 1.0 / (s.ineq[k] * s.ineq[k])});
    return terms;
  }

  double term_value(const LowRankTerm& q, std::size_t i) const {
    return q.is_feature ? spec_.u(i)[q.feature] : spec_.omega(i)[q.j];
  }

 private:
  const ProblemSpec& spec_;
  const ObjectiveModel& obj_;
  std::vector<Cell> ineq_;
  std::vector<Cell> eq_;
};

// Per-item block K_i = diag(d_i) + p_i * 1 1^T inverted by Sherman-Morrison.
struct KInverse {
  MatrixD d;              // 1 / x^2
  std::vector<double> coef;  // p / (1 + p * sum(1/d))

  KInverse(const ProblemSpec& spec, const MatrixD& X, const Slacks& s)
      : d(spec.I, spec.J), coef(spec.I) {
    for (std::size_t i = 0; i < spec.I; ++i) {
      auto x = X.row(i);
      auto di = d.row(i);
      double tau = 0.0;
      for (std::size_t j = 0; j < spec.J; ++j) {
        di[j] = 1.0 / (x[j] * x[j]);
        tau += x[j] * x[j];
      }
      double p = 1.0 / (s.row_slack[i] * s.row_slack[i]);
      coef[i] = p / (1.0 + p * tau);
    }
  }

  void apply(const MatrixD& y, MatrixD& out) const {
    const std::size_t J = d.cols();
    for (std::size_t i = 0; i < d.rows(); ++i) {
      auto yi = y.row(i);
      auto di = d.row(i);
      auto oi = out.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < J; ++j) {
        oi[j] = yi[j] / di[j];
        dot += oi[j];
      }
      double c = coef[i] * dot;
      for (std::size_t j = 0; j < J; ++j) oi[j] -= c / di[j];
    }
  }
};

// Factorized Hessian-with-equalities solver for one Newton step:
// H = K + sum_q weight_q z_q z_q^T via Woodbury, equality multipliers via a
// dense Schur complement over the active equality cells.
class NewtonSystem {
 public:
  NewtonSystem(const ProblemSpec& spec, const BarrierProblem& prob, double t,
               const MatrixD& X, const Slacks& s)
      : spec_(spec), prob_(prob), kinv_(spec, X, s),
        terms_(prob.hessian_terms(t, s)) {
    const std::size_t R = terms_.size();
    const std::size_t E = prob.eq().size();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(R + E, R + E);
    std::vector<double> w(R + E), e(R + E);
    std::vector<std::size_t> col(R + E);
    for (std::size_t q = 0; q < R; ++q) col[q] = terms_[q].j;
    for (std::size_t k = 0; k < E; ++k) col[R + k] = prob.eq()[k].j;

    for (std::size_t i = 0; i < spec.I; ++i) {
      auto di = kinv_.d.row(i);
      auto vi = spec.v(i);
      for (std::size_t q = 0; q < R; ++q) {
        w[q] = prob.term_value(terms_[q], i);
        e[q] = w[q] / di[col[q]];
      }
      for (std::size_t k = 0; k < E; ++k) {
        w[R + k] = vi[prob.eq()[k].row];
        e[R + k] = w[R + k] / di[col[R + k]];
      }
      double c = kinv_.coef[i];
      for (std::size_t a = 0; a < R + E; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
          double gab = -c * e[a] * e[b];
          if (col[a] == col[b]) gab += e[a] * w[b];
          G(a, b) += gab;
        }
    }
    G = G.selfadjointView<Eigen::Lower>();

    if (R > 0) {
      Eigen::MatrixXd C = G.topLeftCorner(R, R);
      for (std::size_t q = 0; q < R; ++q) C(q, q) += 1.0 / terms_[q].weight;
      core_.compute(C);
      if (core_.info() != Eigen::Success)
        fail("no-convergence", "Newton core factorization failed");
    }
    if (E > 0) {
      Eigen::MatrixXd S = G.bottomRightCorner(E, E);
      if (R > 0) {
        Eigen::MatrixXd UA = G.topRightCorner(R, E);
        S -= UA.transpose() * core_.solve(UA);
      }
      schur_.compute(S);
      if (schur_.info() != Eigen::Success)
        fail("no-convergence", "equality Schur factorization failed");
    }
  }

  // out = H^{-1} y
  void solve_h(const MatrixD& y, MatrixD& out, MatrixD& scratch) const {
    kinv_.apply(y, out);
    const std::size_t R = terms_.size();
    if (R == 0) return;
    Eigen::VectorXd yu(R);
    for (std::size_t q = 0; q < R; ++q) {
      double dot = 0.0;
      for (std::size_t i = 0; i < spec_.I; ++i)
        dot += prob_.term_value(terms_[q], i) * out.at(i, terms_[q].j);
      yu(q) = dot;
    }
    Eigen::VectorXd wq = core_.solve(yu);
    std::fill(scratch.data().begin(), scratch.data().end(), 0.0);
    for (std::size_t q = 0; q < R; ++q)
      for (std::size_t i = 0; i < spec_.I; ++i)
        scratch.at(i, terms_[q].j) += wq(q) * prob_.term_value(terms_[q], i);
    MatrixD corr(spec_.I, spec_.J);
    kinv_.apply(scratch, corr);
    for (std::size_t k = 0; k < out.data().size(); ++k)
      out.data()[k] -= corr.data()[k];
  }

  // Solves [H A^T; A 0] [dx; nu] = [-g; -r_p], the infeasible-start Newton
  // system; r_p = A x - c so a full step lands exactly on the equalities.
  void solve_kkt(const MatrixD& g, const Eigen::VectorXd& r_p, MatrixD& dx,
                 Eigen::VectorXd& nu, MatrixD& scratch, MatrixD& scratch2) const {
    const auto& eq = prob_.eq();
    const std::size_t E = eq.size();
    MatrixD rhs(spec_.I, spec_.J);
    for (std::size_t k = 0; k < rhs.data().size(); ++k)
      rhs.data()[k] = -g.data()[k];
    solve_h(rhs, dx, scratch);
    if (E == 0) {
      nu.resize(0);
      return;
    }
    Eigen::VectorXd av(E);
    for (std::size_t k = 0; k < E; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < spec_.I; ++i)
        dot += spec_.v(i)[eq[k].row] * dx.at(i, eq[k].j);
      av(k) = dot;
    }
    nu = schur_.solve(av + r_p);
    // rhs2 = -g - A^T nu
    for (std::size_t k = 0; k < E; ++k)
      for (std::size_t i = 0; i < spec_.I; ++i)
        rhs.at(i, eq[k].j) -= nu(k) * spec_.v(i)[eq[k].row];
    solve_h(rhs, scratch2, scratch);
    std::swap(dx, scratch2);
  }

 private:
  const ProblemSpec& spec_;
  const BarrierProblem& prob_;
  KInverse kinv_;
  std::vector<LowRankTerm> terms_;
  Eigen::LDLT<Eigen::MatrixXd> core_;
  Eigen::LDLT<Eigen::MatrixXd> schur_;
};

// Uniform theta/J rows. Equality targets are not matched here; the Newton
// iteration starts infeasible in the equalities and drives their residual to
// zero, so the start only has to sit strictly inside the inequalities. All
// slacks are affine in theta, so a coarse scan picking the largest margin is
// enough.
MatrixD interior_start(const ProblemSpec& spec, const BarrierProblem& prob) {
  double best_theta = 0.0;
  double best_margin = 0.0;
  for (int step = 1; step < 50; ++step) {
    double theta = 0.02 * step;
    MatrixD X(spec.I, spec.J, theta / static_cast<double>(spec.J));
    Slacks s = prob.slacks(X);
    if (!s.interior) continue;
    double margin = kInf;
    for (double x : X.data()) margin = std::min(margin, x);
    for (double r : s.row_slack) margin = std::min(margin, r);
    for (double r : s.ineq) margin = std::min(margin, r);
    if (margin > best_margin) {
      best_margin = margin;
      best_theta = theta;
    }
  }
  if (best_margin <= 1e-9)
    fail("no-convergence", "no strictly interior start found");
  log_debug("oracle start theta ", best_theta, " margin ", best_margin);
  return MatrixD(spec.I, spec.J, best_theta / static_cast<double>(spec.J));
}

}  // namespace

double kkt_residual(const ProblemSpec& spec, const MatrixD& X,
                    double barrier_t) {
  auto obj = make_objective(spec);
  BarrierProblem prob(spec, *obj);
  Slacks s = prob.slacks(X);

  // Stationarity with barrier-implied multipliers 1/(t * slack).
  MatrixD r(spec.I, spec.J);
  std::vector<double> phi_p(spec.J);
  for (std::size_t j = 0; j < spec.J; ++j)
    phi_p[j] = obj->phi_prime(spec, j, s.sigma[j]);
  std::vector<double> lam_ineq(prob.ineq().size());
  for (std::size_t k = 0; k < prob.ineq().size(); ++k)
    lam_ineq[k] = 1.0 / (barrier_t * s.ineq[k]);
  for (std::size_t i = 0; i < spec.I; ++i) {
    auto x = X.row(i);
    auto om = spec.omega(i);
    auto u = spec.u(i);
    auto ri = r.row(i);
    double lam_row = 1.0 / (barrier_t * s.row_slack[i]);
    for (std::size_t j = 0; j < spec.J; ++j)
      ri[j] = phi_p[j] * om[j] - 1.0 / (barrier_t * x[j]) + lam_row;
    for (std::size_t k = 0; k < prob.ineq().size(); ++k)
      ri[prob.ineq()[k].j] += lam_ineq[k] * u[prob.ineq()[k].row];
  }

  // Least-squares equality multipliers, independent of the Newton path.
  const auto& eq = prob.eq();
  double eq_feas = 0.0;
  if (!eq.empty()) {
    std::vector<std::vector<std::size_t>> by_col(spec.J);
    for (std::size_t k = 0; k < eq.size(); ++k) by_col[eq[k].j].push_back(k);
    for (std::size_t j = 0; j < spec.J; ++j) {
      const auto& rows = by_col[j];
      if (rows.empty()) continue;
      Eigen::MatrixXd G = Eigen::MatrixXd::Zero(rows.size(), rows.size());
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows.size());
      for (std::size_t i = 0; i < spec.I; ++i) {
        auto vi = spec.v(i);
        for (std::size_t a = 0; a < rows.size(); ++a) {
          double va = vi[eq[rows[a]].row];
          rhs(a) -= va * r.at(i, j);
          for (std::size_t b = 0; b <= a; ++b)
            G(a, b) += va * vi[eq[rows[b]].row];
        }
      }
      G = G.selfadjointView<Eigen::Lower>();
      Eigen::VectorXd nu = G.ldlt().solve(rhs);
      for (std::size_t i = 0; i < spec.I; ++i) {
        auto vi = spec.v(i);
        double shift = 0.0;
        for (std::size_t a = 0; a < rows.size(); ++a)
          shift += nu(a) * vi[eq[rows[a]].row];
        r.at(i, j) += shift;
      }
    }
    std::vector<double> lhs(eq.size(), 0.0);
    for (std::size_t i = 0; i < spec.I; ++i) {
      auto x = X.row(i);
      auto vi = spec.v(i);
      for (std::size_t k = 0; k < eq.size(); ++k)
        lhs[k] += vi[eq[k].row] * x[eq[k].j];
    }
    for (std::size_t k = 0; k < eq.size(); ++k)
      eq_feas = std::max(eq_feas, std::abs(lhs[k] - eq[k].target));
  }

  double stationarity = 0.0;
  for (double v : r.data()) stationarity = std::max(stationarity, std::abs(v));
  double primal = 0.0;
  for (double x : X.data()) primal = std::max(primal, -x);
  for (double v : s.row_slack) primal = std::max(primal, -v);
  for (double v : s.ineq) primal = std::max(primal, -v);
  double comp = 1.0 / barrier_t;
  log_debug("kkt components: stationarity ", stationarity, " primal ", primal,
            " eq ", eq_feas, " comp ", comp);
  return std::max({stationarity, primal, eq_feas, comp});
}

OracleResult oracle_solve(const ProblemSpec& spec, double kkt_tol) {
  validate(spec);
  if (spec.I > 5000)
    fail("size-guard", "oracle is limited to I <= 5000, got " +
                           std::to_string(spec.I));
  auto obj = make_objective(spec);
  BarrierProblem prob(spec, *obj);
  MatrixD X = interior_start(spec, prob);
  const auto& eq = prob.eq();
  const std::size_t E = eq.size();

  const double t_target = 2.0 / kkt_tol;
  double t = 1.0;
  std::size_t total_newton = 0;
  MatrixD scratch(spec.I, spec.J), scratch2(spec.I, spec.J);
  MatrixD dx(spec.I, spec.J);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(E));
  Eigen::VectorXd nu_next, rp, rp_trial;

  double eq_scale = 1.0;
  for (const auto& c : eq) eq_scale = std::max(eq_scale, std::abs(c.target));

  auto eq_resid = [&](const MatrixD& Xv, Eigen::VectorXd& out) {
    out.resize(static_cast<Eigen::Index>(E));
    for (std::size_t k = 0; k < E; ++k) {
      double lhs = 0.0;
      for (std::size_t i = 0; i < spec.I; ++i)
        lhs += spec.v(i)[eq[k].row] * Xv.at(i, eq[k].j);
      out(static_cast<Eigen::Index>(k)) = lhs - eq[k].target;
    }
  };
  // Norm of the primal-dual residual (grad psi + A^T nu, A x - c); the line
  // search below contracts this instead of the barrier value so equality
  // residual and stationarity shrink together.
  auto res_norm = [&](const MatrixD& Xv, const Slacks& sv,
                      const Eigen::VectorXd& nuv, const Eigen::VectorXd& rpv) {
    MatrixD gd = prob.grad_psi(t, Xv, sv);
    for (std::size_t k = 0; k < E; ++k)
      for (std::size_t i = 0; i < spec.I; ++i)
        gd.at(i, eq[k].j) += nuv(static_cast<Eigen::Index>(k)) *
                             spec.v(i)[eq[k].row];
    double n2 = 0.0;
    for (double gv : gd.data()) n2 += gv * gv;
    for (Eigen::Index k = 0; k < rpv.size(); ++k) n2 += rpv(k) * rpv(k);
    return std::sqrt(n2);
  };

  for (std::size_t outer = 0; outer < 60; ++outer) {
    for (std::size_t inner = 0; inner < 80; ++inner) {
      Slacks s = prob.slacks(X);
      if (!s.interior)
        fail("no-convergence", "oracle iterate left the interior");
      double value = prob.psi(t, X, s);
      MatrixD g = prob.grad_psi(t, X, s);
      eq_resid(X, rp);
      bool feasible =
          E == 0 || rp.lpNorm<Eigen::Infinity>() <= 1e-9 * eq_scale;
      // The certificate divides multipliers by t, so stationarity at
      // certification level means a residual norm of order kkt_tol * t.
      if (feasible && res_norm(X, s, nu, rp) <= 0.25 * kkt_tol * t) break;
      NewtonSystem sys(spec, prob, t, X, s);
      sys.solve_kkt(g, rp, dx, nu_next, scratch, scratch2);
      ++total_newton;

      double decrement = 0.0;  // dx^T H dx
      for (std::size_t k = 0; k < g.data().size(); ++k)
        decrement -= g.data()[k] * dx.data()[k];
      for (Eigen::Index k = 0; k < rp.size(); ++k)
        decrement += rp(k) * nu_next(k);
      // The decrement break is only a shortcut on the homotopy path. At the
      // final t it would quit three orders short of the certificate (and
      // near the barrier walls it can round negative), so there the line
      // search alone decides whether progress is still possible.
      if (t < t_target && feasible &&
          (!(decrement > 0.0) ||
           decrement < 1e-13 * (1.0 + std::abs(value))))
        break;

      double alpha_max = kInf;
      for (std::size_t k = 0; k < dx.data().size(); ++k)
        if (dx.data()[k] < 0.0)
          alpha_max = std::min(alpha_max, -X.data()[k] / dx.data()[k]);
      for (std::size_t i = 0; i < spec.I; ++i) {
        double ds = 0.0;
        auto di = dx.row(i);
        for (std::size_t j = 0; j < spec.J; ++j) ds += di[j];
        if (ds > 0.0) alpha_max = std::min(alpha_max, s.row_slack[i] / ds);
      }
      {
        std::vector<double> dlhs(prob.ineq().size(), 0.0);
        for (std::size_t i = 0; i < spec.I; ++i) {
          auto u = spec.u(i);
          auto di = dx.row(i);
          for (std::size_t k = 0; k < prob.ineq().size(); ++k)
            dlhs[k] += u[prob.ineq()[k].row] * di[prob.ineq()[k].j];
        }
        for (std::size_t k = 0; k < prob.ineq().size(); ++k)
          if (dlhs[k] > 0.0)
            alpha_max = std::min(alpha_max, s.ineq[k] / dlhs[k]);
      }
      double alpha = std::min(1.0, 0.99 * alpha_max);
      double rnorm = res_norm(X, s, nu, rp);
      MatrixD trial(spec.I, spec.J);
      Eigen::VectorXd dnu = nu_next - nu;
      bool stepped = false;
      for (int halvings = 0; halvings < 60; ++halvings) {
        for (std::size_t k = 0; k < X.data().size(); ++k)
          trial.data()[k] = X.data()[k] + alpha * dx.data()[k];
        Slacks ts = prob.slacks(trial);
        if (ts.interior) {
          Eigen::VectorXd nu_trial = nu + alpha * dnu;
          eq_resid(trial, rp_trial);
          if (res_norm(trial, ts, nu_trial, rp_trial) <=
              (1.0 - 1e-4 * alpha) * rnorm) {
            std::swap(X, trial);
            nu = std::move(nu_trial);
            stepped = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      if (!stepped) break;
    }
    double kkt = kkt_residual(spec, X, t);
    log_debug("oracle outer ", outer, " t ", t, " kkt ", kkt, " newton ",
              total_newton);
    if (t >= t_target && kkt <= kkt_tol) {
      OracleResult result;
      result.objective = obj->f_eval(spec, X);
      result.X = std::move(X);
      result.kkt_residual = kkt;
      result.barrier_t = t;
      result.newton_steps = total_newton;
      log_info("oracle converged: kkt ", kkt, " after ", total_newton,
               " Newton steps");
      return result;
    }
    // Growing t past the target only worsens conditioning; the remaining
    // outer rounds polish at the target until the certificate holds.
    t = std::min(t * 20.0, t_target);
  }
  fail("no-convergence", "barrier schedule exhausted without certifying KKT");
}

}  // namespace assign
