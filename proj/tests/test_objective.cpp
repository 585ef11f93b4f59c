#include "assign/objective.hpp"

#include <cmath>
#include <vector>

#include "assign/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace assign;

namespace {

MatrixD random_box_point(const ProblemSpec& spec, std::uint64_t salt) {
  MatrixD X(spec.I, spec.J);
  for (std::size_t i = 0; i < spec.I; ++i)
    for (std::size_t j = 0; j < spec.J; ++j)
      X.at(i, j) =
          rng_uniform01(spec.seed + salt, RngStream::test, i * spec.J + j);
  return X;
}

ProblemSpec filled_spec(std::size_t I, std::size_t J, ObjectiveKind kind,
                        std::uint64_t seed) {
  auto spec = testutil::tiny_spec(I, J, 1, 1, kind, 1.0,
                                  0.5 * static_cast<double>(I * 2) + 1.0);
  spec.seed = seed;
  testutil::Rand rnd(seed);
  for (std::size_t i = 0; i < I; ++i) {
    auto row = spec.items.row(i);
    for (std::size_t j = 0; j < J; ++j) row[j] = rnd.uniform(0.0, 1.0);
    row[J] = rnd.uniform(-1.0, 0.0);
    row[J + 1] = rnd.uniform(0.0, 1.0);
  }
  return spec;
}

// Plain double-loop evaluation, no reductions shared with the library.
double naive_f(const ProblemSpec& spec, const ObjectiveModel& model,
               const MatrixD& X) {
  double total = 0.0;
  for (std::size_t j = 0; j < spec.J; ++j) {
    double sigma = 0.0;
    for (std::size_t i = 0; i < spec.I; ++i)
      sigma += spec.omega(i)[j] * X.at(i, j);
    total += model.phi(spec, j, sigma);
  }
  return total;
}

}  // namespace

TEST_CASE("quadratic f at zero is half the sum of squared alphas") {
  auto spec = filled_spec(6, 3, ObjectiveKind::quadratic, 1);
  spec.objective.alpha = {0.5, 1.5, 2.0};
  auto model = make_objective(spec);
  MatrixD zero(spec.I, spec.J, 0.0);
  double expect = 0.5 * (0.25 + 2.25 + 4.0);
  CHECK(model->f_eval(spec, zero) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("logarithmic f at zero is minus the sum of log a_j") {
  auto spec = filled_spec(6, 3, ObjectiveKind::logarithmic, 2);
  auto model = make_objective(spec);
  MatrixD zero(spec.I, spec.J, 0.0);
  double expect = -3.0 * std::log(10.0);
  CHECK(model->f_eval(spec, zero) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("f_eval matches a naive double loop") {
  for (auto kind : {ObjectiveKind::quadratic, ObjectiveKind::logarithmic,
                    ObjectiveKind::linear}) {
    auto spec = filled_spec(40, 4, kind, 3);
    auto model = make_objective(spec);
    for (std::uint64_t salt = 0; salt < 5; ++salt) {
      auto X = random_box_point(spec, salt);
      double lib = model->f_eval(spec, X);
      double ref = naive_f(spec, *model, X);
      CHECK(lib == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("quadratic gradient at zero is alpha_j omega_ij") {
  auto spec = filled_spec(5, 2, ObjectiveKind::quadratic, 4);
  spec.objective.alpha = {0.7, 0.2};
  auto model = make_objective(spec);
  MatrixD zero(spec.I, spec.J, 0.0);
  auto grad = model->f_grad(spec, zero);
  for (std::size_t i = 0; i < spec.I; ++i)
    for (std::size_t j = 0; j < spec.J; ++j)
      CHECK(grad.at(i, j) == doctest::Approx(spec.objective.alpha[j] *
                                             spec.omega(i)[j])
                                 .epsilon(1e-14));
}

TEST_CASE("f_grad agrees with central differences") {
  for (auto kind : {ObjectiveKind::quadratic, ObjectiveKind::logarithmic}) {
    auto spec = filled_spec(5, 2, kind, 5);
    auto model = make_objective(spec);
    const double h = 1e-6;
    for (std::uint64_t salt = 0; salt < 20; ++salt) {
      auto X = random_box_point(spec, salt);
      auto grad = model->f_grad(spec, X);
      for (std::size_t i = 0; i < spec.I; ++i)
        for (std::size_t j = 0; j < spec.J; ++j) {
          auto hi = X, lo = X;
          hi.at(i, j) += h;
          lo.at(i, j) -= h;
          double fd =
              (model->f_eval(spec, hi) - model->f_eval(spec, lo)) / (2.0 * h);
          double denom = std::max(1.0, std::abs(grad.at(i, j)));
          CHECK(std::abs(fd - grad.at(i, j)) / denom < 1e-4);
        }
    }
  }
}

TEST_CASE("linear model gradient is the cost row itself") {
  auto spec = filled_spec(6, 3, ObjectiveKind::linear, 6);
  auto model = make_objective(spec);
  auto X = random_box_point(spec, 0);
  auto fg = model->f_grad(spec, X);
  auto gg = model->g_grad(spec, X);
  for (std::size_t i = 0; i < spec.I; ++i)
    for (std::size_t j = 0; j < spec.J; ++j) {
      CHECK(fg.at(i, j) == spec.omega(i)[j]);
      CHECK(gg.at(i, j) == spec.omega(i)[j]);
      CHECK(model->g_coeff(spec, i, j) == 0.0);
      CHECK(model->g_lin(spec, i, j) == spec.omega(i)[j]);
    }
  CHECK(model->g_eval(spec, X) == doctest::Approx(model->f_eval(spec, X)));
}

TEST_CASE("surrogate coefficients follow the dominance formulas") {
  // Quadratic, omega = 1, default D = I: a_ij = I/2.
  auto quad = testutil::tiny_spec(4, 1, 0, 0, ObjectiveKind::quadratic, 1.0, 1.0);
  for (std::size_t i = 0; i < 4; ++i) quad.items.at(i, 0) = 1.0;
  auto quad_model = make_objective(quad);
  CHECK(quad_model->dominance() == 4.0);
  CHECK(quad_model->g_coeff(quad, 0, 0) == doctest::Approx(2.0));

  quad.items.at(1, 0) = 0.0;
  CHECK(quad_model->g_coeff(quad, 1, 0) == 0.0);

  // Logarithmic, omega = 1, a_j = 10, D = I = 100: a_ij = 100/200 = 0.5.
  auto logs = testutil::tiny_spec(100, 1, 0, 0, ObjectiveKind::logarithmic,
                                  1.0, 1.0);
  for (std::size_t i = 0; i < 100; ++i) logs.items.at(i, 0) = 1.0;
  auto log_model = make_objective(logs);
  CHECK(log_model->g_coeff(logs, 0, 0) == doctest::Approx(0.5));

  // Explicit dominance override.
  auto forced = make_objective(quad, 57.0);
  CHECK(forced->dominance() == 57.0);
}

TEST_CASE("g_grad doubles exactly with X for the pure-quadratic surrogates") {
  for (auto kind : {ObjectiveKind::quadratic, ObjectiveKind::logarithmic}) {
    auto spec = filled_spec(6, 3, kind, 7);
    auto model = make_objective(spec);
    auto X = random_box_point(spec, 1);
    auto X2 = X;
    for (double& v : X2.data()) v *= 2.0;
    auto g1 = model->g_grad(spec, X);
    auto g2 = model->g_grad(spec, X2);
    for (std::size_t k = 0; k < g1.data().size(); ++k)
      CHECK(g2.data()[k] == 2.0 * g1.data()[k]);
  }
}

TEST_CASE("g_grad agrees with central differences of g_eval") {
  for (auto kind : {ObjectiveKind::quadratic, ObjectiveKind::logarithmic,
                    ObjectiveKind::linear}) {
    auto spec = filled_spec(5, 2, kind, 8);
    auto model = make_objective(spec);
    const double h = 1e-6;
    auto X = random_box_point(spec, 2);
    auto grad = model->g_grad(spec, X);
    for (std::size_t i = 0; i < spec.I; ++i)
      for (std::size_t j = 0; j < spec.J; ++j) {
        auto hi = X, lo = X;
        hi.at(i, j) += h;
        lo.at(i, j) -= h;
        double fd =
            (model->g_eval(spec, hi) - model->g_eval(spec, lo)) / (2.0 * h);
        double denom = std::max(1.0, std::abs(grad.at(i, j)));
        CHECK(std::abs(fd - grad.at(i, j)) / denom < 1e-4);
      }
  }
}

TEST_CASE("g - f passes the midpoint convexity sample") {
  for (auto kind : {ObjectiveKind::quadratic, ObjectiveKind::logarithmic}) {
    auto spec = filled_spec(6, 3, kind, 9);
    auto model = make_objective(spec);
    auto omega1 = [&](const MatrixD& X) {
      return model->g_eval(spec, X) - model->f_eval(spec, X);
    };
    for (std::uint64_t pair = 0; pair < 200; ++pair) {
      auto X = random_box_point(spec, 2 * pair + 10);
      auto Y = random_box_point(spec, 2 * pair + 11);
      MatrixD mid(spec.I, spec.J);
      for (std::size_t k = 0; k < mid.data().size(); ++k)
        mid.data()[k] = 0.5 * (X.data()[k] + Y.data()[k]);
      CHECK(omega1(mid) <= 0.5 * omega1(X) + 0.5 * omega1(Y) + 1e-9);
    }
  }
}

TEST_CASE("f itself passes the midpoint convexity sample") {
  for (auto kind : {ObjectiveKind::quadratic, ObjectiveKind::logarithmic}) {
    auto spec = filled_spec(6, 3, kind, 12);
    auto model = make_objective(spec);
    for (std::uint64_t pair = 0; pair < 200; ++pair) {
      auto X = random_box_point(spec, 2 * pair);
      auto Y = random_box_point(spec, 2 * pair + 1);
      MatrixD mid(spec.I, spec.J);
      for (std::size_t k = 0; k < mid.data().size(); ++k)
        mid.data()[k] = 0.5 * (X.data()[k] + Y.data()[k]);
      CHECK(model->f_eval(spec, mid) <= 0.5 * model->f_eval(spec, X) +
                                            0.5 * model->f_eval(spec, Y) +
                                            1e-9);
    }
  }
}

TEST_CASE("logarithmic evaluation guards its domain") {
  auto spec = filled_spec(4, 2, ObjectiveKind::logarithmic, 13);
  spec.objective.a.assign(2, 0.0);
  auto model = make_objective(spec);
  MatrixD zero(spec.I, spec.J, 0.0);
  CHECK_FAILS("log-domain", model->f_eval(spec, zero));
  CHECK_FAILS("log-domain", model->f_grad(spec, zero));
}

TEST_CASE("phi derivatives match their closed forms") {
  auto quad = filled_spec(3, 2, ObjectiveKind::quadratic, 14);
  quad.objective.alpha = {0.4, 0.9};
  auto qm = make_objective(quad);
  CHECK(qm->phi(quad, 0, 1.5) == doctest::Approx(0.5 * 1.9 * 1.9));
  CHECK(qm->phi_prime(quad, 0, 1.5) == doctest::Approx(1.9));
  CHECK(qm->phi_second(quad, 0, 1.5) == doctest::Approx(1.0));

  auto logs = filled_spec(3, 2, ObjectiveKind::logarithmic, 15);
  auto lm = make_objective(logs);
  CHECK(lm->phi(logs, 1, 2.0) == doctest::Approx(-std::log(12.0)));
  CHECK(lm->phi_prime(logs, 1, 2.0) == doctest::Approx(-1.0 / 12.0));
  CHECK(lm->phi_second(logs, 1, 2.0) == doctest::Approx(1.0 / 144.0));
}
