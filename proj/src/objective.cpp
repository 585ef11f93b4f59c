#include "assign/objective.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "assign/errors.hpp"

namespace assign {

namespace {

std::vector<double> column_sigmas(const ProblemSpec& spec, const MatrixD& X) {
  std::vector<double> sigma(spec.J, 0.0);
  for (std::size_t i = 0; i < spec.I; ++i) {
    auto om = spec.omega(i);
    auto x = X.row(i);
    for (std::size_t j = 0; j < spec.J; ++j) sigma[j] += om[j] * x[j];
  }
  return sigma;
}

class QuadraticObjective final : public ObjectiveModel {
 public:
  explicit QuadraticObjective(double D) : ObjectiveModel(D) {}
  ObjectiveKind kind() const override { return ObjectiveKind::quadratic; }

  double phi(const ProblemSpec& spec, std::size_t j, double sigma) const override {
    double t = sigma + spec.objective.alpha[j];
    return 0.5 * t * t;
  }
  double phi_prime(const ProblemSpec& spec, std::size_t j,
                   double sigma) const override {
    return sigma + spec.objective.alpha[j];
  }
  double phi_second(const ProblemSpec&, std::size_t, double) const override {
    return 1.0;
  }
  double g_coeff(const ProblemSpec& spec, std::size_t i,
                 std::size_t j) const override {
    double w = spec.omega(i)[j];
    return 0.5 * dominance() * w * w;
  }
};

class LogarithmicObjective final : public ObjectiveModel {
 public:
  explicit LogarithmicObjective(double D) : ObjectiveModel(D) {}
  ObjectiveKind kind() const override { return ObjectiveKind::logarithmic; }

  double phi(const ProblemSpec& spec, std::size_t j, double sigma) const override {
    double arg = sigma + spec.objective.a[j];
    if (arg <= 0.0)
      fail("log-domain", "log argument " + std::to_string(arg) +
                             " at owner " + std::to_string(j));
    return -std::log(arg);
  }
  double phi_prime(const ProblemSpec& spec, std::size_t j,
                   double sigma) const override {
    double arg = sigma + spec.objective.a[j];
    if (arg <= 0.0)
      fail("log-domain", "log argument " + std::to_string(arg) +
                             " at owner " + std::to_string(j));
    return -1.0 / arg;
  }
  double phi_second(const ProblemSpec& spec, std::size_t j,
                    double sigma) const override {
    double arg = sigma + spec.objective.a[j];
    if (arg <= 0.0)
      fail("log-domain", "log argument " + std::to_string(arg) +
                             " at owner " + std::to_string(j));
    return 1.0 / (arg * arg);
  }
  double g_coeff(const ProblemSpec& spec, std::size_t i,
                 std::size_t j) const override {
    double w = spec.omega(i)[j];
    double aj = spec.objective.a[j];
    return 0.5 * dominance() / (aj * aj) * w * w;
  }
};

class LinearObjective final : public ObjectiveModel {
 public:
  explicit LinearObjective(double D) : ObjectiveModel(D) {}
  ObjectiveKind kind() const override { return ObjectiveKind::linear; }

  double phi(const ProblemSpec&, std::size_t, double sigma) const override {
    return sigma;
  }
  double phi_prime(const ProblemSpec&, std::size_t, double) const override {
    return 1.0;
  }
  double phi_second(const ProblemSpec&, std::size_t, double) const override {
    return 0.0;
  }
  double g_coeff(const ProblemSpec&, std::size_t, std::size_t) const override {
    return 0.0;
  }
  double g_lin(const ProblemSpec& spec, std::size_t i,
               std::size_t j) const override {
    return spec.omega(i)[j];
  }
};

}  // namespace

double ObjectiveModel::f_eval(const ProblemSpec& spec, const MatrixD& X) const {
  auto sigma = column_sigmas(spec, X);
  double f = 0.0;
  for (std::size_t j = 0; j < spec.J; ++j) f += phi(spec, j, sigma[j]);
  return f;
}

MatrixD ObjectiveModel::f_grad(const ProblemSpec& spec, const MatrixD& X) const {
  auto sigma = column_sigmas(spec, X);
  std::vector<double> factor(spec.J);
  for (std::size_t j = 0; j < spec.J; ++j)
    factor[j] = phi_prime(spec, j, sigma[j]);
  MatrixD grad(spec.I, spec.J);
  for (std::size_t i = 0; i < spec.I; ++i) {
    auto om = spec.omega(i);
    auto g = grad.row(i);
    for (std::size_t j = 0; j < spec.J; ++j) g[j] = factor[j] * om[j];
  }
  return grad;
}

double ObjectiveModel::g_eval(const ProblemSpec& spec, const MatrixD& X) const {
  double g = 0.0;
  for (std::size_t i = 0; i < spec.I; ++i) {
    auto x = X.row(i);
    for (std::size_t j = 0; j < spec.J; ++j)
      g += g_coeff(spec, i, j) * x[j] * x[j] + g_lin(spec, i, j) * x[j];
  }
  return g;
}

MatrixD ObjectiveModel::g_grad(const ProblemSpec& spec, const MatrixD& X) const {
  MatrixD grad(spec.I, spec.J);
  for (std::size_t i = 0; i < spec.I; ++i) {
    auto x = X.row(i);
    auto g = grad.row(i);
    for (std::size_t j = 0; j < spec.J; ++j)
      g[j] = 2.0 * g_coeff(spec, i, j) * x[j] + g_lin(spec, i, j);
  }
  return grad;
}

std::unique_ptr<ObjectiveModel> make_objective(const ProblemSpec& spec,
                                               double D) {
  if (D <= 0.0) D = static_cast<double>(spec.I);
  switch (spec.objective.kind) {
    case ObjectiveKind::quadratic:
      return std::make_unique<QuadraticObjective>(D);
    case ObjectiveKind::logarithmic:
      return std::make_unique<LogarithmicObjective>(D);
    case ObjectiveKind::linear:
      return std::make_unique<LinearObjective>(D);
  }
  fail("bad_objective", "unknown objective kind");
}

}  // namespace assign
