#pragma once

#include <memory>

#include "assign/dense.hpp"
#include "assign/problem.hpp"

namespace assign {

// Objective plug-in. Every model is a column-aggregate objective: with
// sigma_j = omega_j^T x_j it evaluates f(X) = sum_j phi_j(sigma_j), which is
// what lets workers reduce sigma partials and keep f evaluation owner-side.
//
// The separable surrogate is g(X) = sum_ij (a_ij x_ij^2 + q_ij x_ij) with
// a_ij = g_coeff >= 0; q_ij = g_lin is zero except for the linear model,
// where g is f itself. D is the dominance dimension making g - f convex
// (defaults to I via make_objective).
class ObjectiveModel {
 public:
  virtual ~ObjectiveModel() = default;

  virtual ObjectiveKind kind() const = 0;
  double dominance() const { return D_; }

  virtual double phi(const ProblemSpec& spec, std::size_t j,
                     double sigma) const = 0;
  virtual double phi_prime(const ProblemSpec& spec, std::size_t j,
                           double sigma) const = 0;
  virtual double phi_second(const ProblemSpec& spec, std::size_t j,
                            double sigma) const = 0;

  virtual double g_coeff(const ProblemSpec& spec, std::size_t i,
                         std::size_t j) const = 0;
  virtual double g_lin(const ProblemSpec& spec, std::size_t i,
                       std::size_t j) const {
    (void)spec, (void)i, (void)j;
    return 0.0;
  }

  double f_eval(const ProblemSpec& spec, const MatrixD& X) const;
  MatrixD f_grad(const ProblemSpec& spec, const MatrixD& X) const;
  double g_eval(const ProblemSpec& spec, const MatrixD& X) const;
  MatrixD g_grad(const ProblemSpec& spec, const MatrixD& X) const;

 protected:
  explicit ObjectiveModel(double D) : D_(D) {}

 private:
  double D_;
};

// D <= 0 selects the default D = I.
std::unique_ptr<ObjectiveModel> make_objective(const ProblemSpec& spec,
                                               double D = 0.0);

}  // namespace assign
