#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "assign/dense.hpp"

namespace assign {

enum class ObjectiveKind { quadratic, logarithmic, linear };

const char* objective_kind_name(ObjectiveKind kind);
ObjectiveKind objective_kind_from_name(std::string_view name);

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::quadratic;
  std::vector<double> alpha;  // per owner, quadratic
  std::vector<double> a;      // per owner, logarithmic

  bool operator==(const ObjectiveConfig&) const = default;
};

// Full instance: objective model parameters, per-item coefficient rows,
// owner-side bounds, penalty parameters. Immutable after validate().
//
// Each item row packs [omega_0..omega_{J-1}, u_0..u_{M-1}, v_0..v_{N-1}]:
// omega are objective coefficients, u inequality features, v equality
// features. Row-major over items because the primal update iterates items;
// owner-side views come out of the engine's reductions.
struct ProblemSpec {
  std::size_t I = 0;  // items
  std::size_t J = 0;  // owners
  std::size_t M = 0;  // inequality constraints
  std::size_t N = 0;  // equality constraints

  MatrixD items;  // I x (J+M+N)
  MatrixD b;      // M x J; +inf marks an inactive cell
  MatrixD c;      // N x J; +/-inf marks an inactive cell

  ObjectiveConfig objective;
  double rho = 0.0;
  double beta = 0.0;
  std::size_t partitions = 16;
  std::uint64_t seed = 0;
  bool binary = false;          // integrality intent; solver always relaxes
  bool allow_low_beta = false;  // downgrade the beta bound check to a warning

  std::span<const double> omega(std::size_t i) const {
    return items.row(i).subspan(0, J);
  }
  std::span<const double> u(std::size_t i) const {
    return items.row(i).subspan(J, M);
  }
  std::span<const double> v(std::size_t i) const {
    return items.row(i).subspan(J + M, N);
  }

  // Feature value of combined constraint s for item i: s < M indexes u,
  // s >= M indexes v.
  double w(std::size_t s, std::size_t i) const {
    return s < M ? u(i)[s] : v(i)[s - M];
  }

  double beta_bound() const {
    return 0.5 * rho * static_cast<double>(I) * static_cast<double>(M + N);
  }

  // Largest |entry| across all item rows; the a-priori term bound for the
  // order-independent reductions (all reduced terms are feature * x with
  // x in [0,1]).
  double coeff_bound() const;
};

const ProblemSpec& validate(const ProblemSpec& spec);

ProblemSpec generate_synthetic(std::size_t I, std::size_t J, std::size_t M,
                               std::size_t N, ObjectiveKind kind,
                               std::uint64_t seed);

// First half of the items as generate_synthetic, second half with omega, v
// ~ U[0,10] and u ~ U[-10,0].
ProblemSpec generate_uneven(std::size_t I, std::size_t J, std::size_t M,
                            std::size_t N, ObjectiveKind kind,
                            std::uint64_t seed);

struct Partition {
  std::size_t partition_id;
  std::size_t lo;  // first item index
  std::size_t hi;  // one past last
};

std::vector<Partition> partition_items(const ProblemSpec& spec, std::size_t P);

void save_problem(const ProblemSpec& spec, const std::filesystem::path& dir);
ProblemSpec load_problem(const std::filesystem::path& dir);

}  // namespace assign
