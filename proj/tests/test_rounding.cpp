#include "assign/rounding.hpp"

#include <cmath>
#include <vector>

#include "assign/admm.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace assign;

namespace {

ProblemSpec bare_spec(std::size_t I, std::size_t J) {
  return testutil::tiny_spec(I, J, 0, 0, ObjectiveKind::quadratic, 1.0, 1.0);
}

}  // namespace

TEST_CASE("a unit row always keeps its owner and a zero row never draws") {
  auto spec = bare_spec(2, 3);
  MatrixD X(2, 3, 0.0);
  X.at(0, 1) = 1.0;
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL})
    for (std::uint64_t repeat = 0; repeat < 50; ++repeat) {
      auto asg = round_solution(spec, X, seed, repeat);
      CHECK(asg.owner[0] == 1);
      CHECK(asg.owner[1] == BinaryAssignment::kNone);
    }
}

TEST_CASE("draw frequencies match the row probabilities") {
  auto spec = bare_spec(1, 2);
  MatrixD X(1, 2);
  X.at(0, 0) = 0.3;
  X.at(0, 1) = 0.2;
  const std::size_t R = 100000;
  std::size_t count[3] = {0, 0, 0};  // owner 0, owner 1, none
  for (std::uint64_t r = 0; r < R; ++r) {
    auto asg = round_solution(spec, X, 5, r);
    if (asg.owner[0] == 0)
      ++count[0];
    else if (asg.owner[0] == 1)
      ++count[1];
    else
      ++count[2];
  }
  double probs[3] = {0.3, 0.2, 0.5};
  for (int k = 0; k < 3; ++k) {
    double sigma = std::sqrt(probs[k] * (1.0 - probs[k]) * R);
    CHECK(std::abs(static_cast<double>(count[k]) - probs[k] * R) <
          4.0 * sigma);
  }
}

TEST_CASE("rounding is a pure function of seed and repeat") {
  auto spec = bare_spec(100, 3);
  MatrixD X(100, 3);
  testutil::Rand rnd(40);
  for (double& v : X.data()) v = rnd.uniform(0.0, 0.33);

  auto a = round_solution(spec, X, 11, 4);
  auto b = round_solution(spec, X, 11, 4);
  CHECK(a.owner == b.owner);

  auto other_repeat = round_solution(spec, X, 11, 5);
  CHECK(a.owner != other_repeat.owner);
  auto other_seed = round_solution(spec, X, 12, 4);
  CHECK(a.owner != other_seed.owner);
}

TEST_CASE("every linear functional of the rounding is unbiased") {
  auto spec = bare_spec(20, 3);
  MatrixD X(20, 3);
  MatrixD f(20, 3);
  testutil::Rand rnd(41);
  for (double& v : X.data()) v = rnd.uniform(0.0, 0.3);
  for (double& v : f.data()) v = rnd.uniform(-1.0, 1.0);

  double mean = 0.0, var = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    double m = 0.0, second = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      m += f.at(i, j) * X.at(i, j);
      second += f.at(i, j) * f.at(i, j) * X.at(i, j);
    }
    mean += m;
    var += second - m * m;
  }

  const std::size_t R = 2000;
  double sum = 0.0;
  for (std::uint64_t r = 0; r < R; ++r) {
    auto asg = round_solution(spec, X, 6, r);
    for (std::size_t i = 0; i < 20; ++i)
      if (asg.owner[i] != BinaryAssignment::kNone)
        sum += f.at(i, static_cast<std::size_t>(asg.owner[i]));
  }
  double sigma = std::sqrt(var / static_cast<double>(R));
  CHECK(std::abs(sum / static_cast<double>(R) - mean) < 4.0 * sigma);
}

TEST_CASE("oversized probability mass is rejected past the tolerance") {
  auto spec = bare_spec(1, 2);
  MatrixD X(1, 2);
  X.at(0, 0) = 0.7;
  X.at(0, 1) = 0.5;
  CHECK_FAILS("row-sum-exceeds-tolerance", round_solution(spec, X, 1));
}

TEST_CASE("slightly oversized rows renormalize and never draw none") {
  auto spec = bare_spec(1, 2);
  MatrixD X(1, 2);
  X.at(0, 0) = 0.75;
  X.at(0, 1) = 0.25 + 5e-7;
  std::size_t zero_count = 0;
  for (std::uint64_t r = 0; r < 20000; ++r) {
    auto asg = round_solution(spec, X, 7, r);
    CHECK(asg.owner[0] != BinaryAssignment::kNone);
    if (asg.owner[0] == 0) ++zero_count;
  }
  double p0 = 0.75 / (1.0 + 5e-7);
  double sigma = std::sqrt(p0 * (1.0 - p0) * 20000);
  CHECK(std::abs(static_cast<double>(zero_count) - p0 * 20000) < 4.0 * sigma);
}

TEST_CASE("negative entries clamp to zero probability") {
  auto spec = bare_spec(1, 2);
  MatrixD X(1, 2);
  X.at(0, 0) = -0.5;
  X.at(0, 1) = 0.7;
  std::size_t one_count = 0;
  for (std::uint64_t r = 0; r < 20000; ++r) {
    auto asg = round_solution(spec, X, 8, r);
    CHECK(asg.owner[0] != 0);
    if (asg.owner[0] == 1) ++one_count;
  }
  double sigma = std::sqrt(0.7 * 0.3 * 20000);
  CHECK(std::abs(static_cast<double>(one_count) - 0.7 * 20000) < 4.0 * sigma);
}

TEST_CASE("assignment owner-side sums match a dense recount") {
  auto spec = generate_synthetic(80, 3, 2, 1, ObjectiveKind::quadratic, 42);
  MatrixD X(spec.I, spec.J);
  testutil::Rand rnd(42);
  for (double& v : X.data()) v = rnd.uniform(0.0, 0.33);
  auto asg = round_solution(spec, X, 9);

  auto sw = assignment_lhs(spec, asg);
  for (std::size_t s = 0; s < spec.M + spec.N; ++s)
    for (std::size_t j = 0; j < spec.J; ++j) {
      double dense = 0.0;
      for (std::size_t i = 0; i < spec.I; ++i)
        if (asg.owner[i] == static_cast<std::int32_t>(j))
          dense += spec.w(s, i);
      CHECK(std::abs(sw[s][j] - dense) < 1e-9);
    }

  BinaryAssignment short_asg;
  short_asg.owner.assign(spec.I - 1, 0);
  CHECK_FAILS("dimension-mismatch", assignment_lhs(spec, short_asg));
  BinaryAssignment bad_owner = asg;
  bad_owner.owner[3] = 3;
  CHECK_FAILS("dimension-mismatch", assignment_lhs(spec, bad_owner));

  MatrixD wrong(spec.I + 1, spec.J, 0.0);
  CHECK_FAILS("dimension-mismatch", round_solution(spec, wrong, 1));
}

TEST_CASE("assignment CSV round-trips including unassigned items") {
  BinaryAssignment asg;
  asg.owner = {2, BinaryAssignment::kNone, 0, 1};
  auto text = assignment_to_csv(asg);
  auto back = assignment_from_csv(text);
  CHECK(back.owner == asg.owner);

  CHECK_FAILS("malformed-assignment", assignment_from_csv("owner\n0\n"));
  CHECK_FAILS("malformed-assignment",
              assignment_from_csv("item_id,owner\n0,1,2\n"));
  CHECK_FAILS("malformed-assignment",
              assignment_from_csv("item_id,owner\n1,0\n0,2\n"));
}

TEST_CASE("round_best keeps the sample with the lowest constraint MAPD") {
  auto spec = generate_synthetic(30, 3, 1, 1, ObjectiveKind::quadratic, 43);
  MatrixD X(spec.I, spec.J);
  testutil::Rand rnd(43);
  for (double& v : X.data()) v = rnd.uniform(0.0, 0.33);

  const std::size_t repeats = 8;
  auto pick = round_best(spec, X, 10, repeats);
  CHECK(pick.repeat < repeats);

  double best_score = 0.0;
  std::uint64_t best_repeat = 0;
  for (std::uint64_t r = 0; r < repeats; ++r) {
    auto asg = round_solution(spec, X, 10, r);
    auto sw = assignment_lhs(spec, asg);
    double score = ineq_mapd_from_lhs(spec, sw) + eq_mapd_from_lhs(spec, sw);
    if (r == 0 || score < best_score) {
      best_score = score;
      best_repeat = r;
    }
  }
  CHECK(pick.repeat == best_repeat);
  CHECK(pick.ineq_mapd + pick.eq_mapd == doctest::Approx(best_score));
  auto expect = round_solution(spec, X, 10, best_repeat);
  CHECK(pick.assignment.owner == expect.owner);

  auto lone = round_best(spec, X, 10, 0);  // treated as one sample
  CHECK(lone.repeat == 0);
}
