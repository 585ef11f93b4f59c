#include "assign/repro_sum.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "assign/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace assign;

namespace {

std::vector<double> random_terms(std::size_t n, double bound,
                                 std::uint64_t seed) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k)
    v[k] = rng_uniform(seed, RngStream::test, k, -bound, bound);
  return v;
}

}  // namespace

TEST_CASE("sum is bit-identical under permutation") {
  const double bound = 10.0;
  auto terms = random_terms(1000, bound, 1);

  ReproSum forward(bound);
  for (double v : terms) forward.add(v);

  auto shuffled = terms;
  std::mt19937_64 eng(99);
  for (int round = 0; round < 5; ++round) {
    std::shuffle(shuffled.begin(), shuffled.end(), eng);
    ReproSum s(bound);
    for (double v : shuffled) s.add(v);
    CHECK(s.raw() == forward.raw());
    CHECK(s.value() == forward.value());
  }
}

TEST_CASE("chunked partial sums merge to the serial result") {
  const double bound = 3.0;
  auto terms = random_terms(997, bound, 2);

  ReproSum serial(bound);
  for (double v : terms) serial.add(v);

  for (std::size_t chunk : {1u, 7u, 64u, 997u}) {
    ReproSum merged(bound);
    for (std::size_t lo = 0; lo < terms.size(); lo += chunk) {
      ReproSum part(bound);
      std::size_t hi = std::min(terms.size(), lo + chunk);
      for (std::size_t k = lo; k < hi; ++k) part.add(terms[k]);
      merged.merge_raw(part.raw());
    }
    CHECK(merged.raw() == serial.raw());
  }
}

TEST_CASE("quantize feeds merge_raw exactly like add") {
  const double bound = 2.0;
  auto terms = random_terms(500, bound, 3);
  ReproSum a(bound), b(bound);
  for (double v : terms) {
    a.add(v);
    b.merge_raw(b.quantize(v));
  }
  CHECK(a.raw() == b.raw());
}

TEST_CASE("value tracks the true sum within the quantization budget") {
  const double bound = 10.0;
  const std::size_t n = 10000;
  auto terms = random_terms(n, bound, 4);

  ReproSum s(bound);
  long double exact = 0.0L;
  for (double v : terms) {
    s.add(v);
    exact += static_cast<long double>(v);
  }
  // Per-term error is at most half a unit; unit = 2^(e-52) with e = 4.
  double per_term = std::ldexp(1.0, 4 - 53);
  double budget = static_cast<double>(n) * per_term;
  CHECK(std::abs(s.value() - static_cast<double>(exact)) <= budget);
}

TEST_CASE("zero bound accepts only exact zeros") {
  ReproSum s(0.0);
  s.add(0.0);
  s.add(0.0);
  CHECK(s.value() == 0.0);
  CHECK(s.raw() == 0);
}

TEST_CASE("invalid bounds are rejected") {
  CHECK_FAILS("invalid-bound", ReproSum(-1.0));
  CHECK_FAILS("invalid-bound",
              ReproSum(std::numeric_limits<double>::infinity()));
  CHECK_FAILS("invalid-bound",
              ReproSum(std::numeric_limits<double>::quiet_NaN()));
}

TEST_CASE("reset clears the accumulator") {
  ReproSum s(1.0);
  s.add(0.5);
  s.reset();
  CHECK(s.raw() == 0);
  CHECK(s.value() == 0.0);
}

TEST_CASE("wide sum keeps precision on terms far below the bound") {
  // Squared deltas near convergence: magnitudes ~1e-18 under bound 1. The
  // single-limb codec would quantize every term to zero.
  const std::size_t n = 10000;
  WideReproSum wide(1.0);
  ReproSum narrow(1.0);
  long double exact = 0.0L;
  for (std::size_t k = 0; k < n; ++k) {
    double v = 1e-18 * (1.0 + rng_uniform01(5, RngStream::test, k));
    wide.add(v);
    narrow.add(v);
    exact += static_cast<long double>(v);
  }
  CHECK(narrow.value() == 0.0);
  double rel = std::abs(wide.value() - static_cast<double>(exact)) /
               static_cast<double>(exact);
  CHECK(rel < 1e-10);
}

TEST_CASE("wide sum handles mixed magnitudes and merges order-free") {
  const std::size_t n = 2000;
  std::vector<double> terms(n);
  for (std::size_t k = 0; k < n; ++k) {
    double scale = (k % 2 == 0) ? 0.5 : 1e-20;
    terms[k] = scale * rng_uniform01(6, RngStream::test, k);
  }

  WideReproSum serial(1.0);
  long double exact = 0.0L;
  for (double v : terms) {
    serial.add(v);
    exact += static_cast<long double>(v);
  }

  WideReproSum merged(1.0);
  for (std::size_t lo = 0; lo < n; lo += 129) {
    WideReproSum part(1.0);
    for (std::size_t k = lo; k < std::min(n, lo + 129); ++k)
      part.add(terms[k]);
    merged.merge(part);
  }
  CHECK(merged.raw_hi() == serial.raw_hi());
  CHECK(merged.raw_lo() == serial.raw_lo());
  CHECK(merged.value() == serial.value());

  double err = std::abs(serial.value() - static_cast<double>(exact));
  CHECK(err < 1e-12);

  WideReproSum raw_merge(1.0);
  raw_merge.merge_raw(serial.raw_hi(), serial.raw_lo());
  CHECK(raw_merge.value() == serial.value());
}

TEST_CASE("wide sum with zero bound is inert") {
  WideReproSum s(0.0);
  s.add(0.0);
  CHECK(s.value() == 0.0);
}

TEST_CASE("int128 splits into halves and back") {
  std::vector<__int128> cases = {0, 1, -1, 12345678901234567LL};
  __int128 big = (static_cast<__int128>(0x0123456789ABCDEFULL) << 64) |
                 static_cast<__int128>(0xFEDCBA9876543210ULL);
  cases.push_back(big);
  cases.push_back(-big);
  for (__int128 v : cases) {
    std::uint64_t lo = 0, hi = 0;
    split_i128(v, lo, hi);
    CHECK(join_i128(lo, hi) == v);
  }
}
