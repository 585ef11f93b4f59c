#pragma once

#include <cmath>
#include <cstdint>

#include "assign/errors.hpp"

namespace assign {

// Order-independent floating-point summation. Each term is converted to a
// fixed-point integer in a unit derived from an a-priori magnitude bound,
// then accumulated in 128-bit integers. Integer addition is associative, so
// partial sums can be merged in any order (across partitions, workers,
// threads) and still produce bit-identical results.
//
// With bound B and exponent e = ceil(log2 B), the unit is 2^(e-52): every
// |v| <= B scales to an integer of magnitude <= 2^52 (exact in an int64),
// and per-term quantization error is <= 2^(e-53), i.e. one double ulp of the
// bound. An __int128 accumulator absorbs ~2^75 terms without overflow.
class ReproSum {
 public:
  // bound must satisfy |v| <= bound for every added term; bound == 0 means
  // all terms are exactly zero.
  explicit ReproSum(double bound) {
    if (!(bound >= 0.0) || std::isinf(bound)) {
      fail("invalid-bound", "ReproSum bound must be finite and nonnegative");
    }
    if (bound == 0.0) {
      inv_unit_ = 0.0;
      unit_ = 0.0;
      return;
    }
    int e = std::ilogb(bound) + 1;
    inv_unit_ = std::ldexp(1.0, 52 - e);
    unit_ = std::ldexp(1.0, e - 52);
  }

  void add(double v) { acc_ += quantize(v); }

  // The exact integer a term contributes; callers that keep their own raw
  // accumulators (engine slots) must quantize through this so merged values
  // match a serial ReproSum bit for bit.
  __int128 quantize(double v) const {
    return static_cast<__int128>(std::llrint(v * inv_unit_));
  }

  void merge_raw(__int128 raw) { acc_ += raw; }

  __int128 raw() const { return acc_; }

  double value() const { return static_cast<double>(acc_) * unit_; }

  void reset() { acc_ = 0; }

 private:
  __int128 acc_ = 0;
  double inv_unit_ = 0.0;
  double unit_ = 0.0;
};

// Two-limb variant with ~105 bits of fractional precision below the bound.
// Used where terms can be many orders of magnitude smaller than the bound
// (e.g. squared solution deltas near convergence) yet their sum must stay
// both accurate and order-independent.
class WideReproSum {
 public:
  explicit WideReproSum(double bound) : hi_(bound) {
    if (bound > 0.0) {
      int e = std::ilogb(bound) + 1;
      unit_hi_ = std::ldexp(1.0, e - 52);
      inv_unit_hi_ = std::ldexp(1.0, 52 - e);
      inv_unit_lo_ = std::ldexp(1.0, 105 - e);
      unit_lo_ = std::ldexp(1.0, e - 105);
      active_ = true;
    }
  }

  void add(double v) {
    if (!active_) return;
    double hi = std::llrint(v * inv_unit_hi_);
    // Sterbenz: v and hi*unit_hi agree to within half a unit, so the
    // subtraction is exact.
    double resid = v - hi * unit_hi_;
    hi_.merge_raw(static_cast<__int128>(static_cast<std::int64_t>(hi)));
    lo_ += static_cast<__int128>(std::llrint(resid * inv_unit_lo_));
  }

  void merge(const WideReproSum& other) {
    hi_.merge_raw(other.hi_.raw());
    lo_ += other.lo_;
  }

  void merge_raw(__int128 hi, __int128 lo) {
    hi_.merge_raw(hi);
    lo_ += lo;
  }

  __int128 raw_hi() const { return hi_.raw(); }
  __int128 raw_lo() const { return lo_; }

  double value() const {
    if (!active_) return 0.0;
    return hi_.value() + static_cast<double>(lo_) * unit_lo_;
  }

 private:
  ReproSum hi_;
  __int128 lo_ = 0;
  double unit_hi_ = 0.0, inv_unit_hi_ = 0.0;
  double unit_lo_ = 0.0, inv_unit_lo_ = 0.0;
  bool active_ = false;
};

// int128 <-> two uint64 halves, for message payloads and checkpoint files.
inline void split_i128(__int128 v, std::uint64_t& lo, std::uint64_t& hi) {
  unsigned __int128 u = static_cast<unsigned __int128>(v);
  lo = static_cast<std::uint64_t>(u);
  hi = static_cast<std::uint64_t>(u >> 64);
}

inline __int128 join_i128(std::uint64_t lo, std::uint64_t hi) {
  unsigned __int128 u =
      (static_cast<unsigned __int128>(hi) << 64) | static_cast<unsigned __int128>(lo);
  return static_cast<__int128>(u);
}

}  // namespace assign
