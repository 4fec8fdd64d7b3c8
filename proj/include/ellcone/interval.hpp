#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace ellcone {

/// Closed interval of binary64 floating-point numbers.
///
/// This is the currency of the trusted checker. Every arithmetic
/// operation widens its result outward by one unit in the last place
/// instead of switching the hardware rounding mode; since the IEEE
/// basic operations are correctly rounded, the true real result of an
/// operation on any pair of points drawn from the operand intervals is
/// always contained in the returned interval.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  Interval(double point) : lo(point), hi(point) {}
  Interval(double l, double h) : lo(l), hi(h) {
    if (std::isnan(l) || std::isnan(h) || l > h)
      throw std::invalid_argument("Interval: bad endpoints");
  }

  double mid() const {
    double m = 0.5 * (lo + hi);
    if (!std::isfinite(m)) m = 0.5 * lo + 0.5 * hi;
    return m;
  }
  double width() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
  bool is_finite() const { return std::isfinite(lo) && std::isfinite(hi); }
};

/// Next representable double toward -inf / +inf. -0.0 and +0.0 are
/// treated as the same point on the number line.
double next_down(double x);
double next_up(double x);

/// Largest double provably <= the real a + b: the float sum when the
/// error-free test shows it is exact (integers, in particular), one
/// ulp down otherwise.
double add_round_down(double a, double b);

Interval iv_add(const Interval& a, const Interval& b);
Interval iv_sub(const Interval& a, const Interval& b);
Interval iv_mul(const Interval& a, const Interval& b);
Interval iv_neg(const Interval& a);

/// Requires 0 not in b; throws std::domain_error otherwise.
Interval iv_div(const Interval& a, const Interval& b);

/// Requires a.lo >= 0; throws std::domain_error otherwise.
Interval iv_sqrt(const Interval& a);

/// Upper-bound oriented square root for slope arithmetic: the lower
/// endpoint is clamped to zero when rounding drove it slightly
/// negative. Still requires a.hi >= 0.
Interval iv_sqrt_clamped(const Interval& a);

enum class IvOp { Add, Sub, Mul, Div, Sqrt };

/// Single dispatch entry point. For Sqrt the second operand is ignored.
Interval interval_ops(const Interval& a, const Interval& b, IvOp op);

std::string to_string(const Interval& a);

}  // namespace ellcone
