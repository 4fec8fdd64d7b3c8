#include "ellcone/interval.hpp"

#include <algorithm>
#include <limits>

namespace ellcone {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Endpoint product with the usual interval convention 0 * inf = 0:
// an exact zero endpoint annihilates regardless of the other factor.
double eprod(double x, double y) {
  if (x == 0.0 || y == 0.0) return 0.0;
  return x * y;
}
}  // namespace

double next_down(double x) {
  if (x == kInf) return std::numeric_limits<double>::max();
  if (x == -kInf) return x;
  return std::nextafter(x, -kInf);
}

double next_up(double x) {
  if (x == -kInf) return std::numeric_limits<double>::lowest();
  if (x == kInf) return x;
  return std::nextafter(x, kInf);
}

double add_round_down(double a, double b) {
  const double s = a + b;
  if (s - a == b && s - b == a) return s;  // provably exact
  return next_down(s);
}

namespace {
Interval widened(double lo, double hi) {
  Interval r;
  r.lo = next_down(lo);
  r.hi = next_up(hi);
  return r;
}

// Exact-identity shortcuts: operations with exact 0 / 1 / -1 operands
// involve no rounding, so returning the exact result keeps them
// point-sharp. In particular zero structure (empty sums, zero centers)
// propagates without denormal noise.
bool is_point(const Interval& a, double v) { return a.lo == v && a.hi == v; }
}  // namespace

Interval iv_add(const Interval& a, const Interval& b) {
  if (is_point(a, 0.0)) return b;
  if (is_point(b, 0.0)) return a;
  return widened(a.lo + b.lo, a.hi + b.hi);
}

Interval iv_sub(const Interval& a, const Interval& b) {
  if (is_point(b, 0.0)) return a;
  if (is_point(a, 0.0)) return iv_neg(b);
  return widened(a.lo - b.hi, a.hi - b.lo);
}

Interval iv_neg(const Interval& a) {
  Interval r;
  r.lo = -a.hi;
  r.hi = -a.lo;
  return r;
}

Interval iv_mul(const Interval& a, const Interval& b) {
  if (is_point(a, 0.0) || is_point(b, 0.0)) return Interval(0.0);
  if (is_point(a, 1.0)) return b;
  if (is_point(b, 1.0)) return a;
  if (is_point(a, -1.0)) return iv_neg(b);
  if (is_point(b, -1.0)) return iv_neg(a);
  const double p1 = eprod(a.lo, b.lo);
  const double p2 = eprod(a.lo, b.hi);
  const double p3 = eprod(a.hi, b.lo);
  const double p4 = eprod(a.hi, b.hi);
  return widened(std::min(std::min(p1, p2), std::min(p3, p4)),
                 std::max(std::max(p1, p2), std::max(p3, p4)));
}

Interval iv_div(const Interval& a, const Interval& b) {
  if (b.lo <= 0.0 && b.hi >= 0.0)
    throw std::domain_error("iv_div: divisor interval contains zero");
  if (is_point(a, 0.0)) return Interval(0.0);
  if (is_point(b, 1.0)) return a;
  if (is_point(b, -1.0)) return iv_neg(a);
  const double q1 = a.lo / b.lo;
  const double q2 = a.lo / b.hi;
  const double q3 = a.hi / b.lo;
  const double q4 = a.hi / b.hi;
  return widened(std::min(std::min(q1, q2), std::min(q3, q4)),
                 std::max(std::max(q1, q2), std::max(q3, q4)));
}

Interval iv_sqrt(const Interval& a) {
  if (a.lo < 0.0)
    throw std::domain_error("iv_sqrt: interval extends below zero");
  if (is_point(a, 0.0) || is_point(a, 1.0)) return a;
  return widened(std::sqrt(a.lo), std::sqrt(a.hi));
}

Interval iv_sqrt_clamped(const Interval& a) {
  if (a.hi < 0.0)
    throw std::domain_error("iv_sqrt_clamped: interval entirely negative");
  Interval c = a;
  c.lo = std::max(c.lo, 0.0);
  Interval r = iv_sqrt(c);
  r.lo = std::max(r.lo, 0.0);
  return r;
}

Interval interval_ops(const Interval& a, const Interval& b, IvOp op) {
  switch (op) {
    case IvOp::Add: return iv_add(a, b);
    case IvOp::Sub: return iv_sub(a, b);
    case IvOp::Mul: return iv_mul(a, b);
    case IvOp::Div: return iv_div(a, b);
    case IvOp::Sqrt: return iv_sqrt(a);
  }
  throw std::invalid_argument("interval_ops: unknown op");
}

std::string to_string(const Interval& a) {
  return "[" + std::to_string(a.lo) + ", " + std::to_string(a.hi) + "]";
}

}  // namespace ellcone
