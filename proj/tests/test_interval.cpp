#include <cmath>

#include "doctest.h"
#include "ellcone/interval.hpp"
#include "support/rng.hpp"

using namespace ellcone;

TEST_CASE("exact integer addition stays within two ulps") {
  Interval r = iv_add(Interval(1.0), Interval(2.0));
  CHECK(r.contains(3.0));
  CHECK(r.width() <= 2 * (std::nextafter(3.0, 4.0) - 3.0));
}

TEST_CASE("zero annihilates multiplication up to one ulp per endpoint") {
  Interval r = iv_mul(Interval(0.0), Interval(-5.0, 7.0));
  CHECK(r.contains(0.0));
  CHECK(r.lo >= -5e-324);
  CHECK(r.hi <= 5e-324);
}

TEST_CASE("sqrt of a perfect square") {
  Interval r = iv_sqrt(Interval(4.0));
  CHECK(r.contains(2.0));
  CHECK(r.width() <= 2 * (std::nextafter(2.0, 3.0) - 2.0));
}

TEST_CASE("domain violations are explicit errors") {
  CHECK_THROWS_AS(iv_div(Interval(1.0), Interval(-1.0, 1.0)),
                  std::domain_error);
  CHECK_THROWS_AS(iv_sqrt(Interval(-1.0, 1.0)), std::domain_error);
}

TEST_CASE("containment fuzz: concrete results stay inside interval results") {
  auto rng = testsupport::make_rng(1);
  std::uniform_real_distribution<double> mag(-50.0, 50.0);
  std::uniform_real_distribution<double> wid(0.0, 3.0);
  std::uniform_int_distribution<int> opd(0, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  long violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const IvOp op = static_cast<IvOp>(opd(rng));
    double alo = mag(rng), blo = mag(rng);
    Interval a(alo, alo + wid(rng));
    Interval b(blo, blo + wid(rng));
    if (op == IvOp::Div && b.lo <= 0.0 && b.hi >= 0.0) continue;
    if (op == IvOp::Sqrt && a.lo < 0.0) a = Interval(-a.lo, -a.lo + a.width());

    Interval r = interval_ops(a, b, op);
    for (int s = 0; s < 100; ++s) {
      double x = a.lo + unit(rng) * a.width();
      double y = b.lo + unit(rng) * b.width();
      double z = 0;
      switch (op) {
        case IvOp::Add: z = x + y; break;
        case IvOp::Sub: z = x - y; break;
        case IvOp::Mul: z = x * y; break;
        case IvOp::Div: z = x / y; break;
        case IvOp::Sqrt: z = std::sqrt(x); break;
      }
      if (!r.contains(z)) ++violations;
    }
  }
  CHECK(violations == 0);
}
