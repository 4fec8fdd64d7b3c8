#include <cmath>

#include "doctest.h"
#include "ellcone/interval_linalg.hpp"
#include "support/rng.hpp"

using namespace ellcone;

namespace {

IntervalMatrix pts(int n, std::initializer_list<double> vals) {
  std::vector<double> v(vals);
  return IntervalMatrix::from_points(n, v);
}

bool contains_entrywise(const IntervalMatrix& outer, const IntervalMatrix& inner) {
  for (int i = 0; i < outer.dim(); ++i)
    for (int j = 0; j < outer.dim(); ++j)
      if (!outer.at(i, j).contains(inner.at(i, j))) return false;
  return true;
}

}  // namespace

TEST_CASE("diagonal point matrix decomposes with identity L") {
  auto r = ldlt_interval(pts(2, {4, 0, 0, 9}));
  REQUIRE(r.has_value());
  CHECK(r->l(1, 0) == 0.0);
  CHECK(r->D[0].contains(4.0));
  CHECK(r->D[1].contains(9.0));
}

TEST_CASE("textbook 2x2 factorization") {
  auto r = ldlt_interval(pts(2, {4, 2, 2, 2}));
  REQUIRE(r.has_value());
  CHECK(r->l(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r->D[0].contains(4.0));
  CHECK(r->D[1].contains(1.0));
  CHECK(contains_entrywise(ldlt_product(*r), pts(2, {4, 2, 2, 2})));
}

TEST_CASE("indefinite matrix fails at the second pivot") {
  CHECK(!ldlt_interval(pts(2, {1, 2, 2, 1})).has_value());
}

TEST_CASE("check_psd verdicts") {
  CHECK(check_psd(IntervalMatrix::identity(3)) == PsdCheck::Certified);
  CHECK(check_psd(IntervalMatrix(2)) == PsdCheck::Unknown);  // zero matrix
  CHECK(check_psd(pts(2, {1, 2, 2, 1})) == PsdCheck::Unknown);
  CHECK(check_psd(IntervalMatrix(0)) == PsdCheck::Certified);  // vacuous
}

TEST_CASE("check_lmi basics") {
  IntervalMatrix I2 = IntervalMatrix::identity(2);
  IntervalMatrix negI(2);
  negI.set(0, 0, Interval(-1.0));
  negI.set(1, 1, Interval(-1.0));

  {
    const IntervalMatrix mats[1] = {I2};
    const double alphas[1] = {1.0};
    CHECK(check_lmi(mats, alphas) == PsdCheck::Certified);
  }
  {
    const IntervalMatrix mats[2] = {I2, negI};
    const double alphas[2] = {1.0, 1.0};
    CHECK(check_lmi(mats, alphas) == PsdCheck::Unknown);  // sum is zero
  }
  {
    IntervalMatrix d2(2), offd(2);
    d2.set(0, 0, Interval(2.0));
    d2.set(1, 1, Interval(2.0));
    offd.set(0, 1, Interval(1.0));
    const IntervalMatrix mats[2] = {d2, offd};
    const double alphas[2] = {1.0, 1.0};
    CHECK(check_lmi(mats, alphas) == PsdCheck::Certified);  // eigs 1 and 3
  }
  {
    const IntervalMatrix mats[2] = {I2, IntervalMatrix::identity(3)};
    const double alphas[2] = {1.0, 1.0};
    CHECK_THROWS_AS(check_lmi(mats, alphas), std::invalid_argument);
  }
}

TEST_CASE("ldlt product containment on random certified matrices") {
  auto rng = testsupport::make_rng(2);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> dims(1, 6);
  int tested = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = dims(rng);
    // Random G G^T + shift, then a touch of interval width.
    std::vector<double> G(size_t(n) * n);
    for (double& g : G) g = unit(rng);
    std::vector<double> A(size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int k = 0; k < n; ++k) s += G[i * n + k] * G[j * n + k];
        A[i * n + j] = s + (i == j ? 0.3 : 0.0);
      }
    IntervalMatrix M(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        double v = A[i * n + j];
        double w = 1e-12 * std::abs(unit(rng));
        M.set(i, j, Interval(v - w, v + w));
      }
    auto f = ldlt_interval(M);
    if (!f) continue;
    ++tested;
    CHECK(contains_entrywise(ldlt_product(*f), M));
  }
  CHECK(tested > 100);
}

TEST_CASE("certified matrices have positive sampled Rayleigh quotients") {
  auto rng = testsupport::make_rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  IntervalMatrix M(3);
  M.set(0, 0, Interval(2.0));
  M.set(1, 1, Interval(3.0));
  M.set(2, 2, Interval(2.5));
  M.set(0, 1, Interval(0.5));
  M.set(1, 2, Interval(-0.7));
  M.set(0, 2, Interval(0.2));
  REQUIRE(check_psd(M) == PsdCheck::Certified);
  for (int s = 0; s < 1000; ++s) {
    double x[3] = {gauss(rng), gauss(rng), gauss(rng)};
    double norm = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    if (norm < 1e-9) continue;
    double q = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) q += x[i] * M.at(i, j).mid() * x[j];
    CHECK(q / (norm * norm) > 0.0);
  }
}

TEST_CASE("positive scaling preserves certificates") {
  auto rng = testsupport::make_rng(4);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  int certified = 0;
  for (int trial = 0; trial < 50; ++trial) {
    IntervalMatrix A(2), B(2);
    A.set(0, 0, Interval(2.0 + unit(rng)));
    A.set(1, 1, Interval(2.0 + unit(rng)));
    A.set(0, 1, Interval(0.3 * unit(rng)));
    B.set(0, 0, Interval(unit(rng)));
    B.set(1, 1, Interval(unit(rng)));
    B.set(0, 1, Interval(0.2 * unit(rng)));
    const IntervalMatrix mats[2] = {A, B};
    const double alphas[2] = {1.0, 0.4};
    if (check_lmi(mats, alphas) != PsdCheck::Certified) continue;
    ++certified;
    for (double s : {1.5, 2.0, 10.0, 1e6}) {
      const double scaled[2] = {alphas[0] * s, alphas[1] * s};
      CHECK(check_lmi(mats, scaled) == PsdCheck::Certified);
    }
  }
  CHECK(certified > 10);
}
