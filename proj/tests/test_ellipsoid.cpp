#include <cmath>

#include "doctest.h"
#include "ellcone/ellipsoid.hpp"
#include "support/geometry.hpp"
#include "support/rng.hpp"

using namespace ellcone;

namespace {

const DomainConfig& cfg() {
  static DomainConfig c;
  return c;
}

Ellipsoid ell1(double q, double c) {
  Mat Q(1, 1);
  Q << q;
  Vec cc(1);
  cc << c;
  return *Ellipsoid::make(Q, cc);
}

double radius1(const Ellipsoid& e) { return 1.0 / std::sqrt(e.Q()(0, 0)); }

}  // namespace

TEST_CASE("homogenize matches the bordered formula") {
  {
    Mat F = homogenize(Ellipsoid::ball(Vec::Zero(2), 1.0));
    Mat expect(3, 3);
    expect << 1, 0, 0, 0, 1, 0, 0, 0, -1;
    CHECK(F.isApprox(expect, 1e-15));
  }
  {
    Mat F = homogenize(ell1(1.0, 2.0));
    Mat expect(2, 2);
    expect << 1, -2, -2, 3;
    CHECK(F.isApprox(expect, 1e-15));
  }
  {
    Mat Q(2, 2);
    Q << 4, 0, 0, 1;
    Vec c(2);
    c << 1, 0;
    Mat F = homogenize(*Ellipsoid::make(Q, c));
    Mat expect(3, 3);
    expect << 4, 0, -4, 0, 1, 0, -4, 0, 3;
    CHECK(F.isApprox(expect, 1e-15));
  }
}

TEST_CASE("includes: the 1-D Thm 1 instance reproduces the dual witness") {
  IncludeResult r = includes(ell1(1.0, 0.0), ell1(0.25, 0.0), cfg());
  REQUIRE(r.included);
  REQUIRE(r.witness.has_value());
  CHECK(std::abs(r.witness->lambda - 0.25) <= 1e-4);
  CHECK(std::abs(r.witness->beta + 0.75) <= 1e-4);
  CHECK(r.cert.size() == 1);
  // Positive verdicts replay through the checker alone.
  CHECK(cert::replay(r.cert).all_certified);
}

TEST_CASE("includes: reflexivity after ratio inflation, and a false case") {
  auto rng = testsupport::make_rng(21);
  Mat Q = testsupport::random_spd(rng, 3);
  Vec c = Vec::Random(3);
  Ellipsoid e = *Ellipsoid::make(Q, c);
  CHECK(includes(e, inflate(e, 1.0 + 1e-5), cfg()).included);
  CHECK(!includes(ell1(0.25, 0.0), ell1(1.0, 0.0), cfg()).included);
}

TEST_CASE("includes is a certified preorder on inflation chains") {
  auto rng = testsupport::make_rng(22);
  std::uniform_real_distribution<double> f(1.02, 1.6);
  int done = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + (trial % 3);
    Ellipsoid a = *Ellipsoid::make(testsupport::random_spd(rng, n),
                                   Vec::Random(n));
    Ellipsoid b = inflate(a, f(rng));
    Ellipsoid c = inflate(b, f(rng));
    REQUIRE(includes(a, b, cfg()).included);
    REQUIRE(includes(b, c, cfg()).included);
    CHECK(includes(a, c, cfg()).included);
    ++done;
  }
  CHECK(done == 50);
}

TEST_CASE("join: 1-D minimal enclosing interval within 2 percent") {
  const Ellipsoid es[2] = {ell1(1.0, 0.0), ell1(1.0, 2.0)};  // [-1,1], [1,3]
  JoinResult r = join(es, cfg());
  REQUIRE(r.result.has_value());
  CHECK(std::abs(r.result->c()[0] - 1.0) <= 0.02 * 2.0);
  CHECK(std::abs(radius1(*r.result) / 2.0 - 1.0) <= 0.02);
  CHECK(r.witness.taus.size() == 2);
  CHECK(cert::replay(r.cert).all_certified);
}

TEST_CASE("join: singleton stays within a e-4 padding factor") {
  const Ellipsoid es[1] = {ell1(1.0, 0.5)};
  JoinResult r = join(es, cfg());
  REQUIRE(r.result.has_value());
  CHECK(radius1(*r.result) <= 1.0 + 1e-4);
  CHECK(radius1(*r.result) >= 1.0 - 1e-4);
}

TEST_CASE("join: duplicate unit discs come back as roughly the unit disc") {
  Ellipsoid disc = Ellipsoid::ball(Vec::Zero(2), 1.0);
  const Ellipsoid es[2] = {disc, disc};
  JoinResult r = join(es, cfg());
  REQUIRE(r.result.has_value());
  CHECK((r.result->Q() - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.02);
  CHECK(r.result->c().norm() < 0.01);
}

TEST_CASE("join soundness by sampling") {
  auto rng = testsupport::make_rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 2;
    std::vector<Ellipsoid> es;
    for (int k = 0; k < 3; ++k)
      es.push_back(*Ellipsoid::make(testsupport::random_spd(rng, n),
                                    2.0 * Vec::Random(n)));
    JoinResult r = join(es, cfg());
    REQUIRE(r.result.has_value());
    for (const Ellipsoid& e : es)
      for (int s = 0; s < 300; ++s)
        CHECK(r.result->contains(testsupport::sample_in_ellipsoid(rng, e),
                                 1e-9));
  }
}

TEST_CASE("affine_image: rotation preserves the unit disc") {
  Mat A(2, 2);
  A << 0, -1, 1, 0;
  Ellipsoid disc = Ellipsoid::ball(Vec::Zero(2), 1.0);
  AffineResult r = affine_image(disc, A, Vec::Zero(2), cfg().affine_eps, cfg());
  REQUIRE(r.result.has_value());
  CHECK((r.result->Q() - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.02);
  CHECK(cert::replay(r.cert).all_certified);
}

TEST_CASE("affine_image: doubling in 1-D lands at a quarter shape") {
  Mat A(1, 1);
  A << 2;
  AffineResult r = affine_image(ell1(1.0, 0.0), A, Vec::Zero(1),
                                cfg().affine_eps, cfg());
  REQUIRE(r.result.has_value());
  CHECK(r.result->Q()(0, 0) == doctest::Approx(0.25).epsilon(0.01));
  CHECK(std::abs(r.result->c()[0]) < 1e-9);
}

TEST_CASE("affine_image: singular map still contains the eps ball") {
  Mat A = Mat::Zero(1, 1);
  Vec b(1);
  b << 3.0;
  const double eps = 1e-4;
  AffineResult r = affine_image(ell1(1.0, 0.0), A, b, eps, cfg());
  REQUIRE(r.result.has_value());
  Vec probe(1);
  probe << 3.0 + eps;
  CHECK(r.result->contains(probe, 1e-12));
  probe << 3.0 - eps;
  CHECK(r.result->contains(probe, 1e-12));
}

TEST_CASE("verify_affine_image examples") {
  Ellipsoid e = ell1(1.0, 0.0);
  Mat I1 = Mat::Identity(1, 1);
  {
    VerifyResult v =
        verify_affine_image(e, I1, Vec::Zero(1), inflate(e, 1.01), cfg());
    CHECK(v.ok);
    CHECK(v.cert.size() == 2);
  }
  {
    Mat A(1, 1);
    A << 2;
    Ellipsoid cand = ell1(0.25 / 1.01, 0.0);
    CHECK(verify_affine_image(e, A, Vec::Zero(1), cand, cfg()).ok);
  }
  {
    Mat A(1, 1);
    A << 2;
    Ellipsoid cand = ell1(0.5, 0.0);  // x=1 maps to 2; 4*0.5 = 2 > 1
    CHECK(!verify_affine_image(e, A, Vec::Zero(1), cand, cfg()).ok);
  }
}

TEST_CASE("inflate basics and monotone inclusion") {
  Ellipsoid e = ell1(1.0, 0.0);
  CHECK(inflate(e, 1.0).Q()(0, 0) == 1.0);
  CHECK(inflate(e, 2.0).Q()(0, 0) == doctest::Approx(0.25));
  Mat Q(2, 2);
  Q << 4, 0, 0, 9;
  Vec c(2);
  c << 1, -1;
  Ellipsoid e2 = *Ellipsoid::make(Q, c);
  Ellipsoid e3 = inflate(e2, 3.0);
  CHECK(e3.Q()(0, 0) == doctest::Approx(4.0 / 9.0));
  CHECK(e3.Q()(1, 1) == doctest::Approx(1.0));

  auto rng = testsupport::make_rng(24);
  std::uniform_real_distribution<double> f1d(1.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    Ellipsoid base = *Ellipsoid::make(testsupport::random_spd(rng, 2),
                                      Vec::Random(2));
    double f1 = f1d(rng);
    double f2 = f1 * 1.01;
    CHECK(includes(inflate(base, f1), inflate(base, f2), cfg()).included);
  }
}

TEST_CASE("pack_project keeps certified covers of coordinate shadows") {
  {
    AffineResult r = pack_project(Ellipsoid::ball(Vec::Zero(2), 1.0), 1, cfg());
    REQUIRE(r.result.has_value());
    CHECK(r.result->dim() == 1);
    double rad = radius1(*r.result);
    CHECK(rad >= 1.0 - 1e-6);
    CHECK(rad <= 1.0 + 1e-3);
    CHECK(cert::replay(r.cert).all_certified);
  }
  {
    Mat Q(2, 2);
    Q << 1, 0, 0, 100;
    AffineResult r =
        pack_project(*Ellipsoid::make(Q, Vec::Zero(2)), 1, cfg());
    REQUIRE(r.result.has_value());
    CHECK(radius1(*r.result) == doctest::Approx(1.0).epsilon(1e-3));
  }
  {
    Ellipsoid e = Ellipsoid::ball(Vec::Zero(3), 2.0);
    AffineResult r = pack_project(e, 3, cfg());
    REQUIRE(r.result.has_value());
    CHECK(r.result->Q().isApprox(e.Q()));
  }
  // Sampling oracle: projected samples stay inside.
  auto rng = testsupport::make_rng(25);
  Ellipsoid e = *Ellipsoid::make(testsupport::random_spd(rng, 3),
                                 Vec::Random(3));
  AffineResult r = pack_project(e, 2, cfg());
  REQUIRE(r.result.has_value());
  for (int s = 0; s < 1000; ++s) {
    Vec x = testsupport::sample_in_ellipsoid(rng, e);
    CHECK(r.result->contains(x.head(2), 1e-9));
  }
}

TEST_CASE("pack_product formula and corner saturation") {
  Ellipsoid a = ell1(1.0, 0.0);
  ProductResult r = pack_product(a, a);
  REQUIRE(r.result.has_value());
  CHECK(r.result->Q()(0, 0) == 0.5);
  CHECK(r.result->Q()(1, 1) == 0.5);
  Vec corner(2);
  corner << 1, 1;
  CHECK(r.result->contains(corner));  // value exactly 1: tight
  Vec past(2);
  past << 1.001, 1.001;
  CHECK(!r.result->contains(past));

  auto rng = testsupport::make_rng(26);
  Ellipsoid e1 = *Ellipsoid::make(testsupport::random_spd(rng, 2),
                                  Vec::Random(2));
  Ellipsoid e2 = *Ellipsoid::make(testsupport::random_spd(rng, 1),
                                  Vec::Random(1));
  ProductResult pr = pack_product(e1, e2);
  REQUIRE(pr.result.has_value());
  for (int s = 0; s < 1000; ++s) {
    Vec x = testsupport::sample_in_ellipsoid(rng, e1);
    Vec y = testsupport::sample_in_ellipsoid(rng, e2);
    Vec xy(3);
    xy << x, y;
    CHECK(pr.result->contains(xy, 1e-9));
  }
}

TEST_CASE("brute-force 1-D equivalence for includes and join") {
  auto rng = testsupport::make_rng(27);
  std::uniform_real_distribution<double> center(-3.0, 3.0);
  std::uniform_real_distribution<double> rad(0.2, 2.5);
  int agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    double c1 = center(rng), c2 = center(rng);
    double r1 = rad(rng), r2 = rad(rng);
    // Keep a clear margin so the strict certified test and the exact
    // oracle cannot disagree on razor-thin boundaries.
    double slack = (r2 - r1) - std::abs(c1 - c2);
    if (std::abs(slack) < 1e-3) {
      --trial;
      continue;
    }
    Ellipsoid inner = ell1(1.0 / (r1 * r1), c1);
    Ellipsoid outer = ell1(1.0 / (r2 * r2), c2);
    bool oracle = slack > 0.0;
    IncludeResult ours = includes(inner, outer, cfg());
    CHECK(ours.included == oracle);
    if (ours.included == oracle) ++agree;

    double lo = std::min(c1 - r1, c2 - r2);
    double hi = std::max(c1 + r1, c2 + r2);
    const Ellipsoid es[2] = {inner, outer};
    JoinResult j = join(es, cfg());
    REQUIRE(j.result.has_value());
    double jr = radius1(*j.result);
    double jc = j.result->c()[0];
    CHECK(std::abs(jr / (0.5 * (hi - lo)) - 1.0) <= 0.02);
    CHECK(std::abs(jc - 0.5 * (hi + lo)) <= 0.02 * (hi - lo));
  }
  CHECK(agree == 200);
}
