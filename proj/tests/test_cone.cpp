#include <cmath>

#include "doctest.h"
#include "ellcone/cone.hpp"
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

Cone cone1(double q, double c, double beta, double delta, double lambda,
           bool extrap) {
  CounterSlot s;
  s.beta = beta;
  s.delta = Vec::Constant(1, delta);
  s.lambda = lambda;
  s.extrapolated = extrap;
  return Cone(ell1(q, c), {s});
}

Vec v1(double x) { return Vec::Constant(1, x); }

}  // namespace

TEST_CASE("cone_includes: reflexivity goes through the fast path") {
  Cone C = cone1(1.0, 0.0, 0.5, 0.25, 0.0, true);
  ConeIncludeResult r = cone_includes(C, C, cfg());
  REQUIRE(r.included);
  bool has_eq_step = false;
  for (const auto& s : r.cert.steps)
    if (s.tag == "cone_eq" || s.tag == "cone_base_eq") has_eq_step = true;
  CHECK(has_eq_step);
  CHECK(cert::replay(r.cert).all_certified);
}

TEST_CASE("cone_includes: wider slope contains, narrower rejects") {
  Cone C = cone1(1.0, 0.0, 1.0, 0.0, 0.0, true);
  Cone Cwide = cone1(1.0, 0.0, 2.0, 0.0, 0.0, true);
  ConeIncludeResult r = cone_includes(C, Cwide, cfg());
  REQUIRE(r.included);
  CHECK(cert::replay(r.cert).all_certified);

  // Sampling oracle over the counter grid.
  auto rng = testsupport::make_rng(31);
  for (int s = 0; s < 1000; ++s) {
    auto [x, y] = testsupport::sample_in_cone(rng, C);
    CHECK(Cwide.contains(x, y, 1e-9));
  }

  CHECK(!cone_includes(Cwide, C, cfg()).included);
}

TEST_CASE("cone_includes: raised level without extrapolation fails (i)") {
  Cone C = cone1(1.0, 0.0, 1.0, 0.0, 0.0, false);
  Cone Cp = cone1(1.0, 0.0, 1.0, 0.0, 1.0, false);
  CHECK(!cone_includes(C, Cp, cfg()).included);
}

TEST_CASE("counter_increment rounds toward minus infinity") {
  Cone C = cone1(1.0, 0.0, 0.0, 0.0, 0.0, false);
  CHECK(counter_increment(C, 0, 1.0).slots()[0].lambda == 1.0);
  Cone C3 = cone1(1.0, 0.0, 0.0, 0.0, 3.0, false);
  CHECK(counter_increment(C3, 0, -1.0).slots()[0].lambda == 2.0);
  Cone Cf = cone1(1.0, 0.0, 0.0, 0.0, 0.1, false);
  double nl = counter_increment(Cf, 0, 0.2).slots()[0].lambda;
  CHECK(nl <= 0.1 + 0.2);
  CHECK(nl >= 0.2999999999);
  CHECK_THROWS_AS(counter_increment(C, 5, 1.0), std::out_of_range);
}

TEST_CASE("add_counter sets the prescribed slot") {
  Cone C = cone1(1.0, 0.0, 0.5, 1.0, 2.0, true);
  Cone C2 = add_counter(C, 0.0, true);
  REQUIRE(C2.counters() == 2);
  CHECK(C2.slots()[1].beta == 0.0);
  CHECK(C2.slots()[1].delta.norm() == 0.0);
  CHECK(C2.slots()[1].lambda == 0.0);
  CHECK(!C2.slots()[1].extrapolated);
  CHECK(add_counter(C, 1.5, false).slots()[1].extrapolated);
  // Concretization unchanged on the slice y_new = lambda_new.
  auto rng = testsupport::make_rng(32);
  for (int s = 0; s < 200; ++s) {
    auto [x, y] = testsupport::sample_in_cone(rng, C);
    Vec y2(2);
    y2 << y[0], 0.0;
    CHECK(C2.contains(x, y2, 1e-9));
  }
}

TEST_CASE("cone_affine: identity map keeps the cone up to padding") {
  Cone C = cone1(1.0, 0.5, 0.75, 0.25, 0.0, true);
  ConeOpResult r = cone_affine(C, Mat::Identity(1, 1), Vec::Zero(1), cfg());
  REQUIRE(r.result.has_value());
  CHECK(r.result->base().Q()(0, 0) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(r.result->base().c()[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.result->slots()[0].beta == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(r.result->slots()[0].delta[0] == 0.25);
  CHECK(cert::replay(r.cert).all_certified);
}

TEST_CASE("cone_affine: translation case from the hand computation") {
  Cone C = cone1(1.0, 0.0, 0.0, 1.0, 0.0, true);
  Mat A = Mat::Identity(1, 1);
  Vec b = v1(1.0);
  ConeOpResult r = cone_affine(C, A, b, cfg());
  REQUIRE(r.result.has_value());
  CHECK(r.result->base().c()[0] == doctest::Approx(1.0));
  CHECK(r.result->slots()[0].delta[0] == doctest::Approx(1.0));
  CHECK(r.result->base().Q()(0, 0) == doctest::Approx(1.0).epsilon(0.01));
  // Sampling oracle for the concrete map x -> x + 1.
  auto rng = testsupport::make_rng(33);
  for (int s = 0; s < 1000; ++s) {
    auto [x, y] = testsupport::sample_in_cone(rng, C);
    CHECK(r.result->contains(v1(x[0] + 1.0), y, 1e-9));
  }
}

TEST_CASE("cone_affine: contraction lets the volume objective expand q") {
  Cone C = cone1(1.0, 0.0, 0.0, 0.0, 0.0, true);
  Mat A(1, 1);
  A << 0.5;
  ConeOpResult r = cone_affine(C, A, Vec::Zero(1), cfg());
  REQUIRE(r.result.has_value());
  CHECK(r.result->base().Q()(0, 0) == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("remove_counter: slope one over [0,2] gives the interval [-3,3]") {
  Cone C = cone1(1.0, 0.0, 1.0, 0.0, 0.0, true);
  ConeOpResult r = remove_counter(C, 0, 0.0, 2.0, cfg());
  REQUIRE(r.result.has_value());
  CHECK(r.result->counters() == 0);
  CHECK(r.result->base().Q()(0, 0) == doctest::Approx(1.0 / 9.0).epsilon(0.03));
  CHECK(std::abs(r.result->base().c()[0]) < 0.05);
  CHECK(cert::replay(r.cert).all_certified);

  // Sampled points of C restricted to y in [0,2] project inside.
  auto rng = testsupport::make_rng(34);
  std::uniform_real_distribution<double> yview(0.0, 2.0);
  for (int s = 0; s < 1000; ++s) {
    double y = std::floor(yview(rng) * 2.0) / 2.0;  // grid {0,.5,...,2}
    auto level = Ellipsoid::make(Mat(C.base().Q() / ((1 + y) * (1 + y))),
                                 C.base().c());
    Vec x = testsupport::sample_in_ellipsoid(rng, *level);
    CHECK(r.result->base().contains(x, 1e-9));
  }
}

TEST_CASE("remove_counter: exact-level removal re-certifies the base") {
  Cone C = cone1(1.0, 0.25, 1.0, 0.5, 2.0, false);
  ConeOpResult r = remove_counter(C, 0, 2.0, 2.0, cfg());
  REQUIRE(r.result.has_value());
  CHECK(r.result->counters() == 0);
  CHECK(r.result->base().Q()(0, 0) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(r.result->base().c()[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK_THROWS_AS(remove_counter(C, 0, 2.0, 5.0, cfg()),
                  std::invalid_argument);
}

TEST_CASE("ratio_bound certifies the scalar examples") {
  {
    Mat q(1, 1);
    q << 1.0;
    RatioResult r = ratio_bound(q, q, cfg());
    REQUIRE(r.ok);
    CHECK(r.r == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(cert::replay(r.cert).all_certified);
  }
  {
    Mat qf(1, 1), qt(1, 1);
    qf << 1.0;
    qt << 4.0;
    RatioResult r = ratio_bound(qf, qt, cfg());
    REQUIRE(r.ok);
    CHECK(r.r == doctest::Approx(2.0).epsilon(1e-6));
  }
  {
    Mat qf(2, 2), qt(2, 2);
    qf << 1, 0, 0, 4;
    qt << 4, 0, 0, 1;
    RatioResult r = ratio_bound(qf, qt, cfg());
    REQUIRE(r.ok);
    CHECK(r.r == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("widen_partial: identical cones change only by slope rounding") {
  Cone C = cone1(1.0, 0.0, 0.5, 0.25, 0.0, true);
  ConeOpResult r = widen_partial(C, C, cfg());
  REQUIRE(r.result.has_value());
  CHECK(r.result->slots()[0].beta == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(r.result->slots()[0].delta[0] == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("widen_partial: the barycenter worked example") {
  Cone C = cone1(1.0, 0.0, 1.0, 0.0, 0.0, true);
  Cone Cp = cone1(1.0, 0.0, 1.0, 2.0, 0.0, true);
  ConeOpResult r = widen_partial(C, Cp, cfg());
  REQUIRE(r.result.has_value());
  CHECK(r.result->slots()[0].delta[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.result->slots()[0].beta == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(cert::replay(r.cert).all_certified);
}

TEST_CASE("widen_partial: inert slots stay untouched") {
  Cone C = cone1(1.0, 0.0, 0.25, 0.5, 0.0, false);
  Cone Cp = cone1(1.0, 0.0, 0.75, -0.5, 0.0, false);
  ConeOpResult r = widen_partial(C, Cp, cfg());
  REQUIRE(r.result.has_value());
  CHECK(!r.result->slots()[0].extrapolated);
  CHECK(r.result->slots()[0].beta == 0.25);
  CHECK(r.result->slots()[0].delta[0] == 0.5);
}

TEST_CASE("widen: unit drift example stabilizes the shape") {
  Cone C = cone1(1.0, 0.0, 0.0, 0.0, 0.0, false);
  Cone Cp = cone1(1.0, 1.0, 0.0, 0.0, 1.0, false);
  ConeOpResult r = widen(C, Cp, false, cfg());
  REQUIRE(r.result.has_value());
  const CounterSlot& s = r.result->slots()[0];
  CHECK(s.extrapolated);
  CHECK(s.delta[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(s.beta) <= 1e-4);
  CHECK(r.result->base().Q()(0, 0) == 1.0);  // keeps C's base
  CHECK(r.result->slots()[0].lambda == 0.0);
  CHECK(cert::replay(r.cert).all_certified);

  // Containment of both arguments by sampling.
  auto rng = testsupport::make_rng(35);
  for (int sidx = 0; sidx < 500; ++sidx) {
    auto [x, y] = testsupport::sample_in_cone(rng, C);
    CHECK(r.result->contains(x, y, 1e-9));
    auto [x2, y2] = testsupport::sample_in_cone(rng, Cp);
    CHECK(r.result->contains(x2, y2, 1e-9));
  }
}

TEST_CASE("widen: zero shift degenerates to the ratio term") {
  Cone C = cone1(1.0, 0.0, 0.0, 0.0, 0.0, false);
  Cone Cp = cone1(1.0 / 4.0, 0.0, 0.0, 0.0, 1.0, false);  // radius 2 base
  ConeOpResult r = widen(C, Cp, false, cfg());
  REQUIRE(r.result.has_value());
  const CounterSlot& s = r.result->slots()[0];
  CHECK(s.delta.norm() == 0.0);
  // R reduces to r = 2: slope about 1 per step.
  CHECK(s.beta == doctest::Approx(1.0).epsilon(2e-2));
}

TEST_CASE("widening loop terminates within the cap budget") {
  // A one-variable random-walk shaped iteration at cone level; the
  // stabilization test is the horizon-bounded one the analyzer uses.
  const int beta_cap = 3;
  const Vec horizon = v1(1000.0);
  Cone inv = cone1(1.0, 0.0, 0.0, 0.0, 0.0, false);
  int widens = 0;
  bool stable = false;
  for (int iter = 0; iter < beta_cap + 4; ++iter) {
    const Mat hint = inv.base().Q();
    ConeOpResult left =
        cone_affine(inv, Mat::Identity(1, 1), v1(1.0), cfg(), &hint);
    ConeOpResult right =
        cone_affine(inv, Mat::Identity(1, 1), v1(-1.0), cfg(), &hint);
    REQUIRE(left.result.has_value());
    REQUIRE(right.result.has_value());
    const Cone branches[2] = {*left.result, *right.result};
    ConeOpResult merged = cone_join(branches, cfg());
    REQUIRE(merged.result.has_value());
    Cone next = counter_increment(*merged.result, 0, 1.0);
    ConeIncludeResult chk = cone_includes_bounded(next, inv, horizon, cfg());
    if (chk.included) {
      CHECK(cert::replay(chk.cert).all_certified);
      stable = true;
      break;
    }
    ConeOpResult w = widen(inv, next, widens >= beta_cap, cfg());
    REQUIRE(w.result.has_value());
    inv = *w.result;
    ++widens;
  }
  CHECK(stable);
  CHECK(widens <= beta_cap + 2);
  CHECK(std::isfinite(inv.slots()[0].beta));
  // Monte-Carlo reachability: 100-step random walks stay inside.
  auto rng = testsupport::make_rng(36);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int run = 0; run < 200; ++run) {
    double x = 0.0;
    for (int t = 0; t <= 100; ++t) {
      CHECK(inv.contains(v1(x), v1(double(t)), 1e-9));
      x += coin(rng) ? 1.0 : -1.0;
    }
  }
}

TEST_CASE("lyapunov_base: contraction examples and the infeasible pair") {
  DomainConfig c = cfg();
  {
    const Mat As[1] = {0.5 * Mat::Identity(2, 2)};
    LyapunovResult r = lyapunov_base(As, c);
    REQUIRE(r.feasible);
    CHECK(r.margin == doctest::Approx(0.75).epsilon(1e-3));
    CHECK(cert::replay(r.cert).all_certified);
  }
  {
    Mat A(2, 2);
    A << 0, -0.9, 0.9, 0;
    const Mat As[1] = {A};
    LyapunovResult r = lyapunov_base(As, c);
    REQUIRE(r.feasible);
    CHECK(r.margin == doctest::Approx(0.19).epsilon(1e-2));
  }
  {
    Mat A1(2, 2), A2(2, 2);
    A1 << 0, 2, 0, 0;
    A2 << 0, 0, 2, 0;
    const Mat As[2] = {A1, A2};
    LyapunovResult r = lyapunov_base(As, c);
    CHECK(!r.feasible);
  }
  CHECK_THROWS_AS(
      lyapunov_base(std::vector<Mat>{Mat::Identity(2, 2)}, c),
      std::invalid_argument);
}

TEST_CASE("min_stable_beta formula instances") {
  Mat q1(1, 1);
  q1 << 1.0;
  {
    Mat A = Mat::Zero(1, 1);
    StableBetaResult r =
        min_stable_beta(q1, Vec::Zero(1), A, Vec::Zero(1), Vec::Zero(1), 0.5);
    CHECK(r.beta0 <= 1e-9);
  }
  {
    Mat A(1, 1);
    A << 0.5;
    StableBetaResult r =
        min_stable_beta(q1, v1(2.0), A, v1(1.0), Vec::Zero(1), 0.75);
    CHECK(r.beta0 <= 1e-9);
  }
  {
    Mat A(1, 1);
    A << 0.5;
    StableBetaResult r =
        min_stable_beta(q1, Vec::Zero(1), A, Vec::Zero(1), v1(1.0), 0.75);
    CHECK(r.beta0 <= 1.0 + 1e-6);
    CHECK(r.beta0 >= 1.0 - 1e-6);
    CHECK(cert::replay(r.cert).all_certified);

    // Invariance of the cone with slope 1.1 over a long simulation.
    Cone C = cone1(1.0, 0.0, 1.1, 1.0, 0.0, true);
    auto rng = testsupport::make_rng(37);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int run = 0; run < 20; ++run) {
      double x = unit(rng);
      for (int t = 0; t <= 1000; ++t) {
        CHECK(C.contains(v1(x), v1(double(t)), 1e-9));
        x = 0.5 * x;  // plus b = 0, minus the drift handled by the cone
      }
    }
  }
}

TEST_CASE("lyapunov invariance: one abstract step re-enters the cone") {
  DomainConfig c = cfg();
  Mat A(1, 1);
  A << 0.5;
  const Mat As[1] = {A};
  LyapunovResult ly = lyapunov_base(As, c);
  REQUIRE(ly.feasible);
  // Base shape from the Lyapunov solve, slope above the threshold.
  Mat q = ly.Q;
  StableBetaResult sb =
      min_stable_beta(q, Vec::Zero(1), A, Vec::Zero(1), Vec::Zero(1),
                      ly.margin);
  double beta = std::max(1e-3, 1.5 * sb.beta0 + 0.1);
  CounterSlot slot;
  slot.beta = beta;
  slot.delta = Vec::Zero(1);
  slot.lambda = 0.0;
  slot.extrapolated = true;
  Cone C(*Ellipsoid::make(q, Vec::Zero(1)), {slot});
  const Mat hint = C.base().Q();
  ConeOpResult stepped = cone_affine(C, A, Vec::Zero(1), c, &hint);
  REQUIRE(stepped.result.has_value());
  Cone next = counter_increment(*stepped.result, 0, 1.0);
  CHECK(cone_includes_bounded(next, C, Vec::Constant(1, 1000.0), c).included);
}
