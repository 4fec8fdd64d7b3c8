#include "ellcone/cone.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "ellcone/interval_linalg.hpp"
#include "step_util.hpp"
#include "witness.hpp"

namespace ellcone {

namespace {

using IvVec = std::vector<Interval>;

IvVec iv_of(const Vec& v) {
  IvVec out(v.size());
  for (int i = 0; i < v.size(); ++i) out[i] = Interval(v[i]);
  return out;
}

IvVec iv_vsub(const IvVec& a, const IvVec& b) {
  IvVec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = iv_sub(a[i], b[i]);
  return out;
}

IvVec iv_matvec(const Mat& A, const IvVec& v) {
  IvVec out(A.rows(), Interval(0.0));
  for (int i = 0; i < A.rows(); ++i) {
    Interval s(0.0);
    for (int j = 0; j < A.cols(); ++j)
      s = iv_add(s, iv_mul(Interval(A(i, j)), v[j]));
    out[i] = s;
  }
  return out;
}

/// w^T Q w with point Q and interval w.
Interval iv_quad(const Mat& Q, const IvVec& w) {
  Interval s(0.0);
  for (int i = 0; i < Q.rows(); ++i) {
    Interval row(0.0);
    for (int j = 0; j < Q.cols(); ++j)
      row = iv_add(row, iv_mul(Interval(Q(i, j)), w[j]));
    s = iv_add(s, iv_mul(w[i], row));
  }
  return s;
}

bool bits_equal(const double* a, const double* b, size_t n) {
  return n == 0 || std::memcmp(a, b, n * sizeof(double)) == 0;
}

bool base_and_levels_equal(const Cone& a, const Cone& b) {
  if (a.dim() != b.dim() || a.counters() != b.counters()) return false;
  if (!bits_equal(a.base().Q().data(), b.base().Q().data(),
                  size_t(a.dim()) * a.dim()))
    return false;
  if (!bits_equal(a.base().c().data(), b.base().c().data(), a.dim()))
    return false;
  for (int i = 0; i < a.counters(); ++i)
    if (a.slots()[i].lambda != b.slots()[i].lambda) return false;
  return true;
}

bool cones_identical(const Cone& a, const Cone& b) {
  if (!base_and_levels_equal(a, b)) return false;
  for (int i = 0; i < a.counters(); ++i) {
    const CounterSlot& x = a.slots()[i];
    const CounterSlot& y = b.slots()[i];
    if (x.extrapolated != y.extrapolated) return false;
    if (std::memcmp(&x.beta, &y.beta, sizeof(double)) != 0) return false;
    if (!bits_equal(x.delta.data(), y.delta.data(), x.delta.size()))
      return false;
  }
  return true;
}

Vec lambdas_of(const Cone& c) {
  Vec v(c.counters());
  for (int i = 0; i < c.counters(); ++i) v[i] = c.slots()[i].lambda;
  return v;
}

Mat deltas_of(const Cone& c) {
  Mat m(c.dim(), c.counters());
  for (int i = 0; i < c.counters(); ++i) m.col(i) = c.slots()[i].delta;
  return m;
}

Vec betas_of(const Cone& c) {
  Vec v(c.counters());
  for (int i = 0; i < c.counters(); ++i) v[i] = c.slots()[i].beta;
  return v;
}

bool step_certifies(const cert::Step& s, OpStats& stats) {
  ++stats.lmi_checks;
  std::string why;
  return cert::replay_step(s, &why) == cert::StepVerdict::Certified;
}

bool try_syntactic_equality(const Cone& C, const Cone& Cp,
                            ConeIncludeResult& r) {
  if (!cones_identical(C, Cp)) return false;
  cert::Step s;
  s.tag = "cone_eq";
  s.claim = "cones bit-identical";
  detail::add_mat(s, "Q", C.base().Q());
  detail::add_vec(s, "c", C.base().c());
  detail::add_vec(s, "lams", lambdas_of(C));
  detail::add_vec(s, "betas", betas_of(C));
  detail::add_mat(s, "deltas", deltas_of(C));
  std::vector<std::uint8_t> bs;
  for (const CounterSlot& sl : C.slots()) bs.push_back(sl.extrapolated);
  s.add_bools("bs", bs);
  detail::add_mat(s, "Qp", Cp.base().Q());
  detail::add_vec(s, "cp", Cp.base().c());
  detail::add_vec(s, "lamsp", lambdas_of(Cp));
  detail::add_vec(s, "betasp", betas_of(Cp));
  detail::add_mat(s, "deltasp", deltas_of(Cp));
  std::vector<std::uint8_t> bsp;
  for (const CounterSlot& sl : Cp.slots()) bsp.push_back(sl.extrapolated);
  s.add_bools("bsp", bsp);
  if (!step_certifies(s, r.stats)) return false;
  r.included = true;
  r.cert.steps.push_back(std::move(s));
  return true;
}

/// Triangle-inequality slope certificate: beta' >= beta*rho + |d|_{q'}
/// with a certified rho^2 q >= q'. Cheap and floor-free, preferred over
/// the (s,t) program whenever it is tight enough.
std::optional<cert::Step> slope_triangle_step(const Mat& q, const Mat& qp,
                                              const CounterSlot& a,
                                              const CounterSlot& b,
                                              OpStats& stats) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(qp, q);
  double rho =
      std::sqrt(std::max(ges.eigenvalues().maxCoeff(), 1e-300)) * (1.0 + 1e-9);
  double bump = 1e-9;
  for (int attempt = 0; attempt < 40; ++attempt) {
    IvVec d = iv_vsub(iv_of(a.delta), iv_of(b.delta));
    Interval need = iv_add(iv_mul(Interval(a.beta), Interval(rho)),
                           iv_sqrt_clamped(iv_quad(qp, d)));
    if (!(b.beta >= need.hi)) return std::nullopt;  // growing rho never helps
    cert::Step s;
    s.tag = "cone_slope_tri";
    s.claim = "slope growth bound (triangle route)";
    detail::add_mat(s, "Q", q);
    detail::add_mat(s, "Qp", qp);
    detail::add_vec(s, "di", a.delta);
    detail::add_vec(s, "dip", b.delta);
    s.add_scalar("betai", a.beta);
    s.add_scalar("betaip", b.beta);
    s.add_scalar("rho", rho);
    s.add_scalar("alpha0", iv_mul(Interval(rho), Interval(rho)).lo);
    if (step_certifies(s, stats)) return s;
    rho *= 1.0 + bump;
    bump = std::min(bump * 8.0, 1.0);
  }
  return std::nullopt;
}

}  // namespace

Cone::Cone(Ellipsoid base, std::vector<CounterSlot> slots)
    : base_(std::move(base)), slots_(std::move(slots)) {
  for (const CounterSlot& s : slots_) {
    if (s.delta.size() != base_.dim())
      throw std::invalid_argument("Cone: drift dimension mismatch");
    if (!(s.beta >= 0.0)) throw std::invalid_argument("Cone: negative slope");
  }
}

Cone Cone::with_base(Ellipsoid b) const { return Cone(std::move(b), slots_); }

Cone Cone::with_slots(std::vector<CounterSlot> s) const {
  return Cone(base_, std::move(s));
}

bool Cone::contains(const Vec& x, const Vec& y, double tol) const {
  if (y.size() != counters()) return false;
  Vec shift = base_.c();
  double rhs = 1.0;
  for (int i = 0; i < counters(); ++i) {
    const CounterSlot& s = slots_[i];
    const double g = y[i] - s.lambda;
    if (g < -tol) return false;
    if (!s.extrapolated && std::abs(g) > tol) return false;
    if (g > 0.0) {
      if (std::isinf(s.beta)) return true;  // opening covers everything
      shift += g * s.delta;
      rhs += s.beta * g;
    }
  }
  Vec d = x - shift;
  return d.dot(base_.Q() * d) <= rhs * rhs + tol;
}

// --------------------------------------------------------------- includes

ConeIncludeResult cone_includes(const Cone& C, const Cone& Cp,
                                const DomainConfig& cfg) {
  if (C.dim() != Cp.dim() || C.counters() != Cp.counters())
    throw std::invalid_argument("cone_includes: shape mismatch");
  const int n = C.dim();
  const int k = C.counters();
  ConeIncludeResult r;

  // Syntactic fast path: bit-identical cones include one another; the
  // widening sequence can stabilize through exactly this check.
  if (try_syntactic_equality(C, Cp, r)) return r;

  // (i) level conditions, exact comparisons.
  for (int i = 0; i < k; ++i) {
    const CounterSlot& a = C.slots()[i];
    const CounterSlot& b = Cp.slots()[i];
    if (!(b.lambda <= a.lambda)) return r;
    if (a.lambda > b.lambda && !b.extrapolated) return r;
    r.witness.level_checks.push_back(true);
  }
  cert::Certificate steps;
  {
    cert::Step s;
    s.tag = "cone_levels";
    s.claim = "counter level conditions, k=" + std::to_string(k);
    detail::add_vec(s, "lams", lambdas_of(C));
    detail::add_vec(s, "lamsp", lambdas_of(Cp));
    std::vector<std::uint8_t> bsp;
    for (const CounterSlot& b : Cp.slots()) bsp.push_back(b.extrapolated);
    s.add_bools("bsp", bsp);
    if (!step_certifies(s, r.stats)) return r;
    steps.steps.push_back(std::move(s));
  }

  // (ii) base inclusion into the level-shifted, scaled primed base.
  bool vacuous_base = false;
  double R_mid = 1.0;
  Vec shift_mid = Cp.base().c();
  for (int i = 0; i < k; ++i) {
    const double gap = C.slots()[i].lambda - Cp.slots()[i].lambda;
    if (gap <= 0.0) continue;
    if (std::isinf(Cp.slots()[i].beta)) {
      vacuous_base = true;
      break;
    }
    R_mid += Cp.slots()[i].beta * gap;
    shift_mid += gap * Cp.slots()[i].delta;
  }

  auto base_incl_step = [&](double lam, double beta) {
    cert::Step s;
    s.tag = "cone_base_incl";
    s.claim =
        "base inside level-shifted primed base, dim " + std::to_string(n);
    detail::add_mat(s, "Q", C.base().Q());
    detail::add_vec(s, "c", C.base().c());
    detail::add_mat(s, "Qp", Cp.base().Q());
    detail::add_vec(s, "cp", Cp.base().c());
    detail::add_vec(s, "betap", betas_of(Cp));
    detail::add_vec(s, "lams", lambdas_of(C));
    detail::add_vec(s, "lamsp", lambdas_of(Cp));
    detail::add_mat(s, "deltap", deltas_of(Cp));
    s.add_scalar("lam", lam);
    s.add_scalar("beta", beta);
    return s;
  };

  if (base_and_levels_equal(C, Cp)) {
    cert::Step s;
    s.tag = "cone_base_eq";
    s.claim = "bases and levels bit-identical";
    detail::add_mat(s, "Q", C.base().Q());
    detail::add_vec(s, "c", C.base().c());
    detail::add_vec(s, "lams", lambdas_of(C));
    detail::add_mat(s, "Qp", Cp.base().Q());
    detail::add_vec(s, "cp", Cp.base().c());
    detail::add_vec(s, "lamsp", lambdas_of(Cp));
    if (!step_certifies(s, r.stats)) return r;
    steps.steps.push_back(std::move(s));
  } else if (vacuous_base) {
    cert::Step s = base_incl_step(0.0, 0.0);
    if (!step_certifies(s, r.stats)) return r;
    steps.steps.push_back(std::move(s));
  } else {
    const Mat Fin = homogenize(C.base());
    const Mat Target =
        homogenize(Mat(Cp.base().Q() / (R_mid * R_mid)), shift_mid);
    std::optional<cert::Step> kept;
    auto try_cert = [&](double lam, double beta) {
      cert::Step s = base_incl_step(lam, beta);
      if (!step_certifies(s, r.stats)) return false;
      kept = std::move(s);
      return true;
    };
    double lam = 0, beta = 0;
    if (!detail::search_sproc_witness({Fin, Target, cfg, r.stats, true},
                                      try_cert, &lam, &beta))
      return r;
    r.witness.base_witness = {lam, beta};
    steps.steps.push_back(std::move(*kept));
  }

  // (iii) slope conditions per extrapolating counter.
  for (int i = 0; i < k; ++i) {
    const CounterSlot& a = C.slots()[i];
    const CounterSlot& b = Cp.slots()[i];
    if (!a.extrapolated) {
      r.witness.slope_bounds.push_back({});
      continue;
    }
    if (!b.extrapolated) return r;
    if (std::isinf(b.beta)) {
      cert::Step s;
      s.tag = "cone_slope_pt";
      s.claim = "slope condition vacuous at infinite opening, counter " +
                std::to_string(i);
      detail::add_mat(s, "Qp", Cp.base().Q());
      detail::add_vec(s, "di", a.delta);
      detail::add_vec(s, "dip", b.delta);
      s.add_scalar("betaip", b.beta);
      if (!step_certifies(s, r.stats)) return r;
      steps.steps.push_back(std::move(s));
      r.witness.slope_bounds.push_back(
          {0.0, kInfiniteSlope, kInfiniteSlope});
      continue;
    }
    if (std::isinf(a.beta)) return r;
    if (a.beta == 0.0) {
      // M degenerates to a point evaluation of the primed form.
      Interval v =
          iv_quad(Cp.base().Q(), iv_vsub(iv_of(a.delta), iv_of(b.delta)));
      Interval bp2 = iv_mul(Interval(b.beta), Interval(b.beta));
      if (!(bp2.lo >= v.hi)) return r;
      cert::Step s;
      s.tag = "cone_slope_pt";
      s.claim = "zero-slope drift condition, counter " + std::to_string(i);
      detail::add_mat(s, "Qp", Cp.base().Q());
      detail::add_vec(s, "di", a.delta);
      detail::add_vec(s, "dip", b.delta);
      s.add_scalar("betaip", b.beta);
      if (!step_certifies(s, r.stats)) return r;
      steps.steps.push_back(std::move(s));
      r.witness.slope_bounds.push_back({0.0, v.hi - 1.0, v.hi});
      continue;
    }
    // Try the triangle route first; it has no certification floor.
    if (auto tri = slope_triangle_step(C.base().Q(), Cp.base().Q(), a, b,
                                       r.stats)) {
      steps.steps.push_back(std::move(*tri));
      r.witness.slope_bounds.push_back({0.0, 0.0, b.beta * b.beta});
      continue;
    }
    // General case: the (s, t) program overapproximating M by 1 + t.
    const Mat Fin =
        homogenize(Mat(C.base().Q() / (a.beta * a.beta)), Vec(Vec::Zero(n)));
    const Mat Target = homogenize(Cp.base().Q(), Vec(b.delta - a.delta));
    std::optional<cert::Step> kept;
    double s_out = 0, t_out = 0;
    auto try_cert = [&](double sm, double tm) {
      cert::Step s;
      s.tag = "cone_slope";
      s.claim = "slope growth bound, counter " + std::to_string(i);
      detail::add_mat(s, "Q", C.base().Q());
      s.add_scalar("betai", a.beta);
      detail::add_mat(s, "Qp", Cp.base().Q());
      detail::add_vec(s, "di", a.delta);
      detail::add_vec(s, "dip", b.delta);
      s.add_scalar("betaip", b.beta);
      s.add_scalar("s", sm);
      s.add_scalar("t", tm);
      if (!step_certifies(s, r.stats)) return false;
      kept = std::move(s);
      return true;
    };
    if (!detail::search_sproc_witness({Fin, Target, cfg, r.stats, false},
                                      try_cert, &s_out, &t_out))
      return r;
    steps.steps.push_back(std::move(*kept));
    r.witness.slope_bounds.push_back({s_out, t_out, 1.0 + t_out});
  }

  r.included = true;
  r.cert = std::move(steps);
  return r;
}

ConeIncludeResult cone_includes_bounded(const Cone& C, const Cone& Cp,
                                        const Vec& upper,
                                        const DomainConfig& cfg) {
  if (C.dim() != Cp.dim() || C.counters() != Cp.counters())
    throw std::invalid_argument("cone_includes_bounded: shape mismatch");
  const int k = C.counters();
  if (upper.size() != k)
    throw std::invalid_argument("cone_includes_bounded: bad bound count");
  ConeIncludeResult r;

  if (try_syntactic_equality(C, Cp, r)) return r;

  // Effective corner values per counter, plus the level conditions of
  // the restricted claim.
  std::vector<std::array<double, 2>> corners_per(k);
  std::vector<int> corner_count(k, 1);
  for (int i = 0; i < k; ++i) {
    const CounterSlot& a = C.slots()[i];
    const CounterSlot& b = Cp.slots()[i];
    const double hi = a.extrapolated ? std::max(upper[i], a.lambda) : a.lambda;
    if (!(b.lambda <= a.lambda)) return r;
    if (a.lambda > b.lambda && !b.extrapolated) return r;
    if (hi > b.lambda && !b.extrapolated) return r;
    corners_per[i] = {a.lambda, hi};
    corner_count[i] = hi > a.lambda ? 2 : 1;
    r.witness.level_checks.push_back(true);
  }
  long total = 1;
  for (int i = 0; i < k; ++i) {
    total *= corner_count[i];
    if (total > 64) return r;  // too many counters to enumerate
  }

  cert::Certificate steps;
  {
    cert::Step s;
    s.tag = "cone_levels";
    s.claim = "counter level conditions (bounded), k=" + std::to_string(k);
    detail::add_vec(s, "lams", lambdas_of(C));
    detail::add_vec(s, "lamsp", lambdas_of(Cp));
    std::vector<std::uint8_t> bsp;
    for (const CounterSlot& b : Cp.slots()) bsp.push_back(b.extrapolated);
    s.add_bools("bsp", bsp);
    if (!step_certifies(s, r.stats)) return r;
    steps.steps.push_back(std::move(s));
  }

  const int n = C.dim();
  for (long mask = 0; mask < total; ++mask) {
    Vec y(k);
    long rest = mask;
    for (int i = 0; i < k; ++i) {
      y[i] = corners_per[i][rest % corner_count[i]];
      rest /= corner_count[i];
    }

    // Inner slice of C at this corner, in interval arithmetic.
    Interval R(1.0);
    IvVec cin = iv_of(C.base().c());
    bool inner_infinite = false;
    for (int i = 0; i < k; ++i) {
      const CounterSlot& a = C.slots()[i];
      if (y[i] == a.lambda) continue;
      if (std::isinf(a.beta)) {
        inner_infinite = true;
        break;
      }
      Interval g = iv_sub(Interval(y[i]), Interval(a.lambda));
      R = iv_add(R, iv_mul(Interval(a.beta), g));
      for (int rr = 0; rr < n; ++rr)
        cin[rr] = iv_add(cin[rr], iv_mul(g, Interval(a.delta[rr])));
    }
    bool outer_infinite = false;
    double Rp_mid = 1.0;
    Vec shift_mid = Cp.base().c();
    for (int i = 0; i < k; ++i) {
      const CounterSlot& b = Cp.slots()[i];
      const double gap = y[i] - b.lambda;
      if (gap <= 0.0) continue;
      if (std::isinf(b.beta)) {
        outer_infinite = true;
        break;
      }
      Rp_mid += b.beta * gap;
      shift_mid += gap * b.delta;
    }
    if (inner_infinite && !outer_infinite) return r;

    auto corner_step = [&](double lam, double beta,
                           const std::vector<Interval>& Qin,
                           const IvVec& cinv) {
      cert::Step s;
      s.tag = "cone_base_incl";
      s.claim = "bounded corner slice inclusion";
      detail::add_imat(s, "Q", Qin, n, n);
      detail::add_ivec(s, "c", cinv);
      detail::add_mat(s, "Qp", Cp.base().Q());
      detail::add_vec(s, "cp", Cp.base().c());
      detail::add_vec(s, "betap", betas_of(Cp));
      detail::add_vec(s, "lams", y);
      detail::add_vec(s, "lamsp", lambdas_of(Cp));
      detail::add_mat(s, "deltap", deltas_of(Cp));
      s.add_scalar("lam", lam);
      s.add_scalar("beta", beta);
      return s;
    };

    std::vector<Interval> Qin(size_t(n) * n);
    Mat Qin_mid(n, n);
    Vec cin_mid(n);
    if (!inner_infinite) {
      Interval R2 = iv_mul(R, R);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          Interval v = iv_div(Interval(C.base().Q()(i, j)), R2);
          Qin[size_t(i) * n + j] = v;
          Qin_mid(i, j) = v.mid();
        }
      for (int i = 0; i < n; ++i) cin_mid[i] = cin[i].mid();
    }
    if (outer_infinite) {
      // Replay sees the infinite opening in betap and accepts.
      std::vector<Interval> Qtriv(size_t(n) * n, Interval(0.0));
      for (int i = 0; i < n; ++i)
        Qtriv[size_t(i) * n + i] = Interval(1.0);
      cert::Step s = corner_step(
          0.0, 0.0, inner_infinite ? Qtriv : Qin,
          inner_infinite ? iv_of(Vec::Zero(n)) : cin);
      if (!step_certifies(s, r.stats)) return r;
      steps.steps.push_back(std::move(s));
      continue;
    }

    const Mat Fin = homogenize(Qin_mid, cin_mid);
    const Mat Target =
        homogenize(Mat(Cp.base().Q() / (Rp_mid * Rp_mid)), shift_mid);
    std::optional<cert::Step> kept;
    auto try_cert = [&](double lam, double beta) {
      cert::Step s = corner_step(lam, beta, Qin, cin);
      if (!step_certifies(s, r.stats)) return false;
      kept = std::move(s);
      return true;
    };
    if (!detail::search_sproc_witness({Fin, Target, cfg, r.stats, true},
                                      try_cert, nullptr, nullptr))
      return r;
    steps.steps.push_back(std::move(*kept));
  }

  r.included = true;
  r.cert = std::move(steps);
  return r;
}

// ------------------------------------------------------------ counter ops

Cone counter_increment(const Cone& C, int i, double v) {
  if (i < 0 || i >= C.counters())
    throw std::out_of_range("counter_increment: index out of range");
  std::vector<CounterSlot> slots = C.slots();
  slots[i].lambda = add_round_down(slots[i].lambda, v);
  return C.with_slots(std::move(slots));
}

cert::Step counter_increment_step(double lam, double v, double lam_new) {
  cert::Step s;
  s.tag = "ctr_inc";
  s.claim = "counter level increment";
  s.add_scalar("lam", lam);
  s.add_scalar("v", v);
  s.add_scalar("lam_new", lam_new);
  return s;
}

Cone add_counter(const Cone& C, double lambda_new, bool known_exact) {
  std::vector<CounterSlot> slots = C.slots();
  CounterSlot fresh;
  fresh.beta = 0.0;
  fresh.delta = Vec::Zero(C.dim());
  fresh.lambda = lambda_new;
  fresh.extrapolated = !known_exact;
  slots.push_back(std::move(fresh));
  return C.with_slots(std::move(slots));
}

namespace {

/// Affine image aimed at a prescribed shape: pad the hint until the
/// two-step verification certifies. Returns nullopt when the image
/// genuinely does not fit the hinted form.
std::optional<AffineResult> affine_image_hinted(const Ellipsoid& e,
                                                const Mat& A, const Vec& b,
                                                const Mat& hint,
                                                const DomainConfig& cfg) {
  AffineResult r;
  auto cand = Ellipsoid::make(hint / ((1.0 + cfg.pad_eps0) *
                                      (1.0 + cfg.pad_eps0)),
                              A * e.c() + b);
  if (!cand) return std::nullopt;
  double pad = cfg.pad_eps0;
  for (int attempt = 0; attempt <= cfg.pad_attempts; ++attempt) {
    VerifyResult v = verify_affine_image(e, A, b, *cand, cfg);
    r.stats.absorb(v.stats);
    if (v.ok) {
      r.result = cand;
      cert::Step s;
      s.tag = "psd";
      s.claim = "affine image shape positive definite";
      detail::add_mat(s, "M", cand->Q());
      r.cert.steps.push_back(std::move(s));
      r.cert.append(std::move(v.cert));
      return r;
    }
    ++r.stats.paddings;
    cand = inflate(*cand, 1.0 + pad);
    pad *= 2.0;
  }
  return std::nullopt;
}

}  // namespace

ConeOpResult cone_affine(const Cone& C, const Mat& A, const Vec& b,
                         const DomainConfig& cfg, const Mat* shape_hint) {
  ConeOpResult r;
  AffineResult base;
  bool base_done = false;
  if (shape_hint) {
    if (auto hinted = affine_image_hinted(C.base(), A, b, *shape_hint, cfg)) {
      base = std::move(*hinted);
      base_done = true;
    }
  }
  if (!base_done) base = affine_image(C.base(), A, b, cfg.affine_eps, cfg);
  r.stats.absorb(base.stats);
  if (!base.result) {
    r.failure = "cone_affine base: " + base.failure;
    return r;
  }
  const Ellipsoid& nb = *base.result;
  cert::Certificate steps = std::move(base.cert);

  std::vector<CounterSlot> slots;
  for (int i = 0; i < C.counters(); ++i) {
    const CounterSlot& s0 = C.slots()[i];
    CounterSlot ns = s0;
    ns.delta = A * s0.delta;
    if (std::isinf(s0.beta)) {
      ns.beta = kInfiniteSlope;
      slots.push_back(std::move(ns));
      continue;
    }
    // beta' >= beta + sqrt(q'(A delta - delta')), rounded up.
    IvVec w = iv_vsub(iv_matvec(A, iv_of(s0.delta)), iv_of(ns.delta));
    Interval root = iv_sqrt_clamped(iv_quad(nb.Q(), w));
    ns.beta = iv_add(Interval(s0.beta), root).hi;

    cert::Step st;
    st.tag = "cone_affine_slope";
    st.claim = "drift slope correction, counter " + std::to_string(i);
    detail::add_mat(st, "Qp", nb.Q());
    detail::add_mat(st, "A", A);
    detail::add_vec(st, "di", s0.delta);
    detail::add_vec(st, "dip", ns.delta);
    st.add_scalar("betai", s0.beta);
    st.add_scalar("betaip", ns.beta);
    if (!step_certifies(st, r.stats)) {
      r.failure = "cone_affine slope certification failed";
      return r;
    }
    steps.steps.push_back(std::move(st));
    slots.push_back(std::move(ns));
  }
  r.result = Cone(nb, std::move(slots));
  r.cert = std::move(steps);
  return r;
}

ConeOpResult remove_counter(const Cone& C, int idx, double lo, double hi,
                            const DomainConfig& cfg) {
  if (idx < 0 || idx >= C.counters())
    throw std::out_of_range("remove_counter: index out of range");
  const CounterSlot& slot = C.slots()[idx];
  if (!(lo >= slot.lambda))
    throw std::invalid_argument("remove_counter: lower bound below level");
  if (!std::isfinite(hi) || hi < lo)
    throw std::invalid_argument("remove_counter: needs a finite upper bound");
  if (!slot.extrapolated && !(lo == slot.lambda && hi == slot.lambda))
    throw std::invalid_argument(
        "remove_counter: non-extrapolated counter removed away from its level");
  ConeOpResult r;
  if (std::isinf(slot.beta) && hi > slot.lambda) {
    r.failure = "remove_counter: infinite opening over a positive range";
    return r;
  }

  const int n = C.dim();
  const Mat& Q = C.base().Q();
  const Vec& c = C.base().c();

  struct Slice {
    std::vector<Interval> Qiv;  // n*n row-major
    IvVec civ;
    Mat Qmid;
    Vec cmid;
  };
  auto make_slice = [&](double level) {
    Slice s;
    Interval g = iv_sub(Interval(level), Interval(slot.lambda));
    Interval R = iv_add(Interval(1.0), iv_mul(Interval(slot.beta), g));
    Interval R2 = iv_mul(R, R);
    s.Qiv.resize(size_t(n) * n);
    s.Qmid.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Interval v = iv_div(Interval(Q(i, j)), R2);
        s.Qiv[size_t(i) * n + j] = v;
        s.Qmid(i, j) = v.mid();
      }
    s.civ = iv_of(c);
    s.cmid.resize(n);
    for (int i = 0; i < n; ++i) {
      s.civ[i] = iv_add(s.civ[i], iv_mul(g, Interval(slot.delta[i])));
      s.cmid[i] = s.civ[i].mid();
    }
    return s;
  };
  Slice sa = make_slice(lo);
  Slice sb = make_slice(hi);

  auto ea = Ellipsoid::make(sa.Qmid, sa.cmid);
  auto eb = Ellipsoid::make(sb.Qmid, sb.cmid);
  if (!ea || !eb) {
    r.failure = "remove_counter: slice shapes not certifiable";
    return r;
  }
  const Ellipsoid slices[2] = {*ea, *eb};
  JoinResult jr = join(slices, cfg);
  r.stats.absorb(jr.stats);
  if (!jr.result) {
    r.failure = "remove_counter: slice join failed: " + jr.failure;
    return r;
  }

  Ellipsoid cand = *jr.result;
  double pad = cfg.pad_eps0;
  for (int attempt = 0; attempt <= cfg.pad_attempts; ++attempt) {
    cert::Certificate steps;
    {
      cert::Step s;
      s.tag = "psd";
      s.claim = "projected base shape positive definite";
      detail::add_mat(s, "M", cand.Q());
      steps.steps.push_back(std::move(s));
    }
    bool ok = true;
    for (const Slice* sl : {&sa, &sb}) {
      const Mat Fin = homogenize(sl->Qmid, sl->cmid);
      const Mat Target = homogenize(cand);
      std::optional<cert::Step> kept;
      auto try_cert = [&](double lam, double beta) {
        cert::Step s;
        s.tag = "ell_includes";
        s.claim = "interval slice inside projected base";
        detail::add_imat(s, "Q", sl->Qiv, n, n);
        detail::add_ivec(s, "c", sl->civ);
        detail::add_mat(s, "Qs", cand.Q());
        detail::add_vec(s, "cs", cand.c());
        s.add_scalar("lam", lam);
        s.add_scalar("beta", beta);
        if (!step_certifies(s, r.stats)) return false;
        kept = std::move(s);
        return true;
      };
      if (!detail::search_sproc_witness({Fin, Target, cfg, r.stats, true},
                                        try_cert, nullptr, nullptr)) {
        ok = false;
        break;
      }
      steps.steps.push_back(std::move(*kept));
    }
    // Surviving slopes port to the joined base deflated by the
    // certified shape ratio: the absolute opening per counter unit is
    // what carries over, so a grown base means a smaller slope.
    std::vector<CounterSlot> slots;
    for (int j = 0; ok && j < C.counters(); ++j) {
      if (j == idx) continue;
      CounterSlot ns = C.slots()[j];
      if (ns.extrapolated && !std::isinf(ns.beta) && ns.beta > 0.0) {
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(cand.Q(), Q);
        const double rho0 =
            std::sqrt(std::max(ges.eigenvalues().maxCoeff(), 1e-300)) *
            (1.0 + 1e-9);
        CounterSlot ported = ns;
        ported.beta =
            iv_mul(iv_mul(Interval(ns.beta), Interval(rho0)),
                   Interval(1.0 + 1e-12))
                .hi;
        if (auto tri =
                slope_triangle_step(Q, cand.Q(), ns, ported, r.stats)) {
          tri->claim = "surviving slope ported to the projected base";
          steps.steps.push_back(std::move(*tri));
          ns.beta = ported.beta;
        } else {
          // Fall back to keeping the slope; sound when the projected
          // form is dominated by the original.
          cert::Step s;
          s.tag = "lmi";
          s.claim = "original base form dominates the projected one";
          detail::add_mat(s, "A0", Q);
          detail::add_mat(s, "A1", cand.Q());
          const double alphas[2] = {1.0, -1.0};
          s.add_vector("alpha", alphas);
          if (!step_certifies(s, r.stats)) {
            ok = false;
            break;
          }
          steps.steps.push_back(std::move(s));
        }
      }
      slots.push_back(std::move(ns));
    }
    if (ok) {
      r.result = Cone(cand, std::move(slots));
      r.cert = std::move(steps);
      return r;
    }
    ++r.stats.paddings;
    cand = inflate(cand, 1.0 + pad);
    pad *= 2.0;
  }
  r.failure = "remove_counter: certification failed after padding budget";
  return r;
}

SlotPortResult port_slots_to_base(const Mat& q_old, const Mat& q_new,
                                  const std::vector<CounterSlot>& slots) {
  SlotPortResult r;
  r.slots = slots;
  for (CounterSlot& ns : r.slots) {
    if (!ns.extrapolated || std::isinf(ns.beta) || ns.beta == 0.0) continue;
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(q_new, q_old);
    const double rho0 =
        std::sqrt(std::max(ges.eigenvalues().maxCoeff(), 1e-300)) *
        (1.0 + 1e-9);
    CounterSlot ported = ns;
    ported.beta = iv_mul(iv_mul(Interval(ns.beta), Interval(rho0)),
                         Interval(1.0 + 1e-12))
                      .hi;
    if (auto tri = slope_triangle_step(q_old, q_new, ns, ported, r.stats)) {
      tri->claim = "slope ported onto the rebased form";
      r.cert.steps.push_back(std::move(*tri));
      ns.beta = ported.beta;
      continue;
    }
    // Keep the slope; sound only when the old form dominates.
    cert::Step s;
    s.tag = "lmi";
    s.claim = "previous base form dominates the rebased one";
    detail::add_mat(s, "A0", q_old);
    detail::add_mat(s, "A1", q_new);
    const double alphas[2] = {1.0, -1.0};
    s.add_vector("alpha", alphas);
    if (!step_certifies(s, r.stats)) return r;
    r.cert.steps.push_back(std::move(s));
  }
  r.ok = true;
  return r;
}

// ------------------------------------------------------------ ratio bound

RatioResult ratio_bound(const Mat& q_from, const Mat& q_to,
                        const DomainConfig& cfg) {
  (void)cfg;
  RatioResult r;
  const int n = int(q_from.rows());
  if (q_to.rows() != n || q_to.cols() != n || q_from.cols() != n)
    throw std::invalid_argument("ratio_bound: dimension mismatch");
  // Untrusted candidate: largest generalized eigenvalue of (q_to, q_from).
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(q_to, q_from);
  double lmax = ges.eigenvalues().maxCoeff();
  double cand = std::sqrt(std::max(lmax, 1e-300)) * (1.0 + 1e-9);

  double bump = 1e-9;
  for (int attempt = 0; attempt < 80; ++attempt) {
    const double alpha0 = iv_mul(Interval(cand), Interval(cand)).lo;
    cert::Step s;
    s.tag = "ratio_bound";
    s.claim = "certified shape ratio";
    detail::add_mat(s, "Qf", q_from);
    detail::add_mat(s, "Qt", q_to);
    s.add_scalar("r", cand);
    s.add_scalar("alpha0", alpha0);
    if (step_certifies(s, r.stats)) {
      r.ok = true;
      r.r = cand;
      r.cert.steps.push_back(std::move(s));
      return r;
    }
    cand *= 1.0 + bump;
    bump = std::min(bump * 8.0, 1.0);
  }
  return r;
}

// ---------------------------------------------------------------- widening

namespace {

/// Slope/drift merge of the partial widening with target form q (the
/// base kept by the result); r bounds sqrt(q) over the unit ball of
/// the primed base form.
CounterSlot merge_slot(const Mat& q, double r, const CounterSlot& a,
                       const CounterSlot& b, bool level_raised) {
  CounterSlot out;
  out.lambda = a.lambda;
  out.extrapolated = a.extrapolated || b.extrapolated || level_raised;
  if (!b.extrapolated) {
    out.beta = a.beta;
    out.delta = a.delta;
    return out;
  }
  Interval br = iv_mul(Interval(b.beta), Interval(r));
  if (!a.extrapolated) {
    out.delta = b.delta;
    out.beta = std::isinf(b.beta) ? kInfiniteSlope : br.hi;
    return out;
  }
  if (std::isinf(a.beta) || std::isinf(b.beta)) {
    out.beta = kInfiniteSlope;
    out.delta = a.delta;
    return out;
  }
  const double d =
      iv_sqrt_clamped(iv_quad(q, iv_vsub(iv_of(a.delta), iv_of(b.delta)))).hi;
  if (d == 0.0) {
    out.delta = a.delta;
    out.beta = std::max(a.beta, br.hi);
    return out;
  }
  double mu = (a.beta + d - br.hi) / (2.0 * d);
  mu = std::clamp(mu, 0.0, 1.0);
  out.delta = mu * a.delta + (1.0 - mu) * b.delta;
  const double lhs =
      iv_add(Interval(a.beta),
             iv_sqrt_clamped(
                 iv_quad(q, iv_vsub(iv_of(a.delta), iv_of(out.delta)))))
          .hi;
  const double rhs =
      iv_add(br, iv_sqrt_clamped(
                     iv_quad(q, iv_vsub(iv_of(b.delta), iv_of(out.delta)))))
          .hi;
  out.beta = std::max(lhs, rhs);
  return out;
}

std::vector<CounterSlot> bumped(const std::vector<CounterSlot>& slots,
                                int attempt) {
  if (attempt == 0) return slots;
  const double rel = 1.0 + 1e-6 * std::pow(4.0, attempt - 1);
  const double abs = 1e-12 * std::pow(4.0, attempt - 1);
  std::vector<CounterSlot> out = slots;
  for (CounterSlot& s : out)
    if (s.extrapolated && !std::isinf(s.beta)) s.beta = s.beta * rel + abs;
  return out;
}

}  // namespace

ConeOpResult widen_partial(const Cone& C, const Cone& Cp,
                           const DomainConfig& cfg) {
  if (C.dim() != Cp.dim() || C.counters() != Cp.counters())
    throw std::invalid_argument("widen_partial: shape mismatch");
  const int k = C.counters();
  for (int i = 0; i < k; ++i)
    if (!(C.slots()[i].lambda <= Cp.slots()[i].lambda))
      throw std::invalid_argument("widen_partial: levels must not decrease");
  ConeOpResult r;

  RatioResult rr = ratio_bound(Cp.base().Q(), C.base().Q(), cfg);
  r.stats.absorb(rr.stats);
  if (!rr.ok) {
    r.failure = "widen_partial: ratio bound failed";
    return r;
  }

  std::vector<CounterSlot> merged;
  for (int i = 0; i < k; ++i) {
    const bool raised = C.slots()[i].lambda < Cp.slots()[i].lambda;
    merged.push_back(
        merge_slot(C.base().Q(), rr.r, C.slots()[i], Cp.slots()[i], raised));
  }

  for (int attempt = 0; attempt < 8; ++attempt) {
    Cone cand(C.base(), bumped(merged, attempt));
    ConeIncludeResult ia = cone_includes(C, cand, cfg);
    r.stats.absorb(ia.stats);
    if (!ia.included) continue;
    ConeIncludeResult ib = cone_includes(Cp, cand, cfg);
    r.stats.absorb(ib.stats);
    if (!ib.included) continue;
    r.result = cand;
    r.cert = std::move(rr.cert);
    r.cert.append(std::move(ia.cert));
    r.cert.append(std::move(ib.cert));
    return r;
  }
  r.failure = "widen_partial: containment post-check failed";
  return r;
}

ConeOpResult widen(const Cone& C, const Cone& Cp, bool cap_betas,
                   const DomainConfig& cfg, bool shift_to_slope) {
  if (C.dim() != Cp.dim() || C.counters() != Cp.counters())
    throw std::invalid_argument("widen: shape mismatch");
  const int k = C.counters();
  double total_gap = 0.0;
  for (int i = 0; i < k; ++i) {
    const double gap = Cp.slots()[i].lambda - C.slots()[i].lambda;
    if (gap < 0.0)
      throw std::invalid_argument("widen: primed levels must not be lower");
    total_gap += gap;
  }
  if (!(total_gap > 0.0))
    throw std::invalid_argument("widen: some level must strictly increase");
  ConeOpResult r;

  RatioResult rr = ratio_bound(Cp.base().Q(), C.base().Q(), cfg);
  r.stats.absorb(rr.stats);
  if (!rr.ok) {
    r.failure = "widen: ratio bound failed";
    return r;
  }

  // Bridging cone: the observed center shift becomes per-counter drift
  // weighted by the level gaps, or extra opening when the caller knows
  // the drift is transient.
  const Vec shift = shift_to_slope ? Vec(Vec::Zero(C.dim()))
                                   : Vec(Cp.base().c() - C.base().c());
  IvVec resid = iv_vsub(iv_vsub(iv_of(Cp.base().c()), iv_of(C.base().c())),
                        iv_of(shift));
  const double R = std::max(
      1.0,
      iv_add(iv_sqrt_clamped(iv_quad(C.base().Q(), resid)), Interval(rr.r))
          .hi);
  const double beta_plus =
      iv_div(iv_sub(Interval(R), Interval(1.0)), Interval(total_gap)).hi;

  std::vector<CounterSlot> plus_slots;
  for (int i = 0; i < k; ++i) {
    const double gap = Cp.slots()[i].lambda - C.slots()[i].lambda;
    CounterSlot s;
    s.lambda = C.slots()[i].lambda;
    if (gap > 0.0) {
      s.beta = beta_plus;
      s.delta = shift / total_gap;
      s.extrapolated = true;
    } else {
      s.beta = 0.0;
      s.delta = Vec::Zero(C.dim());
      s.extrapolated = false;
    }
    plus_slots.push_back(std::move(s));
  }
  Cone bridge(C.base(), std::move(plus_slots));

  ConeOpResult w1 = widen_partial(C, bridge, cfg);
  r.stats.absorb(w1.stats);
  if (!w1.result) {
    r.failure = "widen: first partial stage failed: " + w1.failure;
    return r;
  }
  ConeOpResult w2 = widen_partial(*w1.result, Cp, cfg);
  r.stats.absorb(w2.stats);
  if (!w2.result) {
    r.failure = "widen: second partial stage failed: " + w2.failure;
    return r;
  }
  Cone out = *w2.result;
  {
    // Extrapolation overshoot: open grown slopes a little beyond the
    // observed need so the next inclusion test clears the padding and
    // certification slack instead of racing it. The absolute floor
    // matters for pure-drift slots whose opening would otherwise stay
    // at rounding scale.
    std::vector<CounterSlot> slots = out.slots();
    double total_slope = 0.0;
    for (const CounterSlot& s : slots)
      if (!std::isinf(s.beta)) total_slope += s.beta;
    const double floor_bump = 1e-5 * (1.0 + total_slope);
    for (int i = 0; i < k; ++i) {
      CounterSlot& s = slots[i];
      const bool moved = Cp.slots()[i].lambda > C.slots()[i].lambda;
      if (moved && s.extrapolated && !std::isinf(s.beta) &&
          s.beta >= C.slots()[i].beta)
        s.beta = s.beta * (1.0 + 1e-2) + floor_bump;
    }
    out = out.with_slots(std::move(slots));
  }
  if (cap_betas) {
    std::vector<CounterSlot> slots = out.slots();
    for (CounterSlot& s : slots)
      if (s.extrapolated) s.beta = kInfiniteSlope;
    out = out.with_slots(std::move(slots));
  }

  // The defining property, asserted per call.
  for (int attempt = 0; attempt < 8; ++attempt) {
    Cone cand =
        attempt == 0 ? out : Cone(out.base(), bumped(out.slots(), attempt));
    ConeIncludeResult ia = cone_includes(C, cand, cfg);
    r.stats.absorb(ia.stats);
    if (!ia.included) continue;
    ConeIncludeResult ib = cone_includes(Cp, cand, cfg);
    r.stats.absorb(ib.stats);
    if (!ib.included) continue;
    r.result = cand;
    r.cert = std::move(ia.cert);
    r.cert.append(std::move(ib.cert));
    return r;
  }
  r.failure = "widen: containment post-check failed";
  return r;
}

ConeOpResult cone_join(std::span<const Cone> cones, const DomainConfig& cfg) {
  if (cones.empty())
    throw std::invalid_argument("cone_join: needs at least one cone");
  ConeOpResult r;
  if (cones.size() == 1) {
    r.result = cones[0];
    return r;
  }
  const int n = cones[0].dim();
  const int k = cones[0].counters();
  for (const Cone& c : cones) {
    if (c.dim() != n || c.counters() != k)
      throw std::invalid_argument("cone_join: shape mismatch");
    for (int i = 0; i < k; ++i)
      if (c.slots()[i].lambda != cones[0].slots()[i].lambda ||
          c.slots()[i].extrapolated != cones[0].slots()[i].extrapolated)
        throw std::invalid_argument("cone_join: levels and flags must match");
  }

  std::vector<Ellipsoid> bases;
  for (const Cone& c : cones) bases.push_back(c.base());
  JoinResult jb = join(bases, cfg);
  r.stats.absorb(jb.stats);
  if (!jb.result) {
    r.failure = "cone_join: base join failed: " + jb.failure;
    return r;
  }
  const Ellipsoid& qstar = *jb.result;

  // Per-branch ratios covering sqrt(q*) over each branch's unit ball.
  std::vector<double> ratios;
  for (const Cone& c : cones) {
    RatioResult rr = ratio_bound(c.base().Q(), qstar.Q(), cfg);
    r.stats.absorb(rr.stats);
    if (!rr.ok) {
      r.failure = "cone_join: ratio bound failed";
      return r;
    }
    ratios.push_back(rr.r);
  }

  std::vector<CounterSlot> slots;
  for (int i = 0; i < k; ++i) {
    CounterSlot out = cones[0].slots()[i];
    if (!out.extrapolated) {
      slots.push_back(std::move(out));
      continue;
    }
    bool inf = false;
    Vec mean = Vec::Zero(n);
    for (const Cone& c : cones) {
      if (std::isinf(c.slots()[i].beta)) inf = true;
      mean += c.slots()[i].delta;
    }
    mean /= double(cones.size());
    out.delta = mean;
    if (inf) {
      out.beta = kInfiniteSlope;
      slots.push_back(std::move(out));
      continue;
    }
    double beta = 0.0;
    for (size_t m = 0; m < cones.size(); ++m) {
      const CounterSlot& s = cones[m].slots()[i];
      Interval need =
          iv_add(iv_mul(Interval(s.beta), Interval(ratios[m])),
                 iv_sqrt_clamped(
                     iv_quad(qstar.Q(), iv_vsub(iv_of(s.delta), iv_of(mean)))));
      beta = std::max(beta, need.hi);
    }
    out.beta = beta;
    slots.push_back(std::move(out));
  }

  for (int attempt = 0; attempt < 8; ++attempt) {
    Cone cand(qstar, bumped(slots, attempt));
    cert::Certificate steps;
    {
      cert::Step s;
      s.tag = "psd";
      s.claim = "joined base shape positive definite";
      detail::add_mat(s, "M", qstar.Q());
      steps.steps.push_back(std::move(s));
    }
    bool ok = true;
    for (const Cone& c : cones) {
      ConeIncludeResult ic = cone_includes(c, cand, cfg);
      r.stats.absorb(ic.stats);
      if (!ic.included) {
        ok = false;
        break;
      }
      steps.append(std::move(ic.cert));
    }
    if (ok) {
      r.result = cand;
      r.cert = std::move(steps);
      return r;
    }
  }
  r.failure = "cone_join: containment post-check failed";
  return r;
}

// ---------------------------------------------------------- Lyapunov part

LyapunovResult lyapunov_base(std::span<const Mat> As, const DomainConfig& cfg,
                             double eps_fraction) {
  if (As.empty())
    throw std::invalid_argument("lyapunov_base: needs at least one matrix");
  if (!(eps_fraction > 0.0 && eps_fraction <= 1.0))
    throw std::invalid_argument("lyapunov_base: bad eps fraction");
  const int n = int(As[0].rows());
  for (const Mat& A : As) {
    if (A.rows() != n || A.cols() != n)
      throw std::invalid_argument("lyapunov_base: dimension mismatch");
    if (A == Mat::Identity(n, n))
      throw std::invalid_argument(
          "lyapunov_base: the identity is never stable; exclude it");
  }
  LyapunovResult r;

  auto feasible = [&](double eps) -> std::optional<Mat> {
    sdp::Problem p;
    auto Qv = p.symmetric("Q", n);
    sdp::VarId m = p.scalar("m");
    {
      sdp::MatExpr low(n);  // Q - I >= 0
      low.set_const(-Mat::Identity(n, n));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) low.add_term(Qv(i, j), i, j, 1.0);
      p.require_psd(std::move(low));
    }
    {
      sdp::MatExpr high(n);  // bounded shape keeps the margin finite
      high.set_const(1e6 * Mat::Identity(n, n));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) high.add_term(Qv(i, j), i, j, -1.0);
      p.require_psd(std::move(high));
    }
    for (const Mat& A : As) {
      sdp::MatExpr dec(n);  // (1-eps) Q - A^T Q A - m I >= 0
      for (int kk = 0; kk < n; ++kk)
        for (int ll = 0; ll <= kk; ++ll) {
          dec.add_term(Qv(kk, ll), kk, ll, 1.0 - eps);
          for (int rr = 0; rr < n; ++rr)
            for (int ss = 0; ss <= rr; ++ss) {
              double coeff = -(A(kk, rr) * A(ll, ss));
              if (kk != ll) coeff -= A(ll, rr) * A(kk, ss);
              if (coeff != 0.0) dec.add_term(Qv(kk, ll), rr, ss, coeff);
            }
        }
      for (int i = 0; i < n; ++i) dec.add_term(m, i, i, -1.0);
      p.require_psd(std::move(dec));
    }
    p.maximize(sdp::LinExpr(m));
    sdp::Solution sol = sdp::solve(p, cfg.solver);
    ++r.stats.solver_calls;
    if (sol.status != sdp::SolveStatus::Optimal &&
        sol.status != sdp::SolveStatus::Feasible)
      return std::nullopt;
    if (!(sol.value(m) > 1e-9)) return std::nullopt;
    return Qv.unpack(sol.values);
  };

  double lo = 1e-6;
  auto Qlo = feasible(lo);
  if (!Qlo) {
    r.detail = "no common Lyapunov shape (advisory)";
    return r;
  }
  double hi = 1.0;
  for (int it = 0; it < 25; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (auto Q = feasible(mid)) {
      lo = mid;
      Qlo = Q;
    } else {
      hi = mid;
    }
  }
  double eps = lo * eps_fraction;

  // Re-solve at the working margin for the roundest admissible shape:
  // near the supremum the feasible forms degenerate toward blades.
  {
    sdp::Problem p;
    auto Qv = p.symmetric("Q", n);
    sdp::VarId t = p.scalar("t");
    {
      sdp::MatExpr low(n);  // Q - I >= 0
      low.set_const(-Mat::Identity(n, n));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) low.add_term(Qv(i, j), i, j, 1.0);
      p.require_psd(std::move(low));
    }
    {
      sdp::MatExpr high(n);  // t I - Q >= 0, t minimized
      for (int i = 0; i < n; ++i) high.add_term(t, i, i, 1.0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) high.add_term(Qv(i, j), i, j, -1.0);
      p.require_psd(std::move(high));
    }
    for (const Mat& A : As) {
      sdp::MatExpr dec(n);  // (1-eps) Q - A^T Q A >= 1e-6 I
      dec.set_const(-1e-6 * Mat::Identity(n, n));
      for (int kk = 0; kk < n; ++kk)
        for (int ll = 0; ll <= kk; ++ll) {
          dec.add_term(Qv(kk, ll), kk, ll, 1.0 - eps);
          for (int rr = 0; rr < n; ++rr)
            for (int ss = 0; ss <= rr; ++ss) {
              double coeff = -(A(kk, rr) * A(ll, ss));
              if (kk != ll) coeff -= A(ll, rr) * A(kk, ss);
              if (coeff != 0.0) dec.add_term(Qv(kk, ll), rr, ss, coeff);
            }
        }
      p.require_psd(std::move(dec));
    }
    p.maximize(sdp::LinExpr().add(t, -1.0));
    sdp::Solution sol = sdp::solve(p, cfg.solver);
    ++r.stats.solver_calls;
    if (sol.status == sdp::SolveStatus::Optimal ||
        sol.status == sdp::SolveStatus::Feasible)
      Qlo = Qv.unpack(sol.values);
  }

  // The decrease condition is homogeneous in Q; normalize so the unit
  // sublevel set has a sensible size for use as a cone base.
  {
    Eigen::SelfAdjointEigenSolver<Mat> es(*Qlo);
    const double emin = es.eigenvalues().minCoeff();
    if (emin > 0.0) *Qlo /= emin;
  }
  for (int attempt = 0; attempt < 10; ++attempt) {
    cert::Certificate steps;
    {
      cert::Step s;
      s.tag = "psd";
      s.claim = "Lyapunov shape positive definite";
      detail::add_mat(s, "M", *Qlo);
      steps.steps.push_back(std::move(s));
    }
    bool ok = true;
    for (size_t ai = 0; ai < As.size(); ++ai) {
      cert::Step s;
      s.tag = "lyapunov";
      s.claim = "Lyapunov decrease for matrix " + std::to_string(ai);
      detail::add_mat(s, "Q", *Qlo);
      detail::add_mat(s, "A", As[ai]);
      s.add_scalar("eps", eps);
      if (!step_certifies(s, r.stats)) {
        ok = false;
        break;
      }
      steps.steps.push_back(std::move(s));
    }
    if (ok) {
      r.feasible = true;
      r.Q = *Qlo;
      r.margin = eps;
      r.cert = std::move(steps);
      return r;
    }
    eps *= 1.0 - 1e-5 * std::pow(4.0, attempt);
    if (!(eps > 0.0)) break;
  }
  r.detail = "Lyapunov certification failed";
  return r;
}

StableBetaResult min_stable_beta(const Mat& q, const Vec& c, const Mat& A,
                                 const Vec& b, const Vec& delta,
                                 double lyap_margin) {
  if (!(lyap_margin > 0.0 && lyap_margin < 1.0))
    throw std::domain_error("min_stable_beta: margin outside (0,1)");
  const int n = int(q.rows());
  // M = (A - Id) c + b - delta and eta = 1 - sqrt(1 - eps), in intervals.
  IvVec Mv(n, Interval(0.0));
  IvVec wd(n, Interval(0.0));
  for (int i = 0; i < n; ++i) {
    Interval s(0.0);
    Interval t(0.0);
    for (int j = 0; j < n; ++j) {
      Interval am = iv_sub(Interval(A(i, j)), Interval(i == j ? 1.0 : 0.0));
      s = iv_add(s, iv_mul(am, Interval(c[j])));
      t = iv_add(t, iv_mul(am, Interval(delta[j])));
    }
    Mv[i] = iv_sub(iv_add(s, Interval(b[i])), Interval(delta[i]));
    wd[i] = t;
  }
  Interval eta = iv_sub(
      Interval(1.0), iv_sqrt(iv_sub(Interval(1.0), Interval(lyap_margin))));
  if (!(eta.lo > 0.0))
    throw std::domain_error("min_stable_beta: margin too small");
  Interval t1 = iv_sqrt_clamped(iv_quad(q, Mv));
  Interval t2 = iv_div(iv_sqrt_clamped(iv_quad(q, wd)), eta);
  double beta0 = std::max(t1.hi, t2.hi);

  StableBetaResult out;
  for (int attempt = 0; attempt < 4; ++attempt) {
    cert::Step s;
    s.tag = "stable_beta";
    s.claim = "invariance slope threshold";
    detail::add_mat(s, "Q", q);
    detail::add_mat(s, "A", A);
    detail::add_vec(s, "b", b);
    detail::add_vec(s, "c", c);
    detail::add_vec(s, "delta", delta);
    s.add_scalar("eps", lyap_margin);
    s.add_scalar("beta0", beta0);
    std::string why;
    if (cert::replay_step(s, &why) == cert::StepVerdict::Certified) {
      out.beta0 = beta0;
      out.cert.steps.push_back(std::move(s));
      return out;
    }
    beta0 = next_up(beta0 * (1.0 + 1e-12));
  }
  throw std::runtime_error("min_stable_beta: recomputation drifted");
}

}  // namespace ellcone
