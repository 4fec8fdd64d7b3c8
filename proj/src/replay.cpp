#include <cmath>
#include <cstring>
#include <functional>
#include <map>

#include "ellcone/certificate.hpp"
#include "ellcone/interval_linalg.hpp"

// Replay semantics for every certificate step tag. This file is part
// of the trusted base: it rebuilds each claimed LMI from the step's
// bit-exact payload in interval arithmetic and hands it to check_lmi /
// check_psd. Nothing here depends on the solver or on Eigen.

namespace ellcone::cert {

namespace {

using ellcone::Interval;
using ellcone::IntervalMatrix;

using IVec = std::vector<Interval>;

struct IMat {
  int rows = 0, cols = 0;
  std::vector<Interval> e;
  IMat() = default;
  IMat(int r, int c) : rows(r), cols(c), e(size_t(r) * c) {}
  Interval& at(int i, int j) { return e[size_t(i) * cols + j]; }
  const Interval& at(int i, int j) const { return e[size_t(i) * cols + j]; }
};

IMat as_imat(const Item& it) {
  IMat m(it.rows, it.cols);
  for (size_t i = 0; i < it.lo.size(); ++i) {
    double lo = it.lo[i];
    double hi = it.kind == Item::Kind::IMatrix ? it.hi[i] : it.lo[i];
    if (std::isnan(lo) || std::isnan(hi) || lo > hi)
      throw std::domain_error("replay: bad interval entry");
    m.e[i] = Interval(lo, hi);
  }
  return m;
}

IVec as_ivec(const Item& it) {
  IVec v(it.rows);
  for (int i = 0; i < it.rows; ++i) {
    double lo = it.lo[i];
    double hi = it.kind == Item::Kind::IVector ? it.hi[i] : it.lo[i];
    if (std::isnan(lo) || std::isnan(hi) || lo > hi)
      throw std::domain_error("replay: bad interval entry");
    v[i] = Interval(lo, hi);
  }
  return v;
}

IMat transpose(const IMat& a) {
  IMat t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

IMat matmul(const IMat& a, const IMat& b) {
  if (a.cols != b.rows) throw std::domain_error("replay: matmul shape");
  IMat r(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      Interval s(0.0);
      for (int k = 0; k < a.cols; ++k)
        s = iv_add(s, iv_mul(a.at(i, k), b.at(k, j)));
      r.at(i, j) = s;
    }
  return r;
}

IVec matvec(const IMat& a, const IVec& v) {
  if (a.cols != int(v.size())) throw std::domain_error("replay: matvec shape");
  IVec r(a.rows);
  for (int i = 0; i < a.rows; ++i) {
    Interval s(0.0);
    for (int k = 0; k < a.cols; ++k) s = iv_add(s, iv_mul(a.at(i, k), v[k]));
    r[i] = s;
  }
  return r;
}

Interval dot(const IVec& u, const IVec& v) {
  if (u.size() != v.size()) throw std::domain_error("replay: dot shape");
  Interval s(0.0);
  for (size_t i = 0; i < u.size(); ++i) s = iv_add(s, iv_mul(u[i], v[i]));
  return s;
}

IVec vsub(const IVec& u, const IVec& v) {
  if (u.size() != v.size()) throw std::domain_error("replay: vsub shape");
  IVec r(u.size());
  for (size_t i = 0; i < u.size(); ++i) r[i] = iv_sub(u[i], v[i]);
  return r;
}

IVec vadd(const IVec& u, const IVec& v) {
  if (u.size() != v.size()) throw std::domain_error("replay: vadd shape");
  IVec r(u.size());
  for (size_t i = 0; i < u.size(); ++i) r[i] = iv_add(u[i], v[i]);
  return r;
}

/// Lower-triangle enclosures of a mathematically symmetric product,
/// mirrored into a structurally symmetric IntervalMatrix.
IntervalMatrix to_sym(const IMat& a) {
  if (a.rows != a.cols) throw std::domain_error("replay: to_sym not square");
  IntervalMatrix m(a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j <= i; ++j) m.set(i, j, a.at(i, j));
  return m;
}

/// F(Q, c) = [[Q, -Qc], [-c^T Q, c^T Q c - 1]] built in interval
/// arithmetic; accepts interval Q and c.
IntervalMatrix homogenize_iv(const IMat& Q, const IVec& c) {
  const int n = Q.rows;
  if (Q.cols != n || int(c.size()) != n)
    throw std::domain_error("replay: homogenize shape");
  IVec qc = matvec(Q, c);
  IntervalMatrix f(n + 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) f.set(i, j, Q.at(i, j));
  for (int i = 0; i < n; ++i) f.set(i, n, iv_neg(qc[i]));
  f.set(n, n, iv_sub(dot(c, qc), Interval(1.0)));
  return f;
}

IntervalMatrix corner_matrix(int n1) {
  IntervalMatrix e(n1);
  e.set(n1 - 1, n1 - 1, Interval(1.0));
  return e;
}

/// G = [[A^T Q* A, -A^T Q* c*], [(-A^T Q* c*)^T, c*^T Q* c* - 1]].
IntervalMatrix gram_image_iv(const IMat& A, const IMat& Qs, const IVec& cs) {
  const int n = A.rows;
  if (A.cols != n || Qs.rows != n || Qs.cols != n || int(cs.size()) != n)
    throw std::domain_error("replay: gram_image shape");
  IMat B = matmul(transpose(A), matmul(Qs, A));
  IVec w = matvec(transpose(A), matvec(Qs, cs));
  IntervalMatrix g(n + 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) g.set(i, j, B.at(i, j));
  for (int i = 0; i < n; ++i) g.set(i, n, iv_neg(w[i]));
  g.set(n, n, iv_sub(dot(cs, matvec(Qs, cs)), Interval(1.0)));
  return g;
}

Interval quad_form(const IMat& Q, const IVec& w) { return dot(w, matvec(Q, w)); }

bool fail(std::string* why, const std::string& msg) {
  if (why) *why = msg;
  return false;
}

/// The S-procedure witness check shared by the inclusion-flavored
/// steps: lam >= 0, beta <= 0 and beta*E + lam*Fin - Fout >= 0.
bool sproc_check(double lam, double beta, const IntervalMatrix& Fin,
                 const IntervalMatrix& Fout, std::string* why) {
  if (!(lam >= 0.0)) return fail(why, "negative lambda");
  if (!(beta <= 0.0)) return fail(why, "positive beta");
  const IntervalMatrix mats[3] = {corner_matrix(Fin.dim()), Fin, Fout};
  const double alphas[3] = {beta, lam, -1.0};
  if (check_lmi(mats, alphas) != PsdCheck::Certified)
    return fail(why, "LMI not certified");
  return true;
}

bool bits_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  return a.empty() ||
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// ---- per-tag replays ------------------------------------------------

bool replay_psd(const Step& s, std::string* why) {
  IntervalMatrix m = to_sym(as_imat(s.matrix("M")));
  if (check_psd(m) != PsdCheck::Certified)
    return fail(why, "matrix not certified positive definite");
  return true;
}

bool replay_lmi(const Step& s, std::string* why) {
  std::vector<IntervalMatrix> mats;
  for (const auto& [name, it] : s.items)
    if (it.kind == Item::Kind::Matrix || it.kind == Item::Kind::IMatrix)
      mats.push_back(to_sym(as_imat(it)));
  const Item& al = s.vector("alpha");
  if (al.kind != Item::Kind::Vector)
    return fail(why, "alpha must be a point vector");
  if (mats.size() != al.lo.size()) return fail(why, "multiplier count mismatch");
  if (check_lmi(mats, al.lo) != PsdCheck::Certified)
    return fail(why, "LMI not certified");
  return true;
}

bool replay_ell_includes(const Step& s, std::string* why) {
  IMat Q = as_imat(s.matrix("Q"));
  IVec c = as_ivec(s.vector("c"));
  IMat Qs = as_imat(s.matrix("Qs"));
  IVec cs = as_ivec(s.vector("cs"));
  return sproc_check(s.scalar("lam"), s.scalar("beta"), homogenize_iv(Q, c),
                     homogenize_iv(Qs, cs), why);
}

bool replay_ell_affine_nob(const Step& s, std::string* why) {
  const double lam = s.scalar("lam");
  const double beta = s.scalar("beta");
  if (!(lam >= 0.0)) return fail(why, "negative lambda");
  if (!(beta <= 0.0)) return fail(why, "positive beta");
  IntervalMatrix F = homogenize_iv(as_imat(s.matrix("Q")), as_ivec(s.vector("c")));
  IntervalMatrix G = gram_image_iv(as_imat(s.matrix("A")),
                                   as_imat(s.matrix("Qs")),
                                   as_ivec(s.vector("chat")));
  const IntervalMatrix mats[3] = {F, corner_matrix(F.dim()), G};
  const double alphas[3] = {lam, beta, -1.0};
  if (check_lmi(mats, alphas) != PsdCheck::Certified)
    return fail(why, "affine-image LMI not certified");
  return true;
}

bool replay_ell_translate(const Step& s, std::string* why) {
  IMat Qm = as_imat(s.matrix("Qm"));  // shape holding the translated set
  IMat Qs = as_imat(s.matrix("Qs"));
  IVec shifted = vadd(as_ivec(s.vector("chat")), as_ivec(s.vector("b")));
  IVec cs = as_ivec(s.vector("cs"));
  return sproc_check(s.scalar("lam"), s.scalar("beta"),
                     homogenize_iv(Qm, shifted), homogenize_iv(Qs, cs), why);
}

bool replay_ell_project(const Step& s, std::string* why) {
  IMat Q = as_imat(s.matrix("Q"));
  IVec c = as_ivec(s.vector("c"));
  IMat S = as_imat(s.matrix("S"));
  IVec cp = as_ivec(s.vector("cp"));
  const int n = Q.rows;
  const int p = S.rows;
  if (p < 1 || p >= n || S.cols != p || int(cp.size()) != p)
    return fail(why, "bad projection shape");
  IMat Semb(n, n);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) Semb.at(i, j) = S.at(i, j);
  IVec cemb(n, Interval(0.0));
  for (int i = 0; i < p; ++i) cemb[i] = cp[i];
  return sproc_check(s.scalar("lam"), s.scalar("beta"), homogenize_iv(Q, c),
                     homogenize_iv(Semb, cemb), why);
}

bool replay_cone_levels(const Step& s, std::string* why) {
  IVec lams = as_ivec(s.vector("lams"));
  IVec lamsp = as_ivec(s.vector("lamsp"));
  const Item& bsp = s.bools("bsp");
  if (lams.size() != lamsp.size() || int(lams.size()) != bsp.rows)
    return fail(why, "level count mismatch");
  for (size_t i = 0; i < lams.size(); ++i) {
    if (!(lamsp[i].lo <= lams[i].lo) || lams[i].lo != lams[i].hi ||
        lamsp[i].lo != lamsp[i].hi)
      return fail(why, "level condition fails at counter " + std::to_string(i));
    if (lams[i].lo > lamsp[i].lo && !bsp.flags[i])
      return fail(why, "raised level without extrapolation flag at counter " +
                           std::to_string(i));
  }
  return true;
}

bool replay_cone_base_eq(const Step& s, std::string* why) {
  const bool eq = bits_equal(s.matrix("Q").lo, s.matrix("Qp").lo) &&
                  bits_equal(s.vector("c").lo, s.vector("cp").lo) &&
                  bits_equal(s.vector("lams").lo, s.vector("lamsp").lo);
  if (!eq) return fail(why, "bases not bit-identical");
  return true;
}

bool replay_cone_eq(const Step& s, std::string* why) {
  const bool eq = bits_equal(s.matrix("Q").lo, s.matrix("Qp").lo) &&
                  bits_equal(s.vector("c").lo, s.vector("cp").lo) &&
                  bits_equal(s.vector("lams").lo, s.vector("lamsp").lo) &&
                  bits_equal(s.vector("betas").lo, s.vector("betasp").lo) &&
                  bits_equal(s.matrix("deltas").lo, s.matrix("deltasp").lo) &&
                  s.bools("bs").flags == s.bools("bsp").flags;
  if (!eq) return fail(why, "cones not bit-identical");
  return true;
}

bool replay_cone_base_incl(const Step& s, std::string* why) {
  IMat Q = as_imat(s.matrix("Q"));
  IVec c = as_ivec(s.vector("c"));
  IMat Qp = as_imat(s.matrix("Qp"));
  IVec cp = as_ivec(s.vector("cp"));
  IVec betap = as_ivec(s.vector("betap"));
  IVec lams = as_ivec(s.vector("lams"));
  IVec lamsp = as_ivec(s.vector("lamsp"));
  IMat deltap = as_imat(s.matrix("deltap"));  // n x k, one drift per column
  const int n = Q.rows;
  const int k = int(lams.size());
  if (deltap.rows != n || deltap.cols != k || int(betap.size()) != k ||
      int(lamsp.size()) != k)
    return fail(why, "shape mismatch");

  Interval R(1.0);
  IVec shift = cp;
  for (int i = 0; i < k; ++i) {
    Interval gap = iv_sub(lams[i], lamsp[i]);
    if (!(gap.lo >= 0.0)) return fail(why, "negative level gap");
    if (gap.lo == 0.0 && gap.hi == 0.0) continue;
    if (std::isinf(betap[i].hi)) return true;  // infinite opening: vacuous
    R = iv_add(R, iv_mul(betap[i], gap));
    for (int r = 0; r < n; ++r)
      shift[r] = iv_add(shift[r], iv_mul(gap, deltap.at(r, i)));
  }
  if (!(R.lo >= 1.0)) return fail(why, "level scaling below one");
  Interval R2 = iv_mul(R, R);
  IMat Qout(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Qout.at(i, j) = iv_div(Qp.at(i, j), R2);
  return sproc_check(s.scalar("lam"), s.scalar("beta"), homogenize_iv(Q, c),
                     homogenize_iv(Qout, shift), why);
}

bool replay_cone_slope(const Step& s, std::string* why) {
  const double sm = s.scalar("s");
  const double tm = s.scalar("t");
  if (!(sm >= 0.0)) return fail(why, "negative s multiplier");
  const double betai = s.scalar("betai");
  const double betaip = s.scalar("betaip");
  if (std::isinf(betaip)) return true;  // target slope infinite: vacuous
  if (!(betai > 0.0) || std::isinf(betai))
    return fail(why, "slope LMI needs finite positive source slope");
  IMat Q = as_imat(s.matrix("Q"));
  IMat Qp = as_imat(s.matrix("Qp"));
  IVec d = vsub(as_ivec(s.vector("dip")), as_ivec(s.vector("di")));
  const int n = Q.rows;
  Interval b2 = iv_mul(Interval(betai), Interval(betai));
  IMat Qscaled(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Qscaled.at(i, j) = iv_div(Q.at(i, j), b2);
  IntervalMatrix Fs = homogenize_iv(Qscaled, IVec(n, Interval(0.0)));
  IntervalMatrix Ft = homogenize_iv(Qp, d);
  const IntervalMatrix mats[3] = {Fs, corner_matrix(n + 1), Ft};
  const double alphas[3] = {sm, tm, -1.0};
  if (check_lmi(mats, alphas) != PsdCheck::Certified)
    return fail(why, "slope bound LMI not certified");
  // beta'^2 must dominate the certified overapproximation M <= 1 + t.
  Interval bp2 = iv_mul(Interval(betaip), Interval(betaip));
  Interval M = iv_add(Interval(1.0), Interval(tm));
  if (!(bp2.lo >= M.hi)) return fail(why, "slope square below certified bound");
  return true;
}

bool replay_cone_slope_tri(const Step& s, std::string* why) {
  // Triangle-inequality route: beta'^2 >= M follows from
  // beta' >= beta * rho + sqrt(q'(d)) with rho^2 q >= q'.
  const double betai = s.scalar("betai");
  const double betaip = s.scalar("betaip");
  if (std::isinf(betaip)) return true;
  if (std::isinf(betai)) return fail(why, "finite target for infinite source");
  const double rho = s.scalar("rho");
  const double a0 = s.scalar("alpha0");
  Interval rho2 = iv_mul(Interval(rho), Interval(rho));
  if (!(a0 <= rho2.lo)) return fail(why, "alpha0 above rho^2");
  IMat Q = as_imat(s.matrix("Q"));
  IMat Qp = as_imat(s.matrix("Qp"));
  if (check_psd(to_sym(Q)) != PsdCheck::Certified)
    return fail(why, "source form not certified positive definite");
  const IntervalMatrix mats[2] = {to_sym(Q), to_sym(Qp)};
  const double alphas[2] = {a0, -1.0};
  if (check_lmi(mats, alphas) != PsdCheck::Certified)
    return fail(why, "ratio LMI not certified");
  IVec d = vsub(as_ivec(s.vector("di")), as_ivec(s.vector("dip")));
  Interval need = iv_add(iv_mul(Interval(betai), Interval(rho)),
                         iv_sqrt_clamped(quad_form(Qp, d)));
  if (!(betaip >= need.hi)) return fail(why, "triangle slope bound fails");
  return true;
}

bool replay_cone_slope_pt(const Step& s, std::string* why) {
  const double betaip = s.scalar("betaip");
  if (std::isinf(betaip)) return true;
  IMat Qp = as_imat(s.matrix("Qp"));
  IVec d = vsub(as_ivec(s.vector("di")), as_ivec(s.vector("dip")));
  Interval v = quad_form(Qp, d);
  Interval bp2 = iv_mul(Interval(betaip), Interval(betaip));
  if (!(bp2.lo >= v.hi)) return fail(why, "point slope condition fails");
  return true;
}

bool replay_cone_affine_slope(const Step& s, std::string* why) {
  const double betai = s.scalar("betai");
  const double betaip = s.scalar("betaip");
  if (std::isinf(betaip)) return true;
  if (std::isinf(betai)) return fail(why, "finite target for infinite source");
  IMat Qp = as_imat(s.matrix("Qp"));
  IMat A = as_imat(s.matrix("A"));
  IVec w = vsub(matvec(A, as_ivec(s.vector("di"))), as_ivec(s.vector("dip")));
  Interval root = iv_sqrt_clamped(quad_form(Qp, w));
  Interval need = iv_add(Interval(betai), root);
  if (!(betaip >= need.hi)) return fail(why, "affine slope condition fails");
  return true;
}

bool replay_ratio_bound(const Step& s, std::string* why) {
  const double r = s.scalar("r");
  const double a0 = s.scalar("alpha0");
  Interval r2 = iv_mul(Interval(r), Interval(r));
  if (!(a0 <= r2.lo)) return fail(why, "alpha0 above r^2");
  const IntervalMatrix mats[2] = {to_sym(as_imat(s.matrix("Qf"))),
                                  to_sym(as_imat(s.matrix("Qt")))};
  const double alphas[2] = {a0, -1.0};
  if (check_lmi(mats, alphas) != PsdCheck::Certified)
    return fail(why, "ratio LMI not certified");
  return true;
}

bool replay_lyapunov(const Step& s, std::string* why) {
  const double eps = s.scalar("eps");
  if (!(eps > 0.0 && eps < 1.0)) return fail(why, "eps out of (0,1)");
  IMat Q = as_imat(s.matrix("Q"));
  IMat A = as_imat(s.matrix("A"));
  IMat AtQA = matmul(transpose(A), matmul(Q, A));
  const int n = Q.rows;
  Interval om = iv_sub(Interval(1.0), Interval(eps));
  IMat T(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      T.at(i, j) = iv_sub(iv_mul(om, Q.at(i, j)), AtQA.at(i, j));
  if (check_psd(to_sym(T)) != PsdCheck::Certified)
    return fail(why, "Lyapunov decrease not certified");
  return true;
}

bool replay_stable_beta(const Step& s, std::string* why) {
  const double eps = s.scalar("eps");
  const double beta0 = s.scalar("beta0");
  if (!(eps > 0.0 && eps < 1.0)) return fail(why, "eps out of (0,1)");
  IMat Q = as_imat(s.matrix("Q"));
  IMat A = as_imat(s.matrix("A"));
  IVec b = as_ivec(s.vector("b"));
  IVec c = as_ivec(s.vector("c"));
  IVec delta = as_ivec(s.vector("delta"));
  const int n = Q.rows;
  // M = (A - Id) c + b - delta.
  IMat Am(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      Am.at(i, j) = i == j ? iv_sub(A.at(i, j), Interval(1.0)) : A.at(i, j);
  IVec M = vsub(vadd(matvec(Am, c), b), delta);
  Interval eta = iv_sub(Interval(1.0), iv_sqrt(iv_sub(Interval(1.0), Interval(eps))));
  if (!(eta.lo > 0.0)) return fail(why, "eta not positive");
  Interval t1 = iv_sqrt_clamped(quad_form(Q, M));
  Interval t2 = iv_div(iv_sqrt_clamped(quad_form(Q, matvec(Am, delta))), eta);
  const double need = std::max(t1.hi, t2.hi);
  if (!(beta0 >= need)) return fail(why, "claimed bound below recomputation");
  return true;
}

bool replay_ctr_inc(const Step& s, std::string* why) {
  const double bound = add_round_down(s.scalar("lam"), s.scalar("v"));
  if (!(s.scalar("lam_new") <= bound))
    return fail(why, "incremented level not a lower bound");
  return true;
}

using Fn = bool (*)(const Step&, std::string*);

const std::map<std::string, Fn>& table() {
  static const std::map<std::string, Fn> t = {
      {"psd", replay_psd},
      {"lmi", replay_lmi},
      {"ell_includes", replay_ell_includes},
      {"ell_affine_nob", replay_ell_affine_nob},
      {"ell_translate", replay_ell_translate},
      {"ell_project", replay_ell_project},
      {"cone_levels", replay_cone_levels},
      {"cone_base_eq", replay_cone_base_eq},
      {"cone_eq", replay_cone_eq},
      {"cone_base_incl", replay_cone_base_incl},
      {"cone_slope", replay_cone_slope},
      {"cone_slope_tri", replay_cone_slope_tri},
      {"cone_slope_pt", replay_cone_slope_pt},
      {"cone_affine_slope", replay_cone_affine_slope},
      {"ratio_bound", replay_ratio_bound},
      {"lyapunov", replay_lyapunov},
      {"stable_beta", replay_stable_beta},
      {"ctr_inc", replay_ctr_inc},
  };
  return t;
}

}  // namespace

StepVerdict replay_step(const Step& s, std::string* why) {
  auto it = table().find(s.tag);
  if (it == table().end()) {
    if (why) *why = "unknown step tag '" + s.tag + "'";
    return StepVerdict::Unknown;
  }
  try {
    return it->second(s, why) ? StepVerdict::Certified : StepVerdict::Unknown;
  } catch (const std::exception& e) {
    if (why) *why = e.what();
    return StepVerdict::Unknown;
  }
}

}  // namespace ellcone::cert
