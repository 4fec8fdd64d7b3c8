#include "ellcone/ellipsoid.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <stdexcept>

#include "ellcone/interval_linalg.hpp"
#include "step_util.hpp"
#include "witness.hpp"

namespace ellcone {

namespace {

IntervalMatrix sym_to_intervals(const Mat& m) {
  const int n = int(m.rows());
  IntervalMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) out.set(i, j, Interval(m(i, j)));
  return out;
}

cert::Step psd_step(const Mat& q, const std::string& claim) {
  cert::Step s;
  s.tag = "psd";
  s.claim = claim;
  detail::add_mat(s, "M", q);
  return s;
}

}  // namespace

std::optional<Ellipsoid> Ellipsoid::make(Mat Q, Vec c) {
  if (Q.rows() != Q.cols() || Q.rows() != c.size()) return std::nullopt;
  Mat sym = 0.5 * (Q + Q.transpose());
  if (sym.size() > 0 && !sym.allFinite()) return std::nullopt;
  if (sym.rows() > 0 &&
      check_psd(sym_to_intervals(sym)) != PsdCheck::Certified)
    return std::nullopt;
  return Ellipsoid(std::move(sym), std::move(c));
}

Ellipsoid Ellipsoid::ball(const Vec& center, double radius) {
  const int n = int(center.size());
  Mat q = Mat::Identity(n, n) / (radius * radius);
  auto e = make(std::move(q), center);
  if (!e) throw std::invalid_argument("ball: bad radius");
  return *e;
}

bool Ellipsoid::contains(const Vec& x, double tol) const {
  Vec d = x - c_;
  return d.dot(q_ * d) <= 1.0 + tol;
}

Mat homogenize(const Mat& Q, const Vec& c) {
  const int n = int(c.size());
  Mat f(n + 1, n + 1);
  f.topLeftCorner(n, n) = Q;
  Vec qc = Q * c;
  f.block(0, n, n, 1) = -qc;
  f.block(n, 0, 1, n) = -qc.transpose();
  f(n, n) = c.dot(qc) - 1.0;
  return f;
}

Mat homogenize(const Ellipsoid& e) { return homogenize(e.Q(), e.c()); }

Ellipsoid inflate(const Ellipsoid& e, double factor) {
  if (!(factor >= 1.0)) throw std::invalid_argument("inflate: factor < 1");
  if (factor == 1.0) return e;
  auto out = Ellipsoid::make(e.Q() / (factor * factor), e.c());
  if (!out) throw std::runtime_error("inflate: shape lost definiteness");
  return *out;
}

namespace detail {

bool search_sproc_witness(
    const SprocSearch& in,
    const std::function<bool(double lam, double beta)>& try_cert,
    double* lam_out, double* beta_out) {
  const int d = int(in.Fin.rows());
  // Congruence-normalize the claim: x -> x/s turns F(Q, c) into
  // D F(Q, c) D with D = diag(s..s, 1) and leaves the witness
  // multipliers untouched, so the solver can work at unit scale while
  // the certificate stays about the original payloads.
  double block_mag = 0.0;
  for (int i = 0; i + 1 < d; ++i)
    for (int j = 0; j + 1 < d; ++j)
      block_mag = std::max(block_mag, std::abs(in.Target(i, j)));
  const double s = block_mag > 0.0 ? 1.0 / std::sqrt(block_mag) : 1.0;
  Vec dscale = Vec::Constant(d, s);
  dscale[d - 1] = 1.0;
  const Mat Fin = dscale.asDiagonal() * in.Fin * dscale.asDiagonal();
  const Mat Target = dscale.asDiagonal() * in.Target * dscale.asDiagonal();
  const double scale = std::max(1.0, Target.cwiseAbs().maxCoeff());
  const double shift = in.cfg.cert_shift * scale;

  enum class Mode { Plain, Shifted, Margin };
  auto solve_once = [&](Mode mode)
      -> std::optional<std::pair<double, double>> {
    sdp::Problem p;
    sdp::VarId lam = p.scalar("lam");
    sdp::VarId beta = p.scalar("beta");
    sdp::MatExpr e(d);
    Mat base = -Target;
    if (mode == Mode::Shifted) base -= shift * Mat::Identity(d, d);
    e.set_const(base);
    e.add_term(beta, d - 1, d - 1, 1.0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j)
        if (Fin(i, j) != 0.0) e.add_term(lam, i, j, Fin(i, j));
    if (mode == Mode::Margin) {
      sdp::VarId margin = p.scalar("margin");
      for (int i = 0; i < d; ++i) e.add_term(margin, i, i, -1.0);
      p.require_psd(std::move(e));
      p.require_nonneg(lam);
      if (in.need_beta_nonpos) {
        sdp::MatExpr nb(1);
        nb.add_term(beta, 0, 0, -1.0);
        p.require_psd(std::move(nb));
      }
      p.maximize(sdp::LinExpr(margin));
    } else {
      p.require_psd(std::move(e));
      p.require_nonneg(lam);
      p.maximize(sdp::LinExpr().add(beta, -1.0));
    }
    sdp::Solution sol = sdp::solve(p, in.cfg.solver);
    ++in.stats.solver_calls;
    if (sol.status != sdp::SolveStatus::Optimal &&
        sol.status != sdp::SolveStatus::Feasible)
      return std::nullopt;
    return std::make_pair(sol.value(lam), sol.value(beta));
  };

  // Neighborhood exploration around the solver's multipliers.
  static const double kDeltas[] = {0.0,   1e-12, -1e-12, 1e-9,
                                   -1e-9, 1e-6,  -1e-6};
  auto grid = [&](double lam0, double beta0) -> bool {
    for (double dl : kDeltas)
      for (double db : kDeltas) {
        const double lam = lam0 + dl;
        const double beta = beta0 + db;
        if (lam < 0.0) continue;
        if (in.need_beta_nonpos && beta > 0.0) continue;
        if (try_cert(lam, beta)) {
          if (lam_out) *lam_out = lam;
          if (beta_out) *beta_out = beta;
          return true;
        }
      }
    return false;
  };

  // The unshifted optimum tells genuinely-outside apart from
  // boundary-tight; the shifted solve gives well-centered witnesses at
  // moderate scales; the margin solve handles ill-scaled claims.
  auto plain = solve_once(Mode::Plain);
  if (plain && in.need_beta_nonpos && plain->second > 1e-6 * scale)
    return false;
  if (auto s = solve_once(Mode::Shifted)) {
    if (grid(s->first, s->second)) return true;
  }
  if (plain && grid(plain->first, plain->second)) return true;
  if (auto s = solve_once(Mode::Margin)) {
    if (grid(s->first, s->second)) return true;
  }
  return false;
}

}  // namespace detail

IncludeResult includes(const Ellipsoid& inner, const Ellipsoid& outer,
                       const DomainConfig& cfg) {
  if (inner.dim() != outer.dim())
    throw std::invalid_argument("includes: dimension mismatch");
  IncludeResult r;
  const Mat Fin = homogenize(inner);
  const Mat Fout = homogenize(outer);

  std::optional<cert::Step> kept;
  auto try_cert = [&](double lam, double beta) {
    cert::Step s;
    s.tag = "ell_includes";
    s.claim = "ellipsoid inclusion, dim " + std::to_string(inner.dim());
    detail::add_mat(s, "Q", inner.Q());
    detail::add_vec(s, "c", inner.c());
    detail::add_mat(s, "Qs", outer.Q());
    detail::add_vec(s, "cs", outer.c());
    s.add_scalar("lam", lam);
    s.add_scalar("beta", beta);
    ++r.stats.lmi_checks;
    std::string why;
    if (cert::replay_step(s, &why) != cert::StepVerdict::Certified)
      return false;
    kept = std::move(s);
    return true;
  };

  double lam = 0, beta = 0;
  if (detail::search_sproc_witness({Fin, Fout, cfg, r.stats, true}, try_cert,
                                   &lam, &beta)) {
    r.included = true;
    r.witness = InclusionWitness{lam, beta};
    r.cert.steps.push_back(std::move(*kept));
  }
  return r;
}

namespace {

JoinResult join_direct(std::span<const Ellipsoid> es, const DomainConfig& cfg) {
  JoinResult r;
  const int n = es[0].dim();
  for (const Ellipsoid& e : es)
    if (e.dim() != n) throw std::invalid_argument("join: dimension mismatch");

  sdp::Problem p;
  auto X = p.symmetric("X", n);
  std::vector<sdp::VarId> z(n);
  for (int i = 0; i < n; ++i) z[i] = p.scalar("z_" + std::to_string(i));
  std::vector<sdp::VarId> taus;

  const int d = 2 * n + 1;
  for (size_t k = 0; k < es.size(); ++k) {
    sdp::VarId tau = p.scalar("tau_" + std::to_string(k));
    taus.push_back(tau);
    sdp::MatExpr e(d);
    // tau*[[Q,-Qc,0],[-cQ,cQc-1,0],[0,0,0]] >= [[X,-z,0],[-z^T,-1,z^T],[0,z,-X]]
    const Mat F = homogenize(es[k]);
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= i; ++j)
        if (F(i, j) != 0.0) e.add_term(tau, i, j, F(i, j));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        e.add_term(X(i, j), i, j, -1.0);
        e.add_term(X(i, j), n + 1 + i, n + 1 + j, 1.0);
      }
    for (int i = 0; i < n; ++i) {
      e.add_term(z[i], i, n, 1.0);
      e.add_term(z[i], n, n + 1 + i, -1.0);
    }
    e.add_const(n, n, 1.0);
    p.require_psd(std::move(e));
    p.require_nonneg(tau);
  }
  sdp::VolumeBlock vb = build_volume_block(p, X);
  p.maximize(sdp::LinExpr(vb.t));

  sdp::Solution sol = sdp::solve(p, cfg.solver);
  ++r.stats.solver_calls;
  if (sol.status != sdp::SolveStatus::Optimal &&
      sol.status != sdp::SolveStatus::Feasible) {
    r.failure = std::string("join solve failed: ") + to_string(sol.status);
    return r;
  }

  Mat Q0 = X.unpack(sol.values);
  Vec zv(n);
  for (int i = 0; i < n; ++i) zv[i] = sol.value(z[i]);
  Vec c0 = Eigen::PartialPivLU<Mat>(Q0).solve(zv);

  r.witness.X = Q0;
  r.witness.z = zv;
  r.witness.t = sol.objective;
  for (sdp::VarId tau : taus) r.witness.taus.push_back(sol.value(tau));

  auto cand = Ellipsoid::make(Q0, c0);
  if (!cand) {
    r.failure = "join result shape not certifiable";
    return r;
  }

  double pad = cfg.pad_eps0;
  for (int attempt = 0; attempt <= cfg.pad_attempts; ++attempt) {
    cert::Certificate attempt_cert;
    attempt_cert.steps.push_back(
        psd_step(cand->Q(), "join result shape positive definite"));
    bool all = true;
    for (const Ellipsoid& e : es) {
      IncludeResult inc = includes(e, *cand, cfg);
      r.stats.absorb(inc.stats);
      if (!inc.included) {
        all = false;
        break;
      }
      attempt_cert.append(std::move(inc.cert));
    }
    if (all) {
      r.result = cand;
      r.cert = std::move(attempt_cert);
      return r;
    }
    ++r.stats.paddings;
    cand = inflate(*cand, 1.0 + pad);
    pad *= 2.0;
  }
  r.failure = "join certification failed after padding budget";
  return r;
}

}  // namespace

JoinResult join(std::span<const Ellipsoid> es, const DomainConfig& cfg) {
  if (es.empty()) throw std::invalid_argument("join: needs at least one input");
  if (es.size() <= 12) return join_direct(es, cfg);
  // Large unions fold pairwise to keep each SDP small.
  const size_t half = es.size() / 2;
  JoinResult a = join(es.subspan(0, half), cfg);
  JoinResult b = join(es.subspan(half), cfg);
  JoinResult r;
  r.stats.absorb(a.stats);
  r.stats.absorb(b.stats);
  if (!a.result || !b.result) {
    r.failure = !a.result ? a.failure : b.failure;
    return r;
  }
  const Ellipsoid halves[2] = {*a.result, *b.result};
  JoinResult top = join_direct(halves, cfg);
  r.stats.absorb(top.stats);
  if (!top.result) {
    r.failure = top.failure;
    return r;
  }
  r.result = top.result;
  r.witness = top.witness;
  r.cert = std::move(a.cert);
  r.cert.append(std::move(b.cert));
  r.cert.append(std::move(top.cert));
  return r;
}

VerifyResult verify_affine_image(const Ellipsoid& e, const Mat& A,
                                 const Vec& b, const Ellipsoid& candidate,
                                 const DomainConfig& cfg) {
  const int n = e.dim();
  if (A.rows() != n || A.cols() != n || b.size() != n || candidate.dim() != n)
    throw std::invalid_argument("verify_affine_image: dimension mismatch");
  VerifyResult r;

  const Vec chat = A * e.c();
  const Mat& Qs = candidate.Q();
  // Intermediate shape strictly inside the candidate: the linear part
  // lands in Ell(Qm, chat), and the translated copy of that fits in
  // the candidate with interior slack so the strict checker can say yes.
  const Mat Qm = Qs * (1.0 + 3.0 * cfg.cert_shift);

  // Step 1: the b = 0 part, against G(A, Qm, chat).
  Mat G(n + 1, n + 1);
  {
    Mat AtQm = A.transpose() * Qm;
    G.topLeftCorner(n, n) = AtQm * A;
    Vec w = AtQm * chat;
    G.block(0, n, n, 1) = -w;
    G.block(n, 0, 1, n) = -w.transpose();
    G(n, n) = chat.dot(Qm * chat) - 1.0;
  }
  const Mat Fin = homogenize(e);

  std::optional<cert::Step> step1;
  auto try1 = [&](double lam, double beta) {
    cert::Step s;
    s.tag = "ell_affine_nob";
    s.claim = "linear image inclusion, dim " + std::to_string(n);
    detail::add_mat(s, "Q", e.Q());
    detail::add_vec(s, "c", e.c());
    detail::add_mat(s, "A", A);
    detail::add_mat(s, "Qs", Qm);
    detail::add_vec(s, "chat", chat);
    s.add_scalar("lam", lam);
    s.add_scalar("beta", beta);
    ++r.stats.lmi_checks;
    std::string why;
    if (cert::replay_step(s, &why) != cert::StepVerdict::Certified)
      return false;
    step1 = std::move(s);
    return true;
  };
  if (!detail::search_sproc_witness({Fin, G, cfg, r.stats, true}, try1,
                                    nullptr, nullptr))
    return r;

  // Step 2: sound center translation, interval chat + b against c*.
  const Mat Ffrom = homogenize(Qm, Vec(chat + b));
  const Mat Fto = homogenize(Qs, candidate.c());
  std::optional<cert::Step> step2;
  auto try2 = [&](double lam, double beta) {
    cert::Step s;
    s.tag = "ell_translate";
    s.claim = "center translation inclusion, dim " + std::to_string(n);
    detail::add_mat(s, "Qm", Qm);
    detail::add_mat(s, "Qs", Qs);
    detail::add_vec(s, "chat", chat);
    detail::add_vec(s, "b", b);
    detail::add_vec(s, "cs", candidate.c());
    s.add_scalar("lam", lam);
    s.add_scalar("beta", beta);
    ++r.stats.lmi_checks;
    std::string why;
    if (cert::replay_step(s, &why) != cert::StepVerdict::Certified)
      return false;
    step2 = std::move(s);
    return true;
  };
  if (!detail::search_sproc_witness({Ffrom, Fto, cfg, r.stats, true}, try2,
                                    nullptr, nullptr))
    return r;

  r.ok = true;
  r.cert.steps.push_back(std::move(*step1));
  r.cert.steps.push_back(std::move(*step2));
  return r;
}

AffineResult affine_image(const Ellipsoid& e, const Mat& A, const Vec& b,
                          double eps, const DomainConfig& cfg) {
  const int n = e.dim();
  if (A.rows() != n || A.cols() != n || b.size() != n)
    throw std::invalid_argument("affine_image: dimension mismatch");
  if (!(eps > 0.0)) throw std::invalid_argument("affine_image: eps <= 0");
  AffineResult r;

  sdp::Problem p;
  auto X = p.symmetric("X", n);
  {
    // Q - A^T X A >= 0
    sdp::MatExpr cons(n);
    cons.set_const(e.Q());
    for (int k = 0; k < n; ++k)
      for (int l = 0; l <= k; ++l)
        for (int rr = 0; rr < n; ++rr)
          for (int ss = 0; ss <= rr; ++ss) {
            double coeff = -(A(k, rr) * A(l, ss));
            if (k != l) coeff -= A(l, rr) * A(k, ss);
            if (coeff != 0.0) cons.add_term(X(k, l), rr, ss, coeff);
          }
    p.require_psd(std::move(cons));
  }
  {
    // (1/eps) Id - X >= 0 keeps singular images from degenerating.
    sdp::MatExpr cap(n);
    cap.set_const(Mat::Identity(n, n) / eps);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) cap.add_term(X(i, j), i, j, -1.0);
    p.require_psd(std::move(cap));
  }
  sdp::VolumeBlock vb = build_volume_block(p, X);
  p.maximize(sdp::LinExpr(vb.t));

  sdp::Solution sol = sdp::solve(p, cfg.solver);
  ++r.stats.solver_calls;
  if (sol.status != sdp::SolveStatus::Optimal &&
      sol.status != sdp::SolveStatus::Feasible) {
    r.failure = "affine image solve failed";
    return r;
  }

  auto cand = Ellipsoid::make(X.unpack(sol.values), A * e.c() + b);
  if (!cand) {
    r.failure = "affine image shape not certifiable";
    return r;
  }
  double pad = cfg.pad_eps0;
  for (int attempt = 0; attempt <= cfg.pad_attempts; ++attempt) {
    VerifyResult v = verify_affine_image(e, A, b, *cand, cfg);
    r.stats.absorb(v.stats);
    if (v.ok) {
      r.result = cand;
      r.cert.steps.push_back(
          psd_step(cand->Q(), "affine image shape positive definite"));
      r.cert.append(std::move(v.cert));
      return r;
    }
    ++r.stats.paddings;
    cand = inflate(*cand, 1.0 + pad);
    pad *= 2.0;
  }
  r.failure = "affine image certification failed after padding budget";
  return r;
}

AffineResult pack_project(const Ellipsoid& e, int keep,
                          const DomainConfig& cfg) {
  const int n = e.dim();
  if (keep < 1 || keep > n)
    throw std::invalid_argument("pack_project: bad coordinate count");
  AffineResult r;
  if (keep == n) {
    r.result = e;
    return r;
  }
  const int q = n - keep;
  const Mat& Q = e.Q();
  Mat Qpp = Q.topLeftCorner(keep, keep);
  Mat Qpq = Q.topRightCorner(keep, q);
  Mat Qqq = Q.bottomRightCorner(q, q);
  Mat S = Qpp - Qpq * Eigen::LLT<Mat>(Qqq).solve(Qpq.transpose());
  S = 0.5 * (S + S.transpose());
  Vec cp = e.c().head(keep);

  const Mat Fin = homogenize(e);
  auto cand = Ellipsoid::make(S, cp);
  if (!cand) {
    r.failure = "projection shape not certifiable";
    return r;
  }
  double pad = cfg.pad_eps0;
  for (int attempt = 0; attempt <= cfg.pad_attempts; ++attempt) {
    Mat Semb = Mat::Zero(n, n);
    Semb.topLeftCorner(keep, keep) = cand->Q();
    Vec cemb = Vec::Zero(n);
    cemb.head(keep) = cp;
    const Mat Ft = homogenize(Semb, cemb);

    std::optional<cert::Step> kept;
    auto try_cert = [&](double lam, double beta) {
      cert::Step s;
      s.tag = "ell_project";
      s.claim = "projection onto first " + std::to_string(keep) +
                " coordinates from dim " + std::to_string(n);
      detail::add_mat(s, "Q", e.Q());
      detail::add_vec(s, "c", e.c());
      detail::add_mat(s, "S", cand->Q());
      detail::add_vec(s, "cp", cp);
      s.add_scalar("lam", lam);
      s.add_scalar("beta", beta);
      ++r.stats.lmi_checks;
      std::string why;
      if (cert::replay_step(s, &why) != cert::StepVerdict::Certified)
        return false;
      kept = std::move(s);
      return true;
    };
    if (detail::search_sproc_witness({Fin, Ft, cfg, r.stats, true}, try_cert,
                                     nullptr, nullptr)) {
      r.result = cand;
      r.cert.steps.push_back(
          psd_step(cand->Q(), "projection shape positive definite"));
      r.cert.steps.push_back(std::move(*kept));
      return r;
    }
    ++r.stats.paddings;
    cand = inflate(*cand, 1.0 + pad);
    pad *= 2.0;
  }
  r.failure = "projection certification failed after padding budget";
  return r;
}

ProductResult pack_product(const Ellipsoid& e1, const Ellipsoid& e2) {
  ProductResult r;
  if (e2.dim() == 0) {
    r.result = e1;
    return r;
  }
  if (e1.dim() == 0) {
    r.result = e2;
    return r;
  }
  const int n1 = e1.dim(), n2 = e2.dim();
  Mat Q = Mat::Zero(n1 + n2, n1 + n2);
  Q.topLeftCorner(n1, n1) = e1.Q() / 2.0;
  Q.bottomRightCorner(n2, n2) = e2.Q() / 2.0;
  Vec c(n1 + n2);
  c << e1.c(), e2.c();
  r.result = Ellipsoid::make(Q, c);
  if (r.result)
    r.cert.steps.push_back(
        psd_step(r.result->Q(), "packed product shape positive definite"));
  return r;
}

}  // namespace ellcone
