#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "ellcone/sdp.hpp"

// Primal-dual path-following interior-point method with Nesterov-Todd
// scaling on the homogeneous self-dual embedding, Mehrotra
// predictor-corrector. Sized for small dense blocks; every result is
// post-verified elsewhere, so this code only has to be good, not sound.

namespace ellcone::sdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SparseEntry {
  int r, c;
  double v;
};

struct BlockData {
  int dim = 0;
  Mat F0;
  std::vector<int> vars;
  std::vector<std::vector<SparseEntry>> coeff;  // parallel to vars
  double f0_norm = 1.0;
};

double sdot(const std::vector<SparseEntry>& es, const Mat& U) {
  double s = 0.0;
  for (const SparseEntry& e : es) s += e.v * U(e.r, e.c);
  return s;
}

Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

/// Symmetric power with eigenvalue floor.
Mat sym_pow(const Mat& m, double p, double floor_scale = 1e-14) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  Vec ev = es.eigenvalues();
  const double floor = floor_scale * std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int i = 0; i < ev.size(); ++i) ev[i] = std::pow(std::max(ev[i], floor), p);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct Scaling {
  Mat W, D, Dinv, Xinvsqrt, Sinvsqrt;
  Mat P;  // eigenvectors of V
  Vec v;  // eigenvalues of V
};

Scaling make_scaling(const Mat& X, const Mat& S) {
  Scaling sc;
  Mat Xh = sym_pow(X, 0.5);
  sc.Xinvsqrt = sym_pow(X, -0.5);
  sc.Sinvsqrt = sym_pow(S, -0.5);
  Mat T = sym(Xh * S * Xh);
  Mat Tinvh = sym_pow(T, -0.5);
  sc.W = sym(Xh * Tinvh * Xh);
  sc.D = sym_pow(sc.W, 0.5);
  sc.Dinv = sym_pow(sc.W, -0.5);
  Mat V = sym(sc.D * S * sc.D);
  Eigen::SelfAdjointEigenSolver<Mat> es(V);
  sc.P = es.eigenvectors();
  sc.v = es.eigenvalues();
  return sc;
}

/// Solves (V U + U V)/2 = R for symmetric U given V's eigensystem.
Mat lyap_solve(const Scaling& sc, const Mat& R) {
  Mat Rt = sc.P.transpose() * R * sc.P;
  for (int i = 0; i < Rt.rows(); ++i)
    for (int j = 0; j < Rt.cols(); ++j) {
      double denom = 0.5 * (sc.v[i] + sc.v[j]);
      Rt(i, j) = denom > 1e-300 ? Rt(i, j) / denom : 0.0;
    }
  return sym(sc.P * Rt * sc.P.transpose());
}

/// Largest step alpha with M + alpha*dM staying positive definite,
/// computed through a congruence with Minvsqrt.
double max_step(const Mat& Minvsqrt, const Mat& dM) {
  Mat Y = sym(Minvsqrt * dM * Minvsqrt);
  Eigen::SelfAdjointEigenSolver<Mat> es(Y);
  double lmin = es.eigenvalues().minCoeff();
  if (lmin >= -1e-14) return kInf;
  return 1.0 / (-lmin);
}

}  // namespace

Solution solve(const Problem& p, const SolverConfig& cfg) {
  const int m = p.num_vars();
  Solution sol;
  sol.values = Vec::Zero(m);

  Vec c = Vec::Zero(m);
  double obj_const = p.objective().constant;
  for (const auto& [var, coeff] : p.objective().terms) c[var.idx] += coeff;

  if (p.num_blocks() == 0) {
    sol.status = c.norm() == 0.0 ? SolveStatus::Optimal
                                 : SolveStatus::NumericalFailure;
    sol.objective = obj_const;
    return sol;
  }

  std::vector<BlockData> blocks;
  int total_dim = 0;
  for (int b = 0; b < p.num_blocks(); ++b) {
    const MatExpr& e = p.block(b);
    BlockData bd;
    bd.dim = e.dim();
    bd.F0 = e.constant_part();
    bd.f0_norm = std::max(1.0, bd.F0.norm());
    for (const auto& [var, entries] : e.terms()) {
      bd.vars.push_back(var);
      std::vector<SparseEntry> full;
      for (const auto& [ij, v] : entries) {
        full.push_back({ij.first, ij.second, v});
        if (ij.first != ij.second) full.push_back({ij.second, ij.first, v});
      }
      bd.coeff.push_back(std::move(full));
    }
    total_dim += bd.dim;
    blocks.push_back(std::move(bd));
  }
  const int nb = int(blocks.size());

  std::vector<Mat> X(nb), S(nb);
  for (int b = 0; b < nb; ++b) {
    X[b] = Mat::Identity(blocks[b].dim, blocks[b].dim);
    S[b] = Mat::Identity(blocks[b].dim, blocks[b].dim);
  }
  Vec y = Vec::Zero(m);
  double tau = 1.0, kappa = 1.0;

  const double cnorm = 1.0 + c.norm();
  auto finish = [&](SolveStatus st, const std::string& why) {
    sol.status = st;
    if (tau > 1e-300) sol.values = y / tau;
    sol.objective = c.dot(sol.values) + obj_const;
    sol.detail = why;
    return sol;
  };

  std::vector<Mat> rD(nb), WFW(nb), Hc(nb);
  std::vector<std::vector<Mat>> U(nb);
  Vec rP(m);

  int stalls = 0;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    sol.iterations = iter;

    // Residuals of the embedding.
    double xs = 0.0;
    for (int b = 0; b < nb; ++b) xs += (X[b].array() * S[b].array()).sum();
    double mu = (xs + tau * kappa) / (total_dim + 1);

    for (int i = 0; i < m; ++i) rP[i] = -c[i] * tau;
    double f0x = 0.0;
    for (int b = 0; b < nb; ++b) {
      const BlockData& bd = blocks[b];
      rD[b] = S[b] - bd.F0 * tau;
      for (size_t k = 0; k < bd.vars.size(); ++k) {
        const int i = bd.vars[k];
        rP[i] -= sdot(bd.coeff[k], X[b]);
        for (const SparseEntry& e : bd.coeff[k]) rD[b](e.r, e.c) -= y[i] * e.v;
      }
      f0x += (bd.F0.array() * X[b].array()).sum();
    }
    double rG = -f0x + c.dot(y) - kappa;

    double pr = rP.norm() / (tau * cnorm);
    double dr = 0.0;
    for (int b = 0; b < nb; ++b)
      dr = std::max(dr, rD[b].norm() / (tau * blocks[b].f0_norm));
    double obj_now = c.dot(y) / tau;
    double cg = xs / (tau * tau) / (1.0 + std::abs(obj_now));

    if (pr <= cfg.tol && dr <= cfg.tol && cg <= cfg.tol)
      return finish(SolveStatus::Optimal, "");

    if (tau <= 1e-10 || (tau <= 1e-7 * kappa && mu <= 1e-10)) {
      // tau -> 0: the embedding certifies infeasibility of one side.
      if (f0x < 0.0)
        return finish(SolveStatus::Infeasible, "dual improving ray");
      return finish(SolveStatus::NumericalFailure,
                    "ill-posed or unbounded problem");
    }

    // NT scalings and W-sandwiched data.
    std::vector<Scaling> sc(nb);
    double q0 = 0.0;
    Vec h = Vec::Zero(m), g = Vec::Zero(m);
    for (int b = 0; b < nb; ++b) {
      sc[b] = make_scaling(X[b], S[b]);
      const BlockData& bd = blocks[b];
      WFW[b] = sym(sc[b].W * bd.F0 * sc[b].W);
      q0 += (bd.F0.array() * WFW[b].array()).sum();
      Mat WrDW = sym(sc[b].W * rD[b] * sc[b].W);
      U[b].assign(bd.vars.size(), Mat());
      for (size_t k = 0; k < bd.vars.size(); ++k) {
        Mat Fi = Mat::Zero(bd.dim, bd.dim);
        for (const SparseEntry& e : bd.coeff[k]) Fi(e.r, e.c) = e.v;
        U[b][k] = sym(sc[b].W * Fi * sc[b].W);
        h[bd.vars[k]] += (Fi.array() * WFW[b].array()).sum();
        g[bd.vars[k]] += (Fi.array() * WrDW.array()).sum();
      }
    }

    Mat M = Mat::Zero(m, m);
    for (int b = 0; b < nb; ++b) {
      const BlockData& bd = blocks[b];
      for (size_t k = 0; k < bd.vars.size(); ++k)
        for (size_t l = 0; l <= k; ++l) {
          double v = sdot(bd.coeff[k], U[b][l]);
          M(bd.vars[k], bd.vars[l]) += v;
          if (bd.vars[k] != bd.vars[l]) M(bd.vars[l], bd.vars[k]) += v;
        }
    }

    Eigen::LDLT<Mat> fact;
    double ridge = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
      fact.compute(M + ridge * Mat::Identity(m, m));
      if (fact.info() == Eigen::Success &&
          (m == 0 || fact.vectorD().minCoeff() > 0.0))
        break;
      ridge = ridge == 0.0 ? 1e-12 * (1.0 + M.diagonal().cwiseAbs().maxCoeff())
                           : ridge * 100.0;
    }

    Vec u1 = m > 0 ? Vec(fact.solve(Vec(c - h))) : Vec();

    // One Newton solve for a given centering target; returns the step.
    struct Direction {
      std::vector<Mat> dX, dS;
      Vec dy;
      double dtau = 0, dkappa = 0;
    };
    auto newton = [&](double sigma_mu, const Direction* aff) {
      Direction d;
      d.dX.resize(nb);
      d.dS.resize(nb);
      Vec pvec = Vec::Zero(m);
      double f0H = 0.0;
      for (int b = 0; b < nb; ++b) {
        const Scaling& s = sc[b];
        Mat V2 = s.P * s.v.cwiseProduct(s.v).asDiagonal() * s.P.transpose();
        Mat Rc = -V2;
        if (sigma_mu > 0.0)
          Rc += sigma_mu * Mat::Identity(blocks[b].dim, blocks[b].dim);
        if (aff) {
          Mat P1 = sym(s.Dinv * aff->dX[b] * s.Dinv);
          Mat P2 = sym(s.D * aff->dS[b] * s.D);
          Rc -= 0.5 * (P1 * P2 + P2 * P1);
        }
        Hc[b] = sym(s.D * lyap_solve(s, sym(Rc)) * s.D);
        const BlockData& bd = blocks[b];
        f0H += (bd.F0.array() * Hc[b].array()).sum();
        for (size_t k = 0; k < bd.vars.size(); ++k)
          pvec[bd.vars[k]] += sdot(bd.coeff[k], Hc[b]);
      }
      double rck = sigma_mu - tau * kappa;
      if (aff) rck -= aff->dtau * aff->dkappa;

      Vec r1 = -rP + pvec + g;
      double f0WrDW = 0.0;
      for (int b = 0; b < nb; ++b) {
        Mat WrDW = sym(sc[b].W * rD[b] * sc[b].W);
        f0WrDW += (blocks[b].F0.array() * WrDW.array()).sum();
      }
      double r2 = -rG + f0H + f0WrDW + rck / tau;

      Vec u2 = m > 0 ? Vec(fact.solve(r1)) : Vec();
      double denom = q0 + kappa / tau + (m > 0 ? (h + c).dot(u1) : 0.0);
      double num = r2 - (m > 0 ? (h + c).dot(u2) : 0.0);
      d.dtau = std::abs(denom) > 1e-300 ? num / denom : 0.0;
      d.dy = m > 0 ? Vec(u2 + d.dtau * u1) : Vec();
      d.dkappa = (rck - kappa * d.dtau) / tau;
      for (int b = 0; b < nb; ++b) {
        const BlockData& bd = blocks[b];
        Mat dS = bd.F0 * d.dtau - rD[b];
        for (size_t k = 0; k < bd.vars.size(); ++k)
          for (const SparseEntry& e : bd.coeff[k])
            dS(e.r, e.c) += d.dy[bd.vars[k]] * e.v;
        d.dS[b] = sym(dS);
        d.dX[b] = sym(Hc[b] - sc[b].W * d.dS[b] * sc[b].W);
      }
      return d;
    };

    auto step_bound = [&](const Direction& d) {
      double a = kInf;
      for (int b = 0; b < nb; ++b) {
        a = std::min(a, max_step(sc[b].Xinvsqrt, d.dX[b]));
        a = std::min(a, max_step(sc[b].Sinvsqrt, d.dS[b]));
      }
      if (d.dtau < 0) a = std::min(a, tau / -d.dtau);
      if (d.dkappa < 0) a = std::min(a, kappa / -d.dkappa);
      return a;
    };

    Direction aff = newton(0.0, nullptr);
    double a_aff = std::min(1.0, 0.99 * step_bound(aff));

    double xs_aff = 0.0;
    for (int b = 0; b < nb; ++b)
      xs_aff += ((X[b] + a_aff * aff.dX[b]).array() *
                 (S[b] + a_aff * aff.dS[b]).array())
                    .sum();
    double mu_aff = (xs_aff + (tau + a_aff * aff.dtau) *
                                  (kappa + a_aff * aff.dkappa)) /
                    (total_dim + 1);
    double sigma = std::pow(std::max(0.0, std::min(1.0, mu_aff / mu)), 3);
    sigma = std::max(sigma, 1e-8);

    Direction dir = newton(sigma * mu, &aff);
    double alpha = std::min(1.0, 0.99 * step_bound(dir));
    if (!std::isfinite(alpha) || alpha <= 1e-10) {
      if (++stalls >= 3)
        return finish(SolveStatus::NumericalFailure, "step length collapsed");
      alpha = 1e-10;
    } else {
      stalls = 0;
    }

    for (int b = 0; b < nb; ++b) {
      X[b] = sym(X[b] + alpha * dir.dX[b]);
      S[b] = sym(S[b] + alpha * dir.dS[b]);
    }
    y += alpha * dir.dy;
    tau += alpha * dir.dtau;
    kappa += alpha * dir.dkappa;
  }

  // Iteration budget exhausted: classify the point we have.
  {
    for (int i = 0; i < m; ++i) rP[i] = -c[i] * tau;
    double dr = 0.0;
    for (int b = 0; b < nb; ++b) {
      const BlockData& bd = blocks[b];
      Mat res = S[b] - bd.F0 * tau;
      for (size_t k = 0; k < bd.vars.size(); ++k) {
        rP[bd.vars[k]] -= sdot(bd.coeff[k], X[b]);
        for (const SparseEntry& e : bd.coeff[k])
          res(e.r, e.c) -= y[bd.vars[k]] * e.v;
      }
      dr = std::max(dr, res.norm() / (tau * bd.f0_norm));
    }
    double pr = rP.norm() / (tau * cnorm);
    if (pr <= 1e-6 && dr <= 1e-6)
      return finish(SolveStatus::Feasible, "max iterations, feasible point");
  }
  return finish(SolveStatus::NumericalFailure, "max iterations");
}

}  // namespace ellcone::sdp
