#include "ellcone/interval_linalg.hpp"

#include <algorithm>
#include <cmath>

namespace ellcone {

IntervalMatrix IntervalMatrix::identity(int dim) {
  IntervalMatrix m(dim);
  for (int i = 0; i < dim; ++i) m.set(i, i, Interval(1.0));
  return m;
}

IntervalMatrix IntervalMatrix::from_points(int dim,
                                           std::span<const double> rowmajor) {
  if (int(rowmajor.size()) != dim * dim)
    throw std::invalid_argument("from_points: size mismatch");
  IntervalMatrix m(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j <= i; ++j) {
      const double a = rowmajor[size_t(i) * dim + j];
      const double b = rowmajor[size_t(j) * dim + i];
      if (a != b || std::isnan(a))
        throw std::domain_error("from_points: matrix not symmetric");
      m.set(i, j, Interval(a));
    }
  return m;
}

bool IntervalMatrix::all_finite() const {
  for (const Interval& x : e_)
    if (!x.is_finite()) return false;
  return true;
}

std::optional<LdltResult> ldlt_interval(const IntervalMatrix& A) {
  const int n = A.dim();
  LdltResult out;
  out.dim = n;
  out.L.assign(size_t(n) * n, 0.0);
  out.D.assign(n, Interval(0.0));
  if (n == 0) return out;

  // Rigorous pass: every factor is an interval, so the exact LDL^T
  // quantities of any enclosed point matrix are enclosed by Lf / D.
  std::vector<Interval> Lf(size_t(n) * n);  // interval L, lower part
  std::vector<Interval> Drig(n);
  auto lf = [&](int i, int j) -> Interval& { return Lf[size_t(i) * n + j]; };

  for (int j = 0; j < n; ++j) {
    Interval c = A.at(j, j);
    for (int k = 0; k < j; ++k)
      c = iv_sub(c, iv_mul(iv_mul(lf(j, k), lf(j, k)), Drig[k]));
    if (!(c.lo > 0.0)) return std::nullopt;  // pivot touches zero/negative
    Drig[j] = c;
    for (int i = j + 1; i < n; ++i) {
      Interval cij = A.at(i, j);
      for (int k = 0; k < j; ++k)
        cij = iv_sub(cij, iv_mul(iv_mul(lf(i, k), lf(j, k)), Drig[k]));
      lf(i, j) = iv_div(cij, Drig[j]);
    }
    lf(j, j) = Interval(1.0);
  }

  for (int i = 0; i < n; ++i) {
    out.L[size_t(i) * n + i] = 1.0;
    for (int j = 0; j < i; ++j) out.L[size_t(i) * n + j] = lf(i, j).mid();
  }

  // Reporting pass: start from the rigorous pivots and widen them until
  // the point-L product provably contains A entrywise. Widening only
  // ever weakens the certificate (check_psd looks at the reported lower
  // endpoints), so this cannot manufacture a positive verdict.
  out.D = Drig;
  for (int round = 0; round < 4; ++round) {
    IntervalMatrix P = ldlt_product(out);
    bool contained = true;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        const Interval& a = A.at(i, j);
        const Interval& pe = P.at(i, j);
        const double need = std::max(pe.lo - a.lo, a.hi - pe.hi);
        if (!(need > 0.0)) continue;
        contained = false;
        double wbest = 0.0;
        int kbest = -1;
        for (int k = 0; k <= j; ++k) {
          const double w = std::abs(out.l(i, k) * out.l(j, k));
          if (w > wbest) {
            wbest = w;
            kbest = k;
          }
        }
        if (kbest < 0) return std::nullopt;
        const double delta = 1.25 * need / wbest;
        if (!std::isfinite(delta)) return std::nullopt;
        Interval& dk = out.D[kbest];
        dk.lo = next_down(dk.lo - delta);
        dk.hi = next_up(dk.hi + delta);
      }
    if (contained) return out;
  }
  return std::nullopt;
}

PsdCheck check_psd(const IntervalMatrix& A) {
  if (A.dim() == 0) return PsdCheck::Certified;
  if (!A.all_finite()) return PsdCheck::Unknown;
  auto f = ldlt_interval(A);
  if (!f) return PsdCheck::Unknown;
  for (const Interval& d : f->D)
    if (!(d.lo > 0.0) || !d.is_finite()) return PsdCheck::Unknown;
  return PsdCheck::Certified;
}

PsdCheck check_lmi(std::span<const IntervalMatrix> mats,
                   std::span<const double> alphas) {
  if (mats.empty()) throw std::invalid_argument("check_lmi: empty matrix list");
  if (mats.size() != alphas.size())
    throw std::invalid_argument("check_lmi: multiplier count mismatch");
  const int n = mats[0].dim();
  for (const IntervalMatrix& m : mats)
    if (m.dim() != n) throw std::invalid_argument("check_lmi: dimension mismatch");

  IntervalMatrix sum(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      Interval s(0.0);
      for (size_t k = 0; k < mats.size(); ++k)
        s = iv_add(s, iv_mul(mats[k].at(i, j), Interval(alphas[k])));
      sum.set(i, j, s);
    }
  return check_psd(sum);
}

IntervalMatrix ldlt_product(const LdltResult& f) {
  const int n = f.dim;
  IntervalMatrix p(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      Interval s(0.0);
      for (int k = 0; k <= j; ++k)
        s = iv_add(s, iv_mul(iv_mul(Interval(f.l(i, k)), Interval(f.l(j, k))),
                             f.D[k]));
      p.set(i, j, s);
    }
  return p;
}

}  // namespace ellcone
