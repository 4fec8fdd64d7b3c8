#include <stdexcept>

#include "ellcone/sdp.hpp"

namespace ellcone::sdp {

void MatExpr::add_const(int i, int j, double v) {
  constant_(i, j) += v;
  if (i != j) constant_(j, i) += v;
}

void MatExpr::set_const(const Mat& m) {
  if (m.rows() != dim_ || m.cols() != dim_)
    throw std::invalid_argument("MatExpr: constant shape mismatch");
  constant_ = 0.5 * (m + m.transpose());
}

void MatExpr::add_term(VarId v, int i, int j, double coeff) {
  if (!v.valid()) throw std::invalid_argument("MatExpr: invalid variable");
  if (coeff == 0.0) return;
  if (i < j) std::swap(i, j);
  terms_[v.idx][{i, j}] += coeff;
}

Mat Problem::SymVar::unpack(const Vec& values) const {
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      double v = values[(*this)(i, j).idx];
      m(i, j) = v;
      m(j, i) = v;
    }
  return m;
}

VarId Problem::scalar(const std::string& name) {
  names_.push_back(name);
  return {int(names_.size()) - 1};
}

Problem::SymVar Problem::symmetric(const std::string& name, int n) {
  SymVar sv;
  sv.n = n;
  sv.packed.reserve(size_t(n) * (n + 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j)
      sv.packed.push_back(
          scalar(name + "_" + std::to_string(i) + "_" + std::to_string(j)));
  return sv;
}

void Problem::require_psd(MatExpr e) { blocks_.push_back(std::move(e)); }

void Problem::require_nonneg(VarId v) {
  MatExpr e(1);
  e.add_term(v, 0, 0, 1.0);
  require_psd(std::move(e));
}

void Problem::maximize(LinExpr obj) { objective_ = std::move(obj); }

Mat Problem::eval_block(int b, const Vec& values) const {
  const MatExpr& e = blocks_[b];
  Mat m = e.constant_part();
  for (const auto& [var, entries] : e.terms()) {
    double y = values[var];
    for (const auto& [ij, coeff] : entries) {
      m(ij.first, ij.second) += y * coeff;
      if (ij.first != ij.second) m(ij.second, ij.first) += y * coeff;
    }
  }
  return m;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

}  // namespace ellcone::sdp
