#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ellcone/interval.hpp"

namespace ellcone {

/// Symmetric matrix with interval entries. Symmetry is structural:
/// writing (i,j) writes (j,i) as well, so the two positions always
/// hold the identical interval value.
class IntervalMatrix {
 public:
  IntervalMatrix() = default;
  explicit IntervalMatrix(int dim) : dim_(dim), e_(size_t(dim) * dim) {}

  static IntervalMatrix identity(int dim);
  /// Zero-width intervals around a row-major array of doubles; the
  /// array must already be symmetric.
  static IntervalMatrix from_points(int dim, std::span<const double> rowmajor);

  int dim() const { return dim_; }
  const Interval& at(int i, int j) const { return e_[size_t(i) * dim_ + j]; }
  void set(int i, int j, const Interval& v) {
    e_[size_t(i) * dim_ + j] = v;
    e_[size_t(j) * dim_ + i] = v;
  }

  bool all_finite() const;

 private:
  int dim_ = 0;
  std::vector<Interval> e_;
};

struct LdltResult {
  /// Unit lower triangular, exact point values (midpoints of the
  /// interval factors), row-major dim x dim.
  std::vector<double> L;
  /// Pivot enclosures, widened so that the interval evaluation of
  /// L * D * L^T contains the input matrix entrywise.
  std::vector<Interval> D;
  int dim = 0;

  double l(int i, int j) const { return L[size_t(i) * dim + j]; }
};

/// Interval LDL^T decomposition. All recurrences run in interval
/// arithmetic (the internal L factor is an interval matrix), so on
/// success every symmetric point matrix enclosed by A has an exact
/// LDL^T factorization whose pivots land inside the returned D. Fails
/// (nullopt) as soon as a pivot enclosure touches zero or a negative
/// value, or if the reported point-L product cannot be made to contain
/// A; failure carries no information about definiteness.
std::optional<LdltResult> ldlt_interval(const IntervalMatrix& A);

enum class PsdCheck { Certified, Unknown };

/// Certified means: every symmetric point matrix inside A is positive
/// definite. Unknown means the decomposition could not establish that;
/// it never asserts indefiniteness. Dimension 0 is vacuously Certified.
PsdCheck check_psd(const IntervalMatrix& A);

/// Forms sum_i alpha_i * A_i in interval arithmetic and checks the
/// result with check_psd. Certified implies the point LMI holds for
/// the true real matrices enclosed by the operands.
PsdCheck check_lmi(std::span<const IntervalMatrix> mats,
                   std::span<const double> alphas);

/// Interval evaluation of L * D * L^T (point L, interval D).
IntervalMatrix ldlt_product(const LdltResult& f);

}  // namespace ellcone
