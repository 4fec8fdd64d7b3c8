#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace ellcone::sdp {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct VarId {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

/// Affine symmetric-matrix expression in the scalar unknowns:
/// constant + sum_i y_i * F_i, constrained >= 0 (psd) when added.
class MatExpr {
 public:
  explicit MatExpr(int dim) : dim_(dim), constant_(Mat::Zero(dim, dim)) {}

  int dim() const { return dim_; }
  void add_const(int i, int j, double v);
  void set_const(const Mat& m);
  /// Adds coeff at (i, j) and, when i != j, mirrors it to (j, i).
  void add_term(VarId v, int i, int j, double coeff);

  const Mat& constant_part() const { return constant_; }
  // var -> lower-triangle (i>=j) coefficient map
  const std::map<int, std::map<std::pair<int, int>, double>>& terms() const {
    return terms_;
  }

 private:
  int dim_;
  Mat constant_;
  std::map<int, std::map<std::pair<int, int>, double>> terms_;
};

struct LinExpr {
  double constant = 0.0;
  std::vector<std::pair<VarId, double>> terms;

  LinExpr() = default;
  LinExpr(VarId v) { terms.emplace_back(v, 1.0); }
  LinExpr& add(VarId v, double coeff) {
    terms.emplace_back(v, coeff);
    return *this;
  }
};

/// Small dense SDP in LMI form: named scalar / symmetric-matrix
/// unknowns, a list of affine matrix expressions required psd, and a
/// linear objective to maximize.
class Problem {
 public:
  struct SymVar {
    int n = 0;
    std::vector<VarId> packed;  // lower triangle, row-major
    VarId operator()(int i, int j) const {
      if (i < j) std::swap(i, j);
      return packed[size_t(i) * (i + 1) / 2 + j];
    }
    Mat unpack(const Vec& values) const;
  };

  VarId scalar(const std::string& name);
  SymVar symmetric(const std::string& name, int n);

  void require_psd(MatExpr e);
  void require_nonneg(VarId v);  // convenience 1x1 block
  void maximize(LinExpr obj);

  int num_vars() const { return int(names_.size()); }
  const std::string& var_name(int i) const { return names_[i]; }

  int num_blocks() const { return int(blocks_.size()); }
  const MatExpr& block(int b) const { return blocks_[b]; }
  const LinExpr& objective() const { return objective_; }

  /// Constraint block value at a point assignment (midpoint check).
  Mat eval_block(int b, const Vec& values) const;

 private:
  std::vector<std::string> names_;
  std::vector<MatExpr> blocks_;
  LinExpr objective_;
};

struct SolverConfig {
  double tol = 1e-8;
  int max_iterations = 200;
};

enum class SolveStatus { Optimal, Feasible, Infeasible, NumericalFailure };

const char* to_string(SolveStatus s);

struct Solution {
  SolveStatus status = SolveStatus::NumericalFailure;
  Vec values;  // complete when status is Optimal or Feasible
  double objective = 0.0;
  int iterations = 0;
  std::string detail;

  double value(VarId v) const { return values[v.idx]; }
};

/// Best-effort numerical solve; no soundness contract. Callers must
/// certify anything they rely on through the interval LMI checker.
Solution solve(const Problem& p, const SolverConfig& cfg = {});

/// The determinant-root gadget: ties the diagonal of a lower
/// triangular unknown to X through [[X, D],[D^T, diag(D)]] >= 0 and
/// chains 2x2 blocks so that maximizing t maximizes det(X)^(1/2^(l+1)).
struct VolumeBlock {
  VarId t;
  std::vector<VarId> delta_diag;  // diagonal of the triangular factor
  int level = 0;                  // l with n <= 2^l < 2n
  int chain_len = 0;              // number of u slots, 2^(l+1) - 2
  int free_u = 0;                 // u slots not tied to delta or 1
};

VolumeBlock build_volume_block(Problem& p, const Problem::SymVar& X);

}  // namespace ellcone::sdp
