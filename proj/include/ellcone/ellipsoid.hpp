#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ellcone/certificate.hpp"
#include "ellcone/sdp.hpp"

namespace ellcone {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct DomainConfig {
  double pad_eps0 = 1e-6;    // first ratio inflation, doubled per retry
  int pad_attempts = 10;
  double affine_eps = 1e-4;  // X <= (1/eps) Id regularizer
  double cert_shift = 1e-7;  // interior shift when solving for witnesses
  sdp::SolverConfig solver;
};

struct OpStats {
  long solver_calls = 0;
  long paddings = 0;
  long lmi_checks = 0;
  void absorb(const OpStats& o) {
    solver_calls += o.solver_calls;
    paddings += o.paddings;
    lmi_checks += o.lmi_checks;
  }
};

/// Ell(Q, c) = { x | (x-c)^T Q (x-c) <= 1 } with Q certified positive
/// definite by the interval checker at construction.
class Ellipsoid {
 public:
  /// Symmetrizes Q and certifies it; nullopt when the checker cannot.
  static std::optional<Ellipsoid> make(Mat Q, Vec c);
  static Ellipsoid ball(const Vec& center, double radius);

  const Mat& Q() const { return q_; }
  const Vec& c() const { return c_; }
  int dim() const { return int(c_.size()); }

  /// Midpoint membership predicate (for tests and oracles).
  bool contains(const Vec& x, double tol = 0.0) const;

 private:
  Ellipsoid(Mat q, Vec c) : q_(std::move(q)), c_(std::move(c)) {}
  Mat q_;
  Vec c_;
};

/// F(Q, c) = [[Q, -Qc], [-c^T Q, c^T Q c - 1]] in point arithmetic.
Mat homogenize(const Ellipsoid& e);
Mat homogenize(const Mat& Q, const Vec& c);

struct InclusionWitness {
  double lambda = 0.0;  // >= 0
  double beta = 0.0;    // <= 0 for a certified inclusion
};

struct IncludeResult {
  bool included = false;
  std::optional<InclusionWitness> witness;
  cert::Certificate cert;
  OpStats stats;
};

/// Sound inclusion test: true only with an interval-certified witness.
IncludeResult includes(const Ellipsoid& inner, const Ellipsoid& outer,
                       const DomainConfig& cfg);

struct VolumeJoinWitness {
  std::vector<double> taus;
  Mat X;
  Vec z;
  double t = 0.0;
};

struct JoinResult {
  std::optional<Ellipsoid> result;
  VolumeJoinWitness witness;
  cert::Certificate cert;
  OpStats stats;
  std::string failure;
};

/// Near-minimal-volume cover of the inputs, certified to contain each.
JoinResult join(std::span<const Ellipsoid> es, const DomainConfig& cfg);

struct AffineResult {
  std::optional<Ellipsoid> result;
  cert::Certificate cert;
  OpStats stats;
  std::string failure;
};

/// Certified cover of { A x + b | x in e }.
AffineResult affine_image(const Ellipsoid& e, const Mat& A, const Vec& b,
                          double eps, const DomainConfig& cfg);

struct VerifyResult {
  bool ok = false;
  cert::Certificate cert;
  OpStats stats;
};

/// The two-step affine-image check: the linear part against G and the
/// interval-computed center translation.
VerifyResult verify_affine_image(const Ellipsoid& e, const Mat& A,
                                 const Vec& b, const Ellipsoid& candidate,
                                 const DomainConfig& cfg);

/// Ell(Q / factor^2, c); strict superset for factor > 1.
Ellipsoid inflate(const Ellipsoid& e, double factor);

/// Certified cover of the projection onto the first `keep` coordinates.
AffineResult pack_project(const Ellipsoid& e, int keep,
                          const DomainConfig& cfg);

struct ProductResult {
  std::optional<Ellipsoid> result;
  cert::Certificate cert;
};

/// Ell(blockdiag(Q1/2, Q2/2), (c1; c2)).
ProductResult pack_product(const Ellipsoid& e1, const Ellipsoid& e2);

}  // namespace ellcone
