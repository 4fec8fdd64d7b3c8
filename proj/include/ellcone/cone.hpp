#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ellcone/ellipsoid.hpp"

namespace ellcone {

/// Slope value used once widening gives up on a counter: it makes the
/// membership predicate degenerate to the half-space conditions and
/// the inclusion slope checks vacuous.
inline constexpr double kInfiniteSlope =
    std::numeric_limits<double>::infinity();

struct CounterSlot {
  double beta = 0.0;         // slope, >= 0 (may be +inf after capping)
  Vec delta;                 // drift direction, dimension n
  double lambda = 0.0;       // base level of the counter
  bool extrapolated = false; // b_i: whether y_i may exceed lambda_i
};

/// Con((q, c), (beta_i, delta_i, lambda_i, b_i)): an ellipsoidal base
/// whose center drifts by delta_i and whose radius opens with slope
/// beta_i per unit of counter y_i above lambda_i.
class Cone {
 public:
  Cone(Ellipsoid base, std::vector<CounterSlot> slots);

  const Ellipsoid& base() const { return base_; }
  const std::vector<CounterSlot>& slots() const { return slots_; }
  int dim() const { return base_.dim(); }
  int counters() const { return int(slots_.size()); }

  Cone with_base(Ellipsoid b) const;
  Cone with_slots(std::vector<CounterSlot> s) const;

  /// Definition-2 membership at midpoint precision (tests, oracles).
  bool contains(const Vec& x, const Vec& y, double tol = 0.0) const;

 private:
  Ellipsoid base_;
  std::vector<CounterSlot> slots_;
};

struct ConeSlopeBound {
  double s = 0.0;       // multiplier for the scaled base form
  double t = 0.0;       // 1 + t overapproximates M
  double m_over = 1.0;  // the certified overapproximation of M
};

struct ConeInclusionWitness {
  InclusionWitness base_witness;
  std::vector<ConeSlopeBound> slope_bounds;
  std::vector<bool> level_checks;
};

struct ConeIncludeResult {
  bool included = false;
  ConeInclusionWitness witness;
  cert::Certificate cert;
  OpStats stats;
};

/// Thm-2 inclusion test C inside Cp; certified or answered false.
ConeIncludeResult cone_includes(const Cone& C, const Cone& Cp,
                                const DomainConfig& cfg);

/// Inclusion of C restricted to counter boxes [lambda_i, upper_i]
/// inside Cp. Cones are convex and interval restrictions interpolate
/// their boundary slices, so certifying the corner slices certifies
/// the whole restriction; this sidesteps the asymptotic slope
/// comparison and is what fixpoint stabilization uses (invariants for
/// unbounded loops are horizon-relative).
ConeIncludeResult cone_includes_bounded(const Cone& C, const Cone& Cp,
                                        const Vec& upper,
                                        const DomainConfig& cfg);

/// lambda_i <- lower bound of lambda_i + v; exact for integer counters.
Cone counter_increment(const Cone& C, int i, double v);

/// Certificate step recording a counter increment, for the analyzer's
/// master certificate.
cert::Step counter_increment_step(double lam, double v, double lam_new);

struct ConeOpResult {
  std::optional<Cone> result;
  cert::Certificate cert;
  OpStats stats;
  std::string failure;
};

/// x <- A x + b lifted to cones: base via the affine-image SDP, drifts
/// mapped through A, slopes raised by the certified sqrt correction.
/// A shape hint short-circuits the base SDP by aiming the image at the
/// given form (padded as needed); fixpoint iterations pass the current
/// invariant's shape so the transfer does not wander.
ConeOpResult cone_affine(const Cone& C, const Mat& A, const Vec& b,
                         const DomainConfig& cfg,
                         const Mat* shape_hint = nullptr);

/// New trailing counter at level lambda_new; extrapolation flag off
/// exactly when the counter's value is known to equal lambda_new.
Cone add_counter(const Cone& C, double lambda_new, bool known_exact);

/// Projects counter i away given certified bounds lo <= y_i <= hi,
/// joining the two boundary slices per Thm 3.
ConeOpResult remove_counter(const Cone& C, int i, double lo, double hi,
                            const DomainConfig& cfg);

struct RatioResult {
  bool ok = false;
  double r = 1.0;  // certified: r^2 * q_from >= q_to
  cert::Certificate cert;
  OpStats stats;
};

RatioResult ratio_bound(const Mat& q_from, const Mat& q_to,
                        const DomainConfig& cfg);

struct SlotPortResult {
  bool ok = false;
  std::vector<CounterSlot> slots;
  cert::Certificate cert;
  OpStats stats;
};

/// Ports counter slots onto a different base form: slopes scale by the
/// certified ratio between the forms (the absolute opening per counter
/// unit is what carries over), drifts stay. Falls back to keeping a
/// slope when the old form provably dominates the new one.
SlotPortResult port_slots_to_base(const Mat& q_old, const Mat& q_new,
                                  const std::vector<CounterSlot>& slots);

/// Partial widening: keeps C's base and levels, opens slopes and
/// drifts to cover both arguments; containment of both is re-checked
/// and certified before returning.
ConeOpResult widen_partial(const Cone& C, const Cone& Cp,
                           const DomainConfig& cfg);

/// Full widening via the bridging cone; cap_betas implements the
/// termination policy that opens surviving slopes to +inf. By default
/// the observed center shift becomes per-counter drift (the right call
/// for sustained drift); shift_to_slope routes it into the opening
/// instead, which suits contracting dynamics whose drift is transient.
ConeOpResult widen(const Cone& C, const Cone& Cp, bool cap_betas,
                   const DomainConfig& cfg, bool shift_to_slope = false);

/// Join of cones sharing levels and flags (Choose-branch merge).
ConeOpResult cone_join(std::span<const Cone> cones, const DomainConfig& cfg);

struct LyapunovResult {
  bool feasible = false;
  Mat Q;
  double margin = 0.0;  // largest certified eps with Q - A^T Q A >= eps Q
  cert::Certificate cert;
  OpStats stats;
  std::string detail;
};

/// Common quadratic Lyapunov shape for all system matrices, with the
/// decrease margin maximized by bisection and certified per matrix.
/// eps_fraction < 1 trades margin for shape quality: the returned form
/// is re-solved at that fraction of the supremum with the flattest
/// admissible conditioning (the supremum itself is approached by
/// degenerate blade shapes).
LyapunovResult lyapunov_base(std::span<const Mat> As, const DomainConfig& cfg,
                             double eps_fraction = 1.0);

struct StableBetaResult {
  double beta0 = 0.0;
  cert::Certificate cert;
};

/// Certified slope threshold from the Lyapunov argument: any slope
/// above it makes the cone invariant under x <- A x + b.
StableBetaResult min_stable_beta(const Mat& q, const Vec& c, const Mat& A,
                                 const Vec& b, const Vec& delta,
                                 double lyap_margin);

}  // namespace ellcone
