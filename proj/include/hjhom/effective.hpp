#pragma once

// The effective Hamiltonian Hbar as an ordered piecewise curve: flat pieces
// at resonant levels and implicit pieces defined by the branch relation
// p = E[psi_j(Hbar(p) - V(0))] (or, between resonances in the large
// oscillation regime, by membership in the slope-average interval I_mu).
// Curves are assembled directly in the quasiconvex / small- / large-
// oscillation regimes, or through the surgery recursion: split at zero,
// carve at the top peak, combine the pieces, glue the halves.

#include <memory>
#include <string>
#include <vector>

#include "hjhom/common.hpp"
#include "hjhom/corrector.hpp"
#include "hjhom/hamiltonian.hpp"
#include "hjhom/potential.hpp"

namespace hjhom {

struct EffectiveOptions {
  double tol = 1e-9;           // ordering / snapping tolerance
  double invert_tol = 1e-12;   // bisection width target for implicit solves
  int sweep_points = 64;       // validation sweep density (large oscillation)
  double endpoint_tol = 1e-4;  // flat-endpoint resolution for that sweep
  int probe_points = 400;      // grid used by quasiconvex_on_grid
  CorrectorOptions corrector;  // forwarded to the cell decomposition
};

enum class SegmentKind { Flat, Implicit, Swept };

// One momentum piece of the curve.  Flat pieces carry a constant level.
// Implicit and swept pieces carry their defining relation against a source
// Hamiltonian/potential pair together with the shift bookkeeping of the
// recursion: with g the unshifted level, the curve value is Hbar(p) = g + dv
// where g solves
//   sign * p - dp = E[psi_branch(g - V(0))]        (Implicit)
//   sign * p - dp  is in  I_g                      (Swept)
struct CurveSegment {
  SegmentKind kind = SegmentKind::Flat;
  Interval span;  // momentum interval; tails use +-kInf
  double level = 0.0;
  HamiltonianPtr src;
  PotentialModelPtr model;
  BranchId branch;  // Implicit only
  int sign = 1;     // -1 after mirroring
  double dp = 0.0;
  double dv = 0.0;
  double v_lo = 0.0;  // curve value at span.lo (+-kInf on open tails)
  double v_hi = 0.0;  // curve value at span.hi
  CorrectorOptions copt;   // options the relation is solved with
  std::string provenance;  // construction tag, e.g. "small-osc flat m_1"
};

class EffectiveCurve {
 public:
  EffectiveCurve() = default;
  // Takes ownership of the segments, snaps adjacent spans together, and
  // checks the structural invariants (coverage of the whole line, value
  // continuity <= 1e-8 across boundaries, Hbar >= -1e-10 at the recorded
  // knot values).
  explicit EffectiveCurve(std::vector<CurveSegment> segs);

  double evaluate(double p) const;
  const std::vector<CurveSegment>& segments() const { return segs_; }
  const CurveSegment& segment_at(double p) const;

  // p -> Hbar(p - dp) + dv as a new curve.
  EffectiveCurve shifted(double dp, double dv) const;
  // p -> Hbar(-p) as a new curve.
  EffectiveCurve mirrored() const;

  // Largest |value mismatch| across interior segment boundaries.
  double max_boundary_mismatch() const;

  std::string to_json() const;

 private:
  struct Cache;
  std::vector<CurveSegment> segs_;
  std::shared_ptr<Cache> cache_;  // per-momentum memo, internally locked
};

// E[psi_j(mu - V(0))]: the branch average behind every implicit relation.
// Splits the quadrature at the crossings of interior section joints.
ExpectedValue branch_average(const PiecewiseMonotoneHamiltonian& H,
                             BranchId id, const PotentialModel& V, double mu,
                             const CorrectorOptions& opt = {});

// mu solving p = E[psi_j(mu - V(0))] by monotone bisection on the branch's
// admissible level range; residual <= 1e-10.  Throws "invert_range" when p
// is outside the invertible range.
double invert_branch_equation(const PiecewiseMonotoneHamiltonian& H,
                              BranchId id, const PotentialModel& V, double p,
                              const EffectiveOptions& opt = {});

// L = Lt = 0: left implicit branch for p <= q_{-1}, flat 0 on [q_{-1}, q_0],
// right implicit branch for p >= q_0, with q_{-1} = E[Psi(-V)] and
// q_0 = E[psi_1(-V)].
EffectiveCurve effective_quasiconvex(const HamiltonianPtr& H,
                                     const PotentialModelPtr& V,
                                     const EffectiveOptions& opt = {});

// Lt = 0 and mbar < min_k min{M_k - m_k, M_k - m_{k+1}} (with m_{L+1} = 0):
// the full alternating curve with flats at each m_k and each M_k - mbar and
// implicit branch segments between them.
EffectiveCurve effective_small_osc(const HamiltonianPtr& H,
                                   const PotentialModelPtr& V,
                                   const EffectiveOptions& opt = {});

// Lt = 0 and mbar >= max_{i,j} (M_i - m_j): quasi-convex output assembled
// from the slope-average intervals I_mu (flats at the resonant levels where
// the interval has positive width, swept fill between, monotone psi_1 tail
// beyond M_max, flat 0 and the left Psi branch attached below q_0).
EffectiveCurve effective_large_osc(const HamiltonianPtr& H,
                                   const PotentialModelPtr& V,
                                   const EffectiveOptions& opt = {});

// Pointwise minimum of the split-at-zero halves, re-segmented.
EffectiveCurve glue_minimum(const EffectiveCurve& plus,
                            const EffectiveCurve& minus);

// Carve combination for l > k (deep well outside the top peak): pointwise
// minimum of the two curves.
EffectiveCurve combine_left(const EffectiveCurve& c1, const EffectiveCurve& c2);

// Carve combination for l <= k: three-zone assembly
//   c1 on p <= 0,  min{c1, c2, peak_value - mbar} on [0, p_cut],  c2 beyond,
// where p_cut = p_{2l-1} is the carve's momentum shift.  Zone-boundary
// discontinuities beyond 1e-6 raise "combine_right_continuity".  Both curves
// must already live in the original (unshifted) coordinates.
EffectiveCurve combine_right(const EffectiveCurve& c1, const EffectiveCurve& c2,
                             double peak_value, double mbar, double p_cut);

// The full recursion on K = max(L, Lt): quasiconvex when K = 0, otherwise
// split at zero, reduce each half (large-oscillation construction when
// mbar >= gap, else carve and combine), and glue the halves.  Each carve
// strictly reduces the bump count; recursion depth is capped at
// 2 (L + Lt) + 2.
EffectiveCurve compute_effective(const HamiltonianPtr& H,
                                 const PotentialModelPtr& V,
                                 const EffectiveOptions& opt = {});

// No interior strict local maximum of the curve on an n-point grid over
// [lo, hi] (tolerance tol); the grid-level statement of quasi-convexity.
bool quasiconvex_on_grid(const EffectiveCurve& curve, double lo, double hi,
                         int n = 400, double tol = 1e-7);

}  // namespace hjhom
