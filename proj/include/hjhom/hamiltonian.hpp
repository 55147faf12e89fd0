#pragma once

// Piecewise-monotone coercive Hamiltonians on the line, normalized so that
// min H = H(0) = 0.  The momentum axis is cut at 0 into a right part and a
// left part; each part is an alternating chain of strictly monotone branches
// ending in a coercive tail.
//
// Right side: breakpoints p_1 > p_2 > ... > p_{2L+1} = 0.  Branch k lives on
// [p_k, p_{k-1}] (with p_0 = +inf); odd k increasing, even k decreasing.
// Well depths m_i = H(p_{2i-1}) and peak heights M_i = H(p_{2i}) are the
// interior critical values.  The left side mirrors this with breakpoints
// q_1 < ... < q_{2Lt+1} = 0 (branch 1 on (-inf, q_1], decreasing).
//
// Branch inverses: psi_k maps an energy in branch k's value range back to
// momentum; these are the building blocks of every corrector construction.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hjhom/common.hpp"

namespace hjhom {

enum class Side { Left, Right };

struct BranchId {
  Side side = Side::Right;
  int index = 1;  // 1-based, 1 = outermost (coercive tail branch)
};

// One strictly monotone section: either affine (exact) or a tabulated curve
// with monotone cubic (Fritsch-Carlson) interpolation.
struct Section {
  Interval dom;  // momentum interval; +-kInf for tails
  bool affine = true;
  double anchor_p = 0.0;  // affine: value = anchor_v + slope * (p - anchor_p)
  double anchor_v = 0.0;
  double slope = 0.0;
  std::vector<double> ps;  // table: strictly increasing momenta
  std::vector<double> vs;  // table: values, strictly monotone
  std::vector<double> ms;  // table: interpolation slopes (Fritsch-Carlson)

  double eval(double p) const;
  // Inverse on this section; v must lie in the section's value range.
  double inverse(double v) const;
  double value_lo() const;  // value at dom.lo (limit for infinite ends)
  double value_hi() const;
  double max_abs_slope() const;
  void prepare();  // fills ms for tables; validates monotonicity

  static Section make_affine(Interval dom, double anchor_p, double anchor_v,
                             double slope);
  static Section make_table(std::vector<double> ps, std::vector<double> vs);
};

// A maximal monotone branch: one or more sections glued continuously.
struct Branch {
  std::vector<Section> secs;  // ordered by momentum
  bool increasing = true;
  Interval dom;     // momentum span
  Interval values;  // value range [min, max]

  double eval(double p) const;
  double inverse(double v) const;  // v in values (clamped at tolerance)
  void finalize();
};

struct CriticalValues {
  // wells[i-1] = m_i, peaks[i-1] = M_i, i = 1..L (right side ordering:
  // m_1 belongs to the outermost well).
  std::vector<double> wells;
  std::vector<double> peaks;
  double min_well() const;  // min over wells; +inf when L = 0
  double max_peak() const;  // max over peaks; -inf when L = 0
  double gap() const {      // max_{i,j} (M_i - m_j); <= 0 means quasiconvex side
    return peaks.empty() ? -kInf : max_peak() - min_well();
  }
  std::size_t count() const { return wells.size(); }
};

class PiecewiseMonotoneHamiltonian;
using HamiltonianPtr = std::shared_ptr<const PiecewiseMonotoneHamiltonian>;

// Result of the normalization preprocess: the shift applied and any nudges
// used to separate coinciding critical values.
struct NormalizationRecord {
  double p_shift = 0.0;  // argmin subtracted from momentum
  double v_shift = 0.0;  // min value subtracted
  double probe_radius = 0.0;
  struct Nudge {
    Side side;
    int breakpoint_index;  // 1-based within the side
    double delta;
  };
  std::vector<Nudge> nudges;
};

struct NormalizationResult {
  HamiltonianPtr hamiltonian;
  NormalizationRecord record;
};

// Output of carving at an interior peak: the two single-sided pieces plus the
// bookkeeping needed to reassemble the effective Hamiltonian.
struct CarveResult {
  HamiltonianPtr h1;    // left piece, coercive tail added beyond p_{2k}
  HamiltonianPtr h2;    // right piece, renormalized to min 0 at 0
  int peak_index = 0;   // k: the max peak M_k = H(p_{2k})
  int well_index = 0;   // l: the deepest well (m_l = min well)
  bool right_steep = false;     // l <= k: clamp combination applies
  double carve_momentum = 0.0;  // p_{2k}
  double carve_value = 0.0;     // M_k
  double p_shift = 0.0;  // h2 satisfies h2(q) = H2(q + p_shift) - v_shift,
  double v_shift = 0.0;  // with (p_shift, v_shift) = (p_{2l-1}, m_l)
};

class PiecewiseMonotoneHamiltonian {
 public:
  // Branches ordered by momentum, already validated/alternating.  Use
  // from_json / builders below rather than this constructor where possible.
  PiecewiseMonotoneHamiltonian(std::vector<Branch> left,
                               std::vector<Branch> right);

  double evaluate(double p) const;

  // Number of interior wells per side.
  int right_well_count() const { return (int)(right_.size() - 1) / 2; }
  int left_well_count() const { return (int)(left_.size() - 1) / 2; }

  // Breakpoints: right_breakpoint(k) = p_k (k = 1..2L+1, descending in k);
  // left_breakpoint(k) = q_k (k = 1..2Lt+1, ascending in k, all <= 0).
  double right_breakpoint(int k) const;
  double left_breakpoint(int k) const;

  const Branch& branch(BranchId id) const;
  int branch_count(Side side) const {
    return (int)(side == Side::Right ? right_.size() : left_.size());
  }

  // psi_k(v) for the given branch; v must be inside the branch value range
  // (tolerance 1e-9 relative to the Lipschitz scale).
  double branch_inverse(BranchId id, double v) const;

  CriticalValues critical_values(Side side) const;

  double lipschitz_bound() const { return lipschitz_; }

  // Exact min and max of H over [a, b] (scans interior breakpoints; branch
  // monotonicity does the rest).
  RangeExtrema range_extrema(double a, double b) const;

  // H(-p) as a new Hamiltonian (left and right structures swap).
  HamiltonianPtr reflect() const;

  // H(p + dp) - dv as a new Hamiltonian.  The shifted function must still
  // satisfy the normalization (dp lands on the minimizer, dv on the min).
  HamiltonianPtr shift(double dp, double dv) const;

  // Quasiconvex on each side (no interior wells)?
  bool quasiconvex() const {
    return right_well_count() == 0 && left_well_count() == 0;
  }

  // Cuts H at 0 into two coercive single-sided Hamiltonians: first keeps the
  // right structure and falls back to an affine tail (slope C = 2 *
  // lipschitz_bound) for p <= 0; second mirrors that (left structure kept,
  // affine for p >= 0).  Both satisfy the normalization.
  std::pair<HamiltonianPtr, HamiltonianPtr> split_at_zero() const;

  // Carve a right-sided Hamiltonian (left_well_count() == 0) at the peak
  // attaining M_k = max peak.  Requires right_well_count() >= 1.
  CarveResult carve() const;

  std::string to_json() const;
  static HamiltonianPtr from_json(const std::string& text);

  // Builds the structure from a raw continuous function by sampling:
  // locates the minimum, shifts it to (0,0), detects monotone runs, tabulates
  // them, and nudges coinciding critical values apart by < tol.
  static NormalizationResult normalize(const std::function<double(double)>& f,
                                       double tol = 1e-9);

  // Total momentum span of the non-tail part, for grid sizing.
  Interval core_span() const;

 private:
  void finalize();

  std::vector<Branch> left_;   // index 0 = outermost left tail branch
  std::vector<Branch> right_;  // index 0 = outermost right tail branch
  double lipschitz_ = 0.0;
};

// Convenience fixtures used across tests and docs.

// W-shaped right side: H(p) = 3|p| for p <= 0, 3p on [0,1], 5-2p on [1,2],
// p-1 on [2,inf).  L = 1, breakpoints p_1 = 2, p_2 = 1, p_3 = 0, m_1 = 1,
// M_1 = 3.
HamiltonianPtr make_w_well_hamiltonian();

// |p|-shaped quasiconvex fixture with slope s on both sides.
HamiltonianPtr make_vee_hamiltonian(double slope_left, double slope_right);

}  // namespace hjhom
