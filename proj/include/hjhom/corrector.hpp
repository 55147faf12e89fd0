#pragma once

// Admissible slope fields f with H(f) + V = mu: interval decompositions of a
// period (or a long sampled window) at the junctions where mu - V crosses a
// critical value of H, branch selections on the intervals, viscosity checks
// at the junctions, and the machinery built on top of them: pointwise sup /
// inf selections, mass-connected components of the admissible class, the
// slope-average interval attached to mu, mass interpolation between fields,
// and the monotone / subsolution constructions used near p = 0.
//
// Branch selections live on the right side of H (f >= 0); left branches only
// enter through the reflected constructions (subsolution_at_zero).

#include <cstddef>
#include <string>
#include <vector>

#include "hjhom/common.hpp"
#include "hjhom/hamiltonian.hpp"
#include "hjhom/potential.hpp"

namespace hjhom {

// ---------------------------------------------------------------------------
// Decompositions

enum class JunctionKind {
  Up,     // mu - V increases through the critical value (left to right)
  Down,   // mu - V decreases through it
  Touch,  // tangential: an extremum of V meets the level exactly
};

struct Junction {
  double y = 0.0;       // position
  double energy = 0.0;  // mu - V(y), equal to the critical value met here
  bool is_peak = false; // true: energy = M_t, false: energy = m_t
  int crit_index = 0;   // t (1-based well/peak index)
  JunctionKind kind = JunctionKind::Up;
};

struct DecompInterval {
  Interval span;
  double e_lo = 0.0;  // inf of mu - V over the span
  double e_hi = 0.0;  // sup of mu - V over the span
  std::vector<int> feasible;  // right-branch indices whose value range
                              // contains [e_lo, e_hi]; ascending
};

// Cyclic (periodic model): intervals.size() == junctions.size() when there
// are junctions -- interval i runs from junction i to junction i+1 (the last
// one wraps); with no junctions a single interval covers the period.
// Non-cyclic (sampled window): intervals.size() == junctions.size() + 1 and
// the outermost interval ends are free boundaries.
struct Decomposition {
  double mu = 0.0;
  bool cyclic = false;
  double period = 0.0;
  Interval window;
  std::vector<Junction> junctions;
  std::vector<DecompInterval> intervals;
  std::string note;  // e.g. auto-mollification applied to a sampled path
};

// Options shared by the corrector entry points.
struct CorrectorOptions {
  double tol = 1e-9;          // junction / feasibility / touch tolerance
  int random_cells = 1000;    // window length (cells) for BlockRandom models
  std::size_t enum_cap = 2000000;  // give up enumerating beyond this many
  int quad_n = 64;            // Gauss nodes per run for expectations
};

// Junctions are the transversal crossings of V at the levels mu - m_t and
// mu - M_t inside (-mbar, 0), plus tangential touches where an extremum of V
// meets such a level exactly (within tol).  Pre: mu in the resonant window
// P = [0, inf) intersect (min m_t - mbar, max M_t).
Decomposition decompose(const PotentialModel& V, double mu,
                        const PiecewiseMonotoneHamiltonian& H,
                        const CorrectorOptions& opt = {});
Decomposition decompose(const PotentialPath& path, double mu,
                        const PiecewiseMonotoneHamiltonian& H,
                        const CorrectorOptions& opt = {});

// Viscosity test for a jump of f at a point a with potential value V_at_a:
// downward jumps (f_left > f_right) need max H <= mu - V(a) + tol over the
// jump interval (subsolution side), upward jumps need min H >= mu - V(a) -
// tol (supersolution side).  Equal limits pass trivially.
bool junction_admissible(const PiecewiseMonotoneHamiltonian& H, double V_at_a,
                         double mu, double f_left, double f_right,
                         double tol = 1e-9);

// ---------------------------------------------------------------------------
// Selections

struct AdmissibleSelection {
  Decomposition decomp;
  std::vector<int> branch;  // right-branch index per interval
  double mu = 0.0;
};

// Per-interval achievable branch sets: branches that appear in at least one
// fully admissible selection (cyclic closure enforced for periodic models).
std::vector<std::vector<int>> achievable_branches(
    const PiecewiseMonotoneHamiltonian& H, const Decomposition& d,
    const CorrectorOptions& opt = {});

// All admissible selections, ascending-lexicographic; throws when the raw
// product of feasible-set sizes exceeds opt.enum_cap.
std::vector<std::vector<int>> enumerate_admissible(
    const PiecewiseMonotoneHamiltonian& H, const Decomposition& d,
    const CorrectorOptions& opt = {});

// Pointwise sup / inf admissible selections (lowest / highest achievable
// branch index per interval; branch order is pointwise order).  The result
// is itself admissible -- verified, not assumed.
AdmissibleSelection sup_admissible(const PiecewiseMonotoneHamiltonian& H,
                                   const PotentialModel& V, double mu,
                                   const CorrectorOptions& opt = {});
AdmissibleSelection inf_admissible(const PiecewiseMonotoneHamiltonian& H,
                                   const PotentialModel& V, double mu,
                                   const CorrectorOptions& opt = {});
AdmissibleSelection sup_admissible(const PiecewiseMonotoneHamiltonian& H,
                                   const PotentialPath& path, double mu,
                                   const CorrectorOptions& opt = {});
AdmissibleSelection inf_admissible(const PiecewiseMonotoneHamiltonian& H,
                                   const PotentialPath& path, double mu,
                                   const CorrectorOptions& opt = {});

// ---------------------------------------------------------------------------
// Slope fields

// A slope field is a finite union of runs.  On each run
//   f(y) = weight * psi_a(mu - V(y)) + (1 - weight) * psi_b(mu - V(y)),
// with weight = 1 for a pure branch run.  Runs tile the window.
struct SlopeRun {
  Interval span;
  BranchId a{Side::Right, 1};
  double weight = 1.0;
  BranchId b{Side::Right, 1};
};

struct SlopeField {
  double mu = 0.0;
  Interval window;
  bool periodic = false;
  double period = 0.0;
  std::vector<SlopeRun> runs;
  std::string provenance;

  double eval(const PiecewiseMonotoneHamiltonian& H, const PotentialModel& V,
              double y) const;
  double eval(const PiecewiseMonotoneHamiltonian& H, const PotentialPath& V,
              double y) const;
};

// Selection -> field (one run per interval).
SlopeField selection_field(const AdmissibleSelection& sel);

// Period average (periodic) or window average with a block standard error
// (sampled windows / BlockRandom).
ExpectedValue expected_slope(const SlopeField& f,
                             const PiecewiseMonotoneHamiltonian& H,
                             const PotentialModel& V,
                             const CorrectorOptions& opt = {});
ExpectedValue expected_slope(const AdmissibleSelection& sel,
                             const PiecewiseMonotoneHamiltonian& H,
                             const PotentialModel& V,
                             const CorrectorOptions& opt = {});
ExpectedValue expected_slope(const SlopeField& f,
                             const PiecewiseMonotoneHamiltonian& H,
                             const PotentialPath& path);

// CSV export "y,f" on a uniform n-grid over the window.
std::string slope_field_csv(const SlopeField& f,
                            const PiecewiseMonotoneHamiltonian& H,
                            const PotentialModel& V, int n = 1024);

// ---------------------------------------------------------------------------
// Components and the slope-average interval

// Selections connected by continuous mass deformation (sliding a single
// switch across one interval at a time).  e_range is the closed span of
// expected slopes over the component.
struct ComponentInfo {
  std::vector<std::size_t> members;  // indices into the selection list
  Interval e_range;
};

std::vector<ComponentInfo> components(
    const PiecewiseMonotoneHamiltonian& H, const PotentialModel& V,
    const Decomposition& d, const std::vector<std::vector<int>>& selections,
    const CorrectorOptions& opt = {});

struct FlatIntervalResult {
  Interval span;       // the slope-average interval (possibly a point)
  double mu = 0.0;     // after resonance snapping
  bool resonant = false;
  bool is_point = false;
  std::size_t component_count = 0;
};

// The slope-average interval at level mu: [E inf, E sup] over the widest
// mass-connected component (resonant mu within tol of a critical offset is
// snapped first); outside the resonant window P the interval degenerates to
// the single feasible outer/inner branch average.
FlatIntervalResult flat_interval(const PiecewiseMonotoneHamiltonian& H,
                                 const PotentialModel& V, double mu,
                                 const CorrectorOptions& opt = {});

// ---------------------------------------------------------------------------
// Interpolation and transition fields

// Mass interpolation on I between two fields that agree outside I and are
// single branches j1 <= j2 on it: returns a field equal to f1 outside I with
// integral c over I, built from runs of the chain j1..j2 with admissible
// switches (well pairs switch down anywhere, peak pairs pinned at the
// top-energy end, and symmetrically).  c must lie between the two masses.
SlopeField interpolate(const PiecewiseMonotoneHamiltonian& H,
                       const PotentialModel& V, const SlopeField& f1,
                       const SlopeField& f2, Interval I, double c,
                       const CorrectorOptions& opt = {});

// The transition family f_{mu,t}: per-interval mass targets
// d_i(t) = t * (sup mass) + (1 - t) * (inf mass), realized by interpolate;
// E[f_{mu,t}] is affine in t between the ends of the flat interval spanned
// by the sup/inf component.
SlopeField transition_slope(const PiecewiseMonotoneHamiltonian& H,
                            const PotentialModel& V, double mu, double t,
                            const CorrectorOptions& opt = {});

// ---------------------------------------------------------------------------
// Verification

enum class VerifyMode { Solution, Subsolution };

struct JunctionRecord {
  double y = 0.0;
  double f_left = 0.0;
  double f_right = 0.0;
  std::string kind;  // "continuous", "down", "up"
  double level = 0.0;       // mu - V(y)
  double h_min = 0.0;       // extrema of H over the jump interval
  double h_max = 0.0;
  bool admissible = true;
};

struct VerifyReport {
  bool pass = false;
  double max_residual = 0.0;  // max |H(f)+V-mu| over run interiors
                              // (Subsolution: max positive part)
  double tol = 0.0;
  std::vector<JunctionRecord> junctions;
  std::string to_json() const;
};

VerifyReport verify_metric_solution(const SlopeField& f,
                                    const PiecewiseMonotoneHamiltonian& H,
                                    const PotentialModel& V, double mu,
                                    double tol = 1e-8,
                                    VerifyMode mode = VerifyMode::Solution);
VerifyReport verify_metric_solution(const SlopeField& f,
                                    const PiecewiseMonotoneHamiltonian& H,
                                    const PotentialPath& path, double mu,
                                    double tol = 1e-8,
                                    VerifyMode mode = VerifyMode::Solution);

// ---------------------------------------------------------------------------
// Monotone solutions and the subsolution family at zero

// A nonnegative slope field with H(f) + V = mu (the inf selection; outside
// the resonant window the unique feasible outer/inner branch).
SlopeField monotone_solution(const PiecewiseMonotoneHamiltonian& H,
                             const PotentialModel& V, double mu,
                             const CorrectorOptions& opt = {});
SlopeField monotone_solution(const PiecewiseMonotoneHamiltonian& H,
                             const PotentialPath& path, double mu,
                             const CorrectorOptions& opt = {});

// q_{-1} = E[left monotone solution at mu = 0] and q_0 = E[right one].
std::pair<ExpectedValue, ExpectedValue> zero_slope_bounds(
    const PiecewiseMonotoneHamiltonian& H, const PotentialModel& V,
    const CorrectorOptions& opt = {});

// Stationary field with E[f] = p in [q_{-1}, q_0] whose antiderivative is a
// viscosity subsolution of H(u') + V = delta, 0 < delta < min(mbar, m_1)/2:
// a pointwise blend of the left and right mu = 0 monotone solutions where
// the blend stays below level delta, with pinned down-jumps near the deep
// potential minima otherwise.
SlopeField subsolution_at_zero(const PiecewiseMonotoneHamiltonian& H,
                               const PotentialModel& V, double p, double delta,
                               const CorrectorOptions& opt = {});

}  // namespace hjhom
