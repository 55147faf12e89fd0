// Explicit monotone finite-difference evolution for the oscillatory problem
// u_t + H(u_x) + V(x/eps) = 0 and its homogenized limit u_t + Hbar(u_x) = 0.
// Both solvers march a Godunov flux under a CFL bound and pad the requested
// window by the propagation cone, so the reported values are unaffected by
// the boundary closure.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hjhom/effective.hpp"
#include "hjhom/hamiltonian.hpp"
#include "hjhom/potential.hpp"

namespace hjhom {

struct EvolutionOptions {
  double cfl = 0.45;       // dt * lip / h stays below this
  double table_dp = 1e-3;  // momentum table resolution for curve fluxes
  double pad_margin = 0.2; // extra padding beyond the propagation cone
};

struct EvolutionSolution {
  Interval window;         // requested window (values are exact here)
  Interval domain;         // padded window actually computed
  double h = 0.0;
  double dt = 0.0;         // nominal step (snapshots may take shorter ones)
  double T = 0.0;
  double epsilon = 0.0;    // 0 for a homogenized run
  long steps = 0;
  std::vector<double> values;  // u(x, T) on the padded grid
  std::vector<double> snapshot_times;
  std::vector<std::vector<double>> snapshots;  // u(x, t) per snapshot time

  double value_at(double x) const;  // linear interpolation at time T
  double snapshot_at(std::size_t k, double x) const;
};

// March u_t + H(u_x) + V(x/eps) = 0 from u(x, 0) = g(x) to time T.  `h` = 0
// picks eps/32; an explicit h must not exceed eps/32.  The potential path is
// one realization drawn with `seed` (ignored by deterministic models).
EvolutionSolution solve_oscillatory(const PiecewiseMonotoneHamiltonian& H,
                                    const PotentialModel& V, double eps,
                                    const std::function<double(double)>& g,
                                    double T, Interval window, double h = 0.0,
                                    uint64_t seed = 1,
                                    std::vector<double> snapshot_times = {},
                                    const EvolutionOptions& opt = {});

// March u_t + Hbar(u_x) = 0 with the flux read off an effective curve
// through a uniformly sampled momentum table.
EvolutionSolution solve_homogenized(const EffectiveCurve& curve,
                                    const std::function<double(double)>& g,
                                    double T, Interval window,
                                    double h = 1.0 / 256.0,
                                    std::vector<double> snapshot_times = {},
                                    const EvolutionOptions& opt = {});

struct ConvergenceRow {
  double eps = 0.0;
  double h = 0.0;
  double sup_error = 0.0;     // over the window and the sampled times
  double scheme_bound = 0.0;  // a priori O(sqrt(h)) discretization estimate
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;  // in the order of eps_list
  bool nonincreasing = false;        // sup errors non-increasing within 5%
  double reference_h = 0.0;
};

// Compare oscillatory solutions against the homogenized one over
// [-k, k] x [0, T] (times sampled at quarters of T).
ConvergenceReport convergence_report(const PiecewiseMonotoneHamiltonian& H,
                                     const PotentialModel& V,
                                     const EffectiveCurve& curve,
                                     const std::function<double(double)>& g,
                                     double T, double k,
                                     const std::vector<double>& eps_list,
                                     uint64_t seed = 1,
                                     const EvolutionOptions& opt = {});

}  // namespace hjhom
