#pragma once

// Independent numerical oracle for the effective Hamiltonian: solve the
// discounted cell problem
//
//     lambda v + H(p + v') + V(y) = 0
//
// with a Godunov monotone discretization and estimate
// Hbar(p) = -lim_{lambda -> 0} lambda v_lambda(0, p) by Richardson
// extrapolation over a decreasing discount sequence.

#include <vector>

#include "hjhom/common.hpp"
#include "hjhom/hamiltonian.hpp"
#include "hjhom/potential.hpp"

namespace hjhom {

struct CellSolution {
  double momentum = 0.0;
  double discount = 0.0;  // lambda
  Interval domain;        // grid window
  double h = 0.0;         // grid step (domain.width() / cells; periodic
                          // solves store one node per cell)
  bool periodic = false;  // periodic wrap vs one-sided window boundaries
  std::vector<double> values;  // v_lambda at the grid nodes
  double estimate = 0.0;       // -lambda v_lambda(0), formed in level-split
                               // arithmetic (no large-number cancellation)
  double residual = 0.0;       // final sup-norm of the scheme residual
  long iterations = 0;         // sweep-equivalents performed

  // Linear interpolation (clamped at the window ends).
  double value_at(double y) const;
};

struct CellOptions {
  double tol = 1e-7;        // residual target for the fixed point; by the
                            // comparison argument a residual r perturbs the
                            // estimate by at most r, so this is far inside
                            // the certification tolerances
  long max_sweeps = 400000; // hard cap on sweep-equivalents
  uint64_t seed = 1;        // path realization seed for random models
};

// Solve the discounted problem on the sampled potential path.  `h` is the
// solver grid step (the path is interpolated); `periodic` wraps the window
// (which must then span an integer number of periods), otherwise one-sided
// differences close the boundary.  `warm` optionally seeds the iteration.
CellSolution solve_discounted(const PiecewiseMonotoneHamiltonian& H,
                              const PotentialPath& path, double p,
                              double lambda, double h, double tol,
                              bool periodic,
                              const CellSolution* warm = nullptr,
                              long max_sweeps = 400000);

struct HbarEstimate {
  double value = 0.0;      // extrapolated Hbar(p)
  double error_bar = 0.0;  // last-two-lambda deviation + truncation bound
  std::vector<double> lambdas;
  std::vector<double> raw;        // -lambda v_lambda(0) per lambda
  std::vector<double> residuals;  // final residual per solve
};

// Discount-sequence driver.  Empty `lambda_sequence` selects the default:
// {1e-2, 3e-3, 1e-3} for periodic models, {1e-1, 3e-2} for random windows.
// `h` = 0 selects the rule min(period/512, lambda/10).
HbarEstimate estimate_Hbar(const PiecewiseMonotoneHamiltonian& H,
                           const PotentialModel& V, double p,
                           std::vector<double> lambda_sequence = {},
                           double h = 0.0, const CellOptions& opt = {});

// Comparison-lemma truncation bound (C/R) sqrt(y^2 + 1) + C^2 / R for
// window-truncated solves.
double truncation_error_bound(double C, double R, double y);

}  // namespace hjhom
