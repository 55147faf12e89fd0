#include "hjhom/cell_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

namespace hjhom {

double CellSolution::value_at(double y) const {
  if (values.empty()) return 0.0;
  double t = (y - domain.lo) / h;
  if (t <= 0.0) return values.front();
  auto n = static_cast<std::ptrdiff_t>(values.size());
  if (t >= static_cast<double>(n - 1)) return values.back();
  auto i = static_cast<std::ptrdiff_t>(t);
  double w = t - static_cast<double>(i);
  return (1.0 - w) * values[i] + w * values[i + 1];
}

double truncation_error_bound(double C, double R, double y) {
  require(R > 0.0, "truncation_bound", "window radius must be positive");
  return (C / R) * std::sqrt(y * y + 1.0) + C * C / R;
}

namespace {

// Tridiagonal solve (Thomas); diagonally dominant by construction.
void solve_tridiag(std::vector<double>& lo, std::vector<double>& di,
                   std::vector<double>& up, std::vector<double>& rhs) {
  std::size_t n = di.size();
  for (std::size_t i = 1; i < n; ++i) {
    double w = lo[i] / di[i - 1];
    di[i] -= w * up[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[n - 1] /= di[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    rhs[i] = (rhs[i] - up[i] * rhs[i + 1]) / di[i];
  }
}

// Cyclic tridiagonal solve via the Sherman-Morrison rank-one correction;
// `alpha` is the (0, n-1) corner, `beta` the (n-1, 0) corner.
void solve_cyclic(std::vector<double> lo, std::vector<double> di,
                  std::vector<double> up, double alpha, double beta,
                  std::vector<double>& rhs) {
  std::size_t n = di.size();
  double gamma = -di[0];
  std::vector<double> d2 = di;
  d2[0] -= gamma;
  d2[n - 1] -= alpha * beta / gamma;
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = beta;
  std::vector<double> y = rhs, z = u;
  {
    std::vector<double> l1 = lo, dd = d2, u1 = up;
    solve_tridiag(l1, dd, u1, y);
  }
  {
    std::vector<double> l1 = lo, dd = d2, u1 = up;
    solve_tridiag(l1, dd, u1, z);
  }
  double vy = y[0] + (alpha / gamma) * y[n - 1];
  double vz = z[0] + (alpha / gamma) * z[n - 1];
  double f = vy / (1.0 + vz);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = y[i] - f * z[i];
}

}  // namespace

CellSolution solve_discounted(const PiecewiseMonotoneHamiltonian& H,
                              const PotentialPath& path, double p,
                              double lambda, double h, double tol,
                              bool periodic, const CellSolution* warm,
                              long max_sweeps) {
  require(lambda > 0.0 && lambda <= 1.0, "cell_discount",
          "discount must lie in (0, 1]");
  require(h > 0.0 && h < path.window.width(), "cell_grid",
          "grid step must resolve the window");

  CellSolution sol;
  sol.momentum = p;
  sol.discount = lambda;
  sol.periodic = periodic;
  // Periodic solves keep one node per cell (the right end wraps to node 0);
  // window solves keep both ends, with an even cell count so y = 0 is a node.
  long cells = std::max<long>(2, std::lround(path.window.width() / h));
  if (!periodic && (cells & 1) != 0) ++cells;
  long n = periodic ? cells : cells + 1;
  sol.h = path.window.width() / static_cast<double>(cells);
  sol.domain = path.window;

  std::vector<double> pot(n);
  for (long i = 0; i < n; ++i) {
    pot[i] = path.value_at(path.window.lo + sol.h * static_cast<double>(i));
  }

  // Level split v = u - c / lambda: u carries the O(1) oscillation, the
  // scalar c the O(1/lambda) level.  Differencing v directly would push the
  // achievable residual floor to (lip/h) ulp(|v|), far above tol for small
  // discounts.
  std::vector<double> u(n, 0.0);
  double c = 0.0;
  if (warm != nullptr && !warm->values.empty()) {
    double w0 = warm->value_at(0.0);
    c = warm->estimate;
    for (long i = 0; i < n; ++i) {
      double y = path.window.lo + sol.h * static_cast<double>(i);
      u[i] = warm->value_at(y) - w0;
    }
  }

  const double inv_h = 1.0 / sol.h;
  // Godunov flux for q -> H(q): min over the upwind momentum interval when
  // the slopes open upward, max when they open downward.
  auto flux = [&](double a, double b) {
    if (a <= b) return H.range_extrema(p + a, p + b).min_value;
    return H.range_extrema(p + b, p + a).max_value;
  };
  auto slopes = [&](long i, double x, double vm, double vp, double& a,
                    double& b) {
    a = (x - vm) * inv_h;
    b = (vp - x) * inv_h;
    if (!periodic) {
      // Flat-extension ghosts keep the per-node equation monotone in x.
      if (i == 0) a = 0.0;
      if (i + 1 == n) b = 0.0;
    }
  };
  auto neighbors = [&](long i, double& vm, double& vp) {
    vm = i > 0 ? u[i - 1] : (periodic ? u[n - 1] : u[0]);
    vp = i + 1 < n ? u[i + 1] : (periodic ? u[0] : u[n - 1]);
  };
  auto node_residual = [&](long i, double x, double vm, double vp) {
    double a, b;
    slopes(i, x, vm, vp, a, b);
    return lambda * x + flux(a, b) + pot[i] - c;
  };

  const double inner_tol = 0.1 * tol;
  // Local solve: root of the strictly increasing x -> g(x) by false position
  // (g is piecewise affine, so this terminates in a few steps).  Moves are
  // capped at O(1): the mean shift owns the level, so a node only ever needs
  // an oscillation-scale correction, and the uncapped root (as far as r/λ
  // away with frozen neighbors) would poison the neighbor slopes.
  auto gs_update = [&](long i) {
    double vm, vp;
    neighbors(i, vm, vp);
    double x0 = u[i];
    double r0 = node_residual(i, x0, vm, vp);
    if (std::abs(r0) <= inner_tol) return;
    const double cap = 1.0;
    double lo, hi, rlo, rhi;
    if (r0 > 0.0) {
      lo = x0 - std::min(cap, r0 / lambda);
      hi = x0;
      rlo = node_residual(i, lo, vm, vp);
      rhi = r0;
      if (rlo >= 0.0) {
        u[i] = lo;
        return;
      }
    } else {
      lo = x0;
      hi = x0 + std::min(cap, -r0 / lambda);
      rlo = r0;
      rhi = node_residual(i, hi, vm, vp);
      if (rhi <= 0.0) {
        u[i] = hi;
        return;
      }
    }
    int side = 0;
    for (int it = 0; it < 100; ++it) {
      double x = (lo * rhi - hi * rlo) / (rhi - rlo);
      if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
      double r = node_residual(i, x, vm, vp);
      if (std::abs(r) <= inner_tol || hi - lo <= 1e-15 * (1.0 + std::abs(x))) {
        u[i] = x;
        return;
      }
      if (r < 0.0) {
        lo = x;
        rlo = r;
        if (side < 0) rhi *= 0.5;
        side = -1;
      } else {
        hi = x;
        rhi = r;
        if (side > 0) rlo *= 0.5;
        side = 1;
      }
    }
    u[i] = 0.5 * (lo + hi);
  };

  std::vector<double> F(n);
  auto assemble_residual = [&](const std::vector<double>& x, double& sup,
                               double& mean) {
    sup = 0.0;
    mean = 0.0;
    for (long i = 0; i < n; ++i) {
      double vm = i > 0 ? x[i - 1] : (periodic ? x[n - 1] : x[0]);
      double vp = i + 1 < n ? x[i + 1] : (periodic ? x[0] : x[n - 1]);
      double a, b;
      slopes(i, x[i], vm, vp, a, b);
      F[i] = lambda * x[i] + flux(a, b) + pot[i] - c;
      sup = std::max(sup, std::abs(F[i]));
      mean += F[i];
    }
    mean /= static_cast<double>(n);
  };

  double sup = kInf, mean = 0.0;
  long work = 0;  // sweep-equivalents, bounded by max_sweeps
  std::vector<double> history;
  auto note = [&](double r) {
    if (history.size() < 64) history.push_back(r);
  };
  auto shift_mean = [&]() {
    if (std::abs(mean) > 1e-3 * tol) {
      c += mean;  // changes every residual by exactly -mean
      assemble_residual(u, sup, mean);
    }
  };

  // Semismooth Newton on the tridiagonal (cyclic when periodic) system is
  // the primary driver; capped Gauss-Seidel passes re-seat the upwind
  // pattern when a Newton step fails to decrease the residual, and the mean
  // shift keeps the level mode exact throughout.
  std::vector<double> jlo(n), jdi(n), jup(n), step(n), trial(n);
  assemble_residual(u, sup, mean);
  shift_mean();
  note(sup);
  while (sup > tol && work < max_sweeps) {
    bool accepted = false;
    {
      ++work;
      double alpha = 0.0, beta = 0.0;
      for (long i = 0; i < n; ++i) {
        double vm, vp;
        neighbors(i, vm, vp);
        double a, b;
        slopes(i, u[i], vm, vp, a, b);
        double da = std::max(1e-7, 1e-7 * std::abs(a));
        double db = std::max(1e-7, 1e-7 * std::abs(b));
        double f0 = flux(a, b);
        double fa = (flux(a + da, b) - f0) / da;
        double fb = (flux(a, b + db) - f0) / db;
        fa = std::max(fa, 0.0);
        fb = std::min(fb, 0.0);
        if (!periodic && i == 0) fa = 0.0;
        if (!periodic && i + 1 == n) fb = 0.0;
        jlo[i] = -fa * inv_h;
        jup[i] = fb * inv_h;
        jdi[i] = lambda + (fa - fb) * inv_h;
        step[i] = -F[i];
      }
      if (periodic) {
        alpha = jlo[0];  // row 0 couples to u[n-1]
        beta = jup[n - 1];
        jlo[0] = 0.0;
        jup[n - 1] = 0.0;
        solve_cyclic(jlo, jdi, jup, alpha, beta, step);
      } else {
        jlo[0] = 0.0;
        jup[n - 1] = 0.0;
        solve_tridiag(jlo, jdi, jup, step);
      }
      // The linearization predicts residual (1 - t) sup, so demand a real
      // fraction of that decrease or treat the step as a stall.
      double t = 1.0;
      for (int ls = 0; ls < 8; ++ls, t *= 0.5) {
        for (long i = 0; i < n; ++i) trial[i] = u[i] + t * step[i];
        double s2, m2;
        assemble_residual(trial, s2, m2);
        if (s2 <= (1.0 - 0.2 * t) * sup) {
          u.swap(trial);
          sup = s2;
          mean = m2;
          accepted = true;
          break;
        }
      }
    }
    if (accepted) {
      shift_mean();
    } else {
      // Stall: the active pattern is wrong somewhere.  Capped local solves
      // move the state toward the correct pattern without the huge r/lambda
      // jumps a frozen-neighbor root would take.
      assemble_residual(u, sup, mean);
      for (int s = 0; s < 2 && work < max_sweeps; ++s, ++work) {
        for (long i = 0; i < n; ++i) gs_update(i);
        for (long i = n; i-- > 0;) gs_update(i);
      }
      assemble_residual(u, sup, mean);
      shift_mean();
    }
    note(sup);
  }

  sol.residual = sup;
  sol.iterations = work;
  if (sup > tol) {
    std::string msg = "discounted solve stalled above its residual target;"
                      " sup-residual history:";
    char buf[32];
    for (double r : history) {
      std::snprintf(buf, sizeof buf, " %.3e", r);
      msg += buf;
    }
    throw InvariantError("cell_convergence", msg);
  }

  // Reconstruct v = u - c/lambda for the stored field; the y = 0 estimate is
  // exposed separately in level-split form to avoid the cancellation.
  long i0 = periodic ? 0 : cells / 2;
  sol.estimate = c - lambda * u[i0];
  sol.values.resize(n);
  double shift = c / lambda;
  for (long i = 0; i < n; ++i) sol.values[i] = u[i] - shift;

  // Discrete counterpart of lambda ||v|| <= H(p) + mbar.
  double lvmax = 0.0;
  for (double ui : u) lvmax = std::max(lvmax, std::abs(lambda * ui - c));
  require(lvmax <= H.evaluate(p) + path.mbar + 1e-6, "cell_bound",
          "discounted solution exceeds the comparison bound");
  return sol;
}

HbarEstimate estimate_Hbar(const PiecewiseMonotoneHamiltonian& H,
                           const PotentialModel& V, double p,
                           std::vector<double> lambda_sequence, double h,
                           const CellOptions& opt) {
  if (lambda_sequence.empty()) {
    lambda_sequence = V.periodic() ? std::vector<double>{1e-2, 3e-3, 1e-3}
                                   : std::vector<double>{1e-1, 3e-2};
  }
  for (std::size_t i = 0; i + 1 < lambda_sequence.size(); ++i) {
    require(lambda_sequence[i] > lambda_sequence[i + 1], "cell_sequence",
            "discount sequence must decrease");
  }
  require(lambda_sequence.back() >= 1e-4, "cell_sequence",
          "discounts below 1e-4 are not resolvable at desk scale");

  const double C = H.evaluate(p) + V.oscillation();
  HbarEstimate est;
  CellSolution prev;
  double window_radius = 0.0;
  for (double lambda : lambda_sequence) {
    double step = h > 0.0 ? h : std::min(1.0 / 512.0, lambda / 10.0);
    PotentialPath path;
    bool periodic = V.periodic();
    if (periodic) {
      // The sampled extrema can miss the true range by O(mbar h^2) when the
      // grid does not land on the extremal points.
      double range_tol =
          std::max(1e-9, 5.0 * V.oscillation() * step * step);
      path = V.sample_path(opt.seed, {0.0, 1.0}, step, range_tol);
    } else {
      double R = 10.0 * C / std::max(1.0, std::abs(p));
      window_radius = R / lambda;
      path = V.sample_path(opt.seed, {-window_radius, window_radius}, step,
                           0.5);
    }
    CellSolution sol =
        solve_discounted(H, path, p, lambda, step, opt.tol, periodic,
                         prev.values.empty() ? nullptr : &prev,
                         opt.max_sweeps);
    est.lambdas.push_back(lambda);
    est.raw.push_back(sol.estimate);
    est.residuals.push_back(sol.residual);
    prev = std::move(sol);
  }

  std::size_t m = est.raw.size();
  if (m >= 2) {
    double l0 = est.lambdas[m - 2], l1 = est.lambdas[m - 1];
    double r0 = est.raw[m - 2], r1 = est.raw[m - 1];
    est.value = (l0 * r1 - l1 * r0) / (l0 - l1);  // linear in lambda -> 0
    est.error_bar = std::abs(r1 - r0);
  } else {
    est.value = est.raw.back();
    est.error_bar = est.lambdas.back() * (C + 1.0);
  }
  if (!V.periodic()) {
    est.error_bar += truncation_error_bound(C, window_radius, 0.0);
  }
  require(est.value >= -1e-3, "lower_bound",
          "effective estimate dipped below zero beyond tolerance");
  return est;
}

}  // namespace hjhom
