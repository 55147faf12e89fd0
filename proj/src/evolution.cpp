#include "hjhom/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace hjhom {

namespace {

double interp_on(const std::vector<double>& vals, const Interval& dom,
                 double h, double x) {
  if (vals.empty()) return 0.0;
  double t = (x - dom.lo) / h;
  if (t <= 0.0) return vals.front();
  auto n = static_cast<std::ptrdiff_t>(vals.size());
  if (t >= static_cast<double>(n - 1)) return vals.back();
  auto i = static_cast<std::ptrdiff_t>(t);
  double w = t - static_cast<double>(i);
  return (1.0 - w) * vals[i] + w * vals[i + 1];
}

// Shared explicit march with flat-extension ghosts.  `flux(a, b)` is the
// monotone numerical Hamiltonian (nondecreasing in a, nonincreasing in b);
// `source` is the frozen zeroth-order term per node.
void march(std::vector<double>& u, const std::vector<double>& source,
           const std::function<double(double, double)>& flux, double inv_h,
           double dt_nominal, double T,
           const std::vector<double>& snapshot_times,
           std::vector<std::vector<double>>& snapshots, long& steps) {
  std::size_t n = u.size();
  std::vector<double> next(n);
  std::size_t ev = 0;
  double t = 0.0;
  while (t < T - 1e-14) {
    double target = T;
    if (ev < snapshot_times.size()) target = snapshot_times[ev];
    double dt = std::min(dt_nominal, target - t);
    if (dt > 1e-15) {
      for (std::size_t i = 0; i < n; ++i) {
        double a = i > 0 ? (u[i] - u[i - 1]) * inv_h : 0.0;
        double b = i + 1 < n ? (u[i + 1] - u[i]) * inv_h : 0.0;
        next[i] = u[i] - dt * (flux(a, b) + source[i]);
      }
      u.swap(next);
      ++steps;
      t += dt;
    }
    if (ev < snapshot_times.size() && t >= snapshot_times[ev] - 1e-12) {
      snapshots.push_back(u);
      ++ev;
    }
  }
  while (ev < snapshot_times.size()) {  // times equal to T
    snapshots.push_back(u);
    ++ev;
  }
}

void check_snapshot_times(const std::vector<double>& ts, double T) {
  for (std::size_t i = 0; i < ts.size(); ++i) {
    require(ts[i] > 0.0 && ts[i] <= T + 1e-12, "evolution_snapshot",
            "snapshot times must lie in (0, T]");
    if (i > 0) {
      require(ts[i] > ts[i - 1], "evolution_snapshot",
              "snapshot times must increase");
    }
  }
}

double grid_lipschitz(const std::vector<double>& vals, double inv_h) {
  double lip = 0.0;
  for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
    lip = std::max(lip, std::abs(vals[i + 1] - vals[i]) * inv_h);
  }
  return lip;
}

// Range min/max over a uniformly sampled momentum table in O(1) per query.
class SampledFlux {
 public:
  SampledFlux(std::vector<double> vals, double p_lo, double dp)
      : vals_(std::move(vals)), p_lo_(p_lo), inv_dp_(1.0 / dp) {
    std::size_t n = vals_.size();
    levels_ = 1;
    while ((std::size_t{1} << levels_) <= n) ++levels_;
    mins_.assign(levels_, vals_);
    maxs_.assign(levels_, vals_);
    for (std::size_t l = 1; l < levels_; ++l) {
      std::size_t half = std::size_t{1} << (l - 1);
      for (std::size_t i = 0; i + (std::size_t{1} << l) <= n; ++i) {
        mins_[l][i] = std::min(mins_[l - 1][i], mins_[l - 1][i + half]);
        maxs_[l][i] = std::max(maxs_[l - 1][i], maxs_[l - 1][i + half]);
      }
    }
  }

  double table_lipschitz() const {
    return grid_lipschitz(vals_, inv_dp_);
  }

  double interp(double p) const {
    return interp_on(vals_, {p_lo_, p_lo_ + (vals_.size() - 1) / inv_dp_},
                     1.0 / inv_dp_, p);
  }

  // Godunov flux: min over [a, b] when a <= b, max over [b, a] otherwise.
  double operator()(double a, double b) const {
    double lo = std::min(a, b), hi = std::max(a, b);
    bool want_min = a <= b;
    double at_lo = interp(lo), at_hi = interp(hi);
    double best = want_min ? std::min(at_lo, at_hi) : std::max(at_lo, at_hi);
    double tl = (lo - p_lo_) * inv_dp_, th = (hi - p_lo_) * inv_dp_;
    long jlo = static_cast<long>(std::ceil(tl - 1e-12));
    long jhi = static_cast<long>(std::floor(th + 1e-12));
    jlo = std::max(jlo, 0L);
    jhi = std::min(jhi, static_cast<long>(vals_.size()) - 1);
    if (jlo <= jhi) {
      auto len = static_cast<std::size_t>(jhi - jlo + 1);
      std::size_t l = 0;
      while ((std::size_t{2} << l) <= len) ++l;
      auto i = static_cast<std::size_t>(jlo);
      auto j = static_cast<std::size_t>(jhi) + 1 - (std::size_t{1} << l);
      if (want_min) {
        best = std::min({best, mins_[l][i], mins_[l][j]});
      } else {
        best = std::max({best, maxs_[l][i], maxs_[l][j]});
      }
    }
    return best;
  }

 private:
  std::vector<double> vals_;
  double p_lo_;
  double inv_dp_;
  std::size_t levels_;
  std::vector<std::vector<double>> mins_, maxs_;
};

}  // namespace

double EvolutionSolution::value_at(double x) const {
  return interp_on(values, domain, h, x);
}

double EvolutionSolution::snapshot_at(std::size_t k, double x) const {
  require(k < snapshots.size(), "evolution_snapshot",
          "snapshot index out of range");
  return interp_on(snapshots[k], domain, h, x);
}

EvolutionSolution solve_oscillatory(const PiecewiseMonotoneHamiltonian& H,
                                    const PotentialModel& V, double eps,
                                    const std::function<double(double)>& g,
                                    double T, Interval window, double h,
                                    uint64_t seed,
                                    std::vector<double> snapshot_times,
                                    const EvolutionOptions& opt) {
  require(eps > 0.0 && eps <= 1.0, "evolution_grid",
          "oscillation scale must lie in (0, 1]");
  require(T > 0.0 && window.width() > 0.0, "evolution_grid",
          "need a positive horizon and a nonempty window");
  if (h <= 0.0) h = eps / 32.0;
  require(h <= eps / 32.0 + 1e-12, "evolution_grid",
          "grid must resolve the oscillation: h <= eps / 32");
  check_snapshot_times(snapshot_times, T);

  const double lip = H.lipschitz_bound();
  EvolutionSolution sol;
  sol.window = window;
  sol.epsilon = eps;
  sol.T = T;

  double pad = lip * T + opt.pad_margin;
  long cells = static_cast<long>(std::ceil((window.width() + 2.0 * pad) / h));
  sol.h = h;
  sol.domain = {window.lo - pad, window.lo - pad + h * cells};
  long n = cells + 1;

  std::vector<double> u(n), xs(n);
  for (long i = 0; i < n; ++i) {
    xs[i] = sol.domain.lo + h * i;
    u[i] = g(xs[i]);
  }
  double g_max = 0.0;
  for (double v : u) g_max = std::max(g_max, std::abs(v));

  // One path realization covering the rescaled window; the wide window makes
  // the range requirement trivial for every model.
  PotentialPath path = V.sample_path(
      seed, {sol.domain.lo / eps - 1.0, sol.domain.hi / eps + 1.0},
      std::min(1.0 / 128.0, h / eps / 4.0), 0.5);
  std::vector<double> source(n);
  for (long i = 0; i < n; ++i) source[i] = path.value_at(xs[i] / eps);

  sol.dt = opt.cfl * h / std::max(lip, 1e-9);
  std::function<double(double, double)> flux = [&](double a, double b) {
    if (a <= b) return H.range_extrema(a, b).min_value;
    return H.range_extrema(b, a).max_value;
  };
  sol.snapshot_times = snapshot_times;
  march(u, source, flux, 1.0 / h, sol.dt, T, snapshot_times, sol.snapshots,
        sol.steps);
  sol.values = std::move(u);

  // L-infinity stability of the monotone scheme: the slope range can grow by
  // t |V'| / eps, so bound |H| over the reachable slopes.
  double slope = grid_lipschitz(sol.values, 1.0 / h) + 1.0;
  auto ex = H.range_extrema(-slope, slope);
  double hmax = std::max(std::abs(ex.min_value), std::abs(ex.max_value));
  double bound = g_max + T * (hmax + V.oscillation()) + 1e-6;
  for (double v : sol.values) {
    require(std::abs(v) <= bound, "evolution_bound",
            "oscillatory solution left its comparison bound");
  }
  return sol;
}

EvolutionSolution solve_homogenized(const EffectiveCurve& curve,
                                    const std::function<double(double)>& g,
                                    double T, Interval window, double h,
                                    std::vector<double> snapshot_times,
                                    const EvolutionOptions& opt) {
  require(T > 0.0 && window.width() > 0.0 && h > 0.0, "evolution_grid",
          "need a positive horizon, window, and step");
  check_snapshot_times(snapshot_times, T);

  EvolutionSolution sol;
  sol.window = window;
  sol.T = T;
  sol.h = h;

  // Sample the initial data once to size the momentum table: with no x
  // dependence in the flux the slopes stay inside their initial range.
  double probe_pad = 1.0;
  {
    std::vector<double> probe;
    long m = static_cast<long>(std::ceil(window.width() / h)) + 1;
    probe.reserve(m);
    for (long i = 0; i < m; ++i) probe.push_back(g(window.lo + h * i));
    probe_pad += grid_lipschitz(probe, 1.0 / h);
  }
  double P = probe_pad + 1.0;
  long m = static_cast<long>(std::ceil(2.0 * P / opt.table_dp)) + 1;
  std::vector<double> table(m);
  for (long j = 0; j < m; ++j) {
    table[j] = curve.evaluate(-P + opt.table_dp * j);
  }
  SampledFlux flux(std::move(table), -P, opt.table_dp);
  const double lip = std::max(flux.table_lipschitz(), 1e-9);

  double pad = lip * T + opt.pad_margin;
  long cells = static_cast<long>(std::ceil((window.width() + 2.0 * pad) / h));
  sol.domain = {window.lo - pad, window.lo - pad + h * cells};
  long n = cells + 1;
  std::vector<double> u(n);
  double g_max = 0.0;
  for (long i = 0; i < n; ++i) {
    u[i] = g(sol.domain.lo + h * i);
    g_max = std::max(g_max, std::abs(u[i]));
  }

  sol.dt = opt.cfl * h / lip;
  std::vector<double> source(n, 0.0);
  std::function<double(double, double)> f = [&](double a, double b) {
    return flux(a, b);
  };
  sol.snapshot_times = snapshot_times;
  march(u, source, f, 1.0 / h, sol.dt, T, snapshot_times, sol.snapshots,
        sol.steps);
  sol.values = std::move(u);

  double hmax = 0.0;
  for (double q = -P; q <= P; q += opt.table_dp) {
    hmax = std::max(hmax, std::abs(flux.interp(q)));
  }
  double bound = g_max + T * hmax + 1e-6;
  for (double v : sol.values) {
    require(std::abs(v) <= bound, "evolution_bound",
            "homogenized solution left its comparison bound");
  }
  return sol;
}

ConvergenceReport convergence_report(const PiecewiseMonotoneHamiltonian& H,
                                     const PotentialModel& V,
                                     const EffectiveCurve& curve,
                                     const std::function<double(double)>& g,
                                     double T, double k,
                                     const std::vector<double>& eps_list,
                                     uint64_t seed,
                                     const EvolutionOptions& opt) {
  require(k > 0.0 && T > 0.0, "evolution_grid",
          "need a positive window radius and horizon");
  Interval window{-k, k};
  std::vector<double> times = {0.25 * T, 0.5 * T, 0.75 * T, T};

  ConvergenceReport report;
  report.reference_h = 1.0 / 512.0;
  EvolutionSolution ref =
      solve_homogenized(curve, g, T, window, report.reference_h, times, opt);

  const double lip = H.lipschitz_bound();
  for (double eps : eps_list) {
    EvolutionSolution osc =
        solve_oscillatory(H, V, eps, g, T, window, 0.0, seed, times, opt);
    double err = 0.0;
    const long samples = 256;
    for (std::size_t s = 0; s < times.size(); ++s) {
      for (long i = 0; i <= samples; ++i) {
        double x = -k + 2.0 * k * static_cast<double>(i) / samples;
        err = std::max(err,
                       std::abs(osc.snapshot_at(s, x) - ref.snapshot_at(s, x)));
      }
    }
    ConvergenceRow row;
    row.eps = eps;
    row.h = osc.h;
    row.sup_error = err;
    row.scheme_bound =
        (1.0 + lip) * (1.0 + grid_lipschitz(ref.values, 512.0)) *
        std::sqrt(osc.h * (1.0 + T));
    report.rows.push_back(row);
  }
  report.nonincreasing = true;
  for (std::size_t i = 0; i + 1 < report.rows.size(); ++i) {
    if (report.rows[i + 1].sup_error >
        report.rows[i].sup_error * 1.05 + 1e-12) {
      report.nonincreasing = false;
    }
  }
  return report;
}

}  // namespace hjhom
