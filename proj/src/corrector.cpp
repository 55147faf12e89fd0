#include "hjhom/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>

#include "json.hpp"

namespace hjhom {

namespace {

constexpr double kTouchTolPath = 1e-6;  // extremum values from samples are
                                        // only parabola-refined

// Relative continuity threshold for two one-sided limits at a junction.
bool values_equal(double a, double b) {
  return std::abs(a - b) <=
         1e-12 * (1.0 + std::max(std::abs(a), std::abs(b)));
}

double positive_mod(double x, double m) {
  double r = std::fmod(x, m);
  if (r < 0) r += m;
  return r;
}

// ---------------------------------------------------------------------------
// Uniform view over a model (analytic, possibly periodic) or a sampled path.

RangeExtrema path_range_on(const PotentialPath& p, double a, double b) {
  double va = p.value_at(a), vb = p.value_at(b);
  RangeExtrema r{std::min(va, vb), std::max(va, vb)};
  long i0 = (long)std::ceil((a - p.window.lo) / p.h - 1e-9);
  long i1 = (long)std::floor((b - p.window.lo) / p.h + 1e-9);
  i0 = std::max(i0, 0L);
  i1 = std::min(i1, (long)p.values.size() - 1);
  for (long i = i0; i <= i1; ++i) {
    r.min_value = std::min(r.min_value, p.values[i]);
    r.max_value = std::max(r.max_value, p.values[i]);
  }
  return r;
}

std::vector<PotentialModel::Extremum> path_extrema(const PotentialPath& p) {
  std::vector<PotentialModel::Extremum> out;
  const auto& v = p.values;
  // Track the sign of the last nonzero difference so an extremum sitting
  // exactly between two equal samples is still seen as a turn.
  int last_sign = 0;
  std::size_t turn = 0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    double d = v[i + 1] - v[i];
    int s = (d > 0.0) - (d < 0.0);
    if (s == 0) continue;
    if (last_sign != 0 && s != last_sign && turn > 0) {
      // Parabola through the three samples at the turn: vertex offset and
      // value (exact midpoint when the two middle samples tie).
      std::size_t k = turn;
      double d2 = v[k - 1] - 2.0 * v[k] + v[k + 1];
      double dy = d2 == 0.0 ? 0.0 : 0.5 * (v[k - 1] - v[k + 1]) / d2 * p.h;
      double val = v[k] - (d2 == 0.0 ? 0.0 : 0.125 * (v[k + 1] - v[k - 1]) *
                                                 (v[k + 1] - v[k - 1]) / d2);
      out.push_back({p.window.lo + k * p.h + dy, val, last_sign > 0});
    }
    last_sign = s;
    turn = i + 1;
  }
  return out;
}

struct VView {
  const PotentialModel* model = nullptr;
  const PotentialPath* path = nullptr;
  Interval win;
  bool cyclic = false;
  double per = 0.0;

  static VView of_model(const PotentialModel& m, const CorrectorOptions& opt) {
    VView v;
    v.model = &m;
    if (m.periodic()) {
      v.cyclic = true;
      v.per = m.period();
      v.win = {0.0, v.per};
    } else {
      v.win = {0.0, (double)opt.random_cells};
    }
    return v;
  }
  static VView of_path(const PotentialPath& p) {
    VView v;
    v.path = &p;
    v.win = p.window;
    return v;
  }

  double mbar() const { return model ? model->oscillation() : path->mbar; }
  double eval(double y) const {
    return model ? model->eval(y) : path->value_at(y);
  }
  RangeExtrema range_on(double a, double b) const {
    return model ? model->range_on(a, b) : path_range_on(*path, a, b);
  }
  std::vector<double> crossings(double c) const {
    if (model) return model->level_crossings(win, c);
    return path_level_crossings(*path, c);
  }
  std::vector<PotentialModel::Extremum> extrema_all() const {
    if (path) return path_extrema(*path);
    if (!cyclic) return model->extrema(win);
    // Widen so extrema sitting exactly on the period seam are seen, then
    // canonicalize back into the window.
    auto ext = model->extrema({win.lo - 0.5 * per, win.hi + 0.5 * per});
    for (auto& e : ext) e.y = win.lo + positive_mod(e.y - win.lo, per);
    return ext;
  }
  double touch_tol(const CorrectorOptions& opt) const {
    return path ? std::max(opt.tol, kTouchTolPath) : opt.tol;
  }
};

double branch_value(const PiecewiseMonotoneHamiltonian& H, int j, double s) {
  return H.branch_inverse({Side::Right, j}, s);
}

// ---------------------------------------------------------------------------
// Resonant window P = [0, inf) intersect (min m_t - mbar, max M_t).

bool in_resonant_window(const CriticalValues& cv, double mbar, double mu) {
  if (cv.count() == 0) return false;
  return mu >= 0.0 && mu > cv.min_well() - mbar && mu < cv.max_peak();
}

// ---------------------------------------------------------------------------
// Decomposition construction.

Decomposition decompose_impl(const VView& V, double mu,
                             const PiecewiseMonotoneHamiltonian& H,
                             const CorrectorOptions& opt, std::string note) {
  auto cv = H.critical_values(Side::Right);
  const double mbar = V.mbar();
  require(mu >= 0.0, "mu_not_resonant", "decompose needs mu >= 0");
  require(in_resonant_window(cv, mbar, mu), "mu_not_resonant",
          "mu outside the resonant window (min well - oscillation, max peak)");

  struct Crit {
    double c;
    bool is_peak;
    int t;
  };
  std::vector<Crit> crits;
  for (std::size_t t = 0; t < cv.count(); ++t) {
    crits.push_back({cv.wells[t], false, (int)t + 1});
    crits.push_back({cv.peaks[t], true, (int)t + 1});
  }

  Decomposition d;
  d.mu = mu;
  d.cyclic = V.cyclic;
  d.period = V.per;
  d.window = V.win;
  d.note = std::move(note);

  // Transversal crossings of V at the levels mu - c strictly inside
  // (-mbar, 0).
  for (const auto& cr : crits) {
    double level = mu - cr.c;
    if (!(level < -opt.tol && level > -mbar + opt.tol)) continue;
    for (double y : V.crossings(level)) {
      Junction j;
      j.y = y;
      j.energy = cr.c;
      j.is_peak = cr.is_peak;
      j.crit_index = cr.t;
      j.kind = JunctionKind::Up;  // fixed below from the local slope
      d.junctions.push_back(j);
    }
  }

  // Tangential touches: extrema of V meeting a level exactly.
  const double ttol = V.touch_tol(opt);
  for (const auto& e : V.extrema_all()) {
    double s = mu - e.value;
    const Crit* best = nullptr;
    double best_gap = ttol;
    for (const auto& cr : crits) {
      double gap = std::abs(s - cr.c);
      if (gap <= best_gap) {
        best_gap = gap;
        best = &cr;
      }
    }
    if (!best) continue;
    Junction j;
    j.y = e.y;
    j.energy = best->c;
    j.is_peak = best->is_peak;
    j.crit_index = best->t;
    j.kind = JunctionKind::Touch;
    d.junctions.push_back(j);
  }

  // Canonicalize positions, drop boundary-adjacent junctions on sampled
  // windows, sort, dedupe.
  if (V.cyclic) {
    for (auto& j : d.junctions) {
      j.y = V.win.lo + positive_mod(j.y - V.win.lo, V.per);
      if (V.win.hi - j.y < 1e-9) j.y = V.win.lo;
    }
  } else {
    double margin = V.path ? 10.0 * V.path->h : 0.0;
    std::erase_if(d.junctions, [&](const Junction& j) {
      return j.y < V.win.lo + margin || j.y > V.win.hi - margin;
    });
  }
  std::sort(d.junctions.begin(), d.junctions.end(),
            [](const Junction& a, const Junction& b) { return a.y < b.y; });
  {
    std::vector<Junction> uniq;
    for (const auto& j : d.junctions) {
      if (!uniq.empty() && std::abs(j.y - uniq.back().y) <= 1e-9) {
        if (j.kind == JunctionKind::Touch) uniq.back() = j;
        continue;
      }
      uniq.push_back(j);
    }
    d.junctions = std::move(uniq);
  }

  // Orient transversal junctions from the local slope of V.
  for (std::size_t k = 0; k < d.junctions.size(); ++k) {
    auto& j = d.junctions[k];
    if (j.kind == JunctionKind::Touch) continue;
    double gap = V.win.width();
    if (d.junctions.size() >= 2) {
      double prev = d.junctions[(k + d.junctions.size() - 1) %
                                d.junctions.size()]
                        .y;
      double next = d.junctions[(k + 1) % d.junctions.size()].y;
      gap = std::min(positive_mod(j.y - prev, V.win.width()),
                     positive_mod(next - j.y, V.win.width()));
      if (gap <= 0) gap = V.win.width();
    }
    double delta = std::min(gap / 16.0, 1e-5 * std::max(1.0, V.win.width()));
    if (V.path) delta = std::max(delta, 2.0 * V.path->h);
    j.kind = V.eval(j.y + delta) < V.eval(j.y - delta) ? JunctionKind::Up
                                                       : JunctionKind::Down;
  }

  // Intervals between consecutive junctions.
  std::vector<Interval> spans;
  const auto& js = d.junctions;
  if (V.cyclic) {
    if (js.empty()) {
      spans.push_back(V.win);
    } else {
      for (std::size_t k = 0; k + 1 < js.size(); ++k)
        spans.push_back({js[k].y, js[k + 1].y});
      spans.push_back({js.back().y, js.front().y + V.per});
    }
  } else {
    double prev = V.win.lo;
    for (const auto& j : js) {
      spans.push_back({prev, j.y});
      prev = j.y;
    }
    spans.push_back({prev, V.win.hi});
  }

  for (const auto& sp : spans) {
    DecompInterval di;
    di.span = sp;
    auto r = V.range_on(sp.lo, sp.hi);
    di.e_lo = mu - r.max_value;
    di.e_hi = mu - r.min_value;
    for (int j = 1; j <= H.branch_count(Side::Right); ++j) {
      if (H.branch({Side::Right, j})
              .values.contains({di.e_lo, di.e_hi}, opt.tol))
        di.feasible.push_back(j);
    }
    require(!di.feasible.empty(), "no_feasible_branch",
            "no branch value range covers the energy band of an interval");
    d.intervals.push_back(std::move(di));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Junction constraint between interval branches.

bool junction_ok(const PiecewiseMonotoneHamiltonian& H, const Junction& jn,
                 double mu, int a, int b, double tol) {
  double fl = branch_value(H, a, jn.energy);
  double fr = branch_value(H, b, jn.energy);
  return junction_admissible(H, mu - jn.energy, mu, fl, fr, tol);
}

// In the cyclic case junction k separates interval (k-1 mod N) from interval
// k; in the non-cyclic case junction k separates interval k from k+1.
struct Chain {
  const PiecewiseMonotoneHamiltonian* H;
  const Decomposition* d;
  double tol;

  bool ok(std::size_t junction, int a, int b) const {
    return junction_ok(*H, d->junctions[junction], d->mu, a, b, tol);
  }
};

std::vector<std::vector<int>> achievable_impl(
    const PiecewiseMonotoneHamiltonian& H, const Decomposition& d,
    const CorrectorOptions& opt) {
  const std::size_t n = d.intervals.size();
  Chain ch{&H, &d, opt.tol};
  std::vector<std::vector<int>> A(n);
  if (d.cyclic && d.junctions.empty()) {
    A[0] = d.intervals[0].feasible;
    return A;
  }
  if (d.cyclic) {
    // Fix sel[i] = j and propagate reachability once around the cycle.
    for (std::size_t i = 0; i < n; ++i) {
      for (int j : d.intervals[i].feasible) {
        std::vector<int> reach{j};
        for (std::size_t step = 0; step < n; ++step) {
          std::size_t to = (i + step + 1) % n;
          std::vector<int> next;
          for (int b : d.intervals[to].feasible) {
            bool okb = false;
            for (int a : reach)
              if (ch.ok(to, a, b)) {
                okb = true;
                break;
              }
            if (okb) next.push_back(b);
          }
          reach = std::move(next);
          if (reach.empty()) break;
        }
        if (std::find(reach.begin(), reach.end(), j) != reach.end())
          A[i].push_back(j);
      }
    }
  } else {
    std::vector<std::vector<int>> F(n), B(n);
    F[0] = d.intervals[0].feasible;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      for (int b : d.intervals[k + 1].feasible) {
        for (int a : F[k])
          if (ch.ok(k, a, b)) {
            F[k + 1].push_back(b);
            break;
          }
      }
    }
    B[n - 1] = d.intervals[n - 1].feasible;
    for (std::size_t k = n - 1; k > 0; --k) {
      for (int a : d.intervals[k - 1].feasible) {
        for (int b : B[k])
          if (ch.ok(k - 1, a, b)) {
            B[k - 1].push_back(a);
            break;
          }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (int j : F[i])
        if (std::find(B[i].begin(), B[i].end(), j) != B[i].end())
          A[i].push_back(j);
    }
  }
  for (const auto& a : A)
    require(!a.empty(), "no_admissible_selection",
            "no admissible branch selection exists for the decomposition");
  return A;
}

AdmissibleSelection extremal_selection(const PiecewiseMonotoneHamiltonian& H,
                                       const Decomposition& d,
                                       const CorrectorOptions& opt,
                                       bool sup) {
  auto A = achievable_impl(H, d, opt);
  AdmissibleSelection sel;
  sel.decomp = d;
  sel.mu = d.mu;
  for (const auto& a : A)
    sel.branch.push_back(sup ? *std::min_element(a.begin(), a.end())
                             : *std::max_element(a.begin(), a.end()));
  // The pointwise extremum of admissible fields is again admissible; check
  // rather than assume.
  Chain ch{&H, &d, opt.tol};
  const std::size_t n = d.intervals.size();
  for (std::size_t k = 0; k < d.junctions.size(); ++k) {
    int a, b;
    if (d.cyclic) {
      a = sel.branch[(k + n - 1) % n];
      b = sel.branch[k];
    } else {
      a = sel.branch[k];
      b = sel.branch[k + 1];
    }
    require(ch.ok(k, a, b), "extremal_selection",
            "per-interval extremal branches are not jointly admissible");
  }
  return sel;
}

// ---------------------------------------------------------------------------
// Slope field helpers.

double run_value(const SlopeRun& r, const PiecewiseMonotoneHamiltonian& H,
                 double s) {
  double v = H.branch_inverse(r.a, s);
  if (r.weight < 1.0)
    v = r.weight * v + (1.0 - r.weight) * H.branch_inverse(r.b, s);
  return v;
}

double field_value(const SlopeField& f, const PiecewiseMonotoneHamiltonian& H,
                   const std::function<double(double)>& V, double y) {
  double yy = y;
  if (f.periodic)
    yy = f.window.lo + positive_mod(y - f.window.lo, f.period);
  const SlopeRun* run = &f.runs.back();
  for (const auto& r : f.runs)
    if (yy <= r.span.hi + 1e-12) {
      run = &r;
      break;
    }
  return run_value(*run, H, f.mu - V(yy));
}

// One-sided limits at a run boundary; periodic fields wrap.
double field_limit(const SlopeField& f, const PiecewiseMonotoneHamiltonian& H,
                   const std::function<double(double)>& V, double y,
                   bool from_left) {
  double yy = y;
  if (f.periodic)
    yy = f.window.lo + positive_mod(y - f.window.lo, f.period);
  const SlopeRun* run = nullptr;
  if (from_left) {
    if (yy <= f.window.lo + 1e-12 && f.periodic) {
      run = &f.runs.back();
      yy = f.window.hi;
    } else {
      for (auto it = f.runs.rbegin(); it != f.runs.rend(); ++it)
        if (it->span.lo < yy - 1e-12) {
          run = &*it;
          break;
        }
    }
  } else {
    if (yy >= f.window.hi - 1e-12 && f.periodic) {
      run = &f.runs.front();
      yy = f.window.lo;
    } else {
      for (const auto& r : f.runs)
        if (r.span.hi > yy + 1e-12) {
          run = &r;
          break;
        }
    }
  }
  require(run != nullptr, "field_limit", "no run on the requested side");
  return run_value(*run, H, f.mu - V(yy));
}

double integrate_run(const SlopeRun& r, const PiecewiseMonotoneHamiltonian& H,
                     const std::function<double(double)>& V, double mu,
                     double a, double b, int n) {
  return gauss_integrate(
      [&](double y) { return run_value(r, H, mu - V(y)); }, a, b, n);
}

double field_integral(const SlopeField& f,
                      const PiecewiseMonotoneHamiltonian& H,
                      const std::function<double(double)>& V, double a,
                      double b, int n) {
  double total = 0.0;
  for (const auto& r : f.runs) {
    double lo = std::max(a, r.span.lo), hi = std::min(b, r.span.hi);
    if (hi - lo > 1e-15) total += integrate_run(r, H, V, f.mu, lo, hi, n);
  }
  return total;
}

std::function<double(double)> v_func(const PotentialModel& V) {
  return [&V](double y) { return V.eval(y); };
}
std::function<double(double)> v_func(const PotentialPath& p) {
  return [&p](double y) { return p.value_at(y); };
}

ExpectedValue expected_impl(const SlopeField& f,
                            const PiecewiseMonotoneHamiltonian& H,
                            const std::function<double(double)>& V, int n) {
  ExpectedValue out;
  double width = f.window.width();
  out.value = field_integral(f, H, V, f.window.lo, f.window.hi, n) / width;
  if (!f.periodic) {
    // Block standard error over unit cells.
    int cells = (int)std::floor(width + 1e-9);
    if (cells >= 2) {
      std::vector<double> m(cells);
      for (int c = 0; c < cells; ++c)
        m[c] = field_integral(f, H, V, f.window.lo + c, f.window.lo + c + 1,
                              n);
      double mean = std::accumulate(m.begin(), m.end(), 0.0) / cells;
      double var = 0.0;
      for (double x : m) var += (x - mean) * (x - mean);
      var /= (cells - 1);
      out.std_error = std::sqrt(var / cells);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Switch freedom inside an interval: critical values strictly between
// branches j < j2.

double max_intervening_peak(const CriticalValues& cv, int j, int j2) {
  double m = -kInf;
  for (int t = (j + 1) / 2; t <= (j2 - 1) / 2; ++t)
    m = std::max(m, cv.peaks[t - 1]);
  return m;
}
double min_intervening_well(const CriticalValues& cv, int j, int j2) {
  double m = kInf;
  for (int t = (j + 2) / 2; t <= j2 / 2; ++t)
    m = std::min(m, cv.wells[t - 1]);
  return m;
}

bool down_switch_free(const CriticalValues& cv, int j, int j2, double e_lo,
                      double tol) {
  return max_intervening_peak(cv, j, j2) <= e_lo + tol;
}
bool up_switch_free(const CriticalValues& cv, int j, int j2, double e_hi,
                    double tol) {
  return min_intervening_well(cv, j, j2) >= e_hi - tol;
}

// Can selections differing only on interval i (branches j < j2) be deformed
// into one another through admissible fields?
bool morph_edge(const PiecewiseMonotoneHamiltonian& H,
                const CriticalValues& cv, const Decomposition& d,
                std::size_t i, int j, int j2, double tol) {
  const auto& band = d.intervals[i];
  bool dn = down_switch_free(cv, j, j2, band.e_lo, tol);
  bool up = up_switch_free(cv, j, j2, band.e_hi, tol);
  if (!d.cyclic || d.junctions.size() >= 2) return dn || up;
  if (d.junctions.size() == 1) {
    // The sliding switch must also pass the single wrap junction.
    const auto& jn = d.junctions[0];
    double fj = branch_value(H, j, jn.energy);
    double fj2 = branch_value(H, j2, jn.energy);
    bool a = dn && junction_admissible(H, d.mu - jn.energy, d.mu, fj2, fj, tol);
    bool b = up && junction_admissible(H, d.mu - jn.energy, d.mu, fj, fj2, tol);
    return a || b;
  }
  // Full circle with no junction: one switch slides while its partner stays
  // parked where the energy band allows it.
  bool a = dn && min_intervening_well(cv, j, j2) >= band.e_lo - tol;
  bool b = up && max_intervening_peak(cv, j, j2) <= band.e_hi + tol;
  return a || b;
}

struct DSU {
  std::vector<std::size_t> parent;
  explicit DSU(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points.

Decomposition decompose(const PotentialModel& V, double mu,
                        const PiecewiseMonotoneHamiltonian& H,
                        const CorrectorOptions& opt) {
  return decompose_impl(VView::of_model(V, opt), mu, H, opt, "");
}

Decomposition decompose(const PotentialPath& path, double mu,
                        const PiecewiseMonotoneHamiltonian& H,
                        const CorrectorOptions& opt) {
  // (H4) surrogate on the sampled data: all junction levels must be cleanly
  // separated at the sample scale; one mollification pass may restore that.
  auto cv = H.critical_values(Side::Right);
  const PotentialPath* use = &path;
  MollifyResult moll;
  std::string note;
  auto separated = [&](const PotentialPath& p) {
    for (std::size_t t = 0; t < cv.count(); ++t) {
      for (double c : {mu - cv.wells[t], mu - cv.peaks[t]}) {
        if (!(c < 0.0 && c > -p.mbar)) continue;
        if (!crossings_well_separated(path_level_crossings(p, c), p.h))
          return false;
      }
    }
    return true;
  };
  if (!separated(path)) {
    moll = mollify(path, 5.0 * path.h);
    use = &moll.path;
    note = "mollified(5h)";
    require(separated(*use), "level_cluster",
            "junction levels remain clustered after one mollification pass");
  }
  return decompose_impl(VView::of_path(*use), mu, H, opt, note);
}

bool junction_admissible(const PiecewiseMonotoneHamiltonian& H, double V_at_a,
                         double mu, double f_left, double f_right,
                         double tol) {
  if (values_equal(f_left, f_right)) return true;
  const double level = mu - V_at_a;
  auto ext = H.range_extrema(std::min(f_left, f_right),
                             std::max(f_left, f_right));
  if (f_left > f_right) return ext.max_value <= level + tol;
  return ext.min_value >= level - tol;
}

std::vector<std::vector<int>> achievable_branches(
    const PiecewiseMonotoneHamiltonian& H, const Decomposition& d,
    const CorrectorOptions& opt) {
  return achievable_impl(H, d, opt);
}

std::vector<std::vector<int>> enumerate_admissible(
    const PiecewiseMonotoneHamiltonian& H, const Decomposition& d,
    const CorrectorOptions& opt) {
  const std::size_t n = d.intervals.size();
  double product = 1.0;
  for (const auto& di : d.intervals) product *= (double)di.feasible.size();
  require(product <= (double)opt.enum_cap, "enumeration_cap",
          "feasible-set product exceeds the enumeration cap");

  Chain ch{&H, &d, opt.tol};
  std::vector<std::vector<int>> out;
  std::vector<int> sel(n);
  std::function<void(std::size_t)> dfs = [&](std::size_t i) {
    if (i == n) {
      if (d.cyclic && !d.junctions.empty() &&
          !ch.ok(0, sel[n - 1], sel[0]))
        return;
      out.push_back(sel);
      return;
    }
    for (int j : d.intervals[i].feasible) {
      if (i > 0) {
        std::size_t junction = d.cyclic ? i : i - 1;
        if (!ch.ok(junction, sel[i - 1], j)) continue;
      }
      sel[i] = j;
      dfs(i + 1);
    }
  };
  dfs(0);
  return out;
}

AdmissibleSelection sup_admissible(const PiecewiseMonotoneHamiltonian& H,
                                   const PotentialModel& V, double mu,
                                   const CorrectorOptions& opt) {
  return extremal_selection(H, decompose(V, mu, H, opt), opt, true);
}
AdmissibleSelection inf_admissible(const PiecewiseMonotoneHamiltonian& H,
                                   const PotentialModel& V, double mu,
                                   const CorrectorOptions& opt) {
  return extremal_selection(H, decompose(V, mu, H, opt), opt, false);
}
AdmissibleSelection sup_admissible(const PiecewiseMonotoneHamiltonian& H,
                                   const PotentialPath& path, double mu,
                                   const CorrectorOptions& opt) {
  return extremal_selection(H, decompose(path, mu, H, opt), opt, true);
}
AdmissibleSelection inf_admissible(const PiecewiseMonotoneHamiltonian& H,
                                   const PotentialPath& path, double mu,
                                   const CorrectorOptions& opt) {
  return extremal_selection(H, decompose(path, mu, H, opt), opt, false);
}

double SlopeField::eval(const PiecewiseMonotoneHamiltonian& H,
                        const PotentialModel& V, double y) const {
  return field_value(*this, H, v_func(V), y);
}
double SlopeField::eval(const PiecewiseMonotoneHamiltonian& H,
                        const PotentialPath& V, double y) const {
  return field_value(*this, H, v_func(V), y);
}

SlopeField selection_field(const AdmissibleSelection& sel) {
  const auto& d = sel.decomp;
  SlopeField f;
  f.mu = sel.mu;
  f.window = d.window;
  f.periodic = d.cyclic;
  f.period = d.period;
  f.provenance = "selection";
  for (std::size_t i = 0; i < d.intervals.size(); ++i) {
    Interval sp = d.intervals[i].span;
    BranchId id{Side::Right, sel.branch[i]};
    if (sp.hi <= d.window.hi + 1e-12) {
      f.runs.push_back({sp, id, 1.0, id});
    } else {
      // Wrap interval: split at the period seam.
      f.runs.push_back({{sp.lo, d.window.hi}, id, 1.0, id});
      f.runs.push_back({{d.window.lo, d.window.lo + (sp.hi - d.window.hi)},
                        id,
                        1.0,
                        id});
    }
  }
  std::sort(f.runs.begin(), f.runs.end(),
            [](const SlopeRun& a, const SlopeRun& b) {
              return a.span.lo < b.span.lo;
            });
  return f;
}

ExpectedValue expected_slope(const SlopeField& f,
                             const PiecewiseMonotoneHamiltonian& H,
                             const PotentialModel& V,
                             const CorrectorOptions& opt) {
  return expected_impl(f, H, v_func(V), opt.quad_n);
}
ExpectedValue expected_slope(const AdmissibleSelection& sel,
                             const PiecewiseMonotoneHamiltonian& H,
                             const PotentialModel& V,
                             const CorrectorOptions& opt) {
  return expected_slope(selection_field(sel), H, V, opt);
}
ExpectedValue expected_slope(const SlopeField& f,
                             const PiecewiseMonotoneHamiltonian& H,
                             const PotentialPath& path) {
  return expected_impl(f, H, v_func(path), 64);
}

std::string slope_field_csv(const SlopeField& f,
                            const PiecewiseMonotoneHamiltonian& H,
                            const PotentialModel& V, int n) {
  std::string out = "y,f\n";
  char buf[80];
  for (int i = 0; i < n; ++i) {
    double y = f.window.lo + f.window.width() * i / (n - 1);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", y, f.eval(H, V, y));
    out += buf;
  }
  return out;
}

std::vector<ComponentInfo> components(
    const PiecewiseMonotoneHamiltonian& H, const PotentialModel& V,
    const Decomposition& d, const std::vector<std::vector<int>>& selections,
    const CorrectorOptions& opt) {
  require(!selections.empty(), "no_admissible_selection",
          "components need at least one selection");
  auto cv = H.critical_values(Side::Right);
  DSU dsu(selections.size());
  for (std::size_t a = 0; a < selections.size(); ++a) {
    for (std::size_t b = a + 1; b < selections.size(); ++b) {
      std::size_t diff = selections.size(), count = 0;
      for (std::size_t i = 0; i < selections[a].size(); ++i) {
        if (selections[a][i] != selections[b][i]) {
          diff = i;
          ++count;
        }
      }
      if (count != 1) continue;
      int j = std::min(selections[a][diff], selections[b][diff]);
      int j2 = std::max(selections[a][diff], selections[b][diff]);
      if (morph_edge(H, cv, d, diff, j, j2, opt.tol)) dsu.unite(a, b);
    }
  }
  std::vector<double> E(selections.size());
  for (std::size_t a = 0; a < selections.size(); ++a) {
    AdmissibleSelection sel{d, selections[a], d.mu};
    E[a] = expected_slope(sel, H, V, opt).value;
  }
  std::vector<ComponentInfo> out;
  std::vector<std::size_t> root_of(selections.size(), SIZE_MAX);
  for (std::size_t a = 0; a < selections.size(); ++a) {
    std::size_t r = dsu.find(a);
    if (root_of[r] == SIZE_MAX) {
      root_of[r] = out.size();
      out.push_back({{}, {E[a], E[a]}});
    }
    auto& comp = out[root_of[r]];
    comp.members.push_back(a);
    comp.e_range.lo = std::min(comp.e_range.lo, E[a]);
    comp.e_range.hi = std::max(comp.e_range.hi, E[a]);
  }
  return out;
}

FlatIntervalResult flat_interval(const PiecewiseMonotoneHamiltonian& H,
                                 const PotentialModel& V, double mu,
                                 const CorrectorOptions& opt) {
  auto cv = H.critical_values(Side::Right);
  const double mbar = V.oscillation();
  FlatIntervalResult res;
  res.mu = mu;

  // Snap to the nearest resonant level.
  for (std::size_t t = 0; t < cv.count(); ++t) {
    for (double c : {cv.wells[t], cv.peaks[t], cv.wells[t] - mbar,
                     cv.peaks[t] - mbar}) {
      if (std::abs(mu - c) <= opt.tol) {
        res.mu = c;
        res.resonant = true;
      }
    }
  }
  require(res.mu >= 0.0, "mu_negative",
          "no nonnegative slope field exists below the minimum of H");

  if (!in_resonant_window(cv, mbar, res.mu)) {
    // A single branch is feasible over the whole window; its average is the
    // entire slope interval.
    auto f = monotone_solution(H, V, res.mu, opt);
    double e = expected_slope(f, H, V, opt).value;
    res.span = {e, e};
    res.is_point = true;
    res.component_count = 1;
    return res;
  }

  auto d = decompose(V, res.mu, H, opt);
  if (!V.periodic()) {
    // Long sampled windows are far beyond enumeration; in the strongly
    // oscillatory regime the admissible class is connected, so the extremal
    // averages bound the interval directly.
    auto lo = extremal_selection(H, d, opt, false);
    auto hi = extremal_selection(H, d, opt, true);
    double a = expected_slope(lo, H, V, opt).value;
    double b = expected_slope(hi, H, V, opt).value;
    res.span = {a, b};
    res.is_point = b - a <= 1e-10 * (1.0 + std::abs(b));
    res.component_count = 1;
    return res;
  }

  auto sels = enumerate_admissible(H, d, opt);
  auto comps = components(H, V, d, sels, opt);
  res.component_count = comps.size();

  auto inf_sel = extremal_selection(H, d, opt, false);
  double e_inf = expected_slope(inf_sel, H, V, opt).value;

  const ComponentInfo* best = nullptr;
  for (const auto& c : comps) {
    if (!best || c.e_range.width() > best->e_range.width() + 1e-12) {
      best = &c;
    } else if (std::abs(c.e_range.width() - best->e_range.width()) <= 1e-12 &&
               c.e_range.contains(e_inf, 1e-9) &&
               !best->e_range.contains(e_inf, 1e-9)) {
      best = &c;
    }
  }
  res.span = best->e_range;
  res.is_point =
      res.span.width() <= 1e-10 * (1.0 + std::abs(res.span.hi));
  return res;
}

// ---------------------------------------------------------------------------
// Interpolation.

namespace {

// Replace the portion of `base` covering [I.lo, I.hi] by a two-run chain
// configuration with total mass c.  `I` may extend past the window seam on
// periodic fields.
SlopeField interp_on_interval(const PiecewiseMonotoneHamiltonian& H,
                              const std::function<double(double)>& V,
                              const SlopeField& base, Interval I, int b_lo,
                              int b_hi, double c, const CorrectorOptions& opt,
                              const char* who) {
  require(b_lo <= b_hi, who, "branch order");
  const double mu = base.mu;

  // End admissibility of every pure intermediate configuration.
  double sL = mu - V(I.lo), sR = mu - V(I.hi);
  double vL = field_limit(base, H, V, I.lo, true);
  double vR = field_limit(base, H, V, I.hi, false);
  for (int m = b_lo; m <= b_hi; ++m) {
    require(junction_admissible(H, V(I.lo), mu, vL, branch_value(H, m, sL),
                                opt.tol) &&
                junction_admissible(H, V(I.hi), mu, branch_value(H, m, sR),
                                    vR, opt.tol),
            "interpolate_chain",
            "an intermediate branch violates an end junction");
  }

  std::vector<double> mass(b_hi - b_lo + 1);
  for (int m = b_lo; m <= b_hi; ++m)
    mass[m - b_lo] = gauss_integrate(
        [&](double y) { return branch_value(H, m, mu - V(y)); }, I.lo, I.hi,
        opt.quad_n);
  double scale = 1.0 + std::abs(mass.front()) + std::abs(mass.back());
  require(c <= mass.front() + 1e-8 * scale && c >= mass.back() - 1e-8 * scale,
          "interpolate_mass", "target mass outside the achievable range");

  // Locate the chain phase and the switch position.  Targets inside the
  // slack zone beyond the extreme masses clamp to the pure ends.
  std::vector<SlopeRun> piece;
  int phase = -1;
  if (c >= mass.front()) {
    BranchId id{Side::Right, b_lo};
    piece.push_back({I, id, 1.0, id});
  } else if (c <= mass.back()) {
    BranchId id{Side::Right, b_hi};
    piece.push_back({I, id, 1.0, id});
  }
  for (int m = b_lo; piece.empty() && m <= b_hi; ++m) {
    if (std::abs(c - mass[m - b_lo]) <= 1e-12 * scale) {
      BranchId id{Side::Right, m};
      piece.push_back({I, id, 1.0, id});
      break;
    }
    if (m < b_hi && c < mass[m - b_lo] && c > mass[m + 1 - b_lo]) {
      phase = m;
      break;
    }
  }
  if (piece.empty()) {
    require(phase >= 0, "interpolate_mass", "no chain phase brackets c");
    const bool well_pair = phase % 2 == 1;  // (2t-1, 2t): switch down freely
    BranchId left{Side::Right, well_pair ? phase : phase + 1};
    BranchId right{Side::Right, well_pair ? phase + 1 : phase};
    auto mass_at = [&](double z) {
      return gauss_integrate(
                 [&](double y) {
                   return branch_value(H, left.index, mu - V(y));
                 },
                 I.lo, z, opt.quad_n) +
             gauss_integrate(
                 [&](double y) {
                   return branch_value(H, right.index, mu - V(y));
                 },
                 z, I.hi, opt.quad_n);
    };
    double z = find_root([&](double t) { return mass_at(t) - c; }, I.lo, I.hi,
                         1e-13);
    if (z - I.lo > 1e-12) piece.push_back({{I.lo, z}, left, 1.0, left});
    if (I.hi - z > 1e-12) piece.push_back({{z, I.hi}, right, 1.0, right});
  }

  // Assemble: keep base runs outside I, insert the piece (split at the
  // period seam if needed).
  SlopeField out = base;
  out.runs.clear();
  double w_hi = base.window.hi, w_lo = base.window.lo;
  double per = base.periodic ? base.period : 0.0;
  auto push_clipped = [&](SlopeRun r) {
    if (r.span.hi - r.span.lo <= 1e-13) return;
    if (base.periodic && r.span.hi > w_hi + 1e-12) {
      out.runs.push_back({{r.span.lo, w_hi}, r.a, r.weight, r.b});
      out.runs.push_back(
          {{w_lo, w_lo + (r.span.hi - w_hi)}, r.a, r.weight, r.b});
    } else {
      out.runs.push_back(r);
    }
  };
  // Portions of base outside [I.lo, I.hi] modulo the period.
  auto covered = [&](double lo, double hi) {
    // Overlap of [lo, hi] with I (shifting by the period when wrapping).
    std::vector<Interval> keep;
    for (double shift : {0.0, per, -per}) {
      double a = std::max(lo, I.lo + shift), b = std::min(hi, I.hi + shift);
      if (b - a > 1e-13) keep.push_back({a, b});
    }
    return keep;
  };
  for (const auto& r : base.runs) {
    auto cuts = covered(r.span.lo, r.span.hi);
    if (cuts.empty()) {
      out.runs.push_back(r);
      continue;
    }
    std::sort(cuts.begin(), cuts.end(),
              [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
    double pos = r.span.lo;
    for (const auto& cut : cuts) {
      if (cut.lo - pos > 1e-13)
        out.runs.push_back({{pos, cut.lo}, r.a, r.weight, r.b});
      pos = cut.hi;
    }
    if (r.span.hi - pos > 1e-13)
      out.runs.push_back({{pos, r.span.hi}, r.a, r.weight, r.b});
  }
  for (const auto& r : piece) push_clipped(r);
  std::sort(out.runs.begin(), out.runs.end(),
            [](const SlopeRun& a, const SlopeRun& b) {
              return a.span.lo < b.span.lo;
            });
  return out;
}

int pure_branch_on(const SlopeField& f, Interval I) {
  for (const auto& r : f.runs) {
    if (r.span.lo <= I.lo + 1e-9 && r.span.hi >= I.hi - 1e-9) {
      require(r.weight == 1.0 && r.a.side == Side::Right, "interpolate_pure",
              "field is not a pure right branch on the interval");
      return r.a.index;
    }
  }
  throw InvariantError("interpolate_pure",
                       "no single run covers the interval");
}

}  // namespace

SlopeField interpolate(const PiecewiseMonotoneHamiltonian& H,
                       const PotentialModel& V, const SlopeField& f1,
                       const SlopeField& f2, Interval I, double c,
                       const CorrectorOptions& opt) {
  require(std::abs(f1.mu - f2.mu) <= 1e-12, "interpolate_pure",
          "fields solve different levels");
  int b1 = pure_branch_on(f1, I);
  int b2 = pure_branch_on(f2, I);
  auto out = interp_on_interval(H, v_func(V), f1, I, std::min(b1, b2),
                                std::max(b1, b2), c, opt, "interpolate");
  out.provenance = "interpolate";
  return out;
}

SlopeField transition_slope(const PiecewiseMonotoneHamiltonian& H,
                            const PotentialModel& V, double mu, double t,
                            const CorrectorOptions& opt) {
  require(t >= -1e-12 && t <= 1.0 + 1e-12, "transition_range",
          "t must lie in [0, 1]");
  t = std::min(1.0, std::max(0.0, t));
  auto d = decompose(V, mu, H, opt);
  auto inf_sel = extremal_selection(H, d, opt, false);
  auto sup_sel = extremal_selection(H, d, opt, true);
  SlopeField f = selection_field(inf_sel);
  auto Vf = v_func(V);
  for (std::size_t i = 0; i < d.intervals.size(); ++i) {
    int lo = sup_sel.branch[i], hi = inf_sel.branch[i];
    if (lo == hi) continue;
    const Interval I = d.intervals[i].span;
    auto mass_of = [&](int m) {
      return gauss_integrate(
          [&](double y) { return branch_value(H, m, mu - V.eval(y)); }, I.lo,
          I.hi, opt.quad_n);
    };
    double target = t * mass_of(lo) + (1.0 - t) * mass_of(hi);
    f = interp_on_interval(H, Vf, f, I, lo, hi, target, opt, "transition");
  }
  f.provenance = "transition";
  return f;
}

// ---------------------------------------------------------------------------
// Verification.

namespace {

VerifyReport verify_impl(const SlopeField& f,
                         const PiecewiseMonotoneHamiltonian& H,
                         const std::function<double(double)>& V, double mu,
                         double tol, VerifyMode mode) {
  VerifyReport rep;
  rep.tol = tol;
  bool all_ok = true;

  // The field is a fixed function of y (determined by its own stored level);
  // the residual measures it against the requested level mu.
  const int samples = 256;
  for (const auto& r : f.runs) {
    for (int i = 0; i < samples; ++i) {
      double y = r.span.lo + r.span.width() * (i + 0.5) / samples;
      double res = H.evaluate(run_value(r, H, f.mu - V(y))) + V(y) - mu;
      double bad = mode == VerifyMode::Subsolution ? std::max(res, 0.0)
                                                   : std::abs(res);
      rep.max_residual = std::max(rep.max_residual, bad);
    }
  }

  std::vector<double> bounds;
  for (std::size_t i = 0; i + 1 < f.runs.size(); ++i)
    bounds.push_back(f.runs[i].span.hi);
  if (f.periodic) bounds.push_back(f.window.lo);  // seam, limits wrap

  for (double y : bounds) {
    JunctionRecord rec;
    rec.y = y;
    rec.f_left = field_limit(f, H, V, y, true);
    rec.f_right = field_limit(f, H, V, y, false);
    rec.level = mu - V(y);
    if (values_equal(rec.f_left, rec.f_right)) {
      rec.kind = "continuous";
      rec.h_min = rec.h_max = H.evaluate(rec.f_left);
      rec.admissible = true;
    } else {
      auto ext = H.range_extrema(std::min(rec.f_left, rec.f_right),
                                 std::max(rec.f_left, rec.f_right));
      rec.h_min = ext.min_value;
      rec.h_max = ext.max_value;
      if (rec.f_left > rec.f_right) {
        rec.kind = "down";
        rec.admissible = ext.max_value <= rec.level + tol;
      } else {
        rec.kind = "up";
        rec.admissible = mode == VerifyMode::Subsolution
                             ? true
                             : ext.min_value >= rec.level - tol;
      }
    }
    all_ok = all_ok && rec.admissible;
    rep.junctions.push_back(rec);
  }
  rep.pass = all_ok && rep.max_residual <= tol;
  return rep;
}

}  // namespace

std::string VerifyReport::to_json() const {
  nlohmann::json j;
  j["pass"] = pass;
  j["max_residual"] = max_residual;
  j["tol"] = tol;
  j["junctions"] = nlohmann::json::array();
  for (const auto& r : junctions) {
    j["junctions"].push_back({{"y", r.y},
                              {"f_left", r.f_left},
                              {"f_right", r.f_right},
                              {"kind", r.kind},
                              {"level", r.level},
                              {"h_min", r.h_min},
                              {"h_max", r.h_max},
                              {"admissible", r.admissible}});
  }
  return j.dump(2);
}

VerifyReport verify_metric_solution(const SlopeField& f,
                                    const PiecewiseMonotoneHamiltonian& H,
                                    const PotentialModel& V, double mu,
                                    double tol, VerifyMode mode) {
  return verify_impl(f, H, v_func(V), mu, tol, mode);
}
VerifyReport verify_metric_solution(const SlopeField& f,
                                    const PiecewiseMonotoneHamiltonian& H,
                                    const PotentialPath& path, double mu,
                                    double tol, VerifyMode mode) {
  return verify_impl(f, H, v_func(path), mu, tol, mode);
}

// ---------------------------------------------------------------------------
// Monotone solutions and the subsolution family.

namespace {

SlopeField monotone_impl(const VView& V,
                         const PiecewiseMonotoneHamiltonian& H, double mu,
                         const CorrectorOptions& opt,
                         const Decomposition* pre) {
  auto cv = H.critical_values(Side::Right);
  require(mu >= 0.0, "mu_negative",
          "no nonnegative slope field exists below the minimum of H");
  if (!in_resonant_window(cv, V.mbar(), mu)) {
    int j = (cv.count() == 0 || mu >= cv.max_peak())
                ? 1
                : H.branch_count(Side::Right);
    auto r = V.range_on(V.win.lo, V.win.hi);
    require(H.branch({Side::Right, j})
                .values.contains({mu - r.max_value, mu - r.min_value},
                                 opt.tol),
            "no_feasible_branch",
            "the single candidate branch does not cover the energy band");
    SlopeField f;
    f.mu = mu;
    f.window = V.win;
    f.periodic = V.cyclic;
    f.period = V.per;
    BranchId id{Side::Right, j};
    f.runs.push_back({V.win, id, 1.0, id});
    f.provenance = "monotone";
    return f;
  }
  Decomposition d =
      pre ? *pre : decompose_impl(V, mu, H, opt, "");
  auto sel = extremal_selection(H, d, opt, false);
  SlopeField f = selection_field(sel);
  f.provenance = "monotone";
  return f;
}

}  // namespace

SlopeField monotone_solution(const PiecewiseMonotoneHamiltonian& H,
                             const PotentialModel& V, double mu,
                             const CorrectorOptions& opt) {
  return monotone_impl(VView::of_model(V, opt), H, mu, opt, nullptr);
}
SlopeField monotone_solution(const PiecewiseMonotoneHamiltonian& H,
                             const PotentialPath& path, double mu,
                             const CorrectorOptions& opt) {
  if (in_resonant_window(H.critical_values(Side::Right), path.mbar, mu)) {
    auto d = decompose(path, mu, H, opt);  // includes the (H4) surrogate
    return monotone_impl(VView::of_path(path), H, mu, opt, &d);
  }
  return monotone_impl(VView::of_path(path), H, mu, opt, nullptr);
}

std::pair<ExpectedValue, ExpectedValue> zero_slope_bounds(
    const PiecewiseMonotoneHamiltonian& H, const PotentialModel& V,
    const CorrectorOptions& opt) {
  auto f0 = monotone_solution(H, V, 0.0, opt);
  ExpectedValue q0 = expected_slope(f0, H, V, opt);
  auto Hr = H.reflect();
  auto Vr = V.reflected();
  auto fr = monotone_solution(*Hr, *Vr, 0.0, opt);
  ExpectedValue qr = expected_slope(fr, *Hr, *Vr, opt);
  return {{-qr.value, qr.std_error}, q0};
}

SlopeField subsolution_at_zero(const PiecewiseMonotoneHamiltonian& H,
                               const PotentialModel& V, double p, double delta,
                               const CorrectorOptions& opt) {
  require(V.periodic(), "subsolution_window",
          "the stationary family at zero is built on periodic models");
  auto cv = H.critical_values(Side::Right);
  const double mbar = V.oscillation();
  double dmax = 0.5 * std::min(mbar, cv.min_well());
  require(delta > 0.0 && delta < dmax, "delta_range",
          "delta must lie in (0, min(oscillation, min well)/2)");

  auto [qm1, q0] = zero_slope_bounds(H, V, opt);
  require(p >= qm1.value - 1e-9 && p <= q0.value + 1e-9, "p_range",
          "p must lie between the one-sided zero-level slope averages");
  p = std::min(q0.value, std::max(qm1.value, p));
  double t = (p - qm1.value) / (q0.value - qm1.value);
  t = std::min(1.0, std::max(0.0, t));

  auto f0 = monotone_solution(H, V, 0.0, opt);
  auto Hr = H.reflect();
  auto Vr = V.reflected();
  auto fr = monotone_solution(*Hr, *Vr, 0.0, opt);
  const double per = V.period();

  // Map the reflected field back: g(y) = -fr(-y), with left branch ids.
  SlopeField g;
  g.mu = 0.0;
  g.window = {0.0, per};
  g.periodic = true;
  g.period = per;
  for (const auto& r : fr.runs) {
    SlopeRun m;
    m.span = {per - r.span.hi, per - r.span.lo};
    m.a = {Side::Left, r.a.index};
    m.b = m.a;
    g.runs.push_back(m);
  }
  std::sort(g.runs.begin(), g.runs.end(),
            [](const SlopeRun& a, const SlopeRun& b) {
              return a.span.lo < b.span.lo;
            });

  // Pointwise blend of the two monotone solutions; affine in t, so the
  // average is exactly p.
  SlopeField blend;
  blend.mu = 0.0;
  blend.window = {0.0, per};
  blend.periodic = true;
  blend.period = per;
  blend.provenance = "subsolution";
  std::vector<double> cuts{0.0, per};
  for (const auto& r : f0.runs) cuts.push_back(r.span.lo);
  for (const auto& r : g.runs) cuts.push_back(r.span.lo);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double a, double b) { return b - a <= 1e-12; }),
             cuts.end());
  auto branch_at = [](const SlopeField& f, double y) {
    for (const auto& r : f.runs)
      if (y <= r.span.hi + 1e-12 && y >= r.span.lo - 1e-12) return r.a;
    return f.runs.back().a;
  };
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    blend.runs.push_back(
        {{cuts[i], cuts[i + 1]}, branch_at(f0, mid), t, branch_at(g, mid)});
  }

  auto rep = verify_metric_solution(blend, H, V, delta, 1e-9,
                                    VerifyMode::Subsolution);
  if (rep.pass) return blend;

  // The blend leaves the inner branches: fall back to a two-run mixture with
  // its downward jump pinned at the deepest point of the potential.
  double y_star = golden_min([&](double y) { return V.eval(y); }, 0.0, per,
                             1e-12);
  auto Vf = v_func(V);
  auto mass_at = [&](double z) {
    double m = 0.0;
    m += field_integral(g, H, Vf, y_star, std::min(z, per), opt.quad_n);
    if (z > per) m += field_integral(g, H, Vf, 0.0, z - per, opt.quad_n);
    m += field_integral(f0, H, Vf, std::min(z, per), per, opt.quad_n);
    if (z > per) {
      m -= field_integral(f0, H, Vf, per, per, opt.quad_n);
      m += field_integral(f0, H, Vf, z - per, y_star, opt.quad_n);
    } else {
      m += field_integral(f0, H, Vf, 0.0, y_star, opt.quad_n);
    }
    return m;
  };
  double z = find_root(
      [&](double zz) { return mass_at(zz) - p * per; }, y_star, y_star + per,
      1e-13);
  SlopeField mix;
  mix.mu = 0.0;
  mix.window = {0.0, per};
  mix.periodic = true;
  mix.period = per;
  mix.provenance = "subsolution";
  auto add_piece = [&](const SlopeField& src, double a, double b) {
    for (const auto& r : src.runs) {
      double lo = std::max(a, r.span.lo), hi = std::min(b, r.span.hi);
      if (hi - lo > 1e-12) mix.runs.push_back({{lo, hi}, r.a, r.weight, r.b});
    }
  };
  // g on (y_star, z), f0 on (z, y_star + per), reduced mod the period.
  if (z <= per) {
    add_piece(g, y_star, z);
    add_piece(f0, z, per);
    add_piece(f0, 0.0, y_star);
  } else {
    add_piece(g, y_star, per);
    add_piece(g, 0.0, z - per);
    add_piece(f0, z - per, y_star);
  }
  std::sort(mix.runs.begin(), mix.runs.end(),
            [](const SlopeRun& a, const SlopeRun& b) {
              return a.span.lo < b.span.lo;
            });
  rep = verify_metric_solution(mix, H, V, delta, 1e-9,
                               VerifyMode::Subsolution);
  require(rep.pass, "subsolution_residual",
          "neither the blend nor the pinned mixture is admissible");
  return mix;
}

}  // namespace hjhom
