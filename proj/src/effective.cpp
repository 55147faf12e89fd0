#include "hjhom/effective.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

namespace hjhom {

namespace {

constexpr double kWidthTiny = 1e-12;

bool near_inf(double x) { return std::abs(x) >= kInf / 2; }

// Root of a monotone nondecreasing f with f(a) <= 0 <= f(b), by Illinois
// false position (one step exact on affine stretches, bisection fallback
// when the secant leaves the bracket).
double illinois_root(const std::function<double(double)>& f, double a,
                     double fa, double b, double fb, double xtol) {
  if (fa >= 0.0) return a;
  if (fb <= 0.0) return b;
  int side = 0;
  double x = 0.5 * (a + b);
  for (int it = 0; it < 200; ++it) {
    if (b - a <= xtol * (1.0 + std::abs(x))) break;
    x = (a * fb - b * fa) / (fb - fa);
    if (!(x > a && x < b)) x = 0.5 * (a + b);
    double fx = f(x);
    if (fx == 0.0) return x;
    if (fx < 0.0) {
      a = x;
      fa = fx;
      if (side < 0) fb *= 0.5;
      side = -1;
    } else {
      b = x;
      fb = fx;
      if (side > 0) fa *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (a + b);
}

double clamped_inverse(const PiecewiseMonotoneHamiltonian& H, BranchId id,
                       double v) {
  const Branch& b = H.branch(id);
  if (v < b.values.lo) v = b.values.lo;
  if (v > b.values.hi) v = b.values.hi;
  return H.branch_inverse(id, v);
}

}  // namespace

ExpectedValue branch_average(const PiecewiseMonotoneHamiltonian& H,
                             BranchId id, const PotentialModel& V, double mu,
                             const CorrectorOptions& opt) {
  const Branch& b = H.branch(id);
  std::vector<double> cuts;
  if (V.periodic()) {
    // The integrand psi(mu - V(y)) kinks where mu - V(y) crosses an interior
    // section joint of the branch; split the quadrature there.
    for (std::size_t i = 0; i + 1 < b.secs.size(); ++i) {
      double vj = b.eval(b.secs[i].dom.hi);
      double c = mu - vj;  // V(y) = c at the kink
      if (c > -V.oscillation() + 1e-12 && c < -1e-12) {
        for (double y : V.level_crossings({0.0, 1.0}, c)) cuts.push_back(y);
      }
    }
    std::sort(cuts.begin(), cuts.end());
  }
  auto g = [&](double v) { return clamped_inverse(H, id, mu - v); };
  return V.expected_functional(g, cuts, opt.random_cells);
}

double invert_branch_equation(const PiecewiseMonotoneHamiltonian& H,
                              BranchId id, const PotentialModel& V, double p,
                              const EffectiveOptions& opt) {
  const Branch& b = H.branch(id);
  double mbar = V.oscillation();
  double mu_lo = b.values.lo;
  double mu_hi = near_inf(b.values.hi) ? kInf : b.values.hi - mbar;
  require(mu_hi >= mu_lo - 1e-12, "invert_range",
          "branch value range narrower than the oscillation");
  auto avg = [&](double mu) {
    return branch_average(H, id, V, mu, opt.corrector).value;
  };
  double sg = b.increasing ? 1.0 : -1.0;
  auto f = [&](double mu) { return sg * (avg(mu) - p); };
  double slack = 1e-9 * (1.0 + std::abs(p));
  double fa = f(mu_lo);
  require(fa <= slack, "invert_range", "momentum below the branch range");
  if (fa >= 0.0) return mu_lo;
  double hi;
  if (near_inf(mu_hi)) {
    double step = 1.0 + std::abs(p);
    hi = mu_lo + step;
    int guard = 0;
    while (f(hi) < 0.0) {
      require(++guard <= 80, "invert_range",
              "failed to bracket the level on the coercive tail");
      step *= 2.0;
      hi = mu_lo + step;
    }
  } else {
    hi = mu_hi;
    require(f(hi) >= -slack, "invert_range",
            "momentum above the branch range");
    if (f(hi) <= 0.0) return mu_hi;
  }
  double mu =
      illinois_root(f, mu_lo, f(mu_lo), hi, f(hi),
                    std::max(opt.invert_tol, 1e-14));
  require(std::abs(avg(mu) - p) <= 1e-10 * (1.0 + std::abs(p)),
          "invert_range", "branch equation residual above 1e-10");
  return mu;
}

// ---------------------------------------------------------------------------
// EffectiveCurve

struct EffectiveCurve::Cache {
  std::mutex mu;
  std::unordered_map<uint64_t, double> values;
};

namespace {

// Solve one segment's defining relation at momentum p.
double eval_segment(const CurveSegment& s, double p) {
  if (s.kind == SegmentKind::Flat) return s.level;
  double t = s.sign * p - s.dp;
  double vmin = std::min(s.v_lo, s.v_hi);
  double vmax = std::max(s.v_lo, s.v_hi);
  double a = vmin - s.dv;  // lower level bracket (curve values are finite
                           // below, only tails are unbounded above)
  if (s.kind == SegmentKind::Swept) {
    double b = vmax - s.dv;
    auto f = [&](double g) {
      Interval I = flat_interval(*s.src, *s.model, g, s.copt).span;
      if (t < I.lo) return I.lo - t;
      if (t > I.hi) return I.hi - t;
      return 0.0;
    };
    double fa = f(a);
    if (fa >= 0.0) return a + s.dv;
    double fb = f(b);
    if (fb <= 0.0) return b + s.dv;
    return illinois_root(f, a, fa, b, fb, 1e-11) + s.dv;
  }
  const Branch& br = s.src->branch(s.branch);
  double sg = br.increasing ? 1.0 : -1.0;
  auto f = [&](double g) {
    return sg * (branch_average(*s.src, s.branch, *s.model, g, s.copt).value -
                 t);
  };
  double b;
  if (near_inf(vmax)) {
    double step = 1.0 + std::abs(t);
    b = a + step;
    int guard = 0;
    while (f(b) < 0.0) {
      require(++guard <= 80, "invert_range",
              "implicit segment failed to bracket its level");
      step *= 2.0;
      b = a + step;
    }
  } else {
    b = vmax - s.dv + 1e-9 * (1.0 + std::abs(vmax));
  }
  a -= 1e-9 * (1.0 + std::abs(a));
  return illinois_root(f, a, f(a), b, f(b), 1e-12) + s.dv;
}

double seg_value_lo(const CurveSegment& s) {
  return s.kind == SegmentKind::Flat ? s.level : s.v_lo;
}

double seg_value_hi(const CurveSegment& s) {
  return s.kind == SegmentKind::Flat ? s.level : s.v_hi;
}

}  // namespace

EffectiveCurve::EffectiveCurve(std::vector<CurveSegment> segs)
    : segs_(std::move(segs)), cache_(std::make_shared<Cache>()) {
  require(!segs_.empty(), "curve_segments", "curve with no segments");
  std::stable_sort(segs_.begin(), segs_.end(),
                   [](const CurveSegment& x, const CurveSegment& y) {
                     return x.span.lo < y.span.lo;
                   });
  std::vector<CurveSegment> keep;
  keep.reserve(segs_.size());
  for (auto& s : segs_) {
    if (!near_inf(s.span.lo) && !near_inf(s.span.hi) &&
        s.span.width() <= kWidthTiny * (1.0 + std::abs(s.span.lo))) {
      continue;  // zero-width piece
    }
    keep.push_back(std::move(s));
  }
  require(!keep.empty(), "curve_segments", "curve with no segments");
  require(keep.front().span.lo <= -kInf / 2 && keep.back().span.hi >= kInf / 2,
          "curve_cover", "curve does not cover the momentum line");
  for (std::size_t i = 1; i < keep.size(); ++i) {
    double gap = keep[i].span.lo - keep[i - 1].span.hi;
    require(std::abs(gap) <= 1e-7 * (1.0 + std::abs(keep[i].span.lo)),
            "curve_gap", "segments do not tile the momentum line");
    keep[i].span.lo = keep[i - 1].span.hi;
  }
  for (std::size_t i = 1; i < keep.size(); ++i) {
    double lv = seg_value_hi(keep[i - 1]);
    double rv = seg_value_lo(keep[i]);
    require(std::abs(lv - rv) <= 1e-6 * (1.0 + std::abs(lv)),
            "curve_continuity", "segment values disagree at a boundary");
    // Snap the stored knot values together so brackets stay consistent.
    if (keep[i - 1].kind == SegmentKind::Flat &&
        keep[i].kind != SegmentKind::Flat) {
      keep[i].v_lo = keep[i - 1].level;
    } else if (keep[i].kind == SegmentKind::Flat &&
               keep[i - 1].kind != SegmentKind::Flat) {
      keep[i - 1].v_hi = keep[i].level;
    } else if (keep[i - 1].kind != SegmentKind::Flat) {
      double mid = 0.5 * (lv + rv);
      keep[i - 1].v_hi = mid;
      keep[i].v_lo = mid;
    }
  }
  for (const auto& s : keep) {
    double m = s.kind == SegmentKind::Flat ? s.level
                                           : std::min(s.v_lo, s.v_hi);
    require(m >= -1e-10, "curve_nonnegative",
            "effective Hamiltonian dips below zero");
  }
  segs_ = std::move(keep);
}

const CurveSegment& EffectiveCurve::segment_at(double p) const {
  require(!segs_.empty(), "curve_segments", "query on an empty curve");
  auto it = std::upper_bound(
      segs_.begin(), segs_.end(), p,
      [](double x, const CurveSegment& s) { return x < s.span.hi; });
  if (it == segs_.end()) --it;
  return *it;
}

double EffectiveCurve::evaluate(double p) const {
  uint64_t key = 0;
  std::memcpy(&key, &p, sizeof(double));
  if (cache_) {
    std::lock_guard<std::mutex> lk(cache_->mu);
    auto it = cache_->values.find(key);
    if (it != cache_->values.end()) return it->second;
  }
  double v = eval_segment(segment_at(p), p);
  if (cache_) {
    std::lock_guard<std::mutex> lk(cache_->mu);
    cache_->values.emplace(key, v);
  }
  return v;
}

EffectiveCurve EffectiveCurve::shifted(double dp, double dv) const {
  std::vector<CurveSegment> out = segs_;
  for (auto& s : out) {
    if (!near_inf(s.span.lo)) s.span.lo += dp;
    if (!near_inf(s.span.hi)) s.span.hi += dp;
    if (s.kind == SegmentKind::Flat) {
      s.level += dv;
      continue;
    }
    s.dp += s.sign * dp;
    s.dv += dv;
    if (!near_inf(s.v_lo)) s.v_lo += dv;
    if (!near_inf(s.v_hi)) s.v_hi += dv;
  }
  return EffectiveCurve(std::move(out));
}

EffectiveCurve EffectiveCurve::mirrored() const {
  std::vector<CurveSegment> out;
  out.reserve(segs_.size());
  for (auto it = segs_.rbegin(); it != segs_.rend(); ++it) {
    CurveSegment s = *it;
    double lo = s.span.lo, hi = s.span.hi;
    s.span = {near_inf(hi) ? -kInf : -hi, near_inf(lo) ? kInf : -lo};
    std::swap(s.v_lo, s.v_hi);
    if (s.kind != SegmentKind::Flat) s.sign = -s.sign;
    out.push_back(std::move(s));
  }
  return EffectiveCurve(std::move(out));
}

double EffectiveCurve::max_boundary_mismatch() const {
  double worst = 0.0;
  for (std::size_t i = 1; i < segs_.size(); ++i) {
    double b = segs_[i].span.lo;
    double lv = eval_segment(segs_[i - 1], b);
    double rv = eval_segment(segs_[i], b);
    worst = std::max(worst, std::abs(lv - rv));
  }
  return worst;
}

std::string EffectiveCurve::to_json() const {
  nlohmann::json j;
  j["segments"] = nlohmann::json::array();
  for (const auto& s : segs_) {
    nlohmann::json e;
    e["kind"] = s.kind == SegmentKind::Flat
                    ? "flat"
                    : (s.kind == SegmentKind::Implicit ? "implicit" : "swept");
    e["span"] = {s.span.lo, s.span.hi};
    e["provenance"] = s.provenance;
    if (s.kind == SegmentKind::Flat) {
      e["level"] = s.level;
    } else {
      e["v_lo"] = s.v_lo;
      e["v_hi"] = s.v_hi;
      e["sign"] = s.sign;
      e["dp"] = s.dp;
      e["dv"] = s.dv;
      if (s.kind == SegmentKind::Implicit) {
        e["branch"] = {{"side", s.branch.side == Side::Left ? "left" : "right"},
                       {"index", s.branch.index}};
      }
    }
    j["segments"].push_back(e);
  }
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Direct constructions

namespace {

CurveSegment make_flat(double lo, double hi, double level, std::string prov) {
  CurveSegment s;
  s.kind = SegmentKind::Flat;
  s.span = {lo, hi};
  s.level = level;
  s.provenance = std::move(prov);
  return s;
}

CurveSegment make_implicit(const HamiltonianPtr& H, const PotentialModelPtr& V,
                           BranchId id, double lo, double hi, double v_lo,
                           double v_hi, const CorrectorOptions& copt,
                           std::string prov) {
  CurveSegment s;
  s.kind = SegmentKind::Implicit;
  s.span = {lo, hi};
  s.src = H;
  s.model = V;
  s.branch = id;
  s.v_lo = v_lo;
  s.v_hi = v_hi;
  s.copt = copt;
  s.provenance = std::move(prov);
  return s;
}

CurveSegment make_swept(const HamiltonianPtr& H, const PotentialModelPtr& V,
                        double lo, double hi, double v_lo, double v_hi,
                        const CorrectorOptions& copt, std::string prov) {
  CurveSegment s;
  s.kind = SegmentKind::Swept;
  s.span = {lo, hi};
  s.src = H;
  s.model = V;
  s.v_lo = v_lo;
  s.v_hi = v_hi;
  s.copt = copt;
  s.provenance = std::move(prov);
  return s;
}

}  // namespace

EffectiveCurve effective_quasiconvex(const HamiltonianPtr& H,
                                     const PotentialModelPtr& V,
                                     const EffectiveOptions& opt) {
  require(H->quasiconvex(), "quasiconvex_precondition",
          "effective_quasiconvex needs L = Lt = 0");
  const CorrectorOptions& copt = opt.corrector;
  double q0 = branch_average(*H, {Side::Right, 1}, *V, 0.0, copt).value;
  double qm1 = branch_average(*H, {Side::Left, 1}, *V, 0.0, copt).value;
  require(qm1 <= q0 + 1e-12, "quasiconvex_order",
          "q_{-1} exceeds q_0 in the quasiconvex construction");
  std::vector<CurveSegment> segs;
  segs.push_back(make_implicit(H, V, {Side::Left, 1}, -kInf, qm1, kInf, 0.0,
                               copt, "quasiconvex left branch"));
  segs.push_back(make_flat(qm1, q0, 0.0, "quasiconvex flat"));
  segs.push_back(make_implicit(H, V, {Side::Right, 1}, q0, kInf, 0.0, kInf,
                               copt, "quasiconvex branch psi_1"));
  return EffectiveCurve(std::move(segs));
}

EffectiveCurve effective_small_osc(const HamiltonianPtr& H,
                                   const PotentialModelPtr& V,
                                   const EffectiveOptions& opt) {
  require(H->left_well_count() == 0, "small_osc_precondition",
          "effective_small_osc needs Lt = 0");
  auto cv = H->critical_values(Side::Right);
  int L = static_cast<int>(cv.count());
  if (L == 0) return effective_quasiconvex(H, V, opt);
  double mbar = V->oscillation();
  for (int k = 1; k <= L; ++k) {
    double Mk = cv.peaks[k - 1];
    double mk = cv.wells[k - 1];
    double m_next = k < L ? cv.wells[k] : 0.0;
    require(mbar < Mk - mk && mbar < Mk - m_next, "small_osc_precondition",
            "oscillation too large for the small-oscillation formulas");
  }
  const CorrectorOptions& copt = opt.corrector;
  auto avg = [&](int j, double mu) {
    return branch_average(*H, {Side::Right, j}, *V, mu, copt).value;
  };
  double q0 = avg(2 * L + 1, 0.0);
  double qm1 = branch_average(*H, {Side::Left, 1}, *V, 0.0, copt).value;

  std::vector<CurveSegment> segs;
  segs.push_back(make_implicit(H, V, {Side::Left, 1}, -kInf, qm1, kInf, 0.0,
                               copt, "small-osc left branch"));
  segs.push_back(make_flat(qm1, q0, 0.0, "small-osc flat 0"));
  double prev_p = q0;
  double prev_v = 0.0;
  for (int k = L; k >= 1; --k) {
    double Mk = cv.peaks[k - 1];
    double mk = cv.wells[k - 1];
    double peak_level = Mk - mbar;
    double pm_2k = avg(2 * k + 1, peak_level);   // p^-_{2k}
    double pp_2k = avg(2 * k, peak_level);       // p^+_{2k}
    double pm_2k1 = avg(2 * k, mk);              // p^-_{2k-1}
    double pp_2k1 = avg(2 * k - 1, mk);          // p^+_{2k-1}
    require(prev_p <= pm_2k + 1e-10 && pm_2k <= pp_2k + 1e-10 &&
                pp_2k <= pm_2k1 + 1e-10 && pm_2k1 <= pp_2k1 + 1e-10,
            "small_osc_order", "breakpoints out of order");
    std::string kk = std::to_string(k);
    segs.push_back(make_implicit(H, V, {Side::Right, 2 * k + 1}, prev_p, pm_2k,
                                 prev_v, peak_level, copt,
                                 "small-osc branch psi_" +
                                     std::to_string(2 * k + 1)));
    segs.push_back(make_flat(pm_2k, pp_2k, peak_level,
                             "small-osc flat M_" + kk + " - mbar"));
    segs.push_back(make_implicit(H, V, {Side::Right, 2 * k}, pp_2k, pm_2k1,
                                 peak_level, mk, copt,
                                 "small-osc branch psi_" +
                                     std::to_string(2 * k)));
    segs.push_back(make_flat(pm_2k1, pp_2k1, mk, "small-osc flat m_" + kk));
    prev_p = pp_2k1;
    prev_v = mk;
  }
  segs.push_back(make_implicit(H, V, {Side::Right, 1}, prev_p, kInf, prev_v,
                               kInf, copt, "small-osc branch psi_1"));
  return EffectiveCurve(std::move(segs));
}

EffectiveCurve effective_large_osc(const HamiltonianPtr& H,
                                   const PotentialModelPtr& V,
                                   const EffectiveOptions& opt) {
  require(H->left_well_count() == 0, "large_osc_precondition",
          "effective_large_osc needs Lt = 0");
  auto cv = H->critical_values(Side::Right);
  if (cv.count() == 0) return effective_quasiconvex(H, V, opt);
  double mbar = V->oscillation();
  require(mbar >= cv.gap() - 1e-12, "large_osc_precondition",
          "oscillation below the critical gap");
  const CorrectorOptions& copt = opt.corrector;
  double Mmax = cv.max_peak();

  auto zb = zero_slope_bounds(*H, *V, copt);
  double qm1 = zb.first.value;
  auto I0 = flat_interval(*H, *V, 0.0, copt);
  require(std::abs(I0.span.lo - zb.second.value) <=
              1e-6 * (1.0 + std::abs(I0.span.lo)),
          "large_osc_q0", "flat interval at 0 disagrees with q_0");

  // Resonant levels: critical values and their oscillation offsets inside
  // (0, M_max); flats can only sit there.
  struct Candidate {
    double level;
    std::string name;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < cv.count(); ++i) {
    std::string ki = std::to_string(i + 1);
    cands.push_back({cv.wells[i], "m_" + ki});
    cands.push_back({cv.peaks[i], "M_" + ki});
    cands.push_back({cv.wells[i] - mbar, "m_" + ki + " - mbar"});
    cands.push_back({cv.peaks[i] - mbar, "M_" + ki + " - mbar"});
  }
  std::sort(cands.begin(), cands.end(),
            [](const Candidate& a, const Candidate& b) {
              return a.level < b.level;
            });
  std::vector<Candidate> levels;
  for (const auto& c : cands) {
    if (c.level <= opt.tol || c.level >= Mmax - 1e-12) continue;
    if (!levels.empty() &&
        std::abs(c.level - levels.back().level) <=
            1e-12 * (1.0 + std::abs(c.level))) {
      continue;
    }
    levels.push_back(c);
  }

  struct FlatPiece {
    double level;
    Interval span;
    std::string name;
  };
  std::vector<FlatPiece> flats;
  for (const auto& c : levels) {
    auto F = flat_interval(*H, *V, c.level, copt);
    if (!F.is_point && F.span.width() > 1e-7) {
      flats.push_back({c.level, F.span, c.name});
    }
  }

  std::vector<CurveSegment> segs;
  segs.push_back(make_implicit(H, V, {Side::Left, 1}, -kInf, qm1, kInf, 0.0,
                               copt, "large-osc left branch"));
  segs.push_back(make_flat(qm1, I0.span.hi, 0.0, "large-osc flat 0"));
  double cursor_p = I0.span.hi;
  double cursor_mu = 0.0;
  for (const auto& fp : flats) {
    double lo = fp.span.lo;
    require(lo >= cursor_p - 1e-7 * (1.0 + std::abs(lo)), "large_osc_order",
            "flat pieces overlap in the staircase");
    lo = std::max(lo, cursor_p);
    if (lo > cursor_p + kWidthTiny) {
      segs.push_back(make_swept(H, V, cursor_p, lo, cursor_mu, fp.level, copt,
                                "large-osc swept"));
    }
    segs.push_back(
        make_flat(lo, fp.span.hi, fp.level, "large-osc flat " + fp.name));
    cursor_p = fp.span.hi;
    cursor_mu = fp.level;
  }
  double p_tail = branch_average(*H, {Side::Right, 1}, *V, Mmax, copt).value;
  require(p_tail >= cursor_p - 1e-7 * (1.0 + std::abs(p_tail)),
          "large_osc_order", "monotone tail starts before the last flat");
  p_tail = std::max(p_tail, cursor_p);
  if (p_tail > cursor_p + kWidthTiny) {
    segs.push_back(make_swept(H, V, cursor_p, p_tail, cursor_mu, Mmax, copt,
                              "large-osc swept"));
  }
  segs.push_back(make_implicit(H, V, {Side::Right, 1}, p_tail, kInf, Mmax,
                               kInf, copt, "large-osc branch psi_1"));

  // Validation sweep: the slope-average intervals must form a monotone
  // staircase in mu.
  Interval prev = {-kInf, -kInf};
  for (int i = 1; i <= opt.sweep_points; ++i) {
    double mu = Mmax * i / (opt.sweep_points + 1);
    auto F = flat_interval(*H, *V, mu, copt);
    require(F.span.lo >= prev.lo - 1e-9 && F.span.hi >= prev.hi - 1e-9,
            "large_osc_staircase", "slope-average staircase not monotone");
    prev = F.span;
  }
  return EffectiveCurve(std::move(segs));
}

// ---------------------------------------------------------------------------
// Pointwise minimum and the combination lemmas

namespace {

// Append the restriction of `c` to [a, b] (trimmed segments, endpoint values
// re-solved at the cuts).
void append_restricted(std::vector<CurveSegment>& out, const EffectiveCurve& c,
                       double a, double b) {
  for (const auto& s : c.segments()) {
    double lo = std::max(s.span.lo, a);
    double hi = std::min(s.span.hi, b);
    if (hi <= lo) continue;
    if (!near_inf(lo) && !near_inf(hi) &&
        hi - lo <= kWidthTiny * (1.0 + std::abs(lo))) {
      continue;
    }
    CurveSegment t = s;
    t.span = {lo, hi};
    if (t.kind != SegmentKind::Flat) {
      if (lo != s.span.lo) t.v_lo = c.evaluate(lo);
      if (hi != s.span.hi) t.v_hi = c.evaluate(hi);
    }
    out.push_back(std::move(t));
  }
}

bool mergeable(const CurveSegment& x, const CurveSegment& y) {
  if (x.kind != y.kind) return false;
  if (x.kind == SegmentKind::Flat) {
    return std::abs(x.level - y.level) <= 1e-12 * (1.0 + std::abs(x.level));
  }
  return x.src.get() == y.src.get() && x.model.get() == y.model.get() &&
         x.branch.side == y.branch.side && x.branch.index == y.branch.index &&
         x.sign == y.sign && x.dp == y.dp && x.dv == y.dv &&
         x.provenance == y.provenance;
}

std::vector<CurveSegment> merge_adjacent(std::vector<CurveSegment> in) {
  std::vector<CurveSegment> out;
  for (auto& s : in) {
    if (!out.empty() && mergeable(out.back(), s) &&
        std::abs(out.back().span.hi - s.span.lo) <=
            1e-9 * (1.0 + std::abs(s.span.lo))) {
      out.back().span.hi = s.span.hi;
      out.back().v_hi = s.v_hi;
      continue;
    }
    out.push_back(std::move(s));
  }
  return out;
}

EffectiveCurve pointwise_min(const EffectiveCurve& A, const EffectiveCurve& B) {
  std::vector<double> ks;
  auto add_knots = [&](const EffectiveCurve& c) {
    for (const auto& s : c.segments()) {
      if (!near_inf(s.span.lo)) ks.push_back(s.span.lo);
      if (!near_inf(s.span.hi)) ks.push_back(s.span.hi);
    }
  };
  add_knots(A);
  add_knots(B);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end(),
                       [](double x, double y) {
                         return std::abs(x - y) <= 1e-12 * (1.0 + std::abs(x));
                       }),
           ks.end());
  require(!ks.empty(), "min_segments", "minimum of curves without knots");

  auto d = [&](double p) { return A.evaluate(p) - B.evaluate(p); };
  auto tie_tol = [](double p) { return 1e-11 * (1.0 + std::abs(p)); };

  std::vector<double> bps = ks;
  auto scan = [&](double a, double b, int n) {
    double prev_x = a;
    double prev_d = d(a);
    for (int j = 1; j <= n; ++j) {
      double x = a + (b - a) * j / n;
      double dx = d(x);
      double tt = std::max(tie_tol(prev_d), tie_tol(dx));
      if ((prev_d > tt && dx < -tt) || (prev_d < -tt && dx > tt)) {
        bps.push_back(find_root(d, prev_x, x, 1e-13));
      }
      prev_x = x;
      prev_d = dx;
    }
  };
  for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
    if (ks[i + 1] - ks[i] <= 1e-12 * (1.0 + std::abs(ks[i]))) continue;
    scan(ks[i], ks[i + 1], 17);
  }
  // Tail probes: beyond the outermost knots both curves are single monotone
  // pieces whose difference eventually keeps one sign (a coercive-tail slope
  // always separates them); doubling probes catch the last crossing.
  double left_probe = ks.front();
  {
    double prev_x = ks.front();
    double prev_d = d(prev_x);
    double step = 1.0 + 0.125 * std::abs(prev_x);
    for (int it = 0; it < 24; ++it) {
      double x = ks.front() - step;
      double dx = d(x);
      double tt = std::max(tie_tol(prev_d), tie_tol(dx));
      if ((prev_d > tt && dx < -tt) || (prev_d < -tt && dx > tt)) {
        bps.push_back(find_root(d, x, prev_x, 1e-13));
      }
      prev_x = x;
      prev_d = dx;
      step *= 2.0;
    }
    left_probe = prev_x;
  }
  double right_probe = ks.back();
  {
    double prev_x = ks.back();
    double prev_d = d(prev_x);
    double step = 1.0 + 0.125 * std::abs(prev_x);
    for (int it = 0; it < 24; ++it) {
      double x = ks.back() + step;
      double dx = d(x);
      double tt = std::max(tie_tol(prev_d), tie_tol(dx));
      if ((prev_d > tt && dx < -tt) || (prev_d < -tt && dx > tt)) {
        bps.push_back(find_root(d, prev_x, x, 1e-13));
      }
      prev_x = x;
      prev_d = dx;
      step *= 2.0;
    }
    right_probe = prev_x;
  }
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end(),
                        [](double x, double y) {
                          return std::abs(x - y) <=
                                 1e-12 * (1.0 + std::abs(x));
                        }),
            bps.end());

  auto winner = [&](double p) -> const EffectiveCurve& {
    return d(p) <= 0.0 ? A : B;
  };
  std::vector<CurveSegment> out;
  append_restricted(out, winner(left_probe), -kInf, bps.front());
  for (std::size_t i = 0; i + 1 < bps.size(); ++i) {
    double a = bps[i], b = bps[i + 1];
    if (b - a <= 1e-13 * (1.0 + std::abs(a))) continue;
    append_restricted(out, winner(0.5 * (a + b)), a, b);
  }
  append_restricted(out, winner(right_probe), bps.back(), kInf);
  return EffectiveCurve(merge_adjacent(std::move(out)));
}

}  // namespace

EffectiveCurve glue_minimum(const EffectiveCurve& plus,
                            const EffectiveCurve& minus) {
  return pointwise_min(plus, minus);
}

EffectiveCurve combine_left(const EffectiveCurve& c1,
                            const EffectiveCurve& c2) {
  return pointwise_min(c1, c2);
}

EffectiveCurve combine_right(const EffectiveCurve& c1, const EffectiveCurve& c2,
                             double peak_value, double mbar, double p_cut) {
  double level = peak_value - mbar;
  require(p_cut >= -1e-12, "combine_right_cut",
          "combine_right needs a nonnegative zone boundary");
  EffectiveCurve m0 = pointwise_min(c1, c2);
  CurveSegment clamp_seg =
      make_flat(-kInf, kInf, level, "clamp M_k - mbar");
  EffectiveCurve clamped =
      pointwise_min(m0, EffectiveCurve({clamp_seg}));
  // Zone-boundary continuity (the lemma guarantees it; a violation means the
  // carved pieces are inconsistent).
  double g0 = std::abs(c1.evaluate(0.0) - clamped.evaluate(0.0));
  double g1 = std::abs(c2.evaluate(p_cut) - clamped.evaluate(p_cut));
  require(g0 <= 1e-6 && g1 <= 1e-6, "combine_right_continuity",
          "zone values disagree at a combine_right boundary");
  std::vector<CurveSegment> out;
  append_restricted(out, c1, -kInf, 0.0);
  append_restricted(out, clamped, 0.0, p_cut);
  append_restricted(out, c2, p_cut, kInf);
  return EffectiveCurve(merge_adjacent(std::move(out)));
}

// ---------------------------------------------------------------------------
// The surgery recursion

namespace {

EffectiveCurve compute_impl(const HamiltonianPtr& H, const PotentialModelPtr& V,
                            const EffectiveOptions& opt, int depth);

EffectiveCurve one_sided_curve(const HamiltonianPtr& G,
                               const PotentialModelPtr& V,
                               const EffectiveOptions& opt, int depth) {
  require(depth >= 0, "recursion_depth",
          "surgery recursion exceeded its depth budget");
  require(G->left_well_count() == 0, "one_sided",
          "one-sided reduction on a Hamiltonian with left wells");
  if (G->right_well_count() == 0) return effective_quasiconvex(G, V, opt);
  auto cv = G->critical_values(Side::Right);
  if (V->oscillation() >= cv.gap()) return effective_large_osc(G, V, opt);
  CarveResult cr = G->carve();
  int before = G->right_well_count() + G->left_well_count();
  int after1 = cr.h1->right_well_count() + cr.h1->left_well_count();
  int after2 = cr.h2->right_well_count() + cr.h2->left_well_count();
  require(after1 < before && after2 < before, "carve_reduction",
          "carving did not reduce the bump count");
  EffectiveCurve c1 = one_sided_curve(cr.h1, V, opt, depth - 1);
  EffectiveCurve c2 =
      compute_impl(cr.h2, V, opt, depth - 1).shifted(cr.p_shift, cr.v_shift);
  if (cr.right_steep) {
    return combine_right(c1, c2, cr.carve_value, V->oscillation(), cr.p_shift);
  }
  return combine_left(c1, c2);
}

EffectiveCurve compute_impl(const HamiltonianPtr& H, const PotentialModelPtr& V,
                            const EffectiveOptions& opt, int depth) {
  require(depth >= 0, "recursion_depth",
          "surgery recursion exceeded its depth budget");
  if (H->quasiconvex()) return effective_quasiconvex(H, V, opt);
  auto halves = H->split_at_zero();
  EffectiveCurve cp = one_sided_curve(halves.first, V, opt, depth - 1);
  EffectiveCurve cm =
      one_sided_curve(halves.second->reflect(), V, opt, depth - 1).mirrored();
  return glue_minimum(cp, cm);
}

}  // namespace

EffectiveCurve compute_effective(const HamiltonianPtr& H,
                                 const PotentialModelPtr& V,
                                 const EffectiveOptions& opt) {
  int budget =
      2 * (H->right_well_count() + H->left_well_count()) + 2;
  return compute_impl(H, V, opt, budget);
}

bool quasiconvex_on_grid(const EffectiveCurve& curve, double lo, double hi,
                         int n, double tol) {
  require(n >= 3 && hi > lo, "probe_grid", "degenerate probe grid");
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    v[i] = curve.evaluate(lo + (hi - lo) * i / (n - 1));
  }
  for (int i = 1; i + 1 < n; ++i) {
    if (v[i] > v[i - 1] + tol && v[i] > v[i + 1] + tol) return false;
  }
  return true;
}

}  // namespace hjhom
