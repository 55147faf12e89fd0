#include "hjhom/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace hjhom {

namespace {
constexpr double kTieTol = 1e-12;

double finite_or(double x, double fallback) {
  return (x <= -kInf || x >= kInf) ? fallback : x;
}
}  // namespace

// ---------------------------------------------------------------------------
// Section

double Section::eval(double p) const {
  if (affine) return anchor_v + slope * (p - anchor_p);
  // Monotone cubic Hermite on the located cell.
  std::size_t n = ps.size();
  if (p <= ps.front()) return vs.front();
  if (p >= ps.back()) return vs.back();
  std::size_t i =
      std::upper_bound(ps.begin(), ps.end(), p) - ps.begin() - 1;
  if (i >= n - 1) i = n - 2;
  double h = ps[i + 1] - ps[i];
  double t = (p - ps[i]) / h;
  double t2 = t * t, t3 = t2 * t;
  double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * vs[i] + h10 * h * ms[i] + h01 * vs[i + 1] + h11 * h * ms[i + 1];
}

double Section::inverse(double v) const {
  if (affine) return anchor_p + (v - anchor_v) / slope;
  double a = ps.front(), b = ps.back();
  double va = vs.front(), vb = vs.back();
  bool inc = vb > va;
  double lo = inc ? va : vb, hi = inc ? vb : va;
  if (v <= lo) return inc ? a : b;
  if (v >= hi) return inc ? b : a;
  // Bisection; the section is monotone by construction.
  for (int iter = 0; iter < 200 && b - a > 1e-14 * (1.0 + std::abs(a) + std::abs(b));
       ++iter) {
    double m = 0.5 * (a + b);
    double vm = eval(m);
    if ((vm < v) == inc)
      a = m;
    else
      b = m;
  }
  return 0.5 * (a + b);
}

double Section::value_lo() const {
  if (affine) {
    if (dom.lo <= -kInf) return slope < 0 ? kInf : -kInf;
    return anchor_v + slope * (dom.lo - anchor_p);
  }
  return vs.front();
}

double Section::value_hi() const {
  if (affine) {
    if (dom.hi >= kInf) return slope > 0 ? kInf : -kInf;
    return anchor_v + slope * (dom.hi - anchor_p);
  }
  return vs.back();
}

double Section::max_abs_slope() const {
  if (affine) return std::abs(slope);
  double best = 0.0;
  for (std::size_t i = 0; i + 1 < ps.size(); ++i) {
    double d = std::abs((vs[i + 1] - vs[i]) / (ps[i + 1] - ps[i]));
    best = std::max(best, 3.0 * d);  // Fritsch-Carlson derivative bound
  }
  for (double m : ms) best = std::max(best, std::abs(m));
  return best;
}

void Section::prepare() {
  if (affine) return;
  std::size_t n = ps.size();
  require(n >= 2, "monotone_section", "table section needs >= 2 points");
  for (std::size_t i = 0; i + 1 < n; ++i)
    require(ps[i + 1] > ps[i], "monotone_section",
            "table momenta must be strictly increasing");
  bool inc = vs[1] > vs[0];
  for (std::size_t i = 0; i + 1 < n; ++i)
    require((vs[i + 1] > vs[i]) == inc && vs[i + 1] != vs[i],
            "monotone_section", "table values must be strictly monotone");
  // Fritsch-Carlson slopes: start from three-point estimates, then limit.
  std::vector<double> delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i)
    delta[i] = (vs[i + 1] - vs[i]) / (ps[i + 1] - ps[i]);
  ms.assign(n, 0.0);
  ms[0] = delta[0];
  ms[n - 1] = delta[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) ms[i] = 0.5 * (delta[i - 1] + delta[i]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double a = ms[i] / delta[i], b = ms[i + 1] / delta[i];
    double s = a * a + b * b;
    if (s > 9.0) {
      double tau = 3.0 / std::sqrt(s);
      ms[i] = tau * a * delta[i];
      ms[i + 1] = tau * b * delta[i];
    }
  }
  dom = {ps.front(), ps.back()};
}

Section Section::make_affine(Interval dom, double anchor_p, double anchor_v,
                             double slope) {
  Section s;
  s.dom = dom;
  s.affine = true;
  s.anchor_p = anchor_p;
  s.anchor_v = anchor_v;
  s.slope = slope;
  return s;
}

Section Section::make_table(std::vector<double> ps, std::vector<double> vs) {
  Section s;
  s.affine = false;
  s.ps = std::move(ps);
  s.vs = std::move(vs);
  s.prepare();
  return s;
}

// ---------------------------------------------------------------------------
// Branch

double Branch::eval(double p) const {
  for (std::size_t i = 0; i + 1 < secs.size(); ++i)
    if (p <= secs[i].dom.hi) return secs[i].eval(p);
  return secs.back().eval(p);
}

double Branch::inverse(double v) const {
  double scale = 1.0 + std::abs(values.lo) + std::abs(finite_or(values.hi, values.lo));
  require(v >= values.lo - 1e-9 * scale && v <= values.hi + 1e-9 * scale,
          "branch_domain", "branch_inverse: value outside branch range");
  v = std::min(std::max(v, values.lo), values.hi);
  // Sections are momentum-ordered; their value ranges tile [values.lo, values.hi].
  for (std::size_t i = 0; i + 1 < secs.size(); ++i) {
    double a = secs[i].value_lo(), b = secs[i].value_hi();
    if (v >= std::min(a, b) - 1e-15 && v <= std::max(a, b) + 1e-15)
      return secs[i].inverse(v);
  }
  return secs.back().inverse(v);
}

void Branch::finalize() {
  require(!secs.empty(), "schema", "branch with no sections");
  dom = {secs.front().dom.lo, secs.back().dom.hi};
  double v_left = secs.front().value_lo();
  double v_right = secs.back().value_hi();
  increasing = v_right > v_left;
  values = {std::min(v_left, v_right), std::max(v_left, v_right)};
  for (std::size_t i = 0; i + 1 < secs.size(); ++i) {
    require(std::abs(secs[i].dom.hi - secs[i + 1].dom.lo) < 1e-12,
            "continuity", "branch sections must be contiguous");
    double gap = std::abs(secs[i].value_hi() - secs[i + 1].value_lo());
    require(gap < 1e-9, "continuity", "branch sections must be continuous");
    require((secs[i].value_hi() > secs[i].value_lo()) == increasing,
            "alternation", "branch sections must share monotonicity");
  }
}

// ---------------------------------------------------------------------------
// PiecewiseMonotoneHamiltonian

PiecewiseMonotoneHamiltonian::PiecewiseMonotoneHamiltonian(
    std::vector<Branch> left, std::vector<Branch> right)
    : left_(std::move(left)), right_(std::move(right)) {
  finalize();
}

void PiecewiseMonotoneHamiltonian::finalize() {
  require(!left_.empty() && !right_.empty(), "schema",
          "need at least one branch per side");
  require(left_.size() % 2 == 1 && right_.size() % 2 == 1, "alternation",
          "each side needs an odd number of branches");

  for (auto& b : left_) b.finalize();
  for (auto& b : right_) b.finalize();

  // Right side: branch k (1-based index = position in right_) on
  // [p_k, p_{k-1}], k=1 outermost.  right_[0] holds the coercive tail.
  require(right_[0].dom.hi >= kInf, "coercivity",
          "outermost right branch must be unbounded");
  require(right_[0].secs.back().affine && right_[0].secs.back().slope > 0,
          "coercivity", "right tail must grow affinely");
  require(left_[0].dom.lo <= -kInf, "coercivity",
          "outermost left branch must be unbounded");
  require(left_[0].secs.front().affine && left_[0].secs.front().slope < 0,
          "coercivity", "left tail must grow affinely");

  require(std::abs(right_.back().dom.lo) < 1e-12, "breakpoint_at_zero",
          "innermost right branch must start at 0");
  require(std::abs(left_.back().dom.hi) < 1e-12, "breakpoint_at_zero",
          "innermost left branch must end at 0");

  for (std::size_t i = 0; i + 1 < right_.size(); ++i) {
    require(std::abs(right_[i].dom.lo - right_[i + 1].dom.hi) < 1e-12,
            "continuity", "right branches must be contiguous");
    double va = right_[i].eval(right_[i].dom.lo);
    double vb = right_[i + 1].eval(right_[i + 1].dom.hi);
    require(std::abs(va - vb) < 1e-9, "continuity",
            "right branches must agree at breakpoints");
  }
  for (std::size_t i = 0; i + 1 < left_.size(); ++i) {
    require(std::abs(left_[i].dom.hi - left_[i + 1].dom.lo) < 1e-12,
            "continuity", "left branches must be contiguous");
    double va = left_[i].eval(left_[i].dom.hi);
    double vb = left_[i + 1].eval(left_[i + 1].dom.lo);
    require(std::abs(va - vb) < 1e-9, "continuity",
            "left branches must agree at breakpoints");
  }

  // Alternation: odd right branches increase, even decrease; mirrored on the
  // left (odd decrease).
  for (std::size_t i = 0; i < right_.size(); ++i)
    require(right_[i].increasing == (i % 2 == 0), "alternation",
            "right branches must alternate starting increasing");
  for (std::size_t i = 0; i < left_.size(); ++i)
    require(left_[i].increasing == (i % 2 == 1), "alternation",
            "left branches must alternate starting decreasing");

  require(std::abs(left_.back().eval(0.0) - right_.back().eval(0.0)) < 1e-9,
          "continuity", "left and right sides must agree at p = 0");
  require(std::abs(evaluate(0.0)) < 1e-9, "normalization_min",
          "H(0) must equal 0");

  lipschitz_ = 0.0;
  for (const auto& b : left_)
    for (const auto& s : b.secs) lipschitz_ = std::max(lipschitz_, s.max_abs_slope());
  for (const auto& b : right_)
    for (const auto& s : b.secs) lipschitz_ = std::max(lipschitz_, s.max_abs_slope());

  // Interior breakpoint values must be positive (min only at 0) and critical
  // values pairwise distinct per side.
  auto check_side = [&](Side side) {
    CriticalValues cv = critical_values(side);
    std::vector<double> all;
    for (double m : cv.wells) {
      require(m > kTieTol, "normalization_min",
              "interior well depths must be positive");
      all.push_back(m);
    }
    for (double M : cv.peaks) all.push_back(M);
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i + 1 < all.size(); ++i)
      require(all[i + 1] - all[i] > kTieTol, "distinct_critical_values",
              "critical values on one side must be pairwise distinct");
  };
  check_side(Side::Right);
  check_side(Side::Left);
}

double PiecewiseMonotoneHamiltonian::evaluate(double p) const {
  const std::vector<Branch>& side = (p >= 0.0) ? right_ : left_;
  if (p >= 0.0) {
    // right_[k] covers [p_{k+1}, p_k]; scan from innermost.
    for (std::size_t i = side.size(); i-- > 0;)
      if (p <= side[i].dom.hi) return side[i].eval(p);
    return side[0].eval(p);
  }
  for (std::size_t i = side.size(); i-- > 0;)
    if (p >= side[i].dom.lo) return side[i].eval(p);
  return side[0].eval(p);
}

double PiecewiseMonotoneHamiltonian::right_breakpoint(int k) const {
  require(k >= 1 && k <= (int)right_.size(), "schema",
          "right breakpoint index out of range");
  return right_[k - 1].dom.lo;
}

double PiecewiseMonotoneHamiltonian::left_breakpoint(int k) const {
  require(k >= 1 && k <= (int)left_.size(), "schema",
          "left breakpoint index out of range");
  return left_[k - 1].dom.hi;
}

const Branch& PiecewiseMonotoneHamiltonian::branch(BranchId id) const {
  const auto& side = (id.side == Side::Right) ? right_ : left_;
  require(id.index >= 1 && id.index <= (int)side.size(), "schema",
          "branch index out of range");
  return side[id.index - 1];
}

double PiecewiseMonotoneHamiltonian::branch_inverse(BranchId id,
                                                    double v) const {
  return branch(id).inverse(v);
}

CriticalValues PiecewiseMonotoneHamiltonian::critical_values(Side side) const {
  const auto& branches = (side == Side::Right) ? right_ : left_;
  CriticalValues cv;
  int L = (int)(branches.size() - 1) / 2;
  for (int i = 1; i <= L; ++i) {
    // Wells sit at the shared end of branches 2i-1 and 2i, peaks at the
    // shared end of branches 2i and 2i+1; both read off as value extremes.
    cv.wells.push_back(branches[2 * i - 2].values.lo);
    cv.peaks.push_back(branches[2 * i - 1].values.hi);
  }
  return cv;
}

double CriticalValues::min_well() const {
  return wells.empty() ? kInf : *std::min_element(wells.begin(), wells.end());
}

double CriticalValues::max_peak() const {
  return peaks.empty() ? -kInf : *std::max_element(peaks.begin(), peaks.end());
}

RangeExtrema PiecewiseMonotoneHamiltonian::range_extrema(double a,
                                                         double b) const {
  if (a > b) std::swap(a, b);
  double lo = std::min(evaluate(a), evaluate(b));
  double hi = std::max(evaluate(a), evaluate(b));
  auto visit = [&](double bp) {
    if (bp > a && bp < b) {
      double v = evaluate(bp);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  for (const auto& br : left_) {
    visit(finite_or(br.dom.lo, a - 1.0));
    visit(br.dom.hi);
  }
  for (const auto& br : right_) {
    visit(br.dom.lo);
    visit(finite_or(br.dom.hi, a - 1.0));
  }
  return {lo, hi};
}

Interval PiecewiseMonotoneHamiltonian::core_span() const {
  double lo = finite_or(left_[0].dom.hi, -1.0);
  double hi = finite_or(right_[0].dom.lo, 1.0);
  return {lo, hi};
}

namespace {

Branch reflect_branch(const Branch& b) {
  Branch out;
  for (auto it = b.secs.rbegin(); it != b.secs.rend(); ++it) {
    const Section& s = *it;
    Section r;
    if (s.affine) {
      r = Section::make_affine({-s.dom.hi, -s.dom.lo}, -s.anchor_p, s.anchor_v,
                               -s.slope);
    } else {
      std::vector<double> ps(s.ps.rbegin(), s.ps.rend());
      for (double& p : ps) p = -p;
      std::vector<double> vs(s.vs.rbegin(), s.vs.rend());
      r = Section::make_table(std::move(ps), std::move(vs));
    }
    out.secs.push_back(std::move(r));
  }
  out.finalize();
  return out;
}

Branch shift_branch(const Branch& b, double dp, double dv) {
  // result(p) = b(p + dp) - dv
  Branch out;
  for (const Section& s : b.secs) {
    Section r;
    if (s.affine) {
      r = Section::make_affine({s.dom.lo - dp, s.dom.hi - dp}, s.anchor_p - dp,
                               s.anchor_v - dv, s.slope);
    } else {
      std::vector<double> ps = s.ps;
      for (double& p : ps) p -= dp;
      std::vector<double> vs = s.vs;
      for (double& v : vs) v -= dv;
      r = Section::make_table(std::move(ps), std::move(vs));
    }
    out.secs.push_back(std::move(r));
  }
  out.finalize();
  return out;
}

}  // namespace

HamiltonianPtr PiecewiseMonotoneHamiltonian::reflect() const {
  std::vector<Branch> new_left, new_right;
  for (const auto& b : right_) new_left.push_back(reflect_branch(b));
  for (const auto& b : left_) new_right.push_back(reflect_branch(b));
  return std::make_shared<PiecewiseMonotoneHamiltonian>(std::move(new_left),
                                                        std::move(new_right));
}

HamiltonianPtr PiecewiseMonotoneHamiltonian::shift(double dp,
                                                   double dv) const {
  // The shift may move branch pieces across zero, so rebuild the side split
  // from the shifted section list.
  std::vector<Branch> all;
  for (const auto& b : left_) all.push_back(shift_branch(b, dp, dv));
  for (const auto& b : right_) all.push_back(shift_branch(b, dp, dv));

  std::vector<Branch> new_left, new_right;
  for (auto& b : all) {
    if (b.dom.hi <= 1e-12 && b.dom.lo < -1e-12) {
      new_left.push_back(std::move(b));
    } else if (b.dom.lo >= -1e-12) {
      new_right.push_back(std::move(b));
    } else {
      // Straddles zero: cut it.  Only affine/table splits at p=0.
      Branch lhs, rhs;
      for (const Section& s : b.secs) {
        if (s.dom.hi <= 0) {
          lhs.secs.push_back(s);
        } else if (s.dom.lo >= 0) {
          rhs.secs.push_back(s);
        } else if (s.affine) {
          Section a = s, c = s;
          a.dom.hi = 0.0;
          c.dom.lo = 0.0;
          lhs.secs.push_back(a);
          rhs.secs.push_back(c);
        } else {
          std::vector<double> pl, vl, pr, vr;
          for (std::size_t i = 0; i < s.ps.size(); ++i) {
            if (s.ps[i] < 0) {
              pl.push_back(s.ps[i]);
              vl.push_back(s.vs[i]);
            } else if (s.ps[i] > 0) {
              pr.push_back(s.ps[i]);
              vr.push_back(s.vs[i]);
            }
          }
          double v0 = s.eval(0.0);
          pl.push_back(0.0);
          vl.push_back(v0);
          pr.insert(pr.begin(), 0.0);
          vr.insert(vr.begin(), v0);
          if (pl.size() >= 2) lhs.secs.push_back(Section::make_table(pl, vl));
          if (pr.size() >= 2) rhs.secs.push_back(Section::make_table(pr, vr));
        }
      }
      if (!lhs.secs.empty()) {
        lhs.finalize();
        new_left.push_back(std::move(lhs));
      }
      if (!rhs.secs.empty()) {
        rhs.finalize();
        new_right.push_back(std::move(rhs));
      }
    }
  }
  std::sort(new_left.begin(), new_left.end(),
            [](const Branch& a, const Branch& b) { return a.dom.lo < b.dom.lo; });
  std::sort(new_right.begin(), new_right.end(), [](const Branch& a, const Branch& b) {
    return a.dom.lo > b.dom.lo;
  });
  return std::make_shared<PiecewiseMonotoneHamiltonian>(std::move(new_left),
                                                        std::move(new_right));
}

std::pair<HamiltonianPtr, HamiltonianPtr>
PiecewiseMonotoneHamiltonian::split_at_zero() const {
  double C = 2.0 * lipschitz_;
  Branch left_tail;
  left_tail.secs.push_back(
      Section::make_affine({-kInf, 0.0}, 0.0, 0.0, -C));
  left_tail.finalize();
  Branch right_tail;
  right_tail.secs.push_back(Section::make_affine({0.0, kInf}, 0.0, 0.0, C));
  right_tail.finalize();

  auto plus = std::make_shared<PiecewiseMonotoneHamiltonian>(
      std::vector<Branch>{left_tail}, right_);
  auto minus = std::make_shared<PiecewiseMonotoneHamiltonian>(
      left_, std::vector<Branch>{right_tail});
  return {plus, minus};
}

CarveResult PiecewiseMonotoneHamiltonian::carve() const {
  require(left_well_count() == 0, "carve_precondition",
          "carve expects a right-sided Hamiltonian");
  int L = right_well_count();
  require(L >= 1, "carve_precondition", "carve needs an interior well");

  CriticalValues cv = critical_values(Side::Right);
  int k = 1, l = 1;
  for (int i = 1; i <= L; ++i) {
    if (cv.peaks[i - 1] > cv.peaks[k - 1]) k = i;
    if (cv.wells[i - 1] < cv.wells[l - 1]) l = i;
  }

  double C = 2.0 * lipschitz_;
  double p2k = right_breakpoint(2 * k);
  double Mk = cv.peaks[k - 1];
  double p2lm1 = right_breakpoint(2 * l - 1);
  double ml = cv.wells[l - 1];

  CarveResult out;
  out.peak_index = k;
  out.well_index = l;
  out.right_steep = (l <= k);
  out.carve_momentum = p2k;
  out.carve_value = Mk;
  out.p_shift = p2lm1;
  out.v_shift = ml;

  // H1: keep everything left of p_{2k}, extend increasing with slope C.
  {
    std::vector<Branch> r;
    Branch outer;
    // Composite increasing branch: H's branch 2k+1 on [p_{2k+1}, p_{2k}],
    // then the affine continuation.
    const Branch& inner = right_[2 * k];  // branch index 2k+1
    outer.secs = inner.secs;
    outer.secs.push_back(Section::make_affine({p2k, kInf}, p2k, Mk, C));
    outer.finalize();
    r.push_back(std::move(outer));
    for (std::size_t i = 2 * k + 1; i < right_.size(); ++i)
      r.push_back(right_[i]);
    out.h1 = std::make_shared<PiecewiseMonotoneHamiltonian>(left_, std::move(r));
  }

  // H2: keep everything right of the carve point, extend decreasing with
  // slope -C, then renormalize so the deepest well sits at the origin.
  {
    // Right-steep (l <= k): carve at p_{2k}; the affine head merges with
    // branch 2k (both decreasing), then branches 2k-1 .. 2l stay intact and
    // become the left structure after renormalization.  Left-steep (l > k):
    // carve at p_{2l}; the head merges with branch 2l directly.
    int b_merge = out.right_steep ? 2 * k : 2 * l;
    double cut = right_breakpoint(b_merge);
    double cut_value = cv.peaks[b_merge / 2 - 1];

    Branch merged;
    merged.secs.push_back(
        Section::make_affine({-kInf, cut}, cut, cut_value, -C));
    for (const Section& s : right_[b_merge - 1].secs) merged.secs.push_back(s);
    merged.finalize();

    std::vector<Branch> new_left;
    new_left.push_back(std::move(merged));
    for (int j = b_merge - 1; j >= 2 * l; --j) new_left.push_back(right_[j - 1]);

    std::vector<Branch> new_right;  // branches 1..2l-1 keep their role
    for (int j = 1; j <= 2 * l - 1; ++j) new_right.push_back(right_[j - 1]);

    // Shift so the deepest well lands at (0,0).
    std::vector<Branch> shifted_left, shifted_right;
    for (const auto& b : new_left)
      shifted_left.push_back(shift_branch(b, p2lm1, ml));
    for (const auto& b : new_right)
      shifted_right.push_back(shift_branch(b, p2lm1, ml));
    out.h2 = std::make_shared<PiecewiseMonotoneHamiltonian>(
        std::move(shifted_left), std::move(shifted_right));
  }

  return out;
}

// ---------------------------------------------------------------------------
// JSON I/O

std::string PiecewiseMonotoneHamiltonian::to_json() const {
  nlohmann::json j;
  j["branches"] = nlohmann::json::array();
  auto emit = [&](const Section& s) {
    nlohmann::json e;
    if (s.affine) {
      e["kind"] = "affine";
      e["domain"] = {s.dom.lo, s.dom.hi};
      e["slope"] = s.slope;
      e["value_at_left"] = s.eval(s.dom.lo);
    } else {
      e["kind"] = "table";
      nlohmann::json pts = nlohmann::json::array();
      for (std::size_t i = 0; i < s.ps.size(); ++i)
        pts.push_back({s.ps[i], s.vs[i]});
      e["points"] = pts;
    }
    j["branches"].push_back(e);
  };
  // Left side outermost-first already ascends in momentum.  Infinite tail
  // sections are serialized as tail slopes plus a finite unit-length stub so
  // the branch list is never empty.
  const Section& lt = left_[0].secs.front();
  j["tail_slope_left"] = lt.slope;
  {
    Section stub = Section::make_affine({lt.dom.hi - 1.0, lt.dom.hi},
                                        lt.dom.hi - 1.0,
                                        lt.eval(lt.dom.hi - 1.0), lt.slope);
    emit(stub);
  }
  for (std::size_t b = 0; b < left_.size(); ++b)
    for (std::size_t i = (b == 0 ? 1 : 0); i < left_[b].secs.size(); ++i)
      emit(left_[b].secs[i]);
  for (std::size_t b = right_.size(); b-- > 0;)
    for (std::size_t i = 0; i < right_[b].secs.size(); ++i) {
      if (b == 0 && i + 1 == right_[0].secs.size()) break;
      emit(right_[b].secs[i]);
    }
  const Section& rt = right_[0].secs.back();
  {
    Section stub = Section::make_affine({rt.dom.lo, rt.dom.lo + 1.0},
                                        rt.dom.lo, rt.eval(rt.dom.lo), rt.slope);
    emit(stub);
  }
  j["tail_slope_right"] = rt.slope;
  return j.dump(2);
}

HamiltonianPtr PiecewiseMonotoneHamiltonian::from_json(
    const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw InvariantError("schema", std::string("invalid JSON: ") + e.what());
  }
  require(j.contains("branches") && j["branches"].is_array() &&
              !j["branches"].empty(),
          "schema", "hamiltonian spec needs a nonempty 'branches' array");
  require(j.contains("tail_slope_left") && j.contains("tail_slope_right"),
          "schema", "hamiltonian spec needs tail slopes");

  std::vector<Section> secs;
  for (const auto& e : j["branches"]) {
    std::string kind = e.value("kind", "affine");
    if (kind == "affine") {
      require(e.contains("domain") && e.contains("slope") &&
                  e.contains("value_at_left"),
              "schema", "affine branch needs domain, slope, value_at_left");
      double a = e["domain"][0].get<double>();
      double b = e["domain"][1].get<double>();
      require(b > a, "schema", "branch domain must be increasing");
      double s = e["slope"].get<double>();
      require(s != 0.0, "monotone_section", "branch slope must be nonzero");
      secs.push_back(
          Section::make_affine({a, b}, a, e["value_at_left"].get<double>(), s));
    } else if (kind == "table") {
      require(e.contains("points"), "schema", "table branch needs points");
      std::vector<double> ps, vs;
      for (const auto& pt : e["points"]) {
        ps.push_back(pt[0].get<double>());
        vs.push_back(pt[1].get<double>());
      }
      secs.push_back(Section::make_table(std::move(ps), std::move(vs)));
    } else {
      throw InvariantError("schema", "unknown branch kind: " + kind);
    }
  }
  for (std::size_t i = 0; i + 1 < secs.size(); ++i)
    require(secs[i + 1].dom.lo >= secs[i].dom.hi - 1e-12, "schema",
            "branches must ascend in momentum");

  double sl = j["tail_slope_left"].get<double>();
  double sr = j["tail_slope_right"].get<double>();
  require(sl < 0, "coercivity", "tail_slope_left must be negative");
  require(sr > 0, "coercivity", "tail_slope_right must be positive");

  // Prepend/append the tails as affine sections.
  {
    const Section& first = secs.front();
    Section tail = Section::make_affine({-kInf, first.dom.lo}, first.dom.lo,
                                        first.value_lo(), sl);
    secs.insert(secs.begin(), tail);
    const Section& last = secs.back();
    Section tail_r = Section::make_affine({last.dom.hi, kInf}, last.dom.hi,
                                          last.value_hi(), sr);
    secs.push_back(tail_r);
  }

  // Group contiguous same-direction sections into branches, splitting at 0.
  std::vector<Branch> branches;
  Branch cur;
  auto flush = [&] {
    if (!cur.secs.empty()) {
      cur.finalize();
      branches.push_back(std::move(cur));
      cur = Branch{};
    }
  };
  for (Section& s : secs) {
    bool s_inc = s.value_hi() > s.value_lo();
    if (!cur.secs.empty()) {
      bool cur_inc = cur.secs.back().value_hi() > cur.secs.back().value_lo();
      bool at_zero = std::abs(s.dom.lo) < 1e-12;
      if (s_inc != cur_inc || at_zero) flush();
    }
    cur.secs.push_back(std::move(s));
  }
  flush();

  std::vector<Branch> left, right;
  for (auto& b : branches) {
    if (b.dom.hi <= 1e-12)
      left.push_back(std::move(b));
    else
      right.push_back(std::move(b));
  }
  require(!left.empty() && !right.empty(), "breakpoint_at_zero",
          "hamiltonian spec must break at p = 0");
  std::reverse(right.begin(), right.end());
  return std::make_shared<PiecewiseMonotoneHamiltonian>(std::move(left),
                                                        std::move(right));
}

// ---------------------------------------------------------------------------
// Normalization from raw samples

NormalizationResult PiecewiseMonotoneHamiltonian::normalize(
    const std::function<double(double)>& f, double tol) {
  // Probe for coercivity.
  double P = 1.0;
  for (;;) {
    double inner = -kInf;
    for (int i = 0; i <= 64; ++i)
      inner = std::max(inner, f(-0.5 * P + i * P / 64.0));
    if (f(P) >= inner + 1.0 && f(-P) >= inner + 1.0) break;
    P *= 2.0;
    require(P < 1e7, "coercivity", "function does not look coercive");
  }

  // Adaptive sampling.
  std::vector<std::pair<double, double>> samples;
  std::function<void(double, double, double, double, int)> refine =
      [&](double a, double fa, double b, double fb, int depth) {
        double m = 0.5 * (a + b);
        double fm = f(m);
        double bend = std::abs(fm - 0.5 * (fa + fb));
        if (depth < 12 &&
            (bend > std::max(tol, 1e-7 * (1.0 + std::abs(fm))) ||
             b - a > P / 256)) {
          refine(a, fa, m, fm, depth + 1);
          refine(m, fm, b, fb, depth + 1);
        } else {
          samples.push_back({a, fa});
          samples.push_back({m, fm});
        }
      };
  int n0 = 1024;
  for (int i = 0; i < n0; ++i) {
    double a = -P + 2.0 * P * i / n0, b = -P + 2.0 * P * (i + 1) / n0;
    refine(a, f(a), b, f(b), 0);
  }
  samples.push_back({P, f(P)});
  std::sort(samples.begin(), samples.end());
  samples.erase(std::unique(samples.begin(), samples.end(),
                            [](auto& x, auto& y) { return x.first == y.first; }),
                samples.end());

  // Global minimum, rightmost on ties: bracket the rightmost contiguous
  // cluster of near-minimal samples, then refine.
  double vmin = kInf;
  for (auto& s : samples) vmin = std::min(vmin, s.second);
  std::size_t hi = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].second <= vmin + tol) hi = i;
  std::size_t lo = hi;
  while (lo > 0 && samples[lo - 1].second <= vmin + tol) --lo;
  std::size_t ia = lo > 0 ? lo - 1 : lo;
  std::size_t ib = hi + 1 < samples.size() ? hi + 1 : hi;
  double p_star = golden_min(f, samples[ia].first, samples[ib].first, 1e-13);
  double v_star = f(p_star);
  NormalizationRecord record;
  record.p_shift = p_star;
  record.v_shift = v_star;
  record.probe_radius = P;

  auto g = [&](double q) { return f(q + p_star) - v_star; };

  // Re-sample the shifted function on the shifted abscissas plus 0.
  std::vector<double> xs;
  for (auto& s : samples) xs.push_back(s.first - p_star);
  xs.push_back(0.0);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end(),
                       [](double a, double b) { return std::abs(a - b) < 1e-13; }),
           xs.end());
  std::vector<double> ys;
  ys.reserve(xs.size());
  for (double x : xs) ys.push_back(std::abs(x) < 1e-13 ? 0.0 : g(x));

  // Monotone runs -> breakpoints.  Locate extremum positions precisely.
  std::vector<std::size_t> turns;  // sample index starting a new run
  std::vector<int> dirs;
  int dir = 0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    double d = ys[i + 1] - ys[i];
    int nd = (d > 0) - (d < 0);
    if (nd == 0) continue;
    if (dir == 0) {
      dir = nd;
      dirs.push_back(nd);
      turns.push_back(0);
    } else if (nd != dir) {
      dir = nd;
      dirs.push_back(nd);
      turns.push_back(i);
    }
  }
  require(!dirs.empty() && dirs.front() < 0 && dirs.back() > 0, "coercivity",
          "normalized function must decrease then finally increase");

  // Refine each turn to an accurate breakpoint, force a break at 0.
  std::vector<double> bps;  // interior breakpoints (extrema), ascending
  std::vector<double> bvs;
  for (std::size_t t = 1; t < turns.size(); ++t) {
    std::size_t i = turns[t];
    double a = xs[i > 0 ? i - 1 : 0], b = xs[std::min(i + 1, xs.size() - 1)];
    bool is_min = dirs[t] > 0;  // run turns upward: local min at the turn
    double x_star = is_min ? golden_min(g, a, b, 1e-13)
                           : golden_min([&](double q) { return -g(q); }, a, b, 1e-13);
    // The origin is always a cut; a numerically re-found global minimum
    // there would only duplicate it.
    if (std::abs(x_star) < 1e-9) continue;
    bps.push_back(x_star);
    bvs.push_back(g(x_star));
  }

  // Deduplicate near-coincident critical values with tiny nudges.
  {
    std::vector<std::size_t> order(bvs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return bvs[a] < bvs[b]; });
    double K = std::max<std::size_t>(1, bvs.size());
    int dup = 0;
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (bvs[order[i]] - bvs[order[i - 1]] < tol * 1e-3) {
        ++dup;
        double delta = dup * tol / (2.0 * K);
        bvs[order[i]] += delta;
        record.nudges.push_back(
            {bps[order[i]] >= 0 ? Side::Right : Side::Left, (int)order[i],
             delta});
      }
    }
    // A zero-value interior minimum collides with the origin; lift it.
    for (std::size_t i = 0; i < bvs.size(); ++i) {
      if (std::abs(bps[i]) > 1e-9 && bvs[i] < tol * 1e-3) {
        ++dup;
        double delta = dup * tol / (2.0 * K);
        bvs[i] += delta;
        record.nudges.push_back(
            {bps[i] >= 0 ? Side::Right : Side::Left, (int)i, delta});
      }
    }
  }

  // Build table branches between consecutive breakpoints (and 0 and +-P).
  std::vector<double> cuts = {xs.front(), 0.0, xs.back()};
  for (double b : bps) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             cuts.end());

  auto value_at = [&](double x) -> double {
    if (std::abs(x) < 1e-13) return 0.0;
    for (std::size_t i = 0; i < bps.size(); ++i)
      if (std::abs(x - bps[i]) < 1e-12) return bvs[i];
    return g(x);
  };

  std::vector<Branch> left, right;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    double a = cuts[c], b = cuts[c + 1];
    std::vector<double> tp, tv;
    double va = value_at(a), vb = value_at(b);
    double d = (vb > va) ? 1.0 : -1.0;
    tp.push_back(a);
    tv.push_back(va);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i] > a + 1e-12 && xs[i] < b - 1e-12) {
        double v = value_at(xs[i]);
        // keep only samples strictly between the accumulated table and the
        // run's end value (overshoot near refined extrema is dropped)
        if ((v - tv.back()) * d > 0 && (vb - v) * d > 0) {
          tp.push_back(xs[i]);
          tv.push_back(v);
        }
      }
    }
    tp.push_back(b);
    tv.push_back(vb);
    require(tp.size() >= 2 && tv.front() != tv.back(), "monotone_section",
            "degenerate monotone run during normalization");

    Branch br;
    br.secs.push_back(Section::make_table(tp, tv));
    // Outermost runs get affine continuations using the boundary secant.
    if (c == 0) {
      double s_out =
          (tv[1] - tv[0]) / (tp[1] - tp[0]);
      Branch tail;
      tail.secs.push_back(
          Section::make_affine({-kInf, a}, a, tv.front(), std::min(s_out, -1e-6)));
      for (auto& s : br.secs) tail.secs.push_back(s);
      br = std::move(tail);
    }
    if (c + 2 == cuts.size()) {
      std::size_t n = tp.size();
      double s_out = (tv[n - 1] - tv[n - 2]) / (tp[n - 1] - tp[n - 2]);
      br.secs.push_back(
          Section::make_affine({b, kInf}, b, tv.back(), std::max(s_out, 1e-6)));
    }
    br.finalize();
    if (b <= 1e-12)
      left.push_back(std::move(br));
    else
      right.push_back(std::move(br));
  }
  std::reverse(right.begin(), right.end());

  NormalizationResult out;
  out.hamiltonian = std::make_shared<PiecewiseMonotoneHamiltonian>(
      std::move(left), std::move(right));
  out.record = record;
  return out;
}

// ---------------------------------------------------------------------------
// Fixtures

HamiltonianPtr make_w_well_hamiltonian() {
  Branch l1;
  l1.secs.push_back(Section::make_affine({-kInf, 0.0}, 0.0, 0.0, -3.0));
  Branch r1, r2, r3;
  r3.secs.push_back(Section::make_affine({0.0, 1.0}, 0.0, 0.0, 3.0));
  r2.secs.push_back(Section::make_affine({1.0, 2.0}, 1.0, 3.0, -2.0));
  r1.secs.push_back(Section::make_affine({2.0, kInf}, 2.0, 1.0, 1.0));
  std::vector<Branch> left = {l1};
  std::vector<Branch> right = {r1, r2, r3};
  return std::make_shared<PiecewiseMonotoneHamiltonian>(std::move(left),
                                                        std::move(right));
}

HamiltonianPtr make_vee_hamiltonian(double slope_left, double slope_right) {
  Branch l1, r1;
  l1.secs.push_back(Section::make_affine({-kInf, 0.0}, 0.0, 0.0, -std::abs(slope_left)));
  r1.secs.push_back(Section::make_affine({0.0, kInf}, 0.0, 0.0, std::abs(slope_right)));
  return std::make_shared<PiecewiseMonotoneHamiltonian>(
      std::vector<Branch>{l1}, std::vector<Branch>{r1});
}

}  // namespace hjhom
