#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hjhom/corrector.hpp"
#include "oracles.hpp"

using namespace hjhom;

namespace {

// Per-interval branch sets implied by a full enumeration, for cross-checking
// the reachability computation.
std::vector<std::vector<int>> sets_from_enumeration(
    const std::vector<std::vector<int>>& sels, std::size_t n) {
  std::vector<std::set<int>> acc(n);
  for (const auto& s : sels)
    for (std::size_t i = 0; i < n; ++i) acc[i].insert(s[i]);
  std::vector<std::vector<int>> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i].assign(acc[i].begin(), acc[i].end());
  return out;
}

double mass_on(const std::function<double(double)>& f, double a, double b) {
  return oracle::integrate(f, a, b);
}

}  // namespace

TEST_CASE("decompose: junction positions, kinds, and feasible bands") {
  auto H = make_w_well_hamiltonian();
  auto V25 = PotentialModel::cosine(2.5);
  auto V1 = PotentialModel::cosine(1.0);

  // mu = 1.5, mbar = 2.5: two transversal crossings of the peak level.
  auto d = decompose(*V25, 1.5, *H);
  CHECK(d.cyclic);
  CHECK(d.period == 1.0);
  REQUIRE(d.junctions.size() == 2);
  double ya = std::acos(-0.2) / (2.0 * M_PI);
  CHECK(std::abs(d.junctions[0].y - ya) <= 1e-9);
  CHECK(std::abs(d.junctions[1].y - (1.0 - ya)) <= 1e-9);
  CHECK(d.junctions[0].kind == JunctionKind::Up);
  CHECK(d.junctions[1].kind == JunctionKind::Down);
  CHECK(d.junctions[0].energy == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(d.junctions[0].is_peak);
  REQUIRE(d.intervals.size() == 2);
  CHECK(d.intervals[0].feasible == std::vector<int>{1});
  CHECK(d.intervals[1].feasible == std::vector<int>{1, 2, 3});

  // mu = 1.0, mbar = 2.5: tangential touch at the potential maximum plus a
  // crossing pair of the peak level.
  auto d1 = decompose(*V25, 1.0, *H);
  REQUIRE(d1.junctions.size() == 3);
  CHECK(std::abs(d1.junctions[0].y) <= 1e-9);
  CHECK(d1.junctions[0].kind == JunctionKind::Touch);
  CHECK(d1.junctions[0].energy == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(!d1.junctions[0].is_peak);
  CHECK(std::abs(d1.junctions[1].y - oracle::kYa_mu1_mbar25) <= 1e-9);
  CHECK(d1.junctions[1].kind == JunctionKind::Up);
  CHECK(d1.junctions[1].energy == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::abs(d1.junctions[2].y - oracle::kYb_mu1_mbar25) <= 1e-9);
  CHECK(d1.junctions[2].kind == JunctionKind::Down);
  REQUIRE(d1.intervals.size() == 3);
  CHECK(d1.intervals[0].feasible == std::vector<int>{1, 2, 3});
  CHECK(d1.intervals[1].feasible == std::vector<int>{1});
  CHECK(d1.intervals[2].feasible == std::vector<int>{1, 2, 3});

  // mu = 1.5, mbar = 1: no level is met, a single free interval.
  auto d2 = decompose(*V1, 1.5, *H);
  CHECK(d2.junctions.empty());
  REQUIRE(d2.intervals.size() == 1);
  CHECK(d2.intervals[0].feasible == std::vector<int>{1, 2, 3});
  CHECK(d2.intervals[0].e_lo == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(d2.intervals[0].e_hi == doctest::Approx(2.5).epsilon(1e-12));

  // Outside the resonant window (or below zero) there is no decomposition.
  CHECK_THROWS_AS(decompose(*V1, 4.0, *H), InvariantError);
  CHECK_THROWS_AS(decompose(*V1, -0.5, *H), InvariantError);
  CHECK_THROWS_AS(decompose(*V1, 0.0, *H), InvariantError);
}

TEST_CASE("junction viscosity test on the W fixture") {
  auto H = make_w_well_hamiltonian();
  // Down jump 3 -> 1.5 at level 2: max H over [1.5, 3] is 2.
  CHECK(junction_admissible(*H, 0.0, 2.0, 3.0, 1.5));
  // Up jump 2/3 -> 1.5 at level 2: min over [2/3, 1.5] is 2 (peak inside).
  CHECK(junction_admissible(*H, 0.0, 2.0, 2.0 / 3.0, 1.5));
  // Down jump 2 -> 1/3 at level 1 crosses the peak: max is 3.
  CHECK(!junction_admissible(*H, 0.0, 1.0, 2.0, 1.0 / 3.0));
  // Equal one-sided limits pass at any level.
  CHECK(junction_admissible(*H, 0.0, 0.25, 1.7, 1.7));
  // Up jump 1 -> 4 at the peak level dips through the well (min 1 < 3).
  CHECK(!junction_admissible(*H, 0.0, 3.0, 1.0, 4.0));
  // Down jump 4 -> 1 at the peak level: max over [1, 4] is exactly 3.
  CHECK(junction_admissible(*H, 0.0, 3.0, 4.0, 1.0));
}

TEST_CASE("achievable branch sets match full enumeration") {
  auto H = make_w_well_hamiltonian();
  auto V25 = PotentialModel::cosine(2.5);
  auto V1 = PotentialModel::cosine(1.0);

  for (double mu : {0.3, 0.7, 1.2, 2.0}) {
    auto d = decompose(*V25, mu, *H);
    auto sels = enumerate_admissible(*H, d);
    REQUIRE(!sels.empty());
    CHECK(achievable_branches(*H, d) ==
          sets_from_enumeration(sels, d.intervals.size()));
  }
  {
    auto d = decompose(*V1, 1.0, *H);
    auto sels = enumerate_admissible(*H, d);
    CHECK(achievable_branches(*H, d) ==
          sets_from_enumeration(sels, d.intervals.size()));
  }
}

TEST_CASE("admissible selections at the flat levels of the large fixture") {
  auto H = make_w_well_hamiltonian();
  auto V25 = PotentialModel::cosine(2.5);

  // mu = 0.5: the exit junction pins the last two intervals to the inner
  // branch; the first interval is free.
  auto d = decompose(*V25, 0.5, *H);
  auto sels = enumerate_admissible(*H, d);
  REQUIRE(sels.size() == 3);
  CHECK(sels[0] == std::vector<int>{1, 3, 3});
  CHECK(sels[1] == std::vector<int>{2, 3, 3});
  CHECK(sels[2] == std::vector<int>{3, 3, 3});

  auto sup = sup_admissible(*H, *V25, 0.5);
  CHECK(sup.branch == std::vector<int>{1, 3, 3});
  CHECK(std::abs(expected_slope(sup, *H, *V25).value -
                 oracle::kFlat05Hi_mbar25) <= 1e-10);
  auto inf = inf_admissible(*H, *V25, 0.5);
  CHECK(inf.branch == std::vector<int>{3, 3, 3});
  CHECK(std::abs(expected_slope(inf, *H, *V25).value -
                 oracle::kFlat05Lo_mbar25) <= 1e-12);

  // mu = 1.0: the touch at the maximum frees only the last interval.
  auto d1 = decompose(*V25, 1.0, *H);
  auto sels1 = enumerate_admissible(*H, d1);
  REQUIRE(sels1.size() == 3);
  CHECK(sels1[0] == std::vector<int>{1, 1, 1});
  CHECK(sels1[1] == std::vector<int>{1, 1, 2});
  CHECK(sels1[2] == std::vector<int>{1, 1, 3});
  auto sup1 = sup_admissible(*H, *V25, 1.0);
  CHECK(sup1.branch == std::vector<int>{1, 1, 1});
  CHECK(std::abs(expected_slope(sup1, *H, *V25).value -
                 oracle::kFlat1Hi_mbar25) <= 1e-12);
  auto inf1 = inf_admissible(*H, *V25, 1.0);
  CHECK(inf1.branch == std::vector<int>{1, 1, 3});
  CHECK(std::abs(expected_slope(inf1, *H, *V25).value -
                 oracle::kFlat1Lo_mbar25) <= 1e-10);

  // mbar = 1, mu = 1: one touch junction, all three constant selections.
  auto V1 = PotentialModel::cosine(1.0);
  auto dt = decompose(*V1, 1.0, *H);
  auto selst = enumerate_admissible(*H, dt);
  REQUIRE(selst.size() == 3);
  std::vector<double> es;
  for (const auto& s : selst) {
    AdmissibleSelection a{dt, s, 1.0};
    es.push_back(expected_slope(a, *H, *V1).value);
  }
  CHECK(std::abs(es[0] - 2.5) <= 1e-12);
  CHECK(std::abs(es[1] - 1.75) <= 1e-12);
  CHECK(std::abs(es[2] - 0.5) <= 1e-12);
}

TEST_CASE("expected slope of extremal selections") {
  auto H = make_w_well_hamiltonian();
  auto V1 = PotentialModel::cosine(1.0);
  auto sup = sup_admissible(*H, *V1, 1.0);
  CHECK(std::abs(expected_slope(sup, *H, *V1).value - 2.5) <= 1e-12);

  // Just above the resonance the touch disappears and the monotone field
  // stays on the innermost branch: the average leaves the flat from below.
  double mu = 1.0 + 1e-9;
  CorrectorOptions tight;
  tight.tol = 1e-12;
  auto f = monotone_solution(*H, *V1, mu, tight);
  CHECK(std::abs(expected_slope(f, *H, *V1, tight).value -
                 (mu + 0.5) / 3.0) <= 1e-12);
}

TEST_CASE("flat intervals: widths, snapping, and the staircase") {
  auto H = make_w_well_hamiltonian();
  auto V1 = PotentialModel::cosine(1.0);
  auto V25 = PotentialModel::cosine(2.5);

  auto f2 = flat_interval(*H, *V1, 2.0);
  CHECK(f2.resonant);
  CHECK(!f2.is_point);
  CHECK(f2.component_count == 2);
  CHECK(std::abs(f2.span.lo - 5.0 / 6.0) <= 1e-12);
  CHECK(std::abs(f2.span.hi - 1.25) <= 1e-12);

  auto f4 = flat_interval(*H, *V1, 4.0);
  CHECK(!f4.resonant);
  CHECK(f4.is_point);
  CHECK(std::abs(f4.span.lo - 5.5) <= 1e-12);
  CHECK(std::abs(f4.span.hi - 5.5) <= 1e-12);

  auto f1 = flat_interval(*H, *V1, 1.0);
  CHECK(f1.resonant);
  CHECK(f1.component_count == 2);
  CHECK(std::abs(f1.span.lo - 1.75) <= 1e-12);
  CHECK(std::abs(f1.span.hi - 2.5) <= 1e-12);

  // The same two components, inspected directly.
  auto d1 = decompose(*V1, 1.0, *H);
  auto sels1 = enumerate_admissible(*H, d1);
  auto comps = components(*H, *V1, d1, sels1);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0].members == std::vector<std::size_t>{0, 1});
  CHECK(comps[1].members == std::vector<std::size_t>{2});
  CHECK(std::abs(comps[0].e_range.lo - 1.75) <= 1e-12);
  CHECK(std::abs(comps[0].e_range.hi - 2.5) <= 1e-12);

  // mbar = 1, mu = 1.5: three disconnected constant selections (the level
  // set of the effective Hamiltonian at 1.5 has three points).
  auto d15 = decompose(*V1, 1.5, *H);
  auto sels15 = enumerate_admissible(*H, d15);
  auto comps15 = components(*H, *V1, d15, sels15);
  CHECK(comps15.size() == 3);

  auto g05 = flat_interval(*H, *V25, 0.5);
  CHECK(g05.resonant);
  CHECK(g05.component_count == 1);
  CHECK(std::abs(g05.span.lo - oracle::kFlat05Lo_mbar25) <= 1e-12);
  CHECK(std::abs(g05.span.hi - oracle::kFlat05Hi_mbar25) <= 1e-10);

  auto g1 = flat_interval(*H, *V25, 1.0 + 5e-10);
  CHECK(g1.resonant);
  CHECK(g1.mu == 1.0);
  CHECK(std::abs(g1.span.lo - oracle::kFlat1Lo_mbar25) <= 1e-10);
  CHECK(std::abs(g1.span.hi - oracle::kFlat1Hi_mbar25) <= 1e-12);

  // Staircase: slope intervals are ordered and disjoint along mu.
  Interval prev{-1.0, -1.0};
  for (int k = 1; k <= 49; ++k) {
    double mu = 3.0 * k / 50.0;
    auto fr = flat_interval(*H, *V25, mu);
    CHECK(fr.span.lo <= fr.span.hi + 1e-12);
    CHECK(prev.hi <= fr.span.lo + 1e-9);
    prev = fr.span;
  }
}

TEST_CASE("mass interpolation on one interval") {
  auto H = make_w_well_hamiltonian();
  auto V25 = PotentialModel::cosine(2.5);
  const double yb = oracle::kYb_mu1_mbar25;
  const Interval I{yb, 1.0};
  auto s_at = [](double y) { return 1.0 - oracle::cosV(y, 2.5); };
  double m1 = mass_on([&](double y) { return oracle::w_psi1(s_at(y)); }, yb,
                      1.0);
  double m2 = mass_on([&](double y) { return oracle::w_psi2(s_at(y)); }, yb,
                      1.0);
  double m3 = mass_on([&](double y) { return oracle::w_psi3(s_at(y)); }, yb,
                      1.0);

  auto d = decompose(*V25, 1.0, *H);
  AdmissibleSelection s111{d, {1, 1, 1}, 1.0};
  AdmissibleSelection s112{d, {1, 1, 2}, 1.0};
  AdmissibleSelection s113{d, {1, 1, 3}, 1.0};
  auto f111 = selection_field(s111);
  auto f112 = selection_field(s112);
  auto f113 = selection_field(s113);

  auto runs_in = [&](const SlopeField& f) {
    std::vector<int> pat;
    for (const auto& r : f.runs)
      if (r.span.lo >= I.lo - 1e-12 && r.span.hi <= I.hi + 1e-12)
        pat.push_back(r.a.index);
    return pat;
  };
  auto field_mass = [&](const SlopeField& f) {
    return oracle::integrate(
        [&](double y) { return f.eval(*H, *V25, y); }, I.lo, I.hi, 1e-11);
  };

  // Single switch between the outer branches of the well pair.
  double c = 0.5 * (m1 + m2);
  auto g = interpolate(*H, *V25, f111, f112, I, c);
  CHECK(std::abs(field_mass(g) - c) <= 1e-8);
  CHECK(runs_in(g) == std::vector<int>{1, 2});
  CHECK(verify_metric_solution(g, *H, *V25, 1.0).pass);
  // Switch position against an independent bisection.
  double z = 0.0;
  for (const auto& r : g.runs)
    if (r.a.index == 1 && r.span.lo >= I.lo - 1e-12 &&
        r.span.hi <= I.hi + 1e-12)
      z = r.span.hi;
  double lo = I.lo, hi = I.hi;
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    double m =
        mass_on([&](double y) { return oracle::w_psi1(s_at(y)); }, I.lo,
                mid) +
        mass_on([&](double y) { return oracle::w_psi2(s_at(y)); }, mid, I.hi);
    (m < c ? lo : hi) = mid;
  }
  CHECK(std::abs(z - 0.5 * (lo + hi)) <= 1e-6);

  // Chain through the middle branch: target in the upper phase.
  double cu = 0.5 * (m1 + m3);
  REQUIRE(cu > m2);  // sanity of the phase layout for this fixture
  auto gu = interpolate(*H, *V25, f111, f113, I, cu);
  CHECK(std::abs(field_mass(gu) - cu) <= 1e-8);
  CHECK(runs_in(gu) == std::vector<int>{1, 2});
  CHECK(verify_metric_solution(gu, *H, *V25, 1.0).pass);

  // Lower phase: the peak pair switches upward, high branch on the left.
  double cl = 0.5 * (m2 + m3);
  auto gl = interpolate(*H, *V25, f111, f113, I, cl);
  CHECK(std::abs(field_mass(gl) - cl) <= 1e-8);
  CHECK(runs_in(gl) == std::vector<int>{3, 2});
  CHECK(verify_metric_solution(gl, *H, *V25, 1.0).pass);

  // Pure-mass targets collapse to a single run.
  auto gp1 = interpolate(*H, *V25, f111, f113, I, m1);
  CHECK(runs_in(gp1) == std::vector<int>{1});
  auto gp2 = interpolate(*H, *V25, f111, f113, I, m2);
  CHECK(runs_in(gp2) == std::vector<int>{2});

  // Out-of-range mass.
  CHECK_THROWS_AS(interpolate(*H, *V25, f111, f113, I, m1 + 1.0),
                  InvariantError);
}

TEST_CASE("transition family sweeps the flat interval affinely") {
  auto H = make_w_well_hamiltonian();
  auto V25 = PotentialModel::cosine(2.5);
  const double lo = oracle::kFlat1Lo_mbar25, hi = oracle::kFlat1Hi_mbar25;

  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    auto f = transition_slope(*H, *V25, 1.0, t);
    double e = expected_slope(f, *H, *V25).value;
    CHECK(std::abs(e - (lo + t * (hi - lo))) <= 1e-8);
    CHECK(verify_metric_solution(f, *H, *V25, 1.0).pass);
  }

  double prev = -1e30;
  for (int k = 0; k <= 100; ++k) {
    double t = k / 100.0;
    double e = expected_slope(transition_slope(*H, *V25, 1.0, t), *H, *V25)
                   .value;
    CHECK(e >= prev - 1e-10);
    prev = e;
  }

  auto flat = flat_interval(*H, *V25, 1.0);
  double e0 =
      expected_slope(transition_slope(*H, *V25, 1.0, 0.0), *H, *V25).value;
  double e1 =
      expected_slope(transition_slope(*H, *V25, 1.0, 1.0), *H, *V25).value;
  CHECK(std::abs(e0 - flat.span.lo) <= 1e-10);
  CHECK(std::abs(e1 - flat.span.hi) <= 1e-10);
}

TEST_CASE("verification: residuals and junction records") {
  auto H = make_w_well_hamiltonian();
  auto V1 = PotentialModel::cosine(1.0);

  auto good = monotone_solution(*H, *V1, 4.0);
  auto repg = verify_metric_solution(good, *H, *V1, 4.0);
  CHECK(repg.pass);
  CHECK(repg.max_residual <= 1e-10);

  // A field gluing the middle branch to the outer one upward across y = 0.3
  // violates the supersolution side there; the wrap-around junction at the
  // potential maximum is a valid downward jump.
  SlopeField bad;
  bad.mu = 1.5;
  bad.window = {0.0, 1.0};
  bad.periodic = true;
  bad.period = 1.0;
  bad.runs.push_back({{0.0, 0.3}, {Side::Right, 2}, 1.0, {Side::Right, 2}});
  bad.runs.push_back({{0.3, 1.0}, {Side::Right, 1}, 1.0, {Side::Right, 1}});
  auto rep = verify_metric_solution(bad, *H, *V1, 1.5);
  CHECK(!rep.pass);
  CHECK(rep.max_residual <= 1e-12);
  REQUIRE(rep.junctions.size() == 2);
  CHECK(rep.junctions[0].kind == "up");
  CHECK(!rep.junctions[0].admissible);
  CHECK(std::abs(rep.junctions[0].f_left - 1.4227457514062631) <= 1e-9);
  CHECK(std::abs(rep.junctions[0].f_right - 3.1545084971874737) <= 1e-9);
  CHECK(rep.junctions[0].h_min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.junctions[1].kind == "down");
  CHECK(rep.junctions[1].admissible);
  CHECK(rep.junctions[1].h_max == doctest::Approx(1.5).epsilon(1e-12));

  // The same field is a valid subsolution (up jumps are free there).
  auto reps = verify_metric_solution(bad, *H, *V1, 1.5, 1e-8,
                                     VerifyMode::Subsolution);
  CHECK(reps.pass);

  // Verifying against the wrong level reports the level gap as residual.
  auto f15 = monotone_solution(*H, *V1, 1.5);
  auto repm = verify_metric_solution(f15, *H, *V1, 1.6);
  CHECK(!repm.pass);
  CHECK(std::abs(repm.max_residual - 0.1) <= 1e-12);

  CHECK(rep.to_json().find("\"pass\"") != std::string::npos);
}

TEST_CASE("monotone solutions across the momentum range") {
  auto H = make_w_well_hamiltonian();
  auto V1 = PotentialModel::cosine(1.0);
  auto V25 = PotentialModel::cosine(2.5);

  auto f4 = monotone_solution(*H, *V1, 4.0);
  CHECK(std::abs(f4.eval(*H, *V1, 0.25) - 5.5) <= 1e-12);

  auto f0 = monotone_solution(*H, *V1, 0.0);
  CHECK(std::abs(expected_slope(f0, *H, *V1).value - oracle::kCross1_mbar1) <=
        1e-12);

  for (double mu : {0.0, 0.25, 0.6, 1.0, 1.5, 2.0, 2.8, 3.5}) {
    auto f = monotone_solution(*H, *V1, mu);
    auto rep = verify_metric_solution(f, *H, *V1, mu);
    CHECK(rep.pass);
    for (int i = 0; i <= 32; ++i)
      CHECK(f.eval(*H, *V1, i / 32.0) >= -1e-12);
  }

  CHECK(std::abs(expected_slope(monotone_solution(*H, *V25, 0.0), *H,
                                *V25).value -
                 oracle::kQ0_mbar25) <= 1e-12);
  CHECK(std::abs(expected_slope(monotone_solution(*H, *V25, 1.5), *H,
                                *V25).value -
                 oracle::kEPsi1_mu15_mbar25) <= 1e-12);

  CHECK_THROWS_AS(monotone_solution(*H, *V1, -0.25), InvariantError);
}

TEST_CASE("stationary subsolution family at zero") {
  auto H = make_w_well_hamiltonian();
  auto V1 = PotentialModel::cosine(1.0);

  auto [qm1, q0] = zero_slope_bounds(*H, *V1);
  CHECK(std::abs(qm1.value + 1.0 / 6.0) <= 1e-10);
  CHECK(std::abs(q0.value - 1.0 / 6.0) <= 1e-10);
  CHECK(qm1.std_error == 0.0);
  CHECK(q0.std_error == 0.0);

  auto f = subsolution_at_zero(*H, *V1, 0.0, 0.4);
  CHECK(std::abs(expected_slope(f, *H, *V1).value) <= 1e-8);
  for (int i = 0; i <= 20; ++i)
    CHECK(std::abs(f.eval(*H, *V1, i / 20.0)) <= 1e-9);
  CHECK(verify_metric_solution(f, *H, *V1, 0.4, 1e-9,
                               VerifyMode::Subsolution)
            .pass);

  auto fhi = subsolution_at_zero(*H, *V1, q0.value, 0.4);
  CHECK(std::abs(expected_slope(fhi, *H, *V1).value - 1.0 / 6.0) <= 1e-10);
  auto flo = subsolution_at_zero(*H, *V1, qm1.value, 0.4);
  CHECK(std::abs(expected_slope(flo, *H, *V1).value + 1.0 / 6.0) <= 1e-10);

  auto fp = subsolution_at_zero(*H, *V1, 0.1, 0.3);
  CHECK(std::abs(expected_slope(fp, *H, *V1).value - 0.1) <= 1e-10);
  CHECK(verify_metric_solution(fp, *H, *V1, 0.3, 1e-9,
                               VerifyMode::Subsolution)
            .pass);

  try {
    subsolution_at_zero(*H, *V1, 0.3, 0.4);
    CHECK(false);
  } catch (const InvariantError& e) {
    CHECK(std::string(e.invariant()) == "p_range");
  }
  try {
    subsolution_at_zero(*H, *V1, 0.0, 0.6);
    CHECK(false);
  } catch (const InvariantError& e) {
    CHECK(std::string(e.invariant()) == "delta_range");
  }
  try {
    subsolution_at_zero(*H, *V1, 0.0, 0.0);
    CHECK(false);
  } catch (const InvariantError& e) {
    CHECK(std::string(e.invariant()) == "delta_range");
  }
}

TEST_CASE("slope field CSV export") {
  auto H = make_w_well_hamiltonian();
  auto V1 = PotentialModel::cosine(1.0);
  auto f = monotone_solution(*H, *V1, 4.0);
  auto csv = slope_field_csv(f, *H, *V1, 5);
  CHECK(csv == slope_field_csv(f, *H, *V1, 5));

  std::istringstream in(csv);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "y,f");
  std::vector<double> ys, fs;
  while (std::getline(in, line)) {
    auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    ys.push_back(std::stod(line.substr(0, comma)));
    fs.push_back(std::stod(line.substr(comma + 1)));
  }
  REQUIRE(ys.size() == 5);
  const double want[5] = {5.0, 5.5, 6.0, 5.5, 5.0};
  for (int i = 0; i < 5; ++i) {
    CHECK(std::abs(ys[i] - i * 0.25) <= 1e-15);
    CHECK(std::abs(fs[i] - want[i]) <= 1e-12);
  }
}

TEST_CASE("sampled paths and random windows agree with the periodic model") {
  auto H = make_w_well_hamiltonian();
  auto V25 = PotentialModel::cosine(2.5);
  auto path = V25->sample_path(7, {0.0, 4.0}, 1.0 / 512.0);

  auto dp = decompose(path, 0.75, *H);
  CHECK(!dp.cyclic);
  REQUIRE(dp.junctions.size() == 16);
  REQUIRE(dp.intervals.size() == 17);
  auto dm = decompose(*V25, 0.75, *H);
  REQUIRE(dm.junctions.size() == 4);
  for (const auto& j : dp.junctions) {
    double frac = j.y - std::floor(j.y);
    double best = 1e9;
    const Junction* match = nullptr;
    for (const auto& mj : dm.junctions) {
      double dd = std::abs(frac - mj.y);
      dd = std::min(dd, 1.0 - dd);
      if (dd < best) {
        best = dd;
        match = &mj;
      }
    }
    CHECK(best <= 1e-4);
    REQUIRE(match != nullptr);
    CHECK(match->kind == j.kind);
    CHECK(match->energy == doctest::Approx(j.energy).epsilon(1e-12));
  }

  auto fp = monotone_solution(*H, path, 0.75);
  auto fm = monotone_solution(*H, *V25, 0.75);
  double ep = expected_slope(fp, *H, path).value;
  double em = expected_slope(fm, *H, *V25).value;
  CHECK(std::abs(ep - em) <= 1e-3);
  CHECK(verify_metric_solution(fp, *H, path, 0.75).pass);

  // A non-periodic random window: everything still decomposes, the inf
  // field verifies, and the window average carries a block standard error.
  auto VB = PotentialModel::block_random(0.8, 1.2, 42);
  CorrectorOptions o;
  o.random_cells = 40;
  auto db = decompose(*VB, 0.6, *H, o);
  CHECK(!db.cyclic);
  CHECK(db.junctions.size() >= 40);
  for (const auto& iv : db.intervals) CHECK(!iv.feasible.empty());
  auto fb = monotone_solution(*H, *VB, 0.6, o);
  CHECK(verify_metric_solution(fb, *H, *VB, 0.6).pass);
  auto eb = expected_slope(fb, *H, *VB, o);
  CHECK(eb.std_error > 0.0);
  CHECK(eb.std_error < 0.2);
}
