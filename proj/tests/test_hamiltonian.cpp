#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hjhom/hamiltonian.hpp"
#include "oracles.hpp"

using namespace hjhom;

namespace {
double w_eval(double p) {
  if (p <= 0) return -3.0 * p;
  if (p <= 1) return 3.0 * p;
  if (p <= 2) return 5.0 - 2.0 * p;
  return p - 1.0;
}
}  // namespace

TEST_CASE("w fixture evaluates the defining piecewise law") {
  auto H = make_w_well_hamiltonian();
  for (double p : {-2.0, -0.5, 0.0, 0.3, 1.0, 1.4, 2.0, 2.7, 5.0})
    CHECK(H->evaluate(p) == doctest::Approx(w_eval(p)).epsilon(1e-14));
}

TEST_CASE("w fixture structure: breakpoints, critical values, lipschitz") {
  auto H = make_w_well_hamiltonian();
  CHECK(H->right_well_count() == 1);
  CHECK(H->left_well_count() == 0);
  CHECK(H->right_breakpoint(1) == doctest::Approx(2.0));
  CHECK(H->right_breakpoint(2) == doctest::Approx(1.0));
  CHECK(H->right_breakpoint(3) == doctest::Approx(0.0));
  auto cv = H->critical_values(Side::Right);
  REQUIRE(cv.wells.size() == 1);
  CHECK(cv.wells[0] == doctest::Approx(1.0));
  CHECK(cv.peaks[0] == doctest::Approx(3.0));
  CHECK(cv.gap() == doctest::Approx(2.0));
  CHECK(H->lipschitz_bound() == doctest::Approx(3.0));
}

TEST_CASE("branch inverses match hand computations") {
  auto H = make_w_well_hamiltonian();
  // psi_1(s) = s + 1 on [1, inf)
  CHECK(H->branch_inverse({Side::Right, 1}, 1.0) == doctest::Approx(2.0));
  CHECK(H->branch_inverse({Side::Right, 1}, 3.0) == doctest::Approx(4.0));
  // psi_2(s) = (5 - s)/2 on [1, 3], decreasing
  CHECK(H->branch_inverse({Side::Right, 2}, 1.0) == doctest::Approx(2.0));
  CHECK(H->branch_inverse({Side::Right, 2}, 3.0) == doctest::Approx(1.0));
  CHECK(H->branch_inverse({Side::Right, 2}, 2.0) == doctest::Approx(1.5));
  // psi_3(s) = s/3 on [0, 3]
  CHECK(H->branch_inverse({Side::Right, 3}, 0.0) == doctest::Approx(0.0));
  CHECK(H->branch_inverse({Side::Right, 3}, 3.0) == doctest::Approx(1.0));
  // left inverse: -s/3
  CHECK(H->branch_inverse({Side::Left, 1}, 3.0) == doctest::Approx(-1.0));

  // Pointwise ordering at a shared energy.
  double s = 2.0;
  double p1 = H->branch_inverse({Side::Right, 1}, s);
  double p2 = H->branch_inverse({Side::Right, 2}, s);
  double p3 = H->branch_inverse({Side::Right, 3}, s);
  CHECK(p1 > p2);
  CHECK(p2 > p3);

  CHECK_THROWS_AS(H->branch_inverse({Side::Right, 2}, 4.0), InvariantError);
}

TEST_CASE("range extrema scan breakpoints exactly") {
  auto H = make_w_well_hamiltonian();
  auto e1 = H->range_extrema(0.5, 1.75);
  CHECK(e1.min_value == doctest::Approx(1.5));
  CHECK(e1.max_value == doctest::Approx(3.0));
  auto e2 = H->range_extrema(1.5, 3.0);
  CHECK(e2.min_value == doctest::Approx(1.0));
  CHECK(e2.max_value == doctest::Approx(2.0));
  auto e3 = H->range_extrema(-1.0, 0.5);
  CHECK(e3.min_value == doctest::Approx(0.0));
  CHECK(e3.max_value == doctest::Approx(3.0));
}

TEST_CASE("split at zero keeps one side and steepens the other") {
  auto H = make_w_well_hamiltonian();
  auto [plus, minus] = H->split_at_zero();
  CHECK(plus->evaluate(-1.0) == doctest::Approx(6.0));
  CHECK(plus->evaluate(1.5) == doctest::Approx(2.0));
  CHECK(plus->right_well_count() == 1);
  CHECK(plus->left_well_count() == 0);
  CHECK(minus->evaluate(1.0) == doctest::Approx(6.0));
  CHECK(minus->evaluate(-1.0) == doctest::Approx(3.0));
  CHECK(minus->right_well_count() == 0);
}

TEST_CASE("reflection swaps sides") {
  auto H = make_w_well_hamiltonian();
  auto R = H->reflect();
  for (double p : {-3.0, -1.2, -0.4, 0.0, 0.4, 1.2, 3.0})
    CHECK(R->evaluate(p) == doctest::Approx(H->evaluate(-p)).epsilon(1e-14));
  CHECK(R->left_well_count() == 1);
  CHECK(R->right_well_count() == 0);
  auto cv = R->critical_values(Side::Left);
  CHECK(cv.wells[0] == doctest::Approx(1.0));
  CHECK(cv.peaks[0] == doctest::Approx(3.0));
}

TEST_CASE("carve splits the w fixture at its only peak") {
  auto H = make_w_well_hamiltonian();
  auto carved = H->carve();
  CHECK(carved.peak_index == 1);
  CHECK(carved.well_index == 1);
  CHECK(carved.right_steep);
  CHECK(carved.carve_momentum == doctest::Approx(1.0));
  CHECK(carved.carve_value == doctest::Approx(3.0));
  CHECK(carved.p_shift == doctest::Approx(2.0));
  CHECK(carved.v_shift == doctest::Approx(1.0));

  // H1 = H left of p_2 = 1, then slope 6.
  CHECK(carved.h1->right_well_count() == 0);
  CHECK(carved.h1->evaluate(0.5) == doctest::Approx(1.5));
  CHECK(carved.h1->evaluate(1.0) == doctest::Approx(3.0));
  CHECK(carved.h1->evaluate(2.0) == doctest::Approx(9.0));
  CHECK(carved.h1->evaluate(-1.0) == doctest::Approx(3.0));

  // H2*(q) = H2(q + 2) - 1 where H2 = H right of p_2 = 1, slope -6 before.
  CHECK(carved.h2->right_well_count() == 0);
  CHECK(carved.h2->left_well_count() == 0);
  CHECK(carved.h2->evaluate(0.0) == doctest::Approx(0.0));
  CHECK(carved.h2->evaluate(1.0) == doctest::Approx(1.0));
  CHECK(carved.h2->evaluate(-0.5) == doctest::Approx(1.0));
  CHECK(carved.h2->evaluate(-1.0) == doctest::Approx(2.0));
  CHECK(carved.h2->evaluate(-1.5) == doctest::Approx(5.0));
}

TEST_CASE("carve keeps intermediate wells on the correct side") {
  // Two wells, deepest on the outside: m_1 < m_2 so l = 1, and the higher
  // peak decides k.  Build: 0 -> (1,4) -> (2,2) -> (3,5) -> (4,1) -> tail.
  // Breakpoints p_1 = 4 > p_2 = 3 > p_3 = 2 > p_4 = 1 > p_5 = 0.
  // m_1 = H(p_1) = 1, M_1 = H(p_2) = 5, m_2 = H(p_3) = 2, M_2 = H(p_4) = 4.
  Branch l1, r1, r2, r3, r4, r5;
  l1.secs.push_back(Section::make_affine({-kInf, 0.0}, 0.0, 0.0, -5.0));
  r5.secs.push_back(Section::make_affine({0.0, 1.0}, 0.0, 0.0, 4.0));
  r4.secs.push_back(Section::make_affine({1.0, 2.0}, 1.0, 4.0, -2.0));
  r3.secs.push_back(Section::make_affine({2.0, 3.0}, 2.0, 2.0, 3.0));
  r2.secs.push_back(Section::make_affine({3.0, 4.0}, 3.0, 5.0, -4.0));
  r1.secs.push_back(Section::make_affine({4.0, kInf}, 4.0, 1.0, 2.0));
  auto H = std::make_shared<PiecewiseMonotoneHamiltonian>(
      std::vector<Branch>{l1}, std::vector<Branch>{r1, r2, r3, r4, r5});

  CHECK(H->right_well_count() == 2);
  auto cv = H->critical_values(Side::Right);
  CHECK(cv.wells[0] == doctest::Approx(1.0));
  CHECK(cv.wells[1] == doctest::Approx(2.0));
  CHECK(cv.peaks[0] == doctest::Approx(5.0));
  CHECK(cv.peaks[1] == doctest::Approx(4.0));

  auto carved = H->carve();
  CHECK(carved.peak_index == 1);  // M_1 = 5 is the max peak
  CHECK(carved.well_index == 1);  // m_1 = 1 is the min well
  CHECK(carved.right_steep);      // l = k = 1

  // H1 keeps well 2.
  CHECK(carved.h1->right_well_count() == 1);
  auto cv1 = carved.h1->critical_values(Side::Right);
  CHECK(cv1.wells[0] == doctest::Approx(2.0));
  CHECK(cv1.peaks[0] == doctest::Approx(4.0));
  // and grows with slope 2 lipschitz = 10 beyond p_2 = 3.
  CHECK(carved.h1->evaluate(4.0) == doctest::Approx(15.0));

  // H2* is the outer well renormalized to the origin: quasiconvex.
  CHECK(carved.h2->right_well_count() == 0);
  CHECK(carved.h2->left_well_count() == 0);
  CHECK(carved.h2->evaluate(0.0) == doctest::Approx(0.0));
  // p_shift = p_1 = 4, v_shift = m_1 = 1: H2*(1) = H(5) - 1 = 3 - 1 = 2.
  CHECK(carved.h2->evaluate(1.0) == doctest::Approx(2.0));
  // left of the origin: H2*(-0.5) = H(3.5) - 1 = (5 - 4*0.5) - 1 = 2.
  CHECK(carved.h2->evaluate(-0.5) == doctest::Approx(2.0));
  // below the carve point the extension has slope -10 from (3, 5):
  // H2*(-1.5) = H2(2.5) - 1 = (5 + 10*0.5) - 1 = 9.
  CHECK(carved.h2->evaluate(-1.5) == doctest::Approx(9.0));
}

TEST_CASE("carve separates wells when the deepest sits inside") {
  // Deepest well nearest zero: l = 2 > k = 1 (left-steep case).
  // 0 -> (1,3) -> (2,1) -> (3,6) -> (4,2) -> tail slope 1.
  // m_1 = H(p_1) = 2, M_1 = H(p_2) = 6, m_2 = H(p_3) = 1, M_2 = H(p_4) = 3.
  Branch l1, r1, r2, r3, r4, r5;
  l1.secs.push_back(Section::make_affine({-kInf, 0.0}, 0.0, 0.0, -5.0));
  r5.secs.push_back(Section::make_affine({0.0, 1.0}, 0.0, 0.0, 3.0));
  r4.secs.push_back(Section::make_affine({1.0, 2.0}, 1.0, 3.0, -2.0));
  r3.secs.push_back(Section::make_affine({2.0, 3.0}, 2.0, 1.0, 5.0));
  r2.secs.push_back(Section::make_affine({3.0, 4.0}, 3.0, 6.0, -4.0));
  r1.secs.push_back(Section::make_affine({4.0, kInf}, 4.0, 2.0, 1.0));
  auto H = std::make_shared<PiecewiseMonotoneHamiltonian>(
      std::vector<Branch>{l1}, std::vector<Branch>{r1, r2, r3, r4, r5});

  auto carved = H->carve();
  CHECK(carved.peak_index == 1);
  CHECK(carved.well_index == 2);
  CHECK(!carved.right_steep);

  // H1 = H on (-inf, p_2 = 3], slope 10 beyond: keeps well 2 (m = 1).
  CHECK(carved.h1->right_well_count() == 1);
  auto cv1 = carved.h1->critical_values(Side::Right);
  CHECK(cv1.wells[0] == doctest::Approx(1.0));
  CHECK(cv1.peaks[0] == doctest::Approx(3.0));

  // H2 = H on [p_4 = 1, inf), decreasing ext from (1, 3) slope -10,
  // renormalized at (p_3, m_2) = (2, 1).
  CHECK(carved.h2->right_well_count() == 1);
  CHECK(carved.h2->left_well_count() == 0);
  auto cv2 = carved.h2->critical_values(Side::Right);
  CHECK(cv2.wells[0] == doctest::Approx(1.0));  // m_1 - m_2 = 2 - 1
  CHECK(cv2.peaks[0] == doctest::Approx(5.0));  // M_1 - m_2 = 6 - 1
  CHECK(carved.h2->evaluate(0.0) == doctest::Approx(0.0));
  CHECK(carved.h2->evaluate(-0.5) == doctest::Approx(1.0));   // H(1.5)-1
  CHECK(carved.h2->evaluate(-1.5) == doctest::Approx(7.0));   // ext: 3+10*0.5-1
  CHECK(carved.h2->evaluate(2.0) == doctest::Approx(1.0));    // H(4)-1
  CHECK(carved.p_shift == doctest::Approx(2.0));
  CHECK(carved.v_shift == doctest::Approx(1.0));
}

TEST_CASE("json round trip preserves the function") {
  auto H = make_w_well_hamiltonian();
  auto H2 = PiecewiseMonotoneHamiltonian::from_json(H->to_json());
  for (double p = -3.0; p <= 5.0; p += 0.17)
    CHECK(H2->evaluate(p) == doctest::Approx(H->evaluate(p)).epsilon(1e-12));
  CHECK(H2->right_well_count() == 1);
  CHECK(H2->lipschitz_bound() == doctest::Approx(3.0));
}

TEST_CASE("json loader names the violated invariant") {
  auto invariant_of = [](const std::string& text) -> std::string {
    try {
      PiecewiseMonotoneHamiltonian::from_json(text);
    } catch (const InvariantError& e) {
      return e.invariant();
    }
    return "";
  };

  // Missing tails.
  CHECK(invariant_of(R"({"branches":[{"kind":"affine","domain":[0,1],
      "slope":1,"value_at_left":0}]})") == "schema");

  // Wrong tail sign.
  CHECK(invariant_of(R"({"branches":[
      {"kind":"affine","domain":[-1,0],"slope":-1,"value_at_left":1},
      {"kind":"affine","domain":[0,1],"slope":1,"value_at_left":0}],
      "tail_slope_left":1,"tail_slope_right":1})") == "coercivity");

  // Discontinuity at a breakpoint.
  CHECK(invariant_of(R"({"branches":[
      {"kind":"affine","domain":[-1,0],"slope":-1,"value_at_left":1},
      {"kind":"affine","domain":[0,1],"slope":1,"value_at_left":0.5}],
      "tail_slope_left":-1,"tail_slope_right":1})") == "continuity");

  // No breakpoint at zero.
  CHECK(invariant_of(R"({"branches":[
      {"kind":"affine","domain":[-1,1],"slope":1,"value_at_left":-1}],
      "tail_slope_left":-1,"tail_slope_right":1})") == "breakpoint_at_zero");

  // Negative interior well.
  CHECK(invariant_of(R"({"branches":[
      {"kind":"affine","domain":[-1,0],"slope":-1,"value_at_left":1},
      {"kind":"affine","domain":[0,1],"slope":1,"value_at_left":0},
      {"kind":"affine","domain":[1,2],"slope":-2,"value_at_left":1},
      {"kind":"affine","domain":[2,3],"slope":1,"value_at_left":-1}],
      "tail_slope_left":-1,"tail_slope_right":1})") == "normalization_min");

  // Coinciding critical values (two wells at the same depth).
  CHECK(invariant_of(R"({"branches":[
      {"kind":"affine","domain":[-1,0],"slope":-6,"value_at_left":6},
      {"kind":"affine","domain":[0,1],"slope":3,"value_at_left":0},
      {"kind":"affine","domain":[1,2],"slope":-2,"value_at_left":3},
      {"kind":"affine","domain":[2,3],"slope":2,"value_at_left":1},
      {"kind":"affine","domain":[3,4],"slope":-2,"value_at_left":3},
      {"kind":"affine","domain":[4,5],"slope":1,"value_at_left":1}],
      "tail_slope_left":-6,"tail_slope_right":1})") ==
        "distinct_critical_values");
}

TEST_CASE("normalize recovers structure from raw samples") {
  // Double well with a tie at the min: rightmost minimizer wins.
  auto f = [](double p) {
    double t = p * p - 1.0;
    return t * t;
  };
  auto res = PiecewiseMonotoneHamiltonian::normalize(f, 1e-9);
  CHECK(res.record.p_shift == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(res.record.v_shift) < 1e-9);
  auto H = res.hamiltonian;
  CHECK(H->evaluate(0.0) == doctest::Approx(0.0));
  CHECK(H->evaluate(1.0) == doctest::Approx(f(2.0)).epsilon(1e-4));
  CHECK(H->evaluate(-3.0) == doctest::Approx(f(-2.0)).epsilon(1e-4));
  // The mirror well at p = -1 maps to q = -2 and gets nudged above zero.
  CHECK(H->left_well_count() == 1);
  auto cv = H->critical_values(Side::Left);
  CHECK(cv.wells[0] > 0.0);
  CHECK(cv.wells[0] < 1e-8);
  CHECK(cv.peaks[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(!res.record.nudges.empty());

  // Plain kink: stays a two-branch vee.
  auto res2 = PiecewiseMonotoneHamiltonian::normalize(
      [](double p) { return std::abs(p); }, 1e-9);
  CHECK(std::abs(res2.record.p_shift) < 1e-6);
  CHECK(res2.hamiltonian->quasiconvex());
  CHECK(res2.hamiltonian->evaluate(2.0) == doctest::Approx(2.0).epsilon(1e-5));
}
