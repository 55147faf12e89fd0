#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hjhom/potential.hpp"
#include "oracles.hpp"

using namespace hjhom;

TEST_CASE("cosine path realizes the full range") {
  auto V = PotentialModel::cosine(1.0);
  auto path = V->sample_path(0, {0.0, 1.0}, 1e-3);
  CHECK(path.min_value() == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(path.max_value() == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(V->eval(0.5) == doctest::Approx(-1.0));
  CHECK(V->eval(0.0) == doctest::Approx(0.0));

  CHECK_THROWS_AS(V->sample_path(0, {0.05, 0.15}, 1e-3), InvariantError);
}

TEST_CASE("periodic expectations match independent quadrature") {
  auto V = PotentialModel::cosine(1.0);
  // E[-V] = mbar/2
  auto e1 = V->expected_functional([](double v) { return -v; });
  CHECK(e1.value == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(e1.std_error == 0.0);
  // normalization
  auto e2 = V->expected_functional([](double) { return 1.0; });
  CHECK(e2.value == doctest::Approx(1.0).epsilon(1e-13));
  // E[psi_2(1 - V)] with the fixture branch (5-s)/2: equals 1.75
  auto e3 = V->expected_functional(
      [](double v) { return oracle::w_psi2(1.0 - v); });
  CHECK(e3.value == doctest::Approx(1.75).epsilon(1e-12));
  // cross-check against the independent Simpson oracle on a fresh integrand
  auto e4 = V->expected_functional(
      [](double v) { return std::sqrt(1.0 - v) + v * v; });
  double ref = oracle::integrate(
      [](double y) {
        double v = oracle::cosV(y, 1.0);
        return std::sqrt(1.0 - v) + v * v;
      },
      0.0, 1.0, 1e-13);
  CHECK(e4.value == doctest::Approx(ref).epsilon(1e-11));
}

TEST_CASE("random phase shifts the path but not the statistics") {
  auto base = PotentialModel::cosine(1.0);
  auto V = PotentialModel::random_phase_cosine(1.0, 12345);
  auto g = [](double v) { return v * v * v + 0.25 * v; };
  CHECK(V->expected_functional(g).value ==
        doctest::Approx(base->expected_functional(g).value).epsilon(1e-10));
  // same range
  auto path = V->sample_path(0, {0.0, 2.0}, 1e-3);
  CHECK(path.min_value() == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(path.max_value() == doctest::Approx(0.0).epsilon(1e-5));
  // but genuinely shifted
  bool differs = false;
  for (double y = 0.05; y < 1.0; y += 0.1)
    if (std::abs(V->eval(y) - base->eval(y)) > 1e-6) differs = true;
  CHECK(differs);
  // determinism
  auto V2 = PotentialModel::random_phase_cosine(1.0, 12345);
  CHECK(V2->eval(0.37) == V->eval(0.37));
}

TEST_CASE("block random is ergodically consistent") {
  auto V = PotentialModel::block_random(0.5, 1.0, 77);
  auto g = [](double v) { return -v; };
  auto a = V->expected_functional(g, {}, 1000);
  auto b = V->expected_functional(g, {}, 4000);
  CHECK(a.std_error > 0.0);
  double combined = std::sqrt(a.std_error * a.std_error +
                              b.std_error * b.std_error);
  CHECK(std::abs(a.value - b.value) < 3.0 * combined);

  // independent estimate: direct Simpson average over the first 200 cells
  // (integrated cell by cell; the bump vanishes on the integer lattice, so a
  // single whole-window Simpson pass would see only zeros)
  double direct = 0.0;
  for (int i = 0; i < 200; ++i)
    direct += oracle::integrate([&](double y) { return -V->eval(y); },
                                (double)i, (double)i + 1.0, 1e-10);
  direct /= 200.0;
  double se200 = a.std_error * std::sqrt(1000.0 / 200.0);
  CHECK(std::abs(a.value - direct) < 4.0 * se200 + 1e-6);

  // range realization over a long window
  auto path = V->sample_path(0, {0.0, 1000.0}, 0.01);
  CHECK(path.min_value() <= -0.98);
  CHECK(path.max_value() >= -0.02);
}

TEST_CASE("level crossings on the model hit closed-form roots") {
  auto V = PotentialModel::cosine(1.0);
  auto c1 = V->level_crossings({0.0, 1.0}, -0.5);
  REQUIRE(c1.size() == 2);
  CHECK(c1[0] == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(c1[1] == doctest::Approx(0.75).epsilon(1e-10));

  auto c2 = V->level_crossings({0.0, 1.0}, -0.25);
  REQUIRE(c2.size() == 2);
  CHECK(c2[0] == doctest::Approx(oracle::kCross1_mbar1).epsilon(1e-10));
  CHECK(c2[1] == doctest::Approx(oracle::kCross2_mbar1).epsilon(1e-10));

  CHECK(V->level_crossings({0.0, 1.0}, -2.0).empty());
  CHECK(V->level_crossings({0.0, 1.0}, 0.0).empty());

  // mbar = 2.5 crossings frozen from the high-precision oracle
  auto W = PotentialModel::cosine(2.5);
  auto c3 = W->level_crossings({0.0, 1.0}, -0.5);
  REQUIRE(c3.size() == 2);
  CHECK(c3[0] == doctest::Approx(oracle::kY1_mu05_mbar25).epsilon(1e-10));
  auto c4 = W->level_crossings({0.0, 1.0}, -2.0);
  REQUIRE(c4.size() == 2);
  CHECK(c4[0] == doctest::Approx(oracle::kYa_mu1_mbar25).epsilon(1e-10));
  CHECK(c4[1] == doctest::Approx(oracle::kYb_mu1_mbar25).epsilon(1e-10));
}

TEST_CASE("path crossings match model crossings") {
  auto V = PotentialModel::cosine(1.0);
  auto path = V->sample_path(0, {0.0, 1.0}, 1e-3);
  auto c = path_level_crossings(path, -0.5);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == doctest::Approx(0.25).epsilon(1e-5));
  CHECK(c[1] == doctest::Approx(0.75).epsilon(1e-5));
  CHECK(crossings_well_separated(c, path.h));

  // A node landing exactly on the level still counts when transversal.
  PotentialPath p2;
  p2.window = {0.0, 4.0};
  p2.h = 1.0;
  p2.values = {0.0, -0.5, -1.0, -0.5, 0.0};
  p2.mbar = 1.0;
  auto cc = path_level_crossings(p2, -0.5);
  CHECK(cc.size() == 2);

  // A tangential touch is excluded.
  PotentialPath p3;
  p3.window = {0.0, 4.0};
  p3.h = 1.0;
  p3.values = {0.0, -0.5, -0.4, -0.5, 0.0};
  p3.mbar = 1.0;
  CHECK(path_level_crossings(p3, -0.6).empty());
}

TEST_CASE("mollify smooths, renormalizes, and reports the distance") {
  auto V = PotentialModel::cosine(1.0);
  auto path = V->sample_path(0, {0.0, 1.0}, 1e-3);
  auto m = mollify(path, 1e-3);
  CHECK(m.sup_diff < 1e-2);
  CHECK(m.path.max_value() == doctest::Approx(0.0));
  CHECK(m.path.min_value() >= -1.0 - 1e-12);

  PotentialPath flat;
  flat.window = {0.0, 1.0};
  flat.h = 0.1;
  flat.values.assign(11, -0.3);
  flat.mbar = 1.0;
  auto mf = mollify(flat, 0.2);
  CHECK(mf.shift == doctest::Approx(-0.3));
  for (double v : mf.path.values) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("extrema and range detection") {
  auto V = PotentialModel::cosine(1.0);
  auto ex = V->extrema({0.2, 1.3});
  REQUIRE(ex.size() == 2);
  // golden-section accuracy on a quadratic extremum is ~sqrt(machine eps)
  CHECK(ex[0].y == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(ex[0].value == doctest::Approx(-1.0));
  CHECK(!ex[0].is_max);
  CHECK(ex[1].y == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(ex[1].value == doctest::Approx(0.0));
  CHECK(ex[1].is_max);

  auto r = V->range_on(0.1, 0.6);
  CHECK(r.min_value == doctest::Approx(-1.0));
  CHECK(r.max_value == doctest::Approx(V->eval(0.1)));
}

TEST_CASE("reflection preserves the law") {
  auto V = PotentialModel::block_random(0.25, 0.75, 9);
  auto R = V->reflected();
  for (double y : {-3.3, -1.0, 0.2, 2.7})
    CHECK(R->eval(y) == doctest::Approx(V->eval(-y)));
  auto C = PotentialModel::cosine(1.0);
  auto CR = C->reflected();
  auto g = [](double v) { return std::exp(v); };
  CHECK(CR->expected_functional(g).value ==
        doctest::Approx(C->expected_functional(g).value).epsilon(1e-12));
}

TEST_CASE("potential json round trip and validation") {
  for (const char* text :
       {R"({"variant":"cosine","mbar":2.5})",
        R"({"variant":"random_phase","base":{"variant":"cosine","mbar":1.0},"seed":42})",
        R"({"variant":"block_random","depth_dist":{"uniform":[0.5,1.0]},"seed":7})"}) {
    auto V = PotentialModel::from_json(text);
    auto V2 = PotentialModel::from_json(V->to_json());
    for (double y : {0.1, 0.7, 3.2})
      CHECK(V2->eval(y) == doctest::Approx(V->eval(y)));
  }
  CHECK_THROWS_AS(PotentialModel::from_json(R"({"variant":"nope"})"),
                  InvariantError);
  CHECK_THROWS_AS(PotentialModel::from_json(R"({"variant":"cosine"})"),
                  InvariantError);
  CHECK_THROWS_AS(PotentialModel::from_json("not json"), InvariantError);
}
