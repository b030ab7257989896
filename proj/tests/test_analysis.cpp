#include <doctest.h>

#include <cmath>

#include "tmce/analysis.hpp"
#include "tmce/catalog.hpp"

using namespace tmce;

TEST_CASE("gradient estimate diagnostic") {
  const std::vector<double> grid{0, 0.5, 1, 2, 5, 10};
  SUBCASE("flat solutions hold with K = 0") {
    auto mesh = build_domain("euclidean_square(1.0)", 0.125);
    auto e = check_gradient_estimate(mesh, make_field(mesh.chart, 0.0), 1.0, grid);
    CHECK(e.pass);
    CHECK(e.context.find("K=0") != std::string::npos);
  }
  SUBCASE("disk solve passes with a small K") {
    MeshOptions mo;
    mo.n_angular = 16;
    auto mesh = build_domain("euclidean_disk(1.0)", 1.0 / 32, mo);
    SolverConfig cfg;
    auto rep = solve_nodal(mesh, make_field(mesh.chart, 0.0), 1.0, cfg);
    auto e = check_gradient_estimate(mesh, rep.u, 1.0, grid);
    CHECK(e.pass);
  }
  SUBCASE("the needed K grows as the grim reaper interval widens") {
    SolverConfig cfg;
    double prev_ratio = 0;
    for (double a : {0.8, 1.2}) {
      auto mesh = build_domain("interval(" + std::to_string(a) + ")", a / 128);
      ScalarField psi = make_field(mesh.chart);
      for (int i = 0; i < mesh.chart.node_count(); ++i)
        psi[std::size_t(i)] = -std::log(std::cos(mesh.chart.coord(i, 0)));
      auto rep = solve_nodal(mesh, psi, 1.0, cfg);
      auto e = check_gradient_estimate(mesh, rep.u, 1.0, grid);
      CHECK(e.pass);
      // interior sup grows faster than the boundary term as a -> pi/2
      const double ratio = e.measured;
      CHECK(ratio > prev_ratio);
      prev_ratio = ratio;
    }
  }
}

TEST_CASE("C0 estimate against the frozen constant") {
  FrozenConstants fc;
  SolverConfig cfg;
  SUBCASE("small disk, flat data") {
    MeshOptions mo;
    mo.n_angular = 16;
    auto mesh = build_domain("euclidean_disk(0.5)", 1.0 / 48, mo);
    auto rep = solve_nodal(mesh, make_field(mesh.chart, 0.0), 1.0, cfg);
    auto e = check_c0_estimate(mesh, rep.u, make_field(mesh.chart, 0.0), fc);
    CHECK(e.pass);
  }
  SUBCASE("constant data shifts affinely") {
    MeshOptions mo;
    mo.n_angular = 16;
    auto mesh = build_domain("euclidean_disk(0.5)", 1.0 / 48, mo);
    for (double c : {1.0, 2.0}) {
      auto rep = solve_nodal(mesh, make_field(mesh.chart, c), 1.0, cfg);
      auto e = check_c0_estimate(mesh, rep.u, make_field(mesh.chart, c), fc);
      CHECK(e.pass);
      CHECK(e.bound == doctest::Approx(fc.c0_small_ball_C * (c + 1)));
    }
  }
  SUBCASE("large domains are rejected") {
    auto mesh = build_domain("euclidean_square(1.0)", 0.125);
    CHECK_THROWS(check_c0_estimate(mesh, make_field(mesh.chart, 0.0),
                                   make_field(mesh.chart, 0.0), fc));
  }
}

TEST_CASE("small sphere curvature fit") {
  SUBCASE("flat family: H r -> 1") {
    auto r = check_small_sphere_curvature("euclidean", {0.1, 0.15, 0.2, 0.3}, 0.01);
    CHECK(r.entry.pass);
    CHECK(r.entry.measured == doctest::Approx(1.0).epsilon(0.01));
  }
  SUBCASE("unit sphere: H = cot r, slope -1/3") {
    auto r = check_small_sphere_curvature("sphere", {0.15, 0.2, 0.3, 0.4}, 0.005);
    CHECK(r.entry.pass);
    CHECK(r.fitted_slope == doctest::Approx(-1.0 / 3).epsilon(0.1));
  }
  SUBCASE("mean convexity margin H > alpha below a threshold radius") {
    auto r = check_small_sphere_curvature("sphere", {0.2, 0.3, 0.45}, 0.005, 2.0);
    CHECK(r.r_mean_convex >= 0.45);  // cot(0.45) = 2.07 > 2
    auto r2 = check_small_sphere_curvature("sphere", {0.2, 0.5}, 0.005, 2.0);
    CHECK(r2.r_mean_convex == doctest::Approx(0.2));  // cot(0.5) = 1.83 < 2
  }
}

TEST_CASE("mean convexity diagnostic") {
  SUBCASE("disk passes") {
    auto e = check_mean_convexity(build_domain("euclidean_disk(1.0)", 0.05));
    CHECK(e.pass);
    CHECK(e.measured == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("hemisphere passes with min near zero, O(h)") {
    double prev = -1;
    for (double h : {0.1, 0.05}) {
      auto e = check_mean_convexity(build_domain("hemisphere()", h));
      CHECK(e.pass);
      const double mag = std::abs(e.measured);
      if (prev >= 0) CHECK(mag <= std::max(prev, 1e-12));
      prev = mag;
      CHECK(mag <= 10 * h);
    }
  }
  SUBCASE("caps beyond the equator fail") {
    auto e = check_mean_convexity(build_domain("sphere_cap(2.0)", 0.01));
    CHECK(!e.pass);
    CHECK(e.measured < 0);
  }
}

TEST_CASE("diagnostics are recomputable from their inputs") {
  auto mesh = build_domain("euclidean_disk(1.0)", 0.05);
  auto e1 = check_mean_convexity(mesh);
  auto e2 = check_mean_convexity(mesh);
  CHECK(e1.measured == e2.measured);
  CHECK(e1.pass == e2.pass);
}

TEST_CASE("frozen constants fixture file round trip") {
  const auto fc = FrozenConstants::load(std::string(TMCE_SOURCE_DIR) +
                                        "/fixtures/frozen_constants.txt");
  FrozenConstants defaults;
  CHECK(fc.c0_small_ball_C == doctest::Approx(defaults.c0_small_ball_C));
  CHECK(fc.gradient_estimate_K_max == doctest::Approx(defaults.gradient_estimate_K_max));
  CHECK_THROWS(FrozenConstants::load("/nonexistent/path.txt"));
}
