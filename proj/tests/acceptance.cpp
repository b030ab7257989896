// Acceptance suite: one pass/fail line per criterion, exit 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numbers>
#include <random>
#include <vector>

#include "support/oracles.hpp"
#include "tmce/catalog.hpp"
#include "tmce/fields.hpp"
#include "tmce/functionals.hpp"
#include "tmce/measures.hpp"
#include "tmce/solvers.hpp"

using namespace tmce;
namespace num = std::numbers;

namespace {

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %-28s %s\n", pass ? "PASS" : "FAIL", id, name,
              detail.c_str());
  if (!pass) ++failures;
}

[[gnu::format(printf, 1, 2)]] std::string fmt(const char* f, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double sup_err(const DomainMesh& mesh, const ScalarField& u,
               const std::function<double(double)>& exact, int axis = 0) {
  double e = 0;
  for (int i = 0; i < mesh.chart.node_count(); ++i)
    e = std::max(e, std::abs(u[std::size_t(i)] - exact(mesh.chart.coord(i, axis))));
  return e;
}

// 1. grim reaper oracle: interval (-1,1), alpha=1, L_inf <= 1e-3 at h=1/256
void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  auto mesh = build_domain("interval(1.0)", 1.0 / 256);
  ScalarField psi = expression_field(mesh, "-ln(cos(x))");
  SolverConfig cfg;
  auto rep = solve_nodal(mesh, psi, 1.0, cfg);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double err = sup_err(mesh, rep.u, tmce_test::grim_reaper_exact);
  report(1, "grim reaper oracle", rep.converged && err <= 1e-3 && secs < 10,
         fmt("Linf=%.2e (tol 1e-3), runtime=%.2fs (<10s)", err, secs));
}

// 2. radial bowl: unit disk, alpha=1, psi=0; profile <= 1e-3, residual <= 1e-4
void criterion2() {
  MeshOptions mo;
  mo.n_angular = 16;  // the scenario is rotationally symmetric
  auto mesh = build_domain("euclidean_disk(1.0)", 1.0 / 128, mo);
  SolverConfig cfg;
  auto rep = solve_nodal(mesh, make_field(mesh.chart, 0.0), 1.0, cfg);
  tmce_test::RadialBowlOracle oracle(1.0, 1.0);
  const double err =
      sup_err(mesh, rep.u, [&](double r) { return oracle(r); });
  report(2, "radial bowl oracle",
         rep.converged && err <= 1e-3 && rep.residual_linf <= 1e-4,
         fmt("Linf=%.2e (tol 1e-3), residual=%.2e (tol 1e-4)", err,
             rep.residual_linf));
}

// 3. perimeter equivalence on a 64^2 flat grid, 10 random fields, 5%
void criterion3() {
  std::mt19937_64 rng(314159);
  const double alpha = 1.0;
  auto run = [&](int m, int fields, double* worst) {
    auto mesh = build_domain("euclidean_square(1.0)", 1.0 / m);
    double w = 0;
    for (int t = 0; t < fields; ++t) {
      ScalarField u = random_smooth_field(mesh, rng, 0.5);
      const double fa = conformal_area(mesh, u, alpha);
      const double per =
          weighted_perimeter(subgraph_indicator(mesh, u, 1.0, 1.0 / m, alpha)).total;
      w = std::max(w, std::abs(per - fa) / fa);
    }
    *worst = w;
  };
  double worst64 = 0, worst128 = 0;
  run(64, 10, &worst64);
  run(128, 3, &worst128);
  report(3, "perimeter equivalence",
         worst64 <= 0.05 && worst128 < worst64,
         fmt("worst |F_a-P|/F_a: %.3f%% at 64^2 (tol 5%%), %.3f%% refined",
             100 * worst64, 100 * worst128));
}

// 4. hemisphere non-existence: >=95% interior MINUS_INF stably, energy ~ pi
void criterion4() {
  auto mesh = build_domain("hemisphere()", 0.05);
  SolverConfig cfg;
  ScalarField psi = make_field(mesh.chart, 0.0);
  auto scan = blowup_scan(mesh, psi, 2.0, cfg);
  int interior = 0, minus = 0;
  for (int i = 0; i < mesh.chart.node_count(); ++i)
    if (mesh.is_interior(i)) {
      ++interior;
      if (scan.classification[std::size_t(i)] == NodeClass::MINUS_INF) ++minus;
    }
  const auto energy = relaxed_energy(mesh, scan.report.u, psi, 2.0);
  const double rel = std::abs(energy.J - num::pi) / num::pi;
  report(4, "hemisphere non-existence",
         scan.stable && minus >= 0.95 * interior && rel <= 0.02,
         fmt("stable=%d, minus=%d/%d interior, |J-pi|/pi=%.4f (tol 0.02)",
             int(scan.stable), minus, interior, rel));
}

// 5. small cap solvability: sphere_cap(0.4), alpha=2, all FINITE, res <= 1e-3
void criterion5() {
  auto mesh = build_domain("sphere_cap(0.4)", 0.4 / 32);
  SolverConfig cfg;
  auto rep = solve_nodal(mesh, make_field(mesh.chart, 0.0), 2.0, cfg);
  const bool all_finite = rep.count(NodeClass::FINITE) == mesh.chart.node_count();
  report(5, "small cap solvability",
         rep.converged && all_finite && rep.residual_linf <= 1e-3,
         fmt("finite=%d/%d, residual=%.2e (tol 1e-3)",
             rep.count(NodeClass::FINITE), mesh.chart.node_count(),
             rep.residual_linf));
}

// 6. translation covariance on the disk: ||(u2-u1)-1||_inf <= 1e-8
void criterion6() {
  MeshOptions mo;
  mo.n_angular = 24;
  auto mesh = build_domain("euclidean_disk(1.0)", 1.0 / 32, mo);
  SolverConfig cfg;
  auto r0 = solve_nodal(mesh, make_field(mesh.chart, 0.0), 1.0, cfg);
  auto r1 = solve_nodal(mesh, make_field(mesh.chart, 1.0), 1.0, cfg);
  double worst = 0;
  for (int i = 0; i < mesh.chart.node_count(); ++i)
    worst = std::max(worst,
                     std::abs(r1.u[std::size_t(i)] - r0.u[std::size_t(i)] - 1.0));
  report(6, "translation covariance", worst <= 1e-8,
         fmt("||(u2-u1)-1||_inf = %.2e (tol 1e-8)", worst));
}

// 7. functional bounds on 100 random capped fields, zero violations
void criterion7() {
  std::mt19937_64 rng(271828);
  const double alpha = 1.4;
  int violations = 0, checked = 0;
  for (const char* dom : {"euclidean_square(1.0)", "euclidean_disk(1.0)"}) {
    auto mesh = build_domain(dom, 1.0 / 16);
    const double vol = mesh.volume();
    for (int t = 0; t < 50; ++t) {
      ScalarField u = random_smooth_field(mesh, rng, 2.0);
      double T = 1e-9;
      for (double v : u.values) T = std::max(T, std::abs(v));
      const double F = product_area(mesh, u);
      const double bv = bv_norm(mesh, u);
      const double Fa = conformal_area(mesh, u, alpha);
      ++checked;
      if (F < std::max(vol, bv) - 1e-12 || F > vol + bv + 1e-12 ||
          Fa < std::exp(-alpha * T) * std::max(vol, bv) - 1e-12)
        ++violations;
    }
  }
  report(7, "functional bounds", violations == 0,
         fmt("%d violations in %d fields", violations, checked));
}

// 8. local minimality probe: 100 monotone compact perturbations never win
void criterion8() {
  SolverConfig cfg;
  cfg.energy_tol = 1e-4;
  double worst = 0;
  {
    auto mesh = build_domain("interval(1.0)", 1.0 / 48);
    cfg.h_r = 1.0 / 48;
    cfg.indicator_T = 2.0;
    auto ind = solve_indicator(mesh, expression_field(mesh, "-ln(cos(x))"), 1.0, cfg);
    worst = std::min(worst, perimeter_probe(ind.indicator, 8001, 100));
  }
  {
    MeshOptions mo;
    mo.n_angular = 48;
    auto mesh = build_domain("euclidean_disk(1.0)", 1.0 / 20, mo);
    cfg.h_r = 1.0 / 32;
    cfg.indicator_T = 1.0;
    SolverConfig ncfg = cfg;
    auto nod = solve_nodal(mesh, make_field(mesh.chart, 0.0), 1.0, ncfg);
    auto ind = solve_indicator(mesh, make_field(mesh.chart, 0.0), 1.0, cfg, &nod.u);
    worst = std::min(worst, perimeter_probe(ind.indicator, 8002, 100));
  }
  report(8, "local minimality probe", worst >= -cfg.energy_tol,
         fmt("worst perimeter change %.2e (tol -%g)", worst, cfg.energy_tol));
}

// 9. mollifier battery: unit mass, constraint preservation, L1 halving
void criterion9() {
  bool mass_ok;
  {
    const int steps = 250'000;
    double s = 0;
    for (int i = 0; i < steps; ++i) {
      const double r = (i + 0.5) / steps;
      s += MollifierSpec::profile(r * r, 2) * 2.0 * num::pi * r / steps;
    }
    mass_ok = std::abs(s - 1.0) < 1e-10;
  }
  auto mesh = build_domain("euclidean_square(1.0)", 1.0 / 64);
  const MetricChart& ch = mesh.chart;
  // constraint preservation with eps = 0.05 on the flat 2D fixture
  ScalarField h = make_field(ch);
  VectorField x = make_vector_field(ch);
  for (int i = 0; i < ch.node_count(); ++i) {
    const auto c = ch.coords(i);
    const double hv = 0.9 * std::cos(3 * c[0] + 1) * std::sin(2 * c[1]);
    h[std::size_t(i)] = hv;
    x.comp[0][std::size_t(i)] = std::sqrt(1 - hv * hv);
  }
  MollifierSpec spec{0.06};
  auto h2 = mollify_scalar(ch, h, spec);
  auto y = mollify_vector(ch, x, spec);
  bool constraint_ok = true;
  for (int i = 0; i < ch.node_count(); ++i) {
    const auto c = ch.coords(i);
    const double edge = std::min({c[0], 1 - c[0], c[1], 1 - c[1]});
    if (edge <= spec.sigma + ch.h[0]) continue;
    const double q = h2[std::size_t(i)] * h2[std::size_t(i)] +
                     y.comp[0][std::size_t(i)] * y.comp[0][std::size_t(i)] +
                     y.comp[1][std::size_t(i)] * y.comp[1][std::size_t(i)];
    constraint_ok = constraint_ok && q <= 1.05 * 1.05;
  }
  // L1 convergence under sigma halving
  double l1[3];
  int li = 0;
  for (double sigma : {0.12, 0.06, 0.03}) {
    auto out = mollify_scalar(ch, h, MollifierSpec{sigma});
    double s = 0;
    for (int i = 0; i < ch.node_count(); ++i) {
      const auto c = ch.coords(i);
      const double edge = std::min({c[0], 1 - c[0], c[1], 1 - c[1]});
      if (edge <= 0.15) continue;
      s += std::abs(out[std::size_t(i)] - h[std::size_t(i)]) *
           mesh.node_volume[std::size_t(i)];
    }
    l1[li++] = s;
  }
  const bool l1_ok = l1[1] < 0.5 * l1[0] && l1[2] < 0.5 * l1[1];
  report(9, "mollifier battery", mass_ok && constraint_ok && l1_ok,
         fmt("mass_ok=%d constraint_ok=%d L1: %.1e -> %.1e -> %.1e", int(mass_ok),
             int(constraint_ok), l1[0], l1[1], l1[2]));
}

// 10. analytic gradient vs central differences, 20 random fields, 1e-6
void criterion10() {
  auto mesh = build_domain("euclidean_square(1.0)", 1.0 / 8);
  std::mt19937_64 rng(1618);
  const double alpha = 1.1;
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    ScalarField u = random_smooth_field(mesh, rng, 0.7);
    ScalarField psi = random_smooth_field(mesh, rng, 0.4);
    for (auto& v : u.values) v += 1.0;  // keep the wall off its kink
    auto g = energy_gradient(mesh, u, psi, alpha);
    double gmax = 0;
    for (double v : g.values) gmax = std::max(gmax, std::abs(v));
    for (int i = 0; i < mesh.chart.node_count(); ++i) {
      const double step = 1e-5;
      ScalarField up = u, um = u;
      up[std::size_t(i)] += step;
      um[std::size_t(i)] -= step;
      const double fd = (relaxed_energy(mesh, up, psi, alpha).J_smoothed -
                         relaxed_energy(mesh, um, psi, alpha).J_smoothed) /
                        (2 * step);
      worst = std::max(worst, std::abs(fd - g[std::size_t(i)]) /
                                  std::max(std::abs(fd), 0.01 * gmax));
    }
  }
  report(10, "energy gradient check", worst <= 1e-6,
         fmt("worst relative error %.2e (tol 1e-6)", worst));
}

// 11. h-sweep on the grim reaper: fitted order >= 1.8
void criterion11() {
  std::vector<double> hs, errs;
  SolverConfig cfg;
  for (int k = 0; k < 3; ++k) {
    const double h = 1.0 / (64 << k);
    auto mesh = build_domain("interval(1.0)", h);
    auto rep = solve_nodal(mesh, expression_field(mesh, "-ln(cos(x))"), 1.0, cfg);
    hs.push_back(h);
    errs.push_back(sup_err(mesh, rep.u, tmce_test::grim_reaper_exact));
  }
  const double order = tmce_test::fitted_order(hs, errs);
  report(11, "convergence order", order >= 1.8,
         fmt("fitted order %.2f (errs %.1e, %.1e, %.1e)", order, errs[0], errs[1],
             errs[2]));
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  criterion11();
  std::printf("%s: %d of 11 criteria failed\n", failures ? "FAIL" : "OK", failures);
  return failures ? 1 : 0;
}
