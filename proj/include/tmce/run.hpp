#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "tmce/analysis.hpp"
#include "tmce/config.hpp"
#include "tmce/version.hpp"

namespace tmce {

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* class_name(NodeClass c) {
  switch (c) {
    case NodeClass::PLUS_INF: return "PLUS_INF";
    case NodeClass::MINUS_INF: return "MINUS_INF";
    default: return "FINITE";
  }
}

}  // namespace detail

struct RunOutcome {
  int exit_code = 0;
  bool has_nodal = false;
  bool has_indicator = false;
  bool has_scan = false;
  bool scan_stable = true;
  SolveReport nodal;
  IndicatorSolveResult indicator;
  EnergyReport energy;
  DiagnosticReport diagnostics;
};

inline void write_solution_csv(const DomainMesh& mesh, const ScalarField& u,
                               const std::vector<NodeClass>& cls, std::ostream& os) {
  const MetricChart& ch = mesh.chart;
  os << "node_index";
  for (int a = 0; a < ch.dim; ++a) os << "," << ch.axis_name[a];
  os << ",u,class\n";
  for (int i = 0; i < ch.node_count(); ++i) {
    os << i;
    const auto c = ch.coords(i);
    for (int a = 0; a < ch.dim; ++a) os << "," << detail::fmt(c[std::size_t(a)]);
    os << "," << detail::fmt(u[std::size_t(i)]) << ","
       << detail::class_name(cls[std::size_t(i)]) << "\n";
  }
}

inline void write_history_csv(const std::vector<HistoryEntry>& hist, std::ostream& os) {
  os << "stage,iteration,energy,grad_norm\n";
  for (const auto& h : hist)
    os << h.stage << "," << h.iter << "," << detail::fmt(h.energy) << ","
       << detail::fmt(h.grad_norm) << "\n";
}

inline void write_indicator_csv(const SubgraphIndicator& ind, std::ostream& os) {
  const MetricChart& ch = ind.mesh->chart;
  for (int a = 0; a < ch.dim; ++a) os << "x" << a << "_index,";
  os << "r_index,lambda\n";
  for (int i = 0; i < ch.node_count(); ++i) {
    const auto m = ch.multi(i);
    for (int k = 0; k < ind.layers; ++k) {
      for (int a = 0; a < ch.dim; ++a) os << m[std::size_t(a)] << ",";
      os << k << "," << detail::fmt(ind.lambda[ind.site(i, k)]) << "\n";
    }
  }
}

inline nlohmann::json report_json(const RunConfig& cfg, const RunOutcome& out,
                                  const DomainMesh& mesh, double runtime_seconds) {
  nlohmann::json j;
  j["tool_version"] = version_string;
  j["config"] = cfg.raw;
  j["resolved"] = {{"alpha", cfg.alpha},
                   {"h", cfg.h},
                   {"h_r", cfg.solver.h_r},
                   {"cap_schedule", cfg.solver.cap_schedule},
                   {"sigma_steps", cfg.solver.sigma_steps},
                   {"grad_tol", cfg.solver.grad_tol},
                   {"energy_tol", cfg.solver.energy_tol},
                   {"wall_eps_rel", cfg.solver.wall_eps_rel},
                   {"tau", cfg.solver.tau},
                   {"sigma_dual", cfg.solver.sigma_dual},
                   {"solvers", cfg.solvers},
                   {"diagnostics", cfg.diagnostics},
                   {"output_dir", cfg.resolved_output_dir()}};
  j["domain"] = mesh.domain_name;
  j["nodes"] = mesh.chart.node_count();
  j["runtime_seconds"] = runtime_seconds;
  if (out.has_nodal || out.has_indicator) {
    const SolveReport& rep = out.has_nodal ? out.nodal : out.indicator.report;
    j["converged"] = rep.converged;
    j["iterations"] = rep.iterations;
    j["residual_linf"] = rep.residual_linf;
    j["residual_l2"] = rep.residual_l2;
    j["classification_counts"] = {{"finite", rep.count(NodeClass::FINITE)},
                                  {"plus_inf", rep.count(NodeClass::PLUS_INF)},
                                  {"minus_inf", rep.count(NodeClass::MINUS_INF)}};
    j["energies"] = {{"F", out.energy.F},
                     {"F_alpha", out.energy.F_alpha},
                     {"wall", out.energy.wall},
                     {"J", out.energy.J},
                     {"bv", out.energy.bv}};
    for (const auto& [k, v] : rep.diagnostics) j["solver_diagnostics"][k] = v;
  }
  if (out.has_indicator)
    j["perimeter"] = out.indicator.report.diagnostics.at("perimeter");
  if (out.has_scan) j["scan_stable"] = out.scan_stable;
  for (const auto& e : out.diagnostics.entries)
    j["diagnostics"][e.name] = {{"measured", e.measured},
                                {"bound", e.bound},
                                {"pass", e.pass},
                                {"context", e.context}};
  return j;
}

/// Runs the configured solvers and diagnostics, writes solution.csv,
/// report.json and history.csv into the output directory. Exit code 0 when
/// every requested solve converged or classified, 2 on an inconclusive
/// blow-up scan or unconverged solve.
inline RunOutcome run_solve(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  MeshOptions mopt;
  mopt.n_angular = cfg.n_angular;
  DomainMesh mesh = build_domain(cfg.domain, cfg.h, mopt);
  ScalarField psi = psi_field(mesh, cfg);

  RunOutcome out;
  for (const auto& s : cfg.solvers) {
    if (s == "nodal") {
      out.nodal = solve_nodal(mesh, psi, cfg.alpha, cfg.solver);
      out.has_nodal = true;
    } else if (s == "blowup_scan") {
      auto scan = blowup_scan(mesh, psi, cfg.alpha, cfg.solver);
      out.has_scan = true;
      out.scan_stable = scan.stable;
      out.nodal = std::move(scan.report);
      out.nodal.classification = scan.classification;
      out.has_nodal = true;
    } else if (s == "indicator") {
      // seed from a nodal solve when one already ran; the primal-dual
      // iteration still has to hold the seed against its own optimality
      out.indicator = solve_indicator(mesh, psi, cfg.alpha, cfg.solver,
                                      out.has_nodal ? &out.nodal.u : nullptr);
      out.has_indicator = true;
    }
  }

  const ScalarField& u = out.has_nodal ? out.nodal.u : out.indicator.report.u;
  out.energy = relaxed_energy(mesh, u, psi, cfg.alpha, cfg.solver.wall_eps_rel);

  FrozenConstants fc;
  for (const auto& d : cfg.diagnostics) {
    if (d == "mean_convexity") {
      out.diagnostics.entries.push_back(check_mean_convexity(mesh));
    } else if (d == "gradient_estimate") {
      std::vector<double> grid;
      for (double k = 0; k <= fc.gradient_estimate_K_max; k += 0.5) grid.push_back(k);
      out.diagnostics.entries.push_back(
          check_gradient_estimate(mesh, u, cfg.alpha, grid));
    } else if (d == "c0_estimate") {
      out.diagnostics.entries.push_back(check_c0_estimate(mesh, u, psi, fc));
    } else if (d == "small_sphere") {
      const std::string family =
          mesh.domain_name.rfind("sphere", 0) == 0 || mesh.domain_name == "hemisphere"
              ? "sphere"
              : (mesh.domain_name == "hyperbolic_disk" ? "hyperbolic" : "euclidean");
      out.diagnostics.entries.push_back(
          check_small_sphere_curvature(family, {0.1, 0.2, 0.3, 0.4}, 0.01, cfg.alpha)
              .entry);
    }
  }

  const std::filesystem::path dir(cfg.resolved_output_dir());
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "solution.csv");
    const auto& cls = out.has_nodal ? out.nodal.classification
                                    : out.indicator.report.classification;
    write_solution_csv(mesh, u, cls, os);
  }
  {
    std::ofstream os(dir / "history.csv");
    write_history_csv(out.has_nodal ? out.nodal.history : out.indicator.report.history, os);
  }
  if (cfg.indicator_dump && out.has_indicator) {
    std::ofstream os(dir / "indicator.csv");
    write_indicator_csv(out.indicator.indicator, os);
  }
  if (cfg.mesh_dump) {
    std::ofstream os(dir / "mesh.csv");
    dump_mesh_csv(mesh, os);
  }
  if (cfg.percell_dump) {
    std::ofstream os(dir / "percell.csv");
    os << "cell_index,area_term\n";
    for (std::size_t i = 0; i < out.energy.cell_area.size(); ++i)
      os << i << "," << detail::fmt(out.energy.cell_area[i]) << "\n";
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    std::ofstream os(dir / "report.json");
    os << report_json(cfg, out, mesh, secs).dump(2) << "\n";
  }

  const bool inconclusive = (out.has_scan && !out.scan_stable) ||
                            (out.has_nodal && !out.nodal.converged) ||
                            (out.has_indicator && !out.indicator.report.converged);
  out.exit_code = inconclusive ? 2 : 0;
  return out;
}

inline int cmd_solve(const std::string& config_path) {
  try {
    return run_solve(RunConfig::parse_file(config_path)).exit_code;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// Parameter sweeps

inline int run_sweep(RunConfig cfg, const std::string& param,
                     const std::vector<double>& values) {
  if (param != "h" && param != "T_max" && param != "alpha" && param != "domain_size")
    throw std::invalid_argument("sweep: unknown parameter '" + param + "'");
  const std::filesystem::path dir(cfg.resolved_output_dir());
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / "sweep.csv");
  os << "param,value,residual_linf,residual_l2,J,F_alpha,wall,n_finite,n_plus,"
        "n_minus,stable,iterations,converged,sup_abs_u\n";
  int worst = 0;
  const std::string base_output = cfg.output_dir;
  for (std::size_t i = 0; i < values.size(); ++i) {
    RunConfig c = cfg;
    c.output_dir = base_output + "/sweep_" + std::to_string(i);
    const double v = values[i];
    if (param == "h") {
      c.h = v;
    } else if (param == "alpha") {
      c.alpha = v;
    } else if (param == "T_max") {
      c.solver.cap_schedule = {v / 8, v / 4, v / 2, v};
    } else {
      auto spec = DomainSpec::parse(c.domain);
      if (spec.params.empty())
        throw std::invalid_argument("sweep: domain has no size parameter");
      spec.params[0] = v;
      std::string rendered = spec.name + "(";
      for (std::size_t k = 0; k < spec.params.size(); ++k)
        rendered += (k ? "," : "") + std::to_string(spec.params[k]);
      c.domain = rendered + ")";
    }
    const auto out = run_solve(c);
    worst = std::max(worst, out.exit_code);
    const SolveReport& rep = out.has_nodal ? out.nodal : out.indicator.report;
    double sup_u = 0;
    for (double uv : rep.u.values) sup_u = std::max(sup_u, std::abs(uv));
    os << param << "," << detail::fmt(v) << "," << detail::fmt(rep.residual_linf)
       << "," << detail::fmt(rep.residual_l2) << "," << detail::fmt(out.energy.J)
       << "," << detail::fmt(out.energy.F_alpha) << "," << detail::fmt(out.energy.wall)
       << "," << rep.count(NodeClass::FINITE) << "," << rep.count(NodeClass::PLUS_INF)
       << "," << rep.count(NodeClass::MINUS_INF) << ","
       << (out.has_scan ? (out.scan_stable ? 1 : 0) : 1) << "," << rep.iterations
       << "," << (rep.converged ? 1 : 0) << "," << detail::fmt(sup_u) << "\n";
  }
  return worst;
}

inline int cmd_sweep(const std::string& config_path, const std::string& param,
                     const std::vector<double>& values) {
  try {
    return run_sweep(RunConfig::parse_file(config_path), param, values);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// Verification batteries on built-in fixtures

namespace verify {

struct Row {
  std::string name;
  bool pass;
  double measured;
  double bound;
};

inline void battery_functionals(std::vector<Row>& rows) {
  DomainMesh mesh = build_domain("euclidean_square(1.0)", 1.0 / 16);
  std::mt19937_64 rng(7);
  const double alpha = 1.3;
  double worst_low = 1e300, worst_high = 1e300, worst_conf = 1e300;
  for (int t = 0; t < 25; ++t) {
    ScalarField u = random_smooth_field(mesh, rng, 1.5);
    double T = 0;
    for (double v : u.values) T = std::max(T, std::abs(v));
    T = std::max(T, 1e-6);
    const double F = product_area(mesh, u);
    const double bv = bv_norm(mesh, u);
    const double vol = mesh.volume();
    const double Fa = conformal_area(mesh, u, alpha);
    worst_low = std::min(worst_low, F - std::max(vol, bv));
    worst_high = std::min(worst_high, vol + bv - F);
    worst_conf = std::min(worst_conf, Fa - std::exp(-alpha * T) * std::max(vol, bv));
  }
  rows.push_back({"area_bounds_lower", worst_low >= -1e-12, worst_low, 0});
  rows.push_back({"area_bounds_upper", worst_high >= -1e-12, worst_high, 0});
  rows.push_back({"conformal_lower_bound", worst_conf >= -1e-12, worst_conf, 0});

  // analytic gradient vs central differences of the smoothed energy
  DomainMesh small = build_domain("euclidean_square(1.0)", 1.0 / 8);
  ScalarField u = random_smooth_field(small, rng, 0.8);
  ScalarField psi = make_field(small.chart, 0.1);
  const double eps_rel = 1e-3;
  ScalarField g = energy_gradient(small, u, psi, alpha, eps_rel);
  double max_rel = 0;
  for (int i = 0; i < small.chart.node_count(); i += 3) {
    const double step = 1e-6 * std::max(1.0, std::abs(u[std::size_t(i)]));
    ScalarField up = u, um = u;
    up[std::size_t(i)] += step;
    um[std::size_t(i)] -= step;
    const double fd = (relaxed_energy(small, up, psi, alpha, eps_rel).J_smoothed -
                       relaxed_energy(small, um, psi, alpha, eps_rel).J_smoothed) /
                      (2 * step);
    const double denom = std::max(std::abs(fd), 1e-8);
    max_rel = std::max(max_rel, std::abs(fd - g[std::size_t(i)]) / denom);
  }
  rows.push_back({"energy_gradient_fd", max_rel <= 1e-6, max_rel, 1e-6});

  // exact scaling under vertical translation
  ScalarField ua = u;
  for (auto& v : ua.values) v += 0.7;
  ScalarField psa = psi;
  for (auto& v : psa.values) v += 0.7;
  const double J0 = relaxed_energy(small, u, psi, alpha).J;
  const double J1 = relaxed_energy(small, ua, psa, alpha).J;
  const double rel = std::abs(J1 - std::exp(alpha * 0.7) * J0) / J1;
  rows.push_back({"translation_scaling", rel <= 1e-12, rel, 1e-12});

  const ScalarField zero = make_field(mesh.chart, 0.0);
  const double d1 = std::abs(conformal_area(mesh, zero, alpha) - mesh.volume());
  const double d2 = std::abs(product_area(mesh, zero) - mesh.volume());
  rows.push_back({"flat_area_is_volume", d1 <= 1e-12 && d2 <= 1e-12, d1 + d2, 1e-12});
}

inline void battery_perimeter(std::vector<Row>& rows) {
  DomainMesh mesh = build_domain("euclidean_square(1.0)", 1.0 / 48);
  std::mt19937_64 rng(11);
  const double alpha = 1.0, T = 1.0, h_r = 1.0 / 48;
  double worst = 0;
  for (int t = 0; t < 3; ++t) {
    ScalarField u = random_smooth_field(mesh, rng, 0.5);
    const double Fa = conformal_area(mesh, u, alpha);
    const auto ind = subgraph_indicator(mesh, u, T, h_r, alpha);
    const double per = weighted_perimeter(ind).total;
    worst = std::max(worst, std::abs(per - Fa) / Fa);
  }
  rows.push_back({"perimeter_equivalence", worst <= 0.05, worst, 0.05});

  ScalarField u = random_smooth_field(mesh, rng, 0.3);
  const auto ind = subgraph_indicator(mesh, u, T, h_r, alpha);
  const double base = weighted_perimeter(ind).total;
  const double a = 8 * ind.h_r;
  ScalarField us = u;
  for (auto& v : us.values) v += a;
  const auto inds = subgraph_indicator(mesh, us, T, ind.h_r, alpha);
  const double shifted = weighted_perimeter(inds).total;
  const double rel = std::abs(shifted - std::exp(alpha * a) * base) /
                     std::max(1.0, shifted);
  rows.push_back({"vertical_shift_scaling", rel <= 1e-10, rel, 1e-10});

  const auto ind2 = subgraph_indicator(mesh, u, 2 * T, ind.h_r, alpha);
  const double extended = weighted_perimeter(ind2).total;
  const double rel2 = std::abs(extended - base) / base;
  rows.push_back({"empty_slab_invariance", rel2 <= 1e-12, rel2, 1e-12});
}

inline void battery_conformal(std::vector<Row>& rows) {
  const double H = 0.37, df = 0.21, f = 0;
  const double id_err = std::abs(conformal_mean_curvature(H, 0 * df, f, 3) - H);
  rows.push_back({"identity_factor", id_err <= 1e-15, id_err, 1e-15});

  // a horizontal slice: H = 0, f = alpha r / n, df(v) = alpha / n
  const double alpha = 2.0, r = 0.4;
  const int n = 2;
  const double got = conformal_mean_curvature(0, alpha / n, alpha * r / n, n + 1);
  const double want = std::exp(-alpha * r / n) * alpha;
  rows.push_back({"horizontal_slice", std::abs(got - want) <= 1e-14,
                  std::abs(got - want), 1e-14});
}

inline void battery_estimates(std::vector<Row>& rows) {
  {
    const auto e = check_mean_convexity(build_domain("euclidean_disk(1.0)", 0.05));
    rows.push_back({"mean_convexity_disk", e.pass, e.measured, e.bound});
  }
  {
    const auto e = check_mean_convexity(build_domain("hemisphere()", 0.05));
    rows.push_back({"mean_convexity_hemisphere", e.pass && std::abs(e.measured) < 0.05,
                    e.measured, e.bound});
  }
  {
    const auto e = check_mean_convexity(build_domain("sphere_cap(2.2)", 0.01));
    rows.push_back({"mean_convexity_large_cap_fails", !e.pass, e.measured, e.bound});
  }
  {
    const auto r = check_small_sphere_curvature("euclidean", {0.1, 0.15, 0.2, 0.3}, 0.01);
    rows.push_back({"small_sphere_flat", r.entry.pass, r.entry.measured, r.entry.bound});
  }
  {
    MeshOptions mo;
    mo.n_angular = 16;
    auto mesh = build_domain("euclidean_disk(0.5)", 1.0 / 32, mo);
    SolverConfig cfg;
    ScalarField psi = make_field(mesh.chart, 0.0);
    auto rep = solve_nodal(mesh, psi, 1.0, cfg);
    FrozenConstants fc;
    const auto c0 = check_c0_estimate(mesh, rep.u, psi, fc);
    rows.push_back({"c0_small_ball", c0.pass, c0.measured, c0.bound});
    const auto ge = check_gradient_estimate(mesh, rep.u, 1.0, {0, 1, 2, 5, 10});
    rows.push_back({"gradient_estimate_disk", ge.pass, ge.measured, ge.bound});
  }
}

inline int run(const std::string& suite, std::ostream& os) {
  std::vector<Row> rows;
  if (suite == "functionals" || suite == "all") battery_functionals(rows);
  if (suite == "perimeter" || suite == "all") battery_perimeter(rows);
  if (suite == "conformal" || suite == "all") battery_conformal(rows);
  if (suite == "estimates" || suite == "all") battery_estimates(rows);
  if (rows.empty()) {
    os << "unknown suite '" << suite
       << "' (expected functionals|perimeter|conformal|estimates|all)\n";
    return 1;
  }
  bool all = true;
  for (const auto& r : rows) {
    all = all && r.pass;
    char line[160];
    std::snprintf(line, sizeof line, "%-32s %s  measured=%.6g bound=%.6g\n",
                  r.name.c_str(), r.pass ? "PASS" : "FAIL", r.measured, r.bound);
    os << line;
  }
  os << (all ? "all checks passed\n" : "FAILURES present\n");
  return all ? 0 : 1;
}

}  // namespace verify

inline int cmd_verify(const std::string& suite) {
  try {
    return verify::run(suite, std::cout);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}

}  // namespace tmce
