#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tmce/catalog.hpp"
#include "tmce/solvers.hpp"

namespace tmce {

struct DiagnosticEntry {
  std::string name;
  double measured = 0;
  double bound = 0;
  bool pass = false;
  std::string context;
};

struct DiagnosticReport {
  std::vector<DiagnosticEntry> entries;
  bool all_pass() const {
    for (const auto& e : entries)
      if (!e.pass) return false;
    return true;
  }
};

/// Constants the estimates leave abstract, measured once on the catalog
/// scenarios and frozen as regression bounds. Mirrors fixtures/frozen_constants.txt.
struct FrozenConstants {
  double c0_small_ball_C = 1.0;
  double gradient_estimate_K_max = 10.0;

  static FrozenConstants load(const std::string& path) {
    FrozenConstants fc;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("fixtures: cannot open " + path);
    std::string line;
    while (std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(0, eq);
      key.erase(0, key.find_first_not_of(" \t"));
      key.erase(key.find_last_not_of(" \t") + 1);
      const double val = std::stod(line.substr(eq + 1));
      if (key == "c0_small_ball_C") fc.c0_small_ball_C = val;
      else if (key == "gradient_estimate_K_max") fc.gradient_estimate_K_max = val;
      else throw std::runtime_error("fixtures: unknown key '" + key + "'");
    }
    return fc;
  }
};

namespace detail {

inline double sup_gradient_norm(const DomainMesh& mesh, const ScalarField& u,
                                bool interior_only) {
  const auto du = gradient(mesh, u);
  double s = 0;
  for (int i = 0; i < mesh.chart.node_count(); ++i) {
    if (interior_only && !mesh.is_interior(i)) continue;
    if (!interior_only && mesh.is_interior(i)) continue;
    s = std::max(s, std::sqrt(inner(mesh.chart, i, du, du)));
  }
  return s;
}

}  // namespace detail

/// sup |Du| <= e^{2 K max|u|} sup_boundary (1 + |Du|) for some K in the grid.
inline DiagnosticEntry check_gradient_estimate(const DomainMesh& mesh,
                                               const ScalarField& u, double alpha,
                                               const std::vector<double>& K_grid) {
  (void)alpha;
  const double sup_du = detail::sup_gradient_norm(mesh, u, true);
  const double sup_bd = 1.0 + detail::sup_gradient_norm(mesh, u, false);
  double max_u = 0;
  for (double v : u.values) max_u = std::max(max_u, std::abs(v));

  DiagnosticEntry e;
  e.name = "gradient_estimate";
  e.measured = sup_du;
  e.pass = false;
  double k_found = -1;
  for (double K : K_grid) {
    if (sup_du <= std::exp(2 * K * max_u) * sup_bd) {
      k_found = K;
      e.pass = true;
      break;
    }
  }
  e.bound = k_found >= 0 ? std::exp(2 * k_found * max_u) * sup_bd : 0;
  std::ostringstream ctx;
  ctx << "K=" << k_found << " max|u|=" << max_u << " sup_bd(1+|Du|)=" << sup_bd;
  e.context = ctx.str();
  return e;
}

/// sup |u| <= C (sup_boundary |psi| + 1), C frozen per small-ball family.
inline DiagnosticEntry check_c0_estimate(const DomainMesh& mesh, const ScalarField& u,
                                         const ScalarField& psi,
                                         const FrozenConstants& fc) {
  if (!mesh.small_ball_family)
    throw std::invalid_argument("check_c0_estimate: domain not in the small-ball family");
  double sup_u = 0;
  for (double v : u.values) sup_u = std::max(sup_u, std::abs(v));
  double sup_psi = 0;
  for (const auto& b : mesh.boundary)
    sup_psi = std::max(sup_psi, std::abs(psi[std::size_t(b.node)]));
  DiagnosticEntry e;
  e.name = "c0_estimate";
  e.measured = sup_u;
  e.bound = fc.c0_small_ball_C * (sup_psi + 1.0);
  e.pass = e.measured <= e.bound;
  std::ostringstream ctx;
  ctx << mesh.domain_name << " C=" << fc.c0_small_ball_C << " sup|psi|=" << sup_psi;
  e.context = ctx.str();
  return e;
}

struct SmallSphereResult {
  DiagnosticEntry entry;
  double fitted_leading = 0;   // limit of H*r
  double fitted_slope = 0;     // coefficient of r^2 in H*r
  double r_mean_convex = 0;    // largest tested radius with min H > alpha
};

/// Fits H(boundary ball of radius r) * r ~ c0 + c2 r^2 over the given radii
/// and compares the leading coefficient with the divergence-convention value
/// n-1 (the n/r normalization is reported alongside, not assumed).
inline SmallSphereResult check_small_sphere_curvature(const std::string& family,
                                                      const std::vector<double>& radii,
                                                      double h, double alpha = 0) {
  if (radii.size() < 2)
    throw std::invalid_argument("check_small_sphere_curvature: need at least two radii");
  std::vector<double> xs, ys;
  SmallSphereResult out;
  out.r_mean_convex = 0;
  for (double r : radii) {
    DomainMesh mesh;
    if (family == "euclidean")
      mesh = build_domain("euclidean_disk(" + std::to_string(r) + ")", h);
    else if (family == "sphere")
      mesh = build_domain("sphere_cap(" + std::to_string(r) + ")", h);
    else if (family == "hyperbolic")
      mesh = build_domain("hyperbolic_disk(" + std::to_string(r) + ")", h);
    else
      throw std::invalid_argument("check_small_sphere_curvature: unknown family");
    const auto bc = boundary_mean_curvature(mesh);
    double mean = 0;
    for (double v : bc.H) mean += v;
    mean /= double(bc.H.size());
    xs.push_back(r * r);
    ys.push_back(mean * r);
    if (bc.min_H > alpha) out.r_mean_convex = std::max(out.r_mean_convex, r);
  }
  // least squares y = c0 + c2 x
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = double(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  out.fitted_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  out.fitted_leading = (sy - out.fitted_slope * sx) / m;

  const int n = 2;  // catalog families are surfaces
  out.entry.name = "small_sphere_curvature";
  out.entry.measured = out.fitted_leading;
  out.entry.bound = n - 1;
  out.entry.pass = std::abs(out.fitted_leading - (n - 1)) <= 0.05 * (n - 1);
  std::ostringstream ctx;
  ctx << family << " slope=" << out.fitted_slope << " vs n=" << n
      << " (divergence convention n-1=" << n - 1 << ")";
  out.entry.context = ctx.str();
  return out;
}

/// min over boundary nodes of div(outward normal) >= -tol, tol = 10 h.
inline DiagnosticEntry check_mean_convexity(const DomainMesh& mesh) {
  const auto bc = boundary_mean_curvature(mesh);
  DiagnosticEntry e;
  e.name = "mean_convexity";
  e.measured = bc.min_H;
  e.bound = -bc.tol;
  e.pass = bc.mean_convex;
  e.context = mesh.domain_name;
  return e;
}

}  // namespace tmce
