#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tmce/measures.hpp"

namespace tmce {

namespace detail {

/// Cell density rho = sqrt(vert + |Dw|^2), vert = (kappa * mean w)^2, or 1
/// when kappa == 0 (product-metric area in the raw variable). With
/// w = e^{alpha u}/alpha and kappa = alpha this is the graph-area integrand
/// e^{alpha u} sqrt(1 + |Du|^2); steep cells integrate the vertical part of
/// the graph exactly, which is what keeps wall energies honest through jumps.
struct CellDerivs {
  double value = 0;
  std::array<double, 4> grad{};
  std::array<double, 16> hess{};
};

inline CellDerivs cell_energy_derivs(const DomainMesh& mesh, const Cell& cell,
                                     const std::vector<double>& w, double kappa,
                                     bool want_hess) {
  const int d = mesh.chart.dim;
  const int nc = 1 << d;
  CellDerivs out;
  double ds[4] = {0, 0, 0, 0};
  double d2s[16] = {0};

  double s = 0;
  if (kappa > 0) {
    double mean = 0;
    for (int c = 0; c < nc; ++c) mean += w[std::size_t(cell.corner[c])];
    mean /= nc;
    s = kappa * kappa * mean * mean;
    for (int c = 0; c < nc; ++c) ds[c] += 2 * kappa * kappa * mean / nc;
    if (want_hess)
      for (int c = 0; c < nc; ++c)
        for (int c2 = 0; c2 < nc; ++c2) d2s[c * nc + c2] += 2 * kappa * kappa / (nc * nc);
  } else {
    s = 1.0;
  }

  const int ne = quad::edges_per_axis(d);
  for (int a = 0; a < d; ++a) {
    const double ca = cell.inv_gaa[a] / (ne * mesh.chart.h[a] * mesh.chart.h[a]);
    const auto edges = quad::axis_edges(d, a);
    for (int e = 0; e < ne; ++e) {
      const int t = edges[std::size_t(e)][0], hd = edges[std::size_t(e)][1];
      const double diff = w[std::size_t(cell.corner[hd])] - w[std::size_t(cell.corner[t])];
      s += ca * diff * diff;
      ds[hd] += 2 * ca * diff;
      ds[t] -= 2 * ca * diff;
      if (want_hess) {
        d2s[hd * nc + hd] += 2 * ca;
        d2s[t * nc + t] += 2 * ca;
        d2s[hd * nc + t] -= 2 * ca;
        d2s[t * nc + hd] -= 2 * ca;
      }
    }
  }

  const double rho = std::sqrt(s);
  out.value = rho * cell.vol;
  for (int c = 0; c < nc; ++c) out.grad[std::size_t(c)] = cell.vol * ds[c] / (2 * rho);
  if (want_hess) {
    for (int c = 0; c < nc; ++c)
      for (int c2 = 0; c2 < nc; ++c2)
        out.hess[std::size_t(c * nc + c2)] =
            cell.vol * (d2s[c * nc + c2] / (2 * rho) - ds[c] * ds[c2] / (4 * rho * s));
  }
  return out;
}

inline double cells_energy(const DomainMesh& mesh, const std::vector<double>& w,
                           double kappa) {
  double total = 0;
  for (const auto& c : mesh.cells)
    total += cell_energy_derivs(mesh, c, w, kappa, false).value;
  return total;
}

inline std::vector<double> to_exp_variable(const ScalarField& u, double alpha) {
  std::vector<double> v(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) v[i] = std::exp(alpha * u[i]) / alpha;
  return v;
}

/// Scale used by the wall smoothing: mean boundary value of e^{alpha psi}.
inline double wall_scale(const DomainMesh& mesh, const ScalarField& psi, double alpha) {
  double s = 0, w = 0;
  for (const auto& b : mesh.boundary) {
    s += b.weight * std::exp(alpha * psi[std::size_t(b.node)]);
    w += b.weight;
  }
  return w > 0 ? s / w : 1.0;
}

}  // namespace detail

/// Area of the graph of u in the product metric g + dr^2.
inline double product_area(const DomainMesh& mesh, const ScalarField& u) {
  require_diagonal_metric(mesh, "product_area");
  if (u.size() != std::size_t(mesh.chart.node_count()))
    throw std::invalid_argument("product_area: field/mesh shape mismatch");
  return detail::cells_energy(mesh, u.values, 0.0);
}

/// Area of the graph of u in the conformally rescaled product metric:
/// integral of e^{alpha u} sqrt(1 + |Du|^2).
inline double conformal_area(const DomainMesh& mesh, const ScalarField& u,
                             double alpha) {
  require_diagonal_metric(mesh, "conformal_area");
  if (!(alpha > 0)) throw std::invalid_argument("conformal_area: alpha must be positive");
  if (u.size() != std::size_t(mesh.chart.node_count()))
    throw std::invalid_argument("conformal_area: field/mesh shape mismatch");
  return detail::cells_energy(mesh, detail::to_exp_variable(u, alpha), alpha);
}

struct EnergyReport {
  double F = 0;         // product area
  double F_alpha = 0;   // conformal area
  double wall = 0;      // boundary jump term, exact absolute value
  double J = 0;         // F_alpha + wall
  double bv = 0;
  double wall_smoothed = 0;  // sqrt(s^2 + eps^2) surrogate
  double J_smoothed = 0;
  double eps_effective = 0;
  std::vector<double> cell_area;  // per-cell F_alpha contributions
  std::vector<double> wall_terms;  // per boundary node
};

/// Relaxed Dirichlet energy J = F_alpha(u) + (1/alpha) |e^{alpha u} -
/// e^{alpha psi}| over the boundary. The smoothed variant backs gradients;
/// the report keeps the exact value. eps_rel scales with the boundary data
/// so that J is exactly homogeneous under vertical translation.
inline EnergyReport relaxed_energy(const DomainMesh& mesh, const ScalarField& u,
                                   const ScalarField& psi, double alpha,
                                   double eps_rel = 1e-3) {
  require_diagonal_metric(mesh, "relaxed_energy");
  if (!(alpha > 0)) throw std::invalid_argument("relaxed_energy: alpha must be positive");
  EnergyReport rep;
  rep.F = product_area(mesh, u);
  rep.bv = bv_norm(mesh, u);
  const auto v = detail::to_exp_variable(u, alpha);
  rep.cell_area.reserve(mesh.cells.size());
  for (const auto& c : mesh.cells) {
    const double val = detail::cell_energy_derivs(mesh, c, v, alpha, false).value;
    rep.cell_area.push_back(val);
    rep.F_alpha += val;
  }
  const double eps = eps_rel * alpha * detail::wall_scale(mesh, psi, alpha);
  rep.eps_effective = eps;
  rep.wall_terms.reserve(mesh.boundary.size());
  for (const auto& b : mesh.boundary) {
    const double s = std::exp(alpha * u[std::size_t(b.node)]) -
                     std::exp(alpha * psi[std::size_t(b.node)]);
    const double term = b.weight * std::abs(s) / alpha;
    rep.wall_terms.push_back(term);
    rep.wall += term;
    rep.wall_smoothed += b.weight * std::sqrt(s * s + eps * eps) / alpha;
  }
  rep.J = rep.F_alpha + rep.wall;
  rep.J_smoothed = rep.F_alpha + rep.wall_smoothed;
  return rep;
}

/// Nodal partial derivatives of the smoothed J with respect to u.
inline ScalarField energy_gradient(const DomainMesh& mesh, const ScalarField& u,
                                   const ScalarField& psi, double alpha,
                                   double eps_rel = 1e-3) {
  require_diagonal_metric(mesh, "energy_gradient");
  if (!(alpha > 0) || !(eps_rel > 0))
    throw std::invalid_argument("energy_gradient: alpha and eps must be positive");
  const auto v = detail::to_exp_variable(u, alpha);
  ScalarField g = make_field(mesh.chart);
  const int nc = mesh.corners_per_cell();
  for (const auto& c : mesh.cells) {
    const auto der = detail::cell_energy_derivs(mesh, c, v, alpha, false);
    for (int k = 0; k < nc; ++k)
      g[std::size_t(c.corner[k])] += der.grad[std::size_t(k)];
  }
  const double eps = eps_rel * alpha * detail::wall_scale(mesh, psi, alpha);
  for (const auto& b : mesh.boundary) {
    const double s = std::exp(alpha * u[std::size_t(b.node)]) -
                     std::exp(alpha * psi[std::size_t(b.node)]);
    g[std::size_t(b.node)] += b.weight * s / std::sqrt(s * s + eps * eps);
  }
  // chain rule dv/du = e^{alpha u}
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= std::exp(alpha * u[i]);
  return g;
}

}  // namespace tmce
