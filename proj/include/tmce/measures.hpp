#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tmce/operators.hpp"
#include "tmce/quadrature.hpp"

namespace tmce {

enum class NodeClass : std::uint8_t { FINITE = 0, PLUS_INF = 1, MINUS_INF = 2 };

inline void require_diagonal_metric(const DomainMesh& mesh, const char* who) {
  const MetricChart& ch = mesh.chart;
  if (ch.dim == 1) return;
  for (int i = 0; i < ch.node_count(); ++i)
    if (std::abs(ch.metric(i, 0, 1)) > 1e-13)
      throw std::invalid_argument(std::string(who) + ": cell quadrature needs a diagonal metric");
}

// ---------------------------------------------------------------------------
// Total variation and traces

/// ||Du||(Omega) for nodal fields: quadrature of |Du|_g over cells.
inline double bv_norm(const DomainMesh& mesh, const ScalarField& u) {
  require_diagonal_metric(mesh, "bv_norm");
  if (u.size() != std::size_t(mesh.chart.node_count()))
    throw std::invalid_argument("bv_norm: field/mesh shape mismatch");
  double total = 0;
  for (const auto& c : mesh.cells)
    total += std::sqrt(quad::cell_grad_sq(mesh, c, u.values)) * c.vol;
  return total;
}

/// Wall area between the graphs of u and psi over the boundary:
/// (1/alpha) * contour integral of |e^{alpha u} - e^{alpha psi}|.
inline double boundary_jump(const DomainMesh& mesh, const ScalarField& u,
                            const ScalarField& psi, double alpha) {
  if (!(alpha > 0)) throw std::invalid_argument("boundary_jump: alpha must be positive");
  double total = 0;
  for (const auto& b : mesh.boundary) {
    const double du = std::exp(alpha * u[std::size_t(b.node)]) -
                      std::exp(alpha * psi[std::size_t(b.node)]);
    total += b.weight * std::abs(du);
  }
  return total / alpha;
}

inline ScalarField truncate(const ScalarField& u, double T) {
  if (!(T > 0)) throw std::invalid_argument("truncate: cap must be positive");
  ScalarField out = u;
  for (auto& v : out.values) v = std::max(std::min(v, T), -T);
  out.cap = T;
  return out;
}

// ---------------------------------------------------------------------------
// Mollification on a chart (normal-ball picture: Euclidean kernel in chart
// coordinates, sqrt(det g)-weighted, zero extension outside the box).

struct MollifierSpec {
  double sigma = 0.1;

  /// Normalized bump exp(-1/(1-|x|^2)) on |x|<1, unit mass in dimension n.
  static double profile(double rho2, int n) {
    if (rho2 >= 1.0) return 0.0;
    return normalization(n) * std::exp(-1.0 / (1.0 - rho2));
  }

  static double normalization(int n) {
    static const double c1 = 1.0 / radial_integral(1);
    static const double c2 = 1.0 / radial_integral(2);
    return n == 1 ? c1 : c2;
  }

  /// integral over the unit ball of exp(-1/(1-|x|^2)), by fine midpoint rule
  static double radial_integral(int n) {
    const int steps = 200000;
    double s = 0;
    for (int i = 0; i < steps; ++i) {
      const double r = (i + 0.5) / steps;
      const double f = std::exp(-1.0 / (1.0 - r * r));
      s += (n == 1 ? 2.0 * f : 2.0 * 3.14159265358979323846 * r * f) / steps;
    }
    return s;
  }
};

namespace detail {

struct KernelStencil {
  std::vector<int> offset;   // flattened multi-offsets, dim entries each
  std::vector<double> w;     // normalized lattice weights
};

inline KernelStencil kernel_stencil(const MetricChart& ch, double sigma) {
  for (int a = 0; a < ch.dim; ++a)
    if (sigma >= 0.5 * (ch.hi[a] - ch.lo[a]))
      throw std::invalid_argument("mollify: sigma too large for this chart");
  KernelStencil st;
  std::array<int, max_dim> reach{};
  for (int a = 0; a < ch.dim; ++a) reach[a] = int(std::floor(sigma / ch.h[a]));
  double mass = 0;
  std::array<int, max_dim> o{};
  auto visit = [&](const std::array<int, max_dim>& off) {
    double rho2 = 0;
    for (int a = 0; a < ch.dim; ++a) {
      const double z = off[a] * ch.h[a] / sigma;
      rho2 += z * z;
    }
    double w = MollifierSpec::profile(rho2, ch.dim);
    if (w <= 0) return;
    for (int a = 0; a < ch.dim; ++a) st.offset.push_back(off[a]);
    st.w.push_back(w);
    mass += w;
  };
  if (ch.dim == 1) {
    for (o[0] = -reach[0]; o[0] <= reach[0]; ++o[0]) visit(o);
  } else {
    for (o[1] = -reach[1]; o[1] <= reach[1]; ++o[1])
      for (o[0] = -reach[0]; o[0] <= reach[0]; ++o[0]) visit(o);
  }
  if (st.w.empty()) throw std::invalid_argument("mollify: sigma below grid resolution");
  for (auto& w : st.w) w /= mass;
  return st;
}

template <class PerNode>
inline void convolve(const MetricChart& ch, const KernelStencil& st, PerNode&& fn) {
  const int n = ch.node_count();
  for (int i = 0; i < n; ++i) {
    const auto m = ch.multi(i);
    fn(i, [&](int k) -> int {  // resolves stencil entry k to a node or -1
      std::array<int, max_dim> mm = m;
      for (int a = 0; a < ch.dim; ++a) {
        int j = mm[a] + st.offset[std::size_t(k) * ch.dim + a];
        if (ch.periodic[a]) j = ((j % ch.shape[a]) + ch.shape[a]) % ch.shape[a];
        if (j < 0 || j >= ch.shape[a]) return -1;
        mm[a] = j;
      }
      return ch.index(mm);
    });
  }
}

}  // namespace detail

/// h' = (1/sqrt(det g)) phi_sigma * (sqrt(det g) h), zero-extended.
inline ScalarField mollify_scalar(const MetricChart& ch, const ScalarField& h,
                                  const MollifierSpec& spec) {
  const auto st = detail::kernel_stencil(ch, spec.sigma);
  ScalarField out;
  out.values.assign(h.size(), 0.0);
  detail::convolve(ch, st, [&](int i, auto&& resolve) {
    double s = 0;
    for (std::size_t k = 0; k < st.w.size(); ++k) {
      const int j = resolve(int(k));
      if (j < 0) continue;
      s += st.w[k] * ch.sqrt_det[j] * h[std::size_t(j)];
    }
    out[std::size_t(i)] = s / ch.sqrt_det[i];
  });
  return out;
}

inline VectorField mollify_vector(const MetricChart& ch, const VectorField& X,
                                  const MollifierSpec& spec) {
  const auto st = detail::kernel_stencil(ch, spec.sigma);
  VectorField out = X;
  for (int a = 0; a < ch.dim; ++a)
    std::fill(out.comp[a].begin(), out.comp[a].end(), 0.0);
  detail::convolve(ch, st, [&](int i, auto&& resolve) {
    double s[max_dim] = {0, 0};
    for (std::size_t k = 0; k < st.w.size(); ++k) {
      const int j = resolve(int(k));
      if (j < 0) continue;
      for (int a = 0; a < ch.dim; ++a)
        s[a] += st.w[k] * ch.sqrt_det[j] * X.comp[a][std::size_t(j)];
    }
    for (int a = 0; a < ch.dim; ++a)
      out.comp[a][std::size_t(i)] = s[a] / ch.sqrt_det[i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Subgraph indicators and the weighted perimeter in Q_alpha

/// Relaxed indicator of a subgraph over mesh x [-T, T]. Values live at
/// r-cell centers r_k = -T + (k+1/2) h_r, r fastest in memory.
struct SubgraphIndicator {
  const DomainMesh* mesh = nullptr;
  double alpha = 1.0;
  double T = 1.0;
  double h_r = 1.0 / 64;
  int layers = 0;
  std::vector<double> lambda;

  double r_center(int k) const { return -T + (k + 0.5) * h_r; }
  std::size_t site(int node, int k) const {
    return std::size_t(node) * std::size_t(layers) + std::size_t(k);
  }

  void check_monotone(double tol = 1e-9) const {
    const int n = mesh->chart.node_count();
    for (int i = 0; i < n; ++i)
      for (int k = 0; k + 1 < layers; ++k)
        if (lambda[site(i, k + 1)] > lambda[site(i, k)] + tol)
          throw std::runtime_error("SubgraphIndicator: monotonicity violated");
  }
};

/// Anti-aliased indicator: full cells below u(x), a fractional cell where
/// the graph crosses, zeros above.
inline SubgraphIndicator subgraph_indicator(const DomainMesh& mesh,
                                            const ScalarField& u, double T,
                                            double h_r, double alpha = 1.0) {
  if (!(h_r > 0)) throw std::invalid_argument("subgraph_indicator: h_r must be positive");
  if (!(T > 0)) throw std::invalid_argument("subgraph_indicator: T must be positive");
  SubgraphIndicator ind;
  ind.mesh = &mesh;
  ind.alpha = alpha;
  ind.T = T;
  ind.layers = std::max(2, int(std::lround(2 * T / h_r)));
  ind.h_r = 2 * T / ind.layers;
  const int n = mesh.chart.node_count();
  ind.lambda.assign(std::size_t(n) * ind.layers, 0.0);
  for (int i = 0; i < n; ++i) {
    const double ui = std::max(std::min(u[std::size_t(i)], T), -T);
    for (int k = 0; k < ind.layers; ++k) {
      const double bottom = -T + k * ind.h_r;
      ind.lambda[ind.site(i, k)] =
          std::clamp((ui - bottom) / ind.h_r, 0.0, 1.0);
    }
  }
  return ind;
}

struct PerimeterReport {
  double total = 0;
  std::vector<double> density;      // e^{alpha r} |D lambda| per dual cell
  std::vector<double> cell_volume;  // product-metric volume per dual cell
  std::vector<double> direction;   // (dim+1) unit components where density>0
};

/// ||D lambda||_{Q_alpha}: product-metric total variation with weight
/// e^{alpha r}. Cell gradients are corner-averaged per axis, which keeps
/// sharp interfaces isotropic.
inline PerimeterReport weighted_perimeter(const SubgraphIndicator& ind) {
  const DomainMesh& mesh = *ind.mesh;
  require_diagonal_metric(mesh, "weighted_perimeter");
  ind.check_monotone();
  const MetricChart& ch = mesh.chart;
  const int d = ch.dim;
  const int nc = 1 << d;
  const double alpha = ind.alpha;
  PerimeterReport rep;
  rep.density.reserve(mesh.cells.size() * std::size_t(ind.layers - 1));
  rep.cell_volume.reserve(rep.density.capacity());
  rep.direction.reserve(rep.density.capacity() * (d + 1));

  for (const auto& cell : mesh.cells) {
    for (int k = 0; k + 1 < ind.layers; ++k) {
      // average signed differences per axis over parallel edges
      double comp[max_dim + 1] = {0, 0, 0};
      for (int a = 0; a < d; ++a) {
        const auto edges = quad::axis_edges(d, a);
        double s = 0;
        for (int e = 0; e < quad::edges_per_axis(d); ++e)
          for (int kk = 0; kk <= 1; ++kk)
            s += ind.lambda[ind.site(cell.corner[edges[std::size_t(e)][1]], k + kk)] -
                 ind.lambda[ind.site(cell.corner[edges[std::size_t(e)][0]], k + kk)];
        comp[a] = s / (nc * ch.h[a]) * std::sqrt(cell.inv_gaa[a]);
      }
      {
        double s = 0;
        for (int c = 0; c < nc; ++c)
          s += ind.lambda[ind.site(cell.corner[c], k + 1)] -
               ind.lambda[ind.site(cell.corner[c], k)];
        comp[d] = s / (nc * ind.h_r);
      }
      double norm2 = 0;
      for (int a = 0; a <= d; ++a) norm2 += comp[a] * comp[a];
      const double mag = std::sqrt(norm2);
      const double r_mid = -ind.T + (k + 1) * ind.h_r;
      const double density = std::exp(alpha * r_mid) * mag;
      const double vol = cell.vol * ind.h_r;
      rep.total += density * vol;
      rep.density.push_back(density);
      rep.cell_volume.push_back(vol);
      for (int a = 0; a <= d; ++a)
        rep.direction.push_back(mag > 0 ? comp[a] / mag : 0.0);
    }
  }
  return rep;
}

struct ProfileResult {
  ScalarField u;
  std::vector<NodeClass> flags;
};

/// Inverts an indicator into a profile via
/// e^{alpha w(x)} = alpha * integral e^{alpha t} lambda(x,t) dt,
/// with the implicit full slab below -T included. Nodes whose column is
/// empty (full) within delta = 2 h_r of the cap are flagged -inf (+inf).
inline ProfileResult reconstruct_profile(const SubgraphIndicator& ind) {
  ind.check_monotone();
  const DomainMesh& mesh = *ind.mesh;
  const int n = mesh.chart.node_count();
  const double a = ind.alpha;
  const double T = ind.T;
  const double delta = 2 * ind.h_r;
  ProfileResult out;
  out.u = make_field(mesh.chart);
  out.u.cap = T;
  out.flags.assign(std::size_t(n), NodeClass::FINITE);
  for (int i = 0; i < n; ++i) {
    double integral = std::exp(-a * T) / a;  // tail below the grid
    for (int k = 0; k < ind.layers; ++k)
      integral += std::exp(a * ind.r_center(k)) * ind.lambda[ind.site(i, k)] * ind.h_r;
    const double w = std::log(a * integral) / a;
    out.u[std::size_t(i)] = std::max(std::min(w, T), -T);
    if (integral <= std::exp(a * (-T + delta)) / a)
      out.flags[std::size_t(i)] = NodeClass::MINUS_INF;
    else if (w >= T - delta)
      out.flags[std::size_t(i)] = NodeClass::PLUS_INF;
  }
  return out;
}

}  // namespace tmce
