#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "tmce/mesh.hpp"

namespace tmce {

namespace detail {

/// Second-order partial derivative along an axis: centered where both
/// neighbors resolve, one-sided at chart edges. `value(shift)` supplies
/// field samples; pole-reflected reads are the caller's business there.
template <class ValueFn>
inline double partial_axis_fn(const MetricChart& ch,
                              const std::array<int, max_dim>& m, int axis,
                              double center, ValueFn&& value) {
  const auto p = ch.shift(m, axis, +1);
  const auto q = ch.shift(m, axis, -1);
  const double h = ch.h[axis];
  if (p.node >= 0 && q.node >= 0) return (value(p) - value(q)) / (2 * h);
  // One-sided closure via a cubic-extrapolated ghost fed to the centered
  // formula. Its truncation error (+h^2/6 f''') matches the interior
  // stencil, so divergences of gradient fields stay second order up to the
  // boundary; with only three nodes it degrades to the plain second-order form.
  if (p.node >= 0) {
    const auto p2 = ch.shift(m, axis, +2);
    if (p2.node < 0) throw std::runtime_error("stencil: axis too short");
    const auto p3 = ch.shift(m, axis, +3);
    if (p3.node >= 0)
      return (-4 * center + 7 * value(p) - 4 * value(p2) + value(p3)) / (2 * h);
    return (-3 * center + 4 * value(p) - value(p2)) / (2 * h);
  }
  if (q.node >= 0) {
    const auto q2 = ch.shift(m, axis, -2);
    if (q2.node < 0) throw std::runtime_error("stencil: axis too short");
    const auto q3 = ch.shift(m, axis, -3);
    if (q3.node >= 0)
      return (4 * center - 7 * value(q) + 4 * value(q2) - value(q3)) / (2 * h);
    return (3 * center - 4 * value(q) + value(q2)) / (2 * h);
  }
  throw std::runtime_error("stencil: isolated node");
}

// Scalar samples and sqrt(g)-weighted axis fluxes are both even across the
// pole reflection (signed-radius continuation), so reflected reads are plain.
inline double partial_axis(const MetricChart& ch, const std::vector<double>& f,
                           const std::array<int, max_dim>& m, int axis) {
  const int i = ch.index(m);
  return partial_axis_fn(ch, m, axis, f[std::size_t(i)],
                         [&](const MetricChart::Shift& s) {
                           return f[std::size_t(s.node)];
                         });
}

}  // namespace detail

/// Du = g^{ab} d_b u in the chart basis.
inline VectorField gradient(const DomainMesh& mesh, const ScalarField& u) {
  const MetricChart& ch = mesh.chart;
  if (u.size() != std::size_t(ch.node_count()))
    throw std::invalid_argument("gradient: field/mesh shape mismatch");
  VectorField out = make_vector_field(ch);
  const int n = ch.node_count();
  for (int i = 0; i < n; ++i) {
    const auto m = ch.multi(i);
    double du[max_dim] = {0, 0};
    for (int a = 0; a < ch.dim; ++a)
      du[a] = detail::partial_axis(ch, u.values, m, a);
    for (int a = 0; a < ch.dim; ++a) {
      double s = 0;
      for (int b = 0; b < ch.dim; ++b) s += ch.metric_inv(i, a, b) * du[b];
      out.comp[a][std::size_t(i)] = s;
    }
  }
  return out;
}

/// div X = (1/sqrt g) d_a (sqrt g X^a).
inline ScalarField divergence(const DomainMesh& mesh, const VectorField& X) {
  const MetricChart& ch = mesh.chart;
  if (X.size() != std::size_t(ch.node_count()) || X.dim != ch.dim)
    throw std::invalid_argument("divergence: field/mesh shape mismatch");
  ScalarField out = make_field(ch);
  const int n = ch.node_count();
  std::vector<double> flux(std::size_t(n), 0.0);
  for (int a = 0; a < ch.dim; ++a) {
    for (int i = 0; i < n; ++i)
      flux[std::size_t(i)] = ch.sqrt_det[i] * X.comp[a][std::size_t(i)];
    for (int i = 0; i < n; ++i) {
      const auto m = ch.multi(i);
      out[std::size_t(i)] +=
          detail::partial_axis(ch, flux, m, a) / ch.sqrt_det[i];
    }
  }
  return out;
}

inline double inner(const MetricChart& ch, int node, const VectorField& X,
                    const VectorField& Y) {
  double s = 0;
  for (int a = 0; a < ch.dim; ++a)
    for (int b = 0; b < ch.dim; ++b)
      s += ch.metric(node, a, b) * X.comp[a][std::size_t(node)] * Y.comp[b][std::size_t(node)];
  return s;
}

struct CurvatureResult {
  ScalarField H;         // div(Du / omega)
  ScalarField residual;  // H - alpha / omega
};

inline CurvatureResult graph_mean_curvature(const DomainMesh& mesh,
                                            const ScalarField& u, double alpha) {
  const MetricChart& ch = mesh.chart;
  VectorField du = gradient(mesh, u);
  VectorField x = make_vector_field(ch);
  const int n = ch.node_count();
  std::vector<double> omega(std::size_t(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const double w = std::sqrt(1.0 + inner(ch, i, du, du));
    omega[std::size_t(i)] = w;
    for (int a = 0; a < ch.dim; ++a)
      x.comp[a][std::size_t(i)] = du.comp[a][std::size_t(i)] / w;
  }
  CurvatureResult res;
  res.H = divergence(mesh, x);
  res.residual = make_field(ch);
  for (int i = 0; i < n; ++i)
    res.residual[std::size_t(i)] = res.H[std::size_t(i)] - alpha / omega[std::size_t(i)];
  return res;
}

struct BoundaryCurvature {
  std::vector<double> H;  // aligned with mesh.boundary
  double min_H = 0;
  bool mean_convex = false;
  double tol = 0;
};

/// Discrete div of the outward normal at each boundary node. The normal is
/// extended to a collar by nearest boundary point, which for the orthogonal
/// catalog charts holds its chart components fixed; the derivative along
/// the boundary axis is one-sided into the domain.
inline BoundaryCurvature boundary_mean_curvature(const DomainMesh& mesh) {
  const MetricChart& ch = mesh.chart;
  if (mesh.boundary.empty())
    throw std::runtime_error("boundary_mean_curvature: mesh has no boundary");
  for (int a = 0; a < ch.dim; ++a)
    if (!ch.periodic[a] && ch.shape[a] < 3)
      throw std::runtime_error("boundary_mean_curvature: collar thinner than stencil");

  BoundaryCurvature out;
  out.H.reserve(mesh.boundary.size());
  out.min_H = std::numeric_limits<double>::infinity();
  for (const auto& b : mesh.boundary) {
    const auto m = ch.multi(b.node);
    // chart components rescaled to stay unit along the collar (parallel
    // transport along the normal geodesics of the orthogonal charts)
    auto unit_at = [&](int node, int a) {
      double q = 0;
      for (int r = 0; r < ch.dim; ++r)
        for (int c = 0; c < ch.dim; ++c)
          q += b.normal[r] * ch.metric(node, r, c) * b.normal[c];
      return b.normal[a] / std::sqrt(q);
    };
    double div_n = 0;
    for (int a = 0; a < ch.dim; ++a) {
      auto flux = [&](const MetricChart::Shift& s) {
        return ch.sqrt_det[s.node] * unit_at(s.node, a);
      };
      const double center = ch.sqrt_det[b.node] * unit_at(b.node, a);
      div_n += detail::partial_axis_fn(ch, m, a, center, flux);
    }
    div_n /= ch.sqrt_det[b.node];
    out.H.push_back(div_n);
    out.min_H = std::min(out.min_H, div_n);
  }
  double hmax = 0;
  for (int a = 0; a < ch.dim; ++a) hmax = std::max(hmax, ch.h[a]);
  out.tol = 10 * hmax;
  out.mean_convex = out.min_H >= -out.tol;
  return out;
}

/// Mean curvature under the conformal rescaling e^{2f} g:
/// H~ = e^{-f} (H + (m-1) df(v)).
inline double conformal_mean_curvature(double H, double df_v, double f, int m) {
  return std::exp(-f) * (H + (m - 1) * df_v);
}

}  // namespace tmce
