#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmce {

inline constexpr int max_dim = 2;

/// Logically rectangular grid over a parameter box carrying a Riemannian
/// metric per node. Axis 0 is fastest in the node ordering.
struct MetricChart {
  int dim = 0;
  std::array<int, max_dim> shape{};
  std::array<double, max_dim> lo{};
  std::array<double, max_dim> hi{};
  std::array<double, max_dim> h{};
  std::array<bool, max_dim> periodic{};
  std::array<std::string, max_dim> axis_name{};

  // A "pole" axis has its low end closing onto a coordinate singularity
  // (disk center, sphere pole). Stencils reaching below the first node are
  // resolved by antipodal reflection through the pole: node (k, j) maps to
  // (k', j + m/2 mod m) on the periodic partner axis.
  int pole_axis = -1;
  int pole_partner = -1;

  std::vector<double> g;         // node-major, dim*dim row-major blocks
  std::vector<double> g_inv;     // same layout
  std::vector<double> sqrt_det;  // per node

  int node_count() const {
    int n = 1;
    for (int a = 0; a < dim; ++a) n *= shape[a];
    return n;
  }

  int index(const std::array<int, max_dim>& m) const {
    int idx = 0, stride = 1;
    for (int a = 0; a < dim; ++a) {
      idx += m[a] * stride;
      stride *= shape[a];
    }
    return idx;
  }

  std::array<int, max_dim> multi(int node) const {
    std::array<int, max_dim> m{};
    for (int a = 0; a < dim; ++a) {
      m[a] = node % shape[a];
      node /= shape[a];
    }
    return m;
  }

  double coord(int node, int axis) const {
    return lo[axis] + multi(node)[axis] * h[axis];
  }

  std::array<double, max_dim> coords(int node) const {
    auto m = multi(node);
    std::array<double, max_dim> c{};
    for (int a = 0; a < dim; ++a) c[a] = lo[a] + m[a] * h[a];
    return c;
  }

  double metric(int node, int a, int b) const {
    return g[std::size_t(node) * dim * dim + a * dim + b];
  }
  double metric_inv(int node, int a, int b) const {
    return g_inv[std::size_t(node) * dim * dim + a * dim + b];
  }

  struct Shift {
    int node = -1;        // -1: outside the chart
    bool reflected = false;
  };

  /// Neighbor k steps along `axis`, honoring periodic wrap and pole
  /// reflection. Reflected scalar values are taken as-is; axis-component
  /// fluxes through the pole flip sign (handled by callers).
  Shift shift(const std::array<int, max_dim>& m, int axis, int k) const {
    std::array<int, max_dim> n = m;
    int j = m[axis] + k;
    if (j >= 0 && j < shape[axis]) {
      n[axis] = j;
      return {index(n), false};
    }
    if (periodic[axis]) {
      n[axis] = ((j % shape[axis]) + shape[axis]) % shape[axis];
      return {index(n), false};
    }
    if (axis == pole_axis && j < 0) {
      n[axis] = -1 - j;
      if (n[axis] >= shape[axis]) return {-1, false};
      int m_p = shape[pole_partner];
      n[pole_partner] = (m[pole_partner] + m_p / 2) % m_p;
      return {index(n), true};
    }
    return {-1, false};
  }

  void finalize();  // computes g_inv, checks invariants
};

struct ScalarField {
  std::vector<double> values;
  std::optional<double> cap;

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const { return values.size(); }
};

inline ScalarField make_field(const MetricChart& chart, double fill = 0.0) {
  ScalarField f;
  f.values.assign(std::size_t(chart.node_count()), fill);
  return f;
}

struct VectorField {
  int dim = 0;
  std::array<std::vector<double>, max_dim> comp;

  std::size_t size() const { return comp[0].size(); }
};

inline VectorField make_vector_field(const MetricChart& chart) {
  VectorField x;
  x.dim = chart.dim;
  for (int a = 0; a < chart.dim; ++a)
    x.comp[a].assign(std::size_t(chart.node_count()), 0.0);
  return x;
}

inline void MetricChart::finalize() {
  const int n = node_count();
  if (dim < 1 || dim > max_dim) throw std::runtime_error("chart: bad dim");
  for (int a = 0; a < dim; ++a) {
    if (shape[a] < 3) throw std::runtime_error("chart: need at least 3 nodes per axis");
    if (!(h[a] > 0)) throw std::runtime_error("chart: non-positive spacing");
  }
  if (pole_axis >= 0) {
    if (pole_partner < 0 || !periodic[pole_partner] || shape[pole_partner] % 2 != 0)
      throw std::runtime_error("chart: pole axis needs an even periodic partner");
  }
  g_inv.assign(g.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    const std::size_t o = std::size_t(i) * dim * dim;
    if (dim == 1) {
      const double a = g[o];
      if (!(a > 0)) throw std::runtime_error("chart: metric not positive definite");
      g_inv[o] = 1.0 / a;
      if (std::abs(sqrt_det[i] - std::sqrt(a)) > 1e-12 * std::sqrt(a))
        throw std::runtime_error("chart: sqrt_det mismatch");
    } else {
      const double a = g[o], b = g[o + 1], c = g[o + 2], d = g[o + 3];
      if (std::abs(b - c) > 1e-14 * (std::abs(b) + 1))
        throw std::runtime_error("chart: metric not symmetric");
      const double det = a * d - b * c;
      const double tr = a + d;
      // eigenvalues of a 2x2 symmetric matrix
      const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
      if (!(tr / 2 - disc > 0))
        throw std::runtime_error("chart: metric not positive definite");
      g_inv[o] = d / det;
      g_inv[o + 1] = -b / det;
      g_inv[o + 2] = -c / det;
      g_inv[o + 3] = a / det;
      if (std::abs(sqrt_det[i] - std::sqrt(det)) > 1e-12 * std::sqrt(det))
        throw std::runtime_error("chart: sqrt_det mismatch");
    }
  }
}

}  // namespace tmce
