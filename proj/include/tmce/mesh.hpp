#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmce/chart.hpp"

namespace tmce {

struct BoundaryNode {
  int node = -1;
  std::array<double, max_dim> normal{};  // outward, unit w.r.t. g, chart basis
  double weight = 0.0;                   // induced (n-1)-measure share
};

/// Quadrature cell spanned by adjacent nodes (2^dim corners). Center metric
/// quantities are corner averages.
struct Cell {
  std::array<int, 4> corner{};             // 2^dim used
  double vol = 0.0;                        // sqrt_det_c * prod(h)
  std::array<double, max_dim> inv_gaa{};   // cell-center g^{aa}
  std::array<double, max_dim> center{};    // param coords (periodic-safe)
};

struct DomainMesh {
  MetricChart chart;
  std::vector<std::uint8_t> interior;  // per node; boundary nodes are 0
  std::vector<BoundaryNode> boundary;
  std::vector<Cell> cells;
  std::vector<double> node_volume;  // trapezoid nodal volumes
  std::string domain_name;
  std::vector<double> domain_params;
  bool small_ball_family = false;  // catalog tag used by the C0 diagnostic

  int corners_per_cell() const { return 1 << chart.dim; }

  double volume() const {
    double v = 0;
    for (const auto& c : cells) v += c.vol;
    return v;
  }

  bool is_interior(int node) const { return interior[std::size_t(node)] != 0; }
};

namespace detail {

inline void build_cells(DomainMesh& mesh) {
  const MetricChart& ch = mesh.chart;
  const int d = ch.dim;
  mesh.cells.clear();
  std::array<int, max_dim> ncell{};
  for (int a = 0; a < d; ++a)
    ncell[a] = ch.periodic[a] ? ch.shape[a] : ch.shape[a] - 1;

  std::array<int, max_dim> m{};
  auto emit = [&]() {
    Cell cell;
    const int nc = 1 << d;
    double sdet = 0;
    std::array<double, max_dim> gaa_inv{};
    for (int c = 0; c < nc; ++c) {
      std::array<int, max_dim> idx = m;
      for (int a = 0; a < d; ++a)
        if (c & (1 << a)) idx[a] = (idx[a] + 1) % ch.shape[a];
      const int node = ch.index(idx);
      cell.corner[c] = node;
      sdet += ch.sqrt_det[node];
      for (int a = 0; a < d; ++a) gaa_inv[a] += ch.metric_inv(node, a, a);
    }
    double hv = 1;
    for (int a = 0; a < d; ++a) {
      hv *= ch.h[a];
      cell.inv_gaa[a] = gaa_inv[a] / nc;
      cell.center[a] = ch.lo[a] + (m[a] + 0.5) * ch.h[a];
    }
    cell.vol = (sdet / nc) * hv;
    mesh.cells.push_back(cell);
  };

  if (d == 1) {
    for (m[0] = 0; m[0] < ncell[0]; ++m[0]) emit();
  } else {
    for (m[1] = 0; m[1] < ncell[1]; ++m[1])
      for (m[0] = 0; m[0] < ncell[0]; ++m[0]) emit();
  }
}

inline void build_node_volumes(DomainMesh& mesh) {
  const MetricChart& ch = mesh.chart;
  const int n = ch.node_count();
  mesh.node_volume.assign(std::size_t(n), 0.0);
  for (int i = 0; i < n; ++i) {
    auto m = ch.multi(i);
    double w = ch.sqrt_det[i];
    for (int a = 0; a < ch.dim; ++a) {
      double fac = ch.h[a];
      const bool at_low = m[a] == 0;
      const bool at_high = m[a] == ch.shape[a] - 1;
      if (!ch.periodic[a]) {
        // pole-low nodes own a full cell toward the pole
        if ((at_low && a != ch.pole_axis) || at_high) fac *= 0.5;
      }
      w *= fac;
    }
    mesh.node_volume[i] = w;
  }
}

}  // namespace detail

}  // namespace tmce
