#pragma once

#include <array>
#include <cmath>

#include "tmce/mesh.hpp"

namespace tmce {
namespace quad {

// Corner ordering: bit a of the corner id is the offset along axis a.
inline int edges_per_axis(int dim) { return 1 << (dim - 1); }

/// Edge (tail, head) pairs along `axis` of a cell with 2^dim corners.
inline std::array<std::array<int, 2>, 2> axis_edges(int dim, int axis) {
  std::array<std::array<int, 2>, 2> e{};
  int k = 0;
  for (int c = 0; c < (1 << dim); ++c) {
    if (c & (1 << axis)) continue;
    e[std::size_t(k)][0] = c;
    e[std::size_t(k)][1] = c | (1 << axis);
    ++k;
  }
  return e;
}

inline double cell_mean(const DomainMesh& mesh, const Cell& cell,
                        const std::vector<double>& f) {
  const int nc = mesh.corners_per_cell();
  double s = 0;
  for (int c = 0; c < nc; ++c) s += f[std::size_t(cell.corner[c])];
  return s / nc;
}

/// |Df|^2 at the cell center: per axis the mean of squared edge
/// differences, contracted with the diagonal inverse metric. Edge-pair
/// averaging keeps the lower bounds of the area functionals exact per cell.
inline double cell_grad_sq(const DomainMesh& mesh, const Cell& cell,
                           const std::vector<double>& f) {
  const int d = mesh.chart.dim;
  const int ne = edges_per_axis(d);
  double q = 0;
  for (int a = 0; a < d; ++a) {
    const auto edges = axis_edges(d, a);
    double s = 0;
    for (int e = 0; e < ne; ++e) {
      const double diff = (f[std::size_t(cell.corner[edges[std::size_t(e)][1]])] -
                           f[std::size_t(cell.corner[edges[std::size_t(e)][0]])]) /
                          mesh.chart.h[a];
      s += diff * diff;
    }
    q += cell.inv_gaa[a] * (s / ne);
  }
  return q;
}

}  // namespace quad
}  // namespace tmce
