#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmce/mesh.hpp"

namespace tmce {

/// Parsed form of a domain-catalog entry, e.g. "euclidean_disk(1.0)".
struct DomainSpec {
  std::string name;
  std::vector<double> params;

  static DomainSpec parse(const std::string& text) {
    DomainSpec spec;
    auto open = text.find('(');
    if (open == std::string::npos) {
      spec.name = text;
      return spec;
    }
    auto close = text.rfind(')');
    if (close == std::string::npos || close < open)
      throw std::invalid_argument("domain spec: unbalanced parentheses in '" + text + "'");
    spec.name = text.substr(0, open);
    std::string args = text.substr(open + 1, close - open - 1);
    std::stringstream ss(args);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.find_first_not_of(" \t") == std::string::npos) continue;
      std::size_t pos = 0;
      double v = std::stod(tok, &pos);
      spec.params.push_back(v);
    }
    return spec;
  }
};

struct MeshOptions {
  int n_angular = 0;  // >0 overrides the angular node count on polar charts
};

namespace detail {

inline int even_at_least(int n, int floor_n) {
  n = std::max(n, floor_n);
  if (n % 2) ++n;
  return n;
}

inline void require_params(const DomainSpec& s, std::size_t n) {
  if (s.params.size() != n)
    throw std::invalid_argument("domain '" + s.name + "': expected " +
                                std::to_string(n) + " parameter(s)");
}

using MetricFn = std::function<void(const std::array<double, max_dim>&, double* g, double& sdet)>;

inline void fill_metric(MetricChart& ch, const MetricFn& fn) {
  const int n = ch.node_count();
  ch.g.assign(std::size_t(n) * ch.dim * ch.dim, 0.0);
  ch.sqrt_det.assign(std::size_t(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double sdet = 0;
    fn(ch.coords(i), &ch.g[std::size_t(i) * ch.dim * ch.dim], sdet);
    ch.sqrt_det[i] = sdet;
  }
  ch.finalize();
}

/// Boundary slab at one non-periodic end of `axis`, with a closed-form
/// outward normal. Weights are trapezoid shares of the induced measure.
inline void add_boundary_slab(
    DomainMesh& mesh, int axis, bool high_end,
    const std::function<std::array<double, max_dim>(const std::array<double, max_dim>&)>& normal) {
  const MetricChart& ch = mesh.chart;
  const int d = ch.dim;
  const int edge = high_end ? ch.shape[axis] - 1 : 0;
  std::array<int, max_dim> m{};
  m[axis] = edge;

  auto emit = [&](int node) {
    mesh.interior[std::size_t(node)] = 0;
    auto nrm = normal(ch.coords(node));
    double w;
    if (d == 1) {
      w = 1.0;
    } else {
      const int t = 1 - axis;
      auto mi = ch.multi(node);
      double fac = 1.0;
      if (!ch.periodic[t] && (mi[t] == 0 || mi[t] == ch.shape[t] - 1)) fac = 0.5;
      w = std::sqrt(ch.metric(node, t, t)) * ch.h[t] * fac;
    }
    // merge with an existing record (square corners sit on two slabs)
    for (auto& b : mesh.boundary) {
      if (b.node == node) {
        double comb[max_dim], q = 0;
        for (int a = 0; a < d; ++a) comb[a] = b.normal[a] + nrm[a];
        for (int a = 0; a < d; ++a)
          for (int bb = 0; bb < d; ++bb) q += comb[a] * ch.metric(node, a, bb) * comb[bb];
        const double inv = 1.0 / std::sqrt(q);
        for (int a = 0; a < d; ++a) b.normal[a] = comb[a] * inv;
        b.weight += w;
        return;
      }
    }
    BoundaryNode b;
    b.node = node;
    b.normal = nrm;
    b.weight = w;
    mesh.boundary.push_back(b);
  };

  if (d == 1) {
    emit(ch.index(m));
  } else {
    const int t = 1 - axis;
    for (m[t] = 0; m[t] < ch.shape[t]; ++m[t]) emit(ch.index(m));
  }
}

inline void check_boundary_invariants(const DomainMesh& mesh) {
  const MetricChart& ch = mesh.chart;
  for (const auto& b : mesh.boundary) {
    double q = 0;
    for (int a = 0; a < ch.dim; ++a)
      for (int c = 0; c < ch.dim; ++c)
        q += b.normal[a] * ch.metric(b.node, a, c) * b.normal[c];
    if (std::abs(q - 1.0) > 1e-10)
      throw std::runtime_error("mesh: boundary normal not unit");
    bool adjacent = false;
    for (const auto& cell : mesh.cells) {
      bool has_b = false, has_i = false;
      for (int c = 0; c < mesh.corners_per_cell(); ++c) {
        if (cell.corner[c] == b.node) has_b = true;
        if (mesh.is_interior(cell.corner[c])) has_i = true;
      }
      if (has_b && has_i) {
        adjacent = true;
        break;
      }
    }
    if (!adjacent)
      throw std::runtime_error("mesh: boundary node with no interior neighbor");
  }
}

inline void finish_mesh(DomainMesh& mesh) {
  detail::build_cells(mesh);
  detail::build_node_volumes(mesh);
  check_boundary_invariants(mesh);
}

/// Polar-type chart: half-offset radial nodes close a pole at the low end,
/// the outer ring lands exactly on the boundary radius.
inline MetricChart polar_chart(double r_outer, double h, int n_angular_override,
                               double circumference, const std::string& rname,
                               const std::string& tname) {
  MetricChart ch;
  ch.dim = 2;
  const int m = std::max(3, int(std::lround(r_outer / h)));
  const double hr = r_outer / (m - 0.5);
  ch.shape[0] = m;
  ch.lo[0] = 0.5 * hr;
  ch.hi[0] = r_outer;
  ch.h[0] = hr;
  const int nt = n_angular_override > 0
                     ? even_at_least(n_angular_override, 8)
                     : even_at_least(int(std::lround(circumference / h)), 8);
  ch.shape[1] = nt;
  ch.lo[1] = 0.0;
  ch.hi[1] = 2 * std::numbers::pi;
  ch.h[1] = 2 * std::numbers::pi / nt;
  ch.periodic[1] = true;
  ch.pole_axis = 0;
  ch.pole_partner = 1;
  ch.axis_name[0] = rname;
  ch.axis_name[1] = tname;
  return ch;
}

}  // namespace detail

/// Realizes a catalog domain at resolution h (target node spacing).
inline DomainMesh build_domain(const DomainSpec& spec, double h,
                               const MeshOptions& opts = {}) {
  using detail::fill_metric;
  if (!(h > 0)) throw std::invalid_argument("build_domain: resolution must be positive");
  DomainMesh mesh;
  mesh.domain_name = spec.name;
  mesh.domain_params = spec.params;
  MetricChart& ch = mesh.chart;

  auto flat = [](const std::array<double, max_dim>& c, double* g, double& sdet) {
    (void)c;
    g[0] = 1;
    sdet = 1;
  };
  auto flat2 = [](const std::array<double, max_dim>& c, double* g, double& sdet) {
    (void)c;
    g[0] = 1; g[1] = 0; g[2] = 0; g[3] = 1;
    sdet = 1;
  };
  auto polar2 = [](const std::array<double, max_dim>& c, double* g, double& sdet) {
    g[0] = 1; g[1] = 0; g[2] = 0; g[3] = c[0] * c[0];
    sdet = c[0];
  };

  if (spec.name == "interval") {
    detail::require_params(spec, 1);
    const double a = spec.params[0];
    if (!(a > 0)) throw std::invalid_argument("interval: halfwidth must be positive");
    ch.dim = 1;
    ch.shape[0] = std::max(3, int(std::lround(2 * a / h)) + 1);
    ch.lo[0] = -a;
    ch.hi[0] = a;
    ch.h[0] = 2 * a / (ch.shape[0] - 1);
    ch.axis_name[0] = "x";
    fill_metric(ch, flat);
    mesh.interior.assign(std::size_t(ch.node_count()), 1);
    detail::add_boundary_slab(mesh, 0, false, [](auto) { return std::array<double, max_dim>{-1, 0}; });
    detail::add_boundary_slab(mesh, 0, true, [](auto) { return std::array<double, max_dim>{1, 0}; });
    mesh.small_ball_family = a <= 0.75;
  } else if (spec.name == "euclidean_square") {
    detail::require_params(spec, 1);
    const double L = spec.params[0];
    if (!(L > 0)) throw std::invalid_argument("euclidean_square: side must be positive");
    ch.dim = 2;
    for (int a = 0; a < 2; ++a) {
      ch.shape[a] = std::max(3, int(std::lround(L / h)) + 1);
      ch.lo[a] = 0;
      ch.hi[a] = L;
      ch.h[a] = L / (ch.shape[a] - 1);
    }
    ch.axis_name[0] = "x";
    ch.axis_name[1] = "y";
    fill_metric(ch, flat2);
    mesh.interior.assign(std::size_t(ch.node_count()), 1);
    for (int axis = 0; axis < 2; ++axis)
      for (int hi_end = 0; hi_end < 2; ++hi_end) {
        std::array<double, max_dim> n{};
        n[axis] = hi_end ? 1.0 : -1.0;
        detail::add_boundary_slab(mesh, axis, hi_end != 0, [n](auto) { return n; });
      }
  } else if (spec.name == "euclidean_disk") {
    detail::require_params(spec, 1);
    const double R = spec.params[0];
    if (!(R > 0)) throw std::invalid_argument("euclidean_disk: radius must be positive");
    ch = detail::polar_chart(R, h, opts.n_angular, 2 * std::numbers::pi * R, "r", "theta");
    fill_metric(ch, polar2);
    mesh.interior.assign(std::size_t(ch.node_count()), 1);
    detail::add_boundary_slab(mesh, 0, true, [](auto) { return std::array<double, max_dim>{1, 0}; });
    mesh.small_ball_family = R <= 0.75;
  } else if (spec.name == "euclidean_annulus") {
    detail::require_params(spec, 2);
    const double r0 = spec.params[0], R = spec.params[1];
    if (!(r0 > 0 && R > r0)) throw std::invalid_argument("euclidean_annulus: need 0 < r < R");
    ch.dim = 2;
    ch.shape[0] = std::max(3, int(std::lround((R - r0) / h)) + 1);
    ch.lo[0] = r0;
    ch.hi[0] = R;
    ch.h[0] = (R - r0) / (ch.shape[0] - 1);
    const int nt = opts.n_angular > 0
                       ? detail::even_at_least(opts.n_angular, 8)
                       : detail::even_at_least(int(std::lround(2 * std::numbers::pi * R / h)), 8);
    ch.shape[1] = nt;
    ch.lo[1] = 0;
    ch.hi[1] = 2 * std::numbers::pi;
    ch.h[1] = 2 * std::numbers::pi / nt;
    ch.periodic[1] = true;
    ch.axis_name[0] = "r";
    ch.axis_name[1] = "theta";
    fill_metric(ch, polar2);
    mesh.interior.assign(std::size_t(ch.node_count()), 1);
    detail::add_boundary_slab(mesh, 0, false, [](auto) { return std::array<double, max_dim>{-1, 0}; });
    detail::add_boundary_slab(mesh, 0, true, [](auto) { return std::array<double, max_dim>{1, 0}; });
  } else if (spec.name == "sphere_cap" || spec.name == "hemisphere") {
    double theta0;
    if (spec.name == "hemisphere") {
      detail::require_params(spec, 0);
      theta0 = std::numbers::pi / 2;
    } else {
      detail::require_params(spec, 1);
      theta0 = spec.params[0];
    }
    if (!(theta0 > 0) || theta0 >= std::numbers::pi)
      throw std::invalid_argument("sphere_cap: need 0 < theta0 < pi (chart degenerates)");
    ch = detail::polar_chart(theta0, h, opts.n_angular,
                             2 * std::numbers::pi * std::sin(theta0), "theta", "phi");
    fill_metric(ch, [](const std::array<double, max_dim>& c, double* g, double& sdet) {
      const double s = std::sin(c[0]);
      g[0] = 1; g[1] = 0; g[2] = 0; g[3] = s * s;
      sdet = s;
    });
    mesh.interior.assign(std::size_t(ch.node_count()), 1);
    detail::add_boundary_slab(mesh, 0, true, [](auto) { return std::array<double, max_dim>{1, 0}; });
    mesh.small_ball_family = theta0 <= 0.75;
  } else if (spec.name == "hyperbolic_disk") {
    detail::require_params(spec, 1);
    const double R = spec.params[0];  // hyperbolic radius
    if (!(R > 0)) throw std::invalid_argument("hyperbolic_disk: radius must be positive");
    const double rho_R = std::tanh(R / 2);
    ch = detail::polar_chart(rho_R, h * rho_R / R, opts.n_angular,
                             2 * std::numbers::pi * std::sinh(R) * rho_R / R, "rho", "theta");
    fill_metric(ch, [](const std::array<double, max_dim>& c, double* g, double& sdet) {
      const double lam = 2.0 / (1.0 - c[0] * c[0]);
      g[0] = lam * lam;
      g[1] = 0; g[2] = 0;
      g[3] = lam * lam * c[0] * c[0];
      sdet = lam * lam * c[0];
    });
    mesh.interior.assign(std::size_t(ch.node_count()), 1);
    const double lamR = 2.0 / (1.0 - rho_R * rho_R);
    detail::add_boundary_slab(mesh, 0, true,
                              [lamR](auto) { return std::array<double, max_dim>{1.0 / lamR, 0}; });
    mesh.small_ball_family = R <= 0.75;
  } else {
    throw std::invalid_argument("unknown domain '" + spec.name + "'");
  }

  detail::finish_mesh(mesh);
  return mesh;
}

inline DomainMesh build_domain(const std::string& spec_text, double h,
                               const MeshOptions& opts = {}) {
  return build_domain(DomainSpec::parse(spec_text), h, opts);
}

/// CSV dump: node_index, param coords, metric components row-major, interior flag.
inline void dump_mesh_csv(const DomainMesh& mesh, std::ostream& os) {
  const MetricChart& ch = mesh.chart;
  os << "node_index";
  for (int a = 0; a < ch.dim; ++a) os << "," << ch.axis_name[a];
  for (int a = 0; a < ch.dim; ++a)
    for (int b = 0; b < ch.dim; ++b) os << ",g" << a << b;
  os << ",interior\n";
  char buf[64];
  for (int i = 0; i < ch.node_count(); ++i) {
    os << i;
    auto c = ch.coords(i);
    for (int a = 0; a < ch.dim; ++a) {
      std::snprintf(buf, sizeof buf, "%.17g", c[a]);
      os << "," << buf;
    }
    for (int a = 0; a < ch.dim; ++a)
      for (int b = 0; b < ch.dim; ++b) {
        std::snprintf(buf, sizeof buf, "%.17g", ch.metric(i, a, b));
        os << "," << buf;
      }
    os << "," << (mesh.is_interior(i) ? 1 : 0) << "\n";
  }
}

}  // namespace tmce
