#pragma once

#include <random>
#include <vector>

#include "tmce/expr.hpp"
#include "tmce/mesh.hpp"

namespace tmce {

/// Evaluates a whitelisted expression at every node. Variables are the
/// chart axis names plus the aliases x (axis 0) and y (axis 1).
inline ScalarField expression_field(const DomainMesh& mesh, const std::string& text) {
  const MetricChart& ch = mesh.chart;
  std::vector<std::string> vars;
  for (int a = 0; a < ch.dim; ++a) vars.push_back(ch.axis_name[a]);
  vars.push_back("x");
  if (ch.dim > 1) vars.push_back("y");
  const auto expr = Expression::parse(text, vars);
  ScalarField f = make_field(ch);
  std::vector<double> vals(vars.size());
  for (int i = 0; i < ch.node_count(); ++i) {
    const auto c = ch.coords(i);
    for (int a = 0; a < ch.dim; ++a) vals[std::size_t(a)] = c[std::size_t(a)];
    vals[std::size_t(ch.dim)] = c[0];
    if (ch.dim > 1) vals[std::size_t(ch.dim) + 1] = c[1];
    f[std::size_t(i)] = expr.eval(vals);
  }
  return f;
}

/// Low-frequency trigonometric sample field with gradient of order
/// `amplitude`; chart coordinates are normalized to [0, 2 pi].
inline ScalarField random_smooth_field(const DomainMesh& mesh, std::mt19937_64& rng,
                                       double amplitude = 0.5) {
  const MetricChart& ch = mesh.chart;
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  std::uniform_int_distribution<int> freq(1, 2);
  struct Mode {
    double a;
    int k[max_dim];
    double phase[max_dim];
  };
  std::vector<Mode> modes(4);
  for (auto& m : modes) {
    m.a = amplitude * coeff(rng) / double(modes.size());
    for (int axis = 0; axis < ch.dim; ++axis) {
      m.k[axis] = freq(rng);
      m.phase[axis] = 3.1 * coeff(rng);
    }
  }
  ScalarField f = make_field(ch);
  for (int i = 0; i < ch.node_count(); ++i) {
    const auto c = ch.coords(i);
    double v = 0;
    for (const auto& m : modes) {
      double t = 1;
      for (int axis = 0; axis < ch.dim; ++axis) {
        const double z =
            2 * 3.14159265358979323846 * (c[std::size_t(axis)] - ch.lo[axis]) /
            (ch.hi[axis] - ch.lo[axis]);
        t *= std::sin(m.k[axis] * z + m.phase[axis]);
      }
      v += m.a * t;
    }
    f[std::size_t(i)] = v;
  }
  return f;
}

}  // namespace tmce
