#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "tmce/functionals.hpp"

namespace tmce {

struct SolverConfig {
  std::vector<double> cap_schedule{5, 10, 20, 40};
  std::vector<double> sigma_steps{0, 0.25, 0.5, 0.75, 1};
  int max_iters = 60;        // per Newton stage
  double grad_tol = 1e-5;    // scaled gradient, PDE-residual units
  double energy_tol = 1e-4;  // indicator energy window + minimality slack
  double wall_eps_rel = 1e-3;
  double h_r = 1.0 / 64;
  double tau = 0.95;        // primal step multiplier
  double sigma_dual = 0.95; // dual step multiplier
  int indicator_max_iters = 4000;
  double indicator_T = 0;  // 0: first cap

  void validate() const {
    if (cap_schedule.empty()) throw std::invalid_argument("config: empty cap schedule");
    for (std::size_t i = 0; i + 1 < cap_schedule.size(); ++i)
      if (!(cap_schedule[i] < cap_schedule[i + 1]))
        throw std::invalid_argument("config: cap schedule must be strictly increasing");
    if (!(cap_schedule.front() > 0)) throw std::invalid_argument("config: caps must be positive");
    if (!(grad_tol > 0) || !(energy_tol > 0) || !(wall_eps_rel > 0) || !(h_r > 0))
      throw std::invalid_argument("config: tolerances must be positive");
    for (double s : sigma_steps)
      if (s < 0 || s > 1) throw std::invalid_argument("config: sigma steps must lie in [0,1]");
    if (!(tau > 0) || !(sigma_dual > 0) || tau * sigma_dual > 1.0 + 1e-12)
      throw std::invalid_argument(
          "config: primal-dual steps violate tau*sigma*|G|^2 <= 1");
    if (max_iters < 1 || indicator_max_iters < 1)
      throw std::invalid_argument("config: iteration budgets must be positive");
  }
};

struct HistoryEntry {
  std::string stage;
  int iter = 0;
  double energy = 0;
  double grad_norm = 0;
};

struct SolveReport {
  ScalarField u;
  std::vector<NodeClass> classification;
  double residual_linf = 0;
  double residual_l2 = 0;
  std::vector<HistoryEntry> history;
  int iterations = 0;
  bool converged = false;
  std::map<std::string, double> diagnostics;
  std::vector<double> caps;
  std::vector<std::vector<NodeClass>> per_cap_class;

  int count(NodeClass c) const {
    int n = 0;
    for (auto f : classification)
      if (f == c) ++n;
    return n;
  }
};

// ---------------------------------------------------------------------------
// Residual norms over finite nodes

inline std::pair<double, double> residual_norms(
    const DomainMesh& mesh, const ScalarField& u, double alpha,
    const std::vector<NodeClass>* classification = nullptr) {
  const MetricChart& ch = mesh.chart;
  const int n = ch.node_count();
  std::vector<std::uint8_t> ok(std::size_t(n), 1);
  if (classification) {
    // exclude +-inf nodes and a 2-cell halo around them
    std::vector<int> frontier;
    for (int i = 0; i < n; ++i)
      if ((*classification)[std::size_t(i)] != NodeClass::FINITE) {
        ok[std::size_t(i)] = 0;
        frontier.push_back(i);
      }
    for (int ring = 0; ring < 2; ++ring) {
      std::vector<int> next;
      for (int i : frontier) {
        const auto m = ch.multi(i);
        for (int a = 0; a < ch.dim; ++a)
          for (int k = -1; k <= 1; k += 2) {
            const auto s = ch.shift(m, a, k);
            if (s.node >= 0 && ok[std::size_t(s.node)]) {
              ok[std::size_t(s.node)] = 0;
              next.push_back(s.node);
            }
          }
      }
      frontier.swap(next);
    }
  }
  const auto curv = graph_mean_curvature(mesh, u, alpha);
  double linf = 0, l2 = 0, vol = 0;
  bool any = false;
  for (int i = 0; i < n; ++i) {
    if (!mesh.is_interior(i) || !ok[std::size_t(i)]) continue;
    any = true;
    const double r = curv.residual[std::size_t(i)];
    linf = std::max(linf, std::abs(r));
    l2 += r * r * mesh.node_volume[std::size_t(i)];
    vol += mesh.node_volume[std::size_t(i)];
  }
  if (!any) throw std::runtime_error("residual_norms: no finite interior nodes");
  return {linf, std::sqrt(l2 / vol)};
}

// ---------------------------------------------------------------------------
// Nodal solver: projected damped Newton on the relaxed energy, solved in the
// exponential variable w = e^{sigma alpha u}/(sigma alpha), where every
// continuation stage is convex. Caps clamp u to [-T, T].

namespace detail {

struct Stage {
  double alpha_eff = 0;  // sigma * alpha; 0 means product-area stage in u
  double wall_eps = 0;
  double lo = 0, hi = 0;  // box in the stage variable

  double to_w(double u) const {
    return alpha_eff > 0 ? std::exp(alpha_eff * u) / alpha_eff : u;
  }
  double to_u(double w) const {
    return alpha_eff > 0 ? std::log(alpha_eff * w) / alpha_eff : w;
  }
};

struct StageObjective {
  const DomainMesh* mesh;
  Stage st;
  std::vector<double> w_psi;      // wall target per node (boundary only used)
  std::vector<double> bd_weight;  // per node, 0 off-boundary

  double value(const std::vector<double>& w) const {
    double e = tmce::detail::cells_energy(*mesh, w, st.alpha_eff);
    for (const auto& b : mesh->boundary) {
      const double s = w[std::size_t(b.node)] - w_psi[std::size_t(b.node)];
      e += b.weight * std::sqrt(s * s + st.wall_eps * st.wall_eps);
    }
    return e;
  }

  void gradient(const std::vector<double>& w, std::vector<double>& g) const {
    g.assign(w.size(), 0.0);
    const int nc = mesh->corners_per_cell();
    for (const auto& c : mesh->cells) {
      const auto der = tmce::detail::cell_energy_derivs(*mesh, c, w, st.alpha_eff, false);
      for (int k = 0; k < nc; ++k) g[std::size_t(c.corner[k])] += der.grad[std::size_t(k)];
    }
    for (const auto& b : mesh->boundary) {
      const double s = w[std::size_t(b.node)] - w_psi[std::size_t(b.node)];
      g[std::size_t(b.node)] += b.weight * s / std::sqrt(s * s + st.wall_eps * st.wall_eps);
    }
  }

  void hessian(const std::vector<double>& w,
               std::vector<Eigen::Triplet<double>>& trips) const {
    trips.clear();
    const int nc = mesh->corners_per_cell();
    for (const auto& c : mesh->cells) {
      const auto der = tmce::detail::cell_energy_derivs(*mesh, c, w, st.alpha_eff, true);
      for (int a = 0; a < nc; ++a)
        for (int b = 0; b < nc; ++b)
          trips.emplace_back(c.corner[a], c.corner[b], der.hess[std::size_t(a * nc + b)]);
    }
    for (const auto& b : mesh->boundary) {
      const double s = w[std::size_t(b.node)] - w_psi[std::size_t(b.node)];
      const double q = std::sqrt(s * s + st.wall_eps * st.wall_eps);
      trips.emplace_back(b.node, b.node,
                         b.weight * st.wall_eps * st.wall_eps / (q * q * q));
    }
  }
};

struct StageResult {
  int iterations = 0;
  bool converged = false;
  int line_search_failures = 0;
};

/// Minimizes one stage objective over the box. History entries are appended
/// with the given stage label.
inline StageResult newton_stage(StageObjective& obj, std::vector<double>& w,
                                const SolverConfig& cfg, const std::string& label,
                                std::vector<HistoryEntry>& history) {
  const DomainMesh& mesh = *obj.mesh;
  const int n = mesh.chart.node_count();
  const double lo = obj.st.lo, hi = obj.st.hi;
  auto clamp_all = [&](std::vector<double>& x) {
    for (auto& v : x) v = std::min(std::max(v, lo), hi);
  };
  clamp_all(w);

  StageResult res;
  std::vector<double> g, w_try, dir(std::size_t(n), 0.0);
  std::vector<Eigen::Triplet<double>> trips;
  double energy = obj.value(w);


  for (int it = 0; it < cfg.max_iters; ++it) {
    obj.gradient(w, g);
    // convergence measure over free nodes: PDE-residual units at interior
    // nodes, force-imbalance units where the wall weight dominates
    double gnorm = 0;
    std::vector<std::uint8_t> active(std::size_t(n), 0);
    const double lo_tol = 1e-12 * (std::abs(lo) + 1e-300);
    const double hi_tol = 1e-12 * (std::abs(hi) + 1e-300);
    for (int i = 0; i < n; ++i) {
      const bool at_lo = w[std::size_t(i)] <= lo + lo_tol;
      const bool at_hi = w[std::size_t(i)] >= hi - hi_tol;
      if ((at_lo && g[std::size_t(i)] > 0) || (at_hi && g[std::size_t(i)] < 0))
        active[std::size_t(i)] = 1;
      else
        gnorm = std::max(gnorm,
                         std::abs(g[std::size_t(i)]) /
                             (mesh.node_volume[std::size_t(i)] +
                              obj.bd_weight[std::size_t(i)]));
    }
    history.push_back({label, it, energy, gnorm});
    res.iterations = it;
    if (gnorm <= cfg.grad_tol) {
      res.converged = true;
      return res;
    }

    std::vector<int> compact(std::size_t(n), -1);
    int nf = 0;
    for (int i = 0; i < n; ++i)
      if (!active[std::size_t(i)]) compact[std::size_t(i)] = nf++;
    if (nf == 0) {
      res.converged = true;  // fully pinned
      return res;
    }

    obj.hessian(w, trips);
    std::vector<Eigen::Triplet<double>> ft;
    ft.reserve(trips.size());
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(nf);
    for (const auto& t : trips) {
      const int r = compact[std::size_t(t.row())], c = compact[std::size_t(t.col())];
      if (r >= 0 && c >= 0) {
        ft.emplace_back(r, c, t.value());
        if (r == c) diag[r] += t.value();
      }
    }
    Eigen::VectorXd rhs(nf);
    for (int i = 0; i < n; ++i)
      if (compact[std::size_t(i)] >= 0) rhs[compact[std::size_t(i)]] = -g[std::size_t(i)];

    bool accepted = false;
    double lm = 0;  // Levenberg parameter, relative to the Hessian diagonal
    const double diag_floor = 1e-8 * diag.cwiseAbs().maxCoeff() + 1e-300;
    for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
      Eigen::SparseMatrix<double> H(nf, nf);
      {
        auto ft2 = ft;
        for (int i = 0; i < nf; ++i)
          ft2.emplace_back(i, i, lm * std::max(diag[i], diag_floor) + 1e-300);
        H.setFromTriplets(ft2.begin(), ft2.end());
      }
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(H);
      bool solved = ldlt.info() == Eigen::Success;
      Eigen::VectorXd delta;
      if (solved) {
        delta = ldlt.solve(rhs);
        solved = ldlt.info() == Eigen::Success && delta.allFinite();
      }
      if (!solved) {
        lm = lm == 0 ? 1e-6 : lm * 100;
        continue;
      }
      std::fill(dir.begin(), dir.end(), 0.0);
      for (int i = 0; i < n; ++i)
        if (compact[std::size_t(i)] >= 0)
          dir[std::size_t(i)] = delta[compact[std::size_t(i)]];

      double t = 1.0;
      for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
        w_try = w;
        for (int i = 0; i < n; ++i)
          w_try[std::size_t(i)] =
              std::min(std::max(w[std::size_t(i)] + t * dir[std::size_t(i)], lo), hi);
        double pred = 0;
        for (int i = 0; i < n; ++i)
          pred += g[std::size_t(i)] * (w_try[std::size_t(i)] - w[std::size_t(i)]);
        if (pred >= 0) break;  // projected direction no longer descends
        const double e_try = obj.value(w_try);
        // polishing regime: once the predicted decrease falls below the
        // energy resolution, take the Newton step without certification
        if (e_try <= energy + 1e-4 * pred ||
            (ls == 0 && -pred <= 1e-12 * (std::abs(energy) + 1))) {
          w = w_try;
          energy = std::min(energy, e_try);
          accepted = true;
          break;
        }
      }
      if (!accepted) lm = lm == 0 ? 1e-6 : lm * 100;
    }
    if (!accepted) {
      // fall back to a projected gradient step (reported, not fatal)
      ++res.line_search_failures;
      double t = 1.0 / (1 + std::abs(diag.maxCoeff()));
      bool moved = false;
      for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
        w_try = w;
        for (int i = 0; i < n; ++i)
          w_try[std::size_t(i)] =
              std::min(std::max(w[std::size_t(i)] - t * g[std::size_t(i)], lo), hi);
        const double e_try = obj.value(w_try);
        if (e_try < energy) {
          w = w_try;
          energy = e_try;
          moved = true;
          break;
        }
      }
      if (!moved) return res;  // stuck; report unconverged
    }
  }
  return res;
}

/// Capped minimizers are indifferent to depth once e^{alpha u} underflows
/// the energy scale; represent such tie zones at the cap itself. A node
/// slides to a bound only when its local energy change is numerically
/// indistinguishable from zero, so finite solutions are never touched.
inline void drain_ties(const StageObjective& obj, std::vector<double>& w,
                       double tie_tol) {
  const DomainMesh& mesh = *obj.mesh;
  const int n = mesh.chart.node_count();
  std::vector<std::vector<int>> node_cells{std::size_t(n)};
  for (std::size_t c = 0; c < mesh.cells.size(); ++c)
    for (int k = 0; k < mesh.corners_per_cell(); ++k)
      node_cells[std::size_t(mesh.cells[c].corner[k])].push_back(int(c));
  auto local_energy = [&](int i) {
    double e = 0;
    for (int c : node_cells[std::size_t(i)])
      e += tmce::detail::cell_energy_derivs(mesh, mesh.cells[std::size_t(c)], w,
                                            obj.st.alpha_eff, false)
               .value;
    if (obj.bd_weight[std::size_t(i)] > 0) {
      const double s = w[std::size_t(i)] - obj.w_psi[std::size_t(i)];
      e += obj.bd_weight[std::size_t(i)] *
           std::sqrt(s * s + obj.st.wall_eps * obj.st.wall_eps);
    }
    return e;
  };
  for (int pass = 0; pass < 6; ++pass) {
    bool moved = false;
    for (int i = 0; i < n; ++i) {
      for (double bound : {obj.st.lo, obj.st.hi}) {
        if (w[std::size_t(i)] == bound) continue;
        const double before = local_energy(i);
        const double saved = w[std::size_t(i)];
        w[std::size_t(i)] = bound;
        if (local_energy(i) - before <= tie_tol) {
          moved = true;
          break;
        }
        w[std::size_t(i)] = saved;
      }
    }
    if (!moved) break;
  }
}

inline Stage make_stage(const DomainMesh& mesh, const ScalarField& psi,
                        double alpha, double sigma, double T, double eps_rel) {
  Stage st;
  st.alpha_eff = sigma * alpha;
  if (st.alpha_eff > 0) {
    st.lo = std::exp(-st.alpha_eff * T) / st.alpha_eff;
    st.hi = std::exp(st.alpha_eff * T) / st.alpha_eff;
  } else {
    st.lo = -T;
    st.hi = T;
  }
  double scale = 0, wsum = 0;
  for (const auto& b : mesh.boundary) {
    const double wp = st.alpha_eff > 0
                          ? std::exp(st.alpha_eff * psi[std::size_t(b.node)]) / st.alpha_eff
                          : std::abs(psi[std::size_t(b.node)]) + 1.0;
    scale += b.weight * wp;
    wsum += b.weight;
  }
  st.wall_eps = eps_rel * (wsum > 0 ? scale / wsum : 1.0);
  return st;
}

}  // namespace detail

/// Capped minimization of the relaxed energy with sigma-continuation at the
/// first cap and warm starts across the cap schedule. Nodes pinned within
/// 2 h_r of the cap on the last two caps are classified +-inf.
inline SolveReport solve_nodal(const DomainMesh& mesh, const ScalarField& psi,
                               double alpha, const SolverConfig& cfg) {
  cfg.validate();
  if (!(alpha > 0)) throw std::invalid_argument("solve_nodal: alpha must be positive");
  require_diagonal_metric(mesh, "solve_nodal");
  const int n = mesh.chart.node_count();
  for (const auto& b : mesh.boundary)
    if (!std::isfinite(psi[std::size_t(b.node)]))
      throw std::invalid_argument("solve_nodal: psi must be finite on the boundary");

  SolveReport rep;
  // sigma-continuation starts from the boundary mean of psi
  double psi_mean = 0, wsum = 0;
  for (const auto& b : mesh.boundary) {
    psi_mean += b.weight * psi[std::size_t(b.node)];
    wsum += b.weight;
  }
  psi_mean /= wsum;
  ScalarField u = make_field(mesh.chart, psi_mean);

  int total_iters = 0, ls_failures = 0;
  bool converged = false;
  const double pin_margin = 2 * cfg.h_r;

  for (std::size_t ci = 0; ci < cfg.cap_schedule.size(); ++ci) {
    const double T = cfg.cap_schedule[ci];
    // nodes pinned at the previous cap stand for infinite values: restart
    // them at the new bound instead of creeping there additively
    if (ci > 0) {
      const auto& prev = rep.per_cap_class.back();
      for (int i = 0; i < n; ++i) {
        if (prev[std::size_t(i)] == NodeClass::MINUS_INF) u[std::size_t(i)] = -T;
        else if (prev[std::size_t(i)] == NodeClass::PLUS_INF) u[std::size_t(i)] = T;
      }
    }
    // continuation ladder: sigma homotopy on the first cap, then wall
    // smoothing sharpened so the boundary attachment error sits far below
    // the discretization error
    std::vector<std::pair<double, double>> stages;
    if (ci == 0)
      for (double s : cfg.sigma_steps)
        if (s < 1.0) stages.push_back({s, cfg.wall_eps_rel});
    stages.push_back({1.0, cfg.wall_eps_rel});
    stages.push_back({1.0, cfg.wall_eps_rel / 30});
    stages.push_back({1.0, cfg.wall_eps_rel / 900});
    for (std::size_t si = 0; si < stages.size(); ++si) {
      const auto& [sigma, eps_rel] = stages[si];
      detail::StageObjective obj;
      obj.mesh = &mesh;
      obj.st = detail::make_stage(mesh, psi, alpha, sigma, T, eps_rel);
      obj.w_psi.assign(std::size_t(n), 0.0);
      obj.bd_weight.assign(std::size_t(n), 0.0);
      for (const auto& b : mesh.boundary) {
        obj.w_psi[std::size_t(b.node)] = obj.st.to_w(psi[std::size_t(b.node)]);
        obj.bd_weight[std::size_t(b.node)] = b.weight;
      }
      std::vector<double> w(std::size_t(n), 0.0);
      for (int i = 0; i < n; ++i)
        w[std::size_t(i)] = obj.st.to_w(std::min(std::max(u[std::size_t(i)], -T), T));
      char label[64];
      std::snprintf(label, sizeof label, "T=%g sigma=%g", T, sigma);
      const auto sr = detail::newton_stage(obj, w, cfg, label, rep.history);
      total_iters += sr.iterations;
      ls_failures += sr.line_search_failures;
      converged = sr.converged;
      if (si + 1 == stages.size())
        detail::drain_ties(obj, w, 1e-12 * std::max(1.0, obj.value(w)));
      for (int i = 0; i < n; ++i) u[std::size_t(i)] = obj.st.to_u(w[std::size_t(i)]);
      if (!std::isfinite(obj.value(w)))
        throw std::runtime_error("solve_nodal: non-finite energy");
    }
    rep.caps.push_back(T);
    // the blow-up sets live in the open domain; boundary nodes carry the
    // finite data and are never classified infinite
    std::vector<NodeClass> cls(std::size_t(n), NodeClass::FINITE);
    for (int i = 0; i < n; ++i) {
      if (!mesh.is_interior(i)) continue;
      if (u[std::size_t(i)] >= T - pin_margin) cls[std::size_t(i)] = NodeClass::PLUS_INF;
      else if (u[std::size_t(i)] <= -T + pin_margin) cls[std::size_t(i)] = NodeClass::MINUS_INF;
    }
    rep.per_cap_class.push_back(std::move(cls));
  }

  rep.u = u;
  rep.u.cap = cfg.cap_schedule.back();
  rep.iterations = total_iters;
  rep.converged = converged;
  rep.diagnostics["line_search_failures"] = ls_failures;

  // classification: pinned on both of the last two caps
  const auto& last = rep.per_cap_class.back();
  const auto& prev = rep.per_cap_class.size() > 1
                         ? rep.per_cap_class[rep.per_cap_class.size() - 2]
                         : last;
  rep.classification.assign(std::size_t(n), NodeClass::FINITE);
  for (int i = 0; i < n; ++i)
    if (last[std::size_t(i)] != NodeClass::FINITE &&
        last[std::size_t(i)] == prev[std::size_t(i)])
      rep.classification[std::size_t(i)] = last[std::size_t(i)];

  try {
    auto [linf, l2] = residual_norms(mesh, rep.u, alpha, &rep.classification);
    rep.residual_linf = linf;
    rep.residual_l2 = l2;
  } catch (const std::runtime_error&) {
    rep.residual_linf = rep.residual_l2 = std::numeric_limits<double>::quiet_NaN();
  }
  const auto energy = relaxed_energy(mesh, rep.u, psi, alpha, cfg.wall_eps_rel);
  rep.diagnostics["F"] = energy.F;
  rep.diagnostics["F_alpha"] = energy.F_alpha;
  rep.diagnostics["wall"] = energy.wall;
  rep.diagnostics["J"] = energy.J;
  rep.diagnostics["bv"] = energy.bv;
  return rep;
}

// ---------------------------------------------------------------------------
// Blow-up scan

struct BlowupScan {
  std::vector<NodeClass> classification;
  bool stable = false;
  SolveReport report;
};

/// Runs the cap schedule and requires the classification to agree across the
/// last two caps; disagreement is reported, never guessed.
inline BlowupScan blowup_scan(const DomainMesh& mesh, const ScalarField& psi,
                              double alpha, const SolverConfig& cfg) {
  if (cfg.cap_schedule.size() < 2)
    throw std::invalid_argument("blowup_scan: need at least two caps");
  BlowupScan scan;
  scan.report = solve_nodal(mesh, psi, alpha, cfg);
  const auto& caps = scan.report.per_cap_class;
  const auto& last = caps.back();
  const auto& prev = caps[caps.size() - 2];
  scan.stable = true;
  for (std::size_t i = 0; i < last.size(); ++i)
    if (last[i] != prev[i]) scan.stable = false;
  scan.classification = scan.report.classification;
  if (!scan.stable)
    for (std::size_t i = 0; i < last.size(); ++i)
      if (last[i] != prev[i]) scan.classification[i] = last[i];
  return scan;
}

// ---------------------------------------------------------------------------
// Indicator solver: diagonally preconditioned primal-dual iteration on the
// weighted total variation over relaxed indicators.

namespace detail {

/// Isotonic (non-increasing) projection followed by a [0,1] clamp; the
/// composition is the exact projection onto the bounded monotone cone.
/// Weights select the metric (pass null for the Euclidean one); the primal
/// prox must use 1/tau weights when tau varies along the column.
inline void project_monotone_column(double* x, int k, const double* weight = nullptr) {
  // pool adjacent violators on the weighted means
  thread_local std::vector<double> val;
  thread_local std::vector<double> wsum;
  thread_local std::vector<int> len;
  val.clear();
  wsum.clear();
  len.clear();
  for (int i = 0; i < k; ++i) {
    double v = x[i];
    double w = weight ? weight[i] : 1.0;
    int l = 1;
    while (!val.empty() && val.back() < v) {  // enforce x non-increasing
      v = (v * w + val.back() * wsum.back()) / (w + wsum.back());
      w += wsum.back();
      l += len.back();
      val.pop_back();
      wsum.pop_back();
      len.pop_back();
    }
    val.push_back(v);
    wsum.push_back(w);
    len.push_back(l);
  }
  int pos = 0;
  for (std::size_t b = 0; b < val.size(); ++b) {
    const double v = std::min(std::max(val[b], 0.0), 1.0);
    for (int i = 0; i < len[b]; ++i) x[pos++] = v;
  }
}

}  // namespace detail

struct IndicatorSolveResult {
  SubgraphIndicator indicator;
  SolveReport report;
};

namespace detail {

/// Columns whose contribution sits at or below the energy resolution get
/// smeared by the preconditioned iteration; re-sharpen them by a
/// deterministic per-column sweep that accepts drained/filled variants
/// whenever they do not increase the local perimeter.
inline void drain_indicator_ties(SubgraphIndicator& ind,
                                 const std::vector<std::uint8_t>& col_free,
                                 double tie_tol) {
  const DomainMesh& mesh = *ind.mesh;
  const MetricChart& ch = mesh.chart;
  const int n = ch.node_count();
  const int d = ch.dim;
  const int nc = 1 << d;
  const int K = ind.layers;
  const double alpha = ind.alpha;
  std::vector<std::vector<int>> node_cells{std::size_t(n)};
  for (std::size_t c = 0; c < mesh.cells.size(); ++c)
    for (int k = 0; k < nc; ++k)
      node_cells[std::size_t(mesh.cells[c].corner[k])].push_back(int(c));

  auto local_energy = [&](int i) {
    double e = 0;
    for (int ci : node_cells[std::size_t(i)]) {
      const Cell& cell = mesh.cells[std::size_t(ci)];
      for (int k = 0; k + 1 < K; ++k) {
        double comp[max_dim + 1] = {0, 0, 0};
        for (int a = 0; a < d; ++a) {
          const auto edges = quad::axis_edges(d, a);
          double s = 0;
          for (int e2 = 0; e2 < quad::edges_per_axis(d); ++e2)
            for (int kk = 0; kk <= 1; ++kk)
              s += ind.lambda[ind.site(cell.corner[edges[std::size_t(e2)][1]], k + kk)] -
                   ind.lambda[ind.site(cell.corner[edges[std::size_t(e2)][0]], k + kk)];
          comp[a] = s / (nc * ch.h[a]) * std::sqrt(cell.inv_gaa[a]);
        }
        double s = 0;
        for (int cc = 0; cc < nc; ++cc)
          s += ind.lambda[ind.site(cell.corner[cc], k + 1)] -
               ind.lambda[ind.site(cell.corner[cc], k)];
        comp[d] = s / (nc * ind.h_r);
        double norm2 = 0;
        for (int a = 0; a <= d; ++a) norm2 += comp[a] * comp[a];
        e += std::exp(alpha * (-ind.T + (k + 1) * ind.h_r)) * std::sqrt(norm2) *
             cell.vol * ind.h_r;
      }
    }
    return e;
  };

  std::vector<double> saved(std::size_t(K), 0.0);
  for (int pass = 0; pass < 4; ++pass) {
    bool moved = false;
    for (int i = 0; i < n; ++i) {
      if (!col_free[std::size_t(i)]) continue;
      double* col = &ind.lambda[ind.site(i, 0)];
      for (int variant = 0; variant < 2; ++variant) {
        const double before = local_energy(i);
        for (int k = 0; k < K; ++k) saved[std::size_t(k)] = col[k];
        for (int k = 0; k < K; ++k)
          col[k] = variant == 0 ? (k == 0 ? 1.0 : 0.0) : (k == K - 1 ? 0.0 : 1.0);
        bool identical = true;
        for (int k = 0; k < K && identical; ++k)
          identical = col[k] == saved[std::size_t(k)];
        if (!identical && local_energy(i) - before <= tie_tol) {
          moved = true;
          break;
        }
        for (int k = 0; k < K; ++k) col[k] = saved[std::size_t(k)];
      }
    }
    if (!moved) break;
  }
}

}  // namespace detail

/// Direct convex minimization of the weighted perimeter over indicators on
/// mesh x [-T, T]: boundary columns carry the subgraph of psi, the bottom
/// and top slabs are fixed full and empty, every sweep projects onto the
/// monotone cone.
inline IndicatorSolveResult solve_indicator(const DomainMesh& mesh,
                                            const ScalarField& psi, double alpha,
                                            const SolverConfig& cfg,
                                            const ScalarField* warm_start = nullptr) {
  cfg.validate();
  if (!(alpha > 0)) throw std::invalid_argument("solve_indicator: alpha must be positive");
  require_diagonal_metric(mesh, "solve_indicator");
  const MetricChart& ch = mesh.chart;
  const int n = ch.node_count();
  const int d = ch.dim;
  const double T = cfg.indicator_T > 0 ? cfg.indicator_T : cfg.cap_schedule.front();
  for (const auto& b : mesh.boundary)
    if (std::abs(psi[std::size_t(b.node)]) > T - 2 * cfg.h_r)
      throw std::invalid_argument("solve_indicator: boundary data exceeds the indicator cap");

  ScalarField psi_like = make_field(ch);
  double psi_mean = 0, wsum = 0;
  for (const auto& b : mesh.boundary) {
    psi_mean += b.weight * psi[std::size_t(b.node)];
    wsum += b.weight;
  }
  psi_mean /= wsum;
  for (int i = 0; i < n; ++i)
    psi_like[std::size_t(i)] =
        warm_start ? (*warm_start)[std::size_t(i)] : psi_mean;
  for (const auto& b : mesh.boundary)
    psi_like[std::size_t(b.node)] = psi[std::size_t(b.node)];

  std::vector<std::uint8_t> col_free(std::size_t(n), 1);
  for (const auto& b : mesh.boundary) col_free[std::size_t(b.node)] = 0;

  const int D = d + 1;
  const int nc = 1 << d;
  const std::size_t ncell = mesh.cells.size();

  std::vector<double> energy_history;
  bool converged = false;
  int iters_done = 0;

  // primal-dual sweep at one r-resolution; returns once the energy window
  // and the primal motion both settle (or the budget runs out)
  auto run_level = [&](SubgraphIndicator& ind, int budget, bool record) {
    const int K = ind.layers;
    const double h_r = ind.h_r;
    const std::size_t ndual = ncell * std::size_t(K - 1);
    std::vector<double> p(ndual * std::size_t(D), 0.0);
    std::vector<double> scale(ncell * std::size_t(D));
    std::vector<double> wgt(ndual);
    for (std::size_t c = 0; c < ncell; ++c) {
      for (int a = 0; a < d; ++a)
        scale[c * D + a] = std::sqrt(mesh.cells[c].inv_gaa[a]) / ((2 * nc) * ch.h[a]);
      scale[c * D + d] = 1.0 / ((2 * nc) * h_r);
      for (int k = 0; k + 1 < K; ++k)
        wgt[c * std::size_t(K - 1) + k] =
            std::exp(alpha * (-T + (k + 1) * h_r)) * mesh.cells[c].vol * h_r;
    }
    // The dual runs on the unit ball with the weight folded into the
    // operator, so preconditioned primal steps move lambda at O(tau) per
    // iteration regardless of the cell volume scale. Row sums: every corner
    // appears once per axis with entry magnitude w * scale * 2.
    std::vector<double> tau(std::size_t(n) * K, 0.0);
    for (std::size_t c = 0; c < ncell; ++c)
      for (int a = 0; a < D; ++a) {
        const double coef = scale[c * D + a] * 2;
        for (int cc = 0; cc < nc; ++cc)
          for (int kk = 0; kk <= 1; ++kk)
            for (int k = 0; k + 1 < K; ++k)
              tau[ind.site(mesh.cells[c].corner[cc], k + kk)] +=
                  coef * wgt[c * std::size_t(K - 1) + k];
      }
    for (auto& t : tau) t = t > 0 ? cfg.tau / t : 0.0;

    std::vector<double> lam = ind.lambda, lam_bar = ind.lambda, div_p;
    double last_energy = std::numeric_limits<double>::infinity();
    bool done = false;

    auto apply_K = [&](const std::vector<double>& x, std::size_t c, int k, double* out) {
      const auto& cell = mesh.cells[c];
      for (int a = 0; a < d; ++a) {
        const auto edges = quad::axis_edges(d, a);
        double s = 0;
        for (int e = 0; e < quad::edges_per_axis(d); ++e)
          for (int kk = 0; kk <= 1; ++kk)
            s += x[ind.site(cell.corner[edges[std::size_t(e)][1]], k + kk)] -
                 x[ind.site(cell.corner[edges[std::size_t(e)][0]], k + kk)];
        out[a] = s * scale[c * std::size_t(D) + a] * 2;
      }
      double s = 0;
      for (int cc = 0; cc < nc; ++cc)
        s += x[ind.site(cell.corner[cc], k + 1)] - x[ind.site(cell.corner[cc], k)];
      out[d] = s * scale[c * std::size_t(D) + d] * 2;
    };

    for (int it = 0; it < budget; ++it) {
      for (std::size_t c = 0; c < ncell; ++c) {
        // one step size per dual ball: the radial projection is only the
        // exact prox when the components share their metric
        double rowsum_max = 0;
        for (int a = 0; a < D; ++a)
          rowsum_max = std::max(rowsum_max,
                                2.0 * nc * scale[c * std::size_t(D) + a] * 2);
        for (int k = 0; k + 1 < K; ++k) {
          double kx[max_dim + 1];
          apply_K(lam_bar, c, k, kx);
          const std::size_t dc = c * std::size_t(K - 1) + std::size_t(k);
          const double w = wgt[dc];
          const double sigma_c = cfg.sigma_dual / (rowsum_max * w);
          double norm2 = 0;
          for (int a = 0; a < D; ++a) {
            double& pa = p[dc * std::size_t(D) + a];
            pa += sigma_c * (w * kx[a]);
            norm2 += pa * pa;
          }
          if (norm2 > 1.0) {
            const double f = 1.0 / std::sqrt(norm2);
            for (int a = 0; a < D; ++a) p[dc * std::size_t(D) + a] *= f;
          }
        }
      }
      div_p.assign(lam.size(), 0.0);
      for (std::size_t c = 0; c < ncell; ++c) {
        const auto& cell = mesh.cells[c];
        for (int k = 0; k + 1 < K; ++k) {
          const std::size_t dc = c * std::size_t(K - 1) + std::size_t(k);
          const double w = wgt[dc];
          for (int a = 0; a < d; ++a) {
            const double coef = p[dc * std::size_t(D) + a] * w *
                                scale[c * std::size_t(D) + a] * 2;
            const auto edges = quad::axis_edges(d, a);
            for (int e = 0; e < quad::edges_per_axis(d); ++e)
              for (int kk = 0; kk <= 1; ++kk) {
                div_p[ind.site(cell.corner[edges[std::size_t(e)][1]], k + kk)] += coef;
                div_p[ind.site(cell.corner[edges[std::size_t(e)][0]], k + kk)] -= coef;
              }
          }
          const double coef =
              p[dc * std::size_t(D) + d] * w * scale[c * std::size_t(D) + d] * 2;
          for (int cc = 0; cc < nc; ++cc) {
            div_p[ind.site(cell.corner[cc], k + 1)] += coef;
            div_p[ind.site(cell.corner[cc], k)] -= coef;
          }
        }
      }
      double step_inf = 0;
      std::vector<double> inv_tau(std::size_t(K), 1.0);
      for (int i = 0; i < n; ++i) {
        if (!col_free[std::size_t(i)]) continue;
        double* col = &lam[ind.site(i, 0)];
        const double* tcol = &tau[ind.site(i, 0)];
        const double* dcol = &div_p[ind.site(i, 0)];
        for (int k = 0; k < K; ++k) col[k] -= tcol[k] * dcol[k];
        col[0] = 1.0;
        col[K - 1] = 0.0;
        for (int k = 1; k + 1 < K; ++k) inv_tau[std::size_t(k)] = 1.0 / tcol[k];
        detail::project_monotone_column(col + 1, K - 2, inv_tau.data() + 1);
        col[0] = 1.0;
        col[K - 1] = 0.0;
        for (int k = 0; k < K; ++k)
          step_inf = std::max(step_inf,
                              std::abs(col[k] - ind.lambda[ind.site(i, k)]));
      }
      for (std::size_t i = 0; i < lam.size(); ++i)
        lam_bar[i] = 2 * lam[i] - ind.lambda[i];
      ind.lambda = lam;
      if (record) iters_done = it + 1;

      if ((it + 1) % 25 == 0) {
        const double e = weighted_perimeter(ind).total;
        if (record) energy_history.push_back(e);
        if (it + 1 >= 200 && std::abs(e - last_energy) <= cfg.energy_tol &&
            step_inf <= 2e-3) {
          done = true;
          break;
        }
        last_energy = e;
      }
    }
    return done;
  };

  // coarse-to-fine in the r-axis: interfaces travel few cells per level,
  // which sidesteps the slow-translation regime of primal-dual iterations.
  // A warm start is already in place, so it goes straight to the fine level.
  std::vector<double> ladder;
  if (!warm_start)
    for (double hr = cfg.h_r; 2 * T / hr > 12; hr *= 2) ladder.push_back(hr);
  if (ladder.empty()) ladder.push_back(cfg.h_r);
  std::reverse(ladder.begin(), ladder.end());

  ScalarField level_profile = psi_like;
  SubgraphIndicator ind;
  for (std::size_t li = 0; li < ladder.size(); ++li) {
    const bool finest = li + 1 == ladder.size();
    ind = subgraph_indicator(mesh, level_profile, T, ladder[li], alpha);
    const bool done = run_level(
        ind, finest ? cfg.indicator_max_iters : std::min(800, cfg.indicator_max_iters),
        finest);
    if (finest) converged = done;
    if (!finest) {
      auto prof = reconstruct_profile(ind);
      level_profile = prof.u;
      for (int i = 0; i < n; ++i)
        if (prof.flags[std::size_t(i)] == NodeClass::MINUS_INF)
          level_profile[std::size_t(i)] = -T;
        else if (prof.flags[std::size_t(i)] == NodeClass::PLUS_INF)
          level_profile[std::size_t(i)] = T;
      for (const auto& b : mesh.boundary)
        level_profile[std::size_t(b.node)] = psi[std::size_t(b.node)];
    }
  }


  detail::drain_indicator_ties(ind, col_free,
                               1e-12 * std::max(1.0, weighted_perimeter(ind).total));

  IndicatorSolveResult out;
  out.indicator = std::move(ind);
  auto profile = reconstruct_profile(out.indicator);
  out.report.u = profile.u;
  out.report.classification = profile.flags;
  out.report.iterations = iters_done;
  out.report.converged = converged;
  out.report.caps = {T};
  for (std::size_t i = 0; i < energy_history.size(); ++i)
    out.report.history.push_back({"primal-dual", int((i + 1) * 25), energy_history[i], 0});
  out.report.diagnostics["perimeter"] = weighted_perimeter(out.indicator).total;
  try {
    auto [linf, l2] = residual_norms(mesh, out.report.u, alpha, &out.report.classification);
    out.report.residual_linf = linf;
    out.report.residual_l2 = l2;
  } catch (const std::runtime_error&) {
    out.report.residual_linf = out.report.residual_l2 =
        std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

/// Local-minimality probe: random compactly supported monotone competitors.
/// Returns the most negative perimeter change seen (>= -energy_tol passes).
inline double perimeter_probe(const SubgraphIndicator& ind, unsigned seed, int count) {
  const DomainMesh& mesh = *ind.mesh;
  const MetricChart& ch = mesh.chart;
  const int n = ch.node_count();
  const int K = ind.layers;
  std::mt19937_64 rng(seed);
  std::vector<int> interior_nodes;
  for (int i = 0; i < n; ++i)
    if (mesh.is_interior(i)) interior_nodes.push_back(i);
  const double base = weighted_perimeter(ind).total;
  double worst = 0;
  SubgraphIndicator trial = ind;
  for (int t = 0; t < count; ++t) {
    trial.lambda = ind.lambda;
    std::uniform_int_distribution<int> pick(0, int(interior_nodes.size()) - 1);
    const int center = interior_nodes[std::size_t(pick(rng))];
    const auto cm = ch.multi(center);
    std::uniform_int_distribution<int> rad_d(1, 3);
    const int rad = rad_d(rng);
    std::uniform_real_distribution<double> amp_d(ind.h_r, 4 * ind.h_r);
    const double amp = amp_d(rng) * (rng() % 2 ? 1 : -1);
    std::uniform_int_distribution<int> kd(1, K - 2);
    const int k0 = kd(rng);
    for (int i = 0; i < n; ++i) {
      if (!mesh.is_interior(i)) continue;
      const auto m = ch.multi(i);
      int dist = 0;
      for (int a = 0; a < ch.dim; ++a) {
        int da = std::abs(m[a] - cm[a]);
        if (ch.periodic[a]) da = std::min(da, ch.shape[a] - da);
        dist = std::max(dist, da);
      }
      if (dist > rad) continue;
      const double hat = amp * (1.0 - double(dist) / (rad + 1));
      double* col = &trial.lambda[trial.site(i, 0)];
      for (int k = std::max(1, k0 - 2 * rad); k < std::min(K - 1, k0 + 2 * rad); ++k)
        col[k] = std::clamp(col[k] + hat / ind.h_r * 0.5, 0.0, 1.0);
      detail::project_monotone_column(col + 1, K - 2);
    }
    const double e = weighted_perimeter(trial).total;
    worst = std::min(worst, e - base);
  }
  return worst;
}

}  // namespace tmce
