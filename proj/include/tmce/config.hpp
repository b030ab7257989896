#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tmce/fields.hpp"
#include "tmce/solvers.hpp"

namespace tmce {

/// Flat key=value run configuration with dotted sections.
struct RunConfig {
  std::string domain;
  double alpha = 0;
  double h = 0;
  std::string psi = "0";
  std::vector<std::string> solvers{"nodal"};
  std::vector<std::string> diagnostics;
  std::string output_dir = "out";
  int n_angular = 0;
  bool percell_dump = false;
  bool indicator_dump = false;
  bool mesh_dump = false;
  SolverConfig solver;
  std::map<std::string, std::string> raw;

  static RunConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  static RunConfig parse(const std::string& text);
  void validate() const;

  std::string resolved_output_dir() const {
    const char* root = std::getenv("TMCE_OUTPUT_ROOT");
    if (root && *root)
      return (std::filesystem::path(root) / output_dir).string();
    return output_dir;
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

inline std::vector<double> split_doubles(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) {
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      throw std::invalid_argument("config: bad number '" + tok + "' in " + key);
    }
  }
  return out;
}

inline double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (trim(v.substr(used)).empty()) return d;
  } catch (...) {
  }
  throw std::invalid_argument("config: bad number for key '" + key + "'");
}

inline bool to_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean for key '" + key + "'");
}

}  // namespace detail

inline RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value, got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    cfg.raw[key] = val;

    if (key == "domain") cfg.domain = val;
    else if (key == "alpha") cfg.alpha = detail::to_double(val, key);
    else if (key == "h") cfg.h = detail::to_double(val, key);
    else if (key == "h_r") cfg.solver.h_r = detail::to_double(val, key);
    else if (key == "psi") cfg.psi = val;
    else if (key == "run.solvers") cfg.solvers = detail::split_list(val);
    else if (key == "run.diagnostics") cfg.diagnostics = detail::split_list(val);
    else if (key == "output.dir") cfg.output_dir = val;
    else if (key == "output.percell_dump") cfg.percell_dump = detail::to_bool(val, key);
    else if (key == "output.indicator_dump") cfg.indicator_dump = detail::to_bool(val, key);
    else if (key == "output.mesh_dump") cfg.mesh_dump = detail::to_bool(val, key);
    else if (key == "mesh.n_angular") cfg.n_angular = int(detail::to_double(val, key));
    else if (key == "solver.cap_schedule") cfg.solver.cap_schedule = detail::split_doubles(val, key);
    else if (key == "solver.sigma_steps") cfg.solver.sigma_steps = detail::split_doubles(val, key);
    else if (key == "solver.max_iters") cfg.solver.max_iters = int(detail::to_double(val, key));
    else if (key == "solver.grad_tol") cfg.solver.grad_tol = detail::to_double(val, key);
    else if (key == "solver.energy_tol") cfg.solver.energy_tol = detail::to_double(val, key);
    else if (key == "solver.wall_eps_rel") cfg.solver.wall_eps_rel = detail::to_double(val, key);
    else if (key == "solver.tau") cfg.solver.tau = detail::to_double(val, key);
    else if (key == "solver.sigma_dual") cfg.solver.sigma_dual = detail::to_double(val, key);
    else if (key == "solver.indicator_max_iters")
      cfg.solver.indicator_max_iters = int(detail::to_double(val, key));
    else if (key == "solver.indicator_T") cfg.solver.indicator_T = detail::to_double(val, key);
    else
      throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

inline void RunConfig::validate() const {
  if (domain.empty()) throw std::invalid_argument("config: missing required key 'domain'");
  if (!(alpha > 0))
    throw std::invalid_argument("config: 'alpha' must be present and positive");
  if (!(h > 0)) throw std::invalid_argument("config: 'h' must be present and positive");
  for (const auto& s : solvers)
    if (s != "nodal" && s != "indicator" && s != "blowup_scan")
      throw std::invalid_argument("config: unknown solver '" + s + "'");
  for (const auto& d : diagnostics)
    if (d != "mean_convexity" && d != "gradient_estimate" && d != "c0_estimate" &&
        d != "small_sphere")
      throw std::invalid_argument("config: unknown diagnostic '" + d + "'");
  solver.validate();
}

/// Boundary data resolved on every node: a plain number, expr:<whitelist
/// expression in the chart coordinates>, or csv:<node_index,value file>.
inline ScalarField psi_field(const DomainMesh& mesh, const RunConfig& cfg) {
  const std::string& spec = cfg.psi;
  ScalarField psi;
  if (spec.rfind("expr:", 0) == 0) {
    psi = expression_field(mesh, spec.substr(5));
  } else if (spec.rfind("csv:", 0) == 0) {
    const std::string path = spec.substr(4);
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: psi csv '" + path + "' not readable");
    psi = make_field(mesh.chart);
    std::string line;
    while (std::getline(in, line)) {
      line = detail::trim(line);
      if (line.empty() || !std::isdigit(static_cast<unsigned char>(line[0]))) continue;
      std::stringstream ls(line);
      std::string a, b;
      std::getline(ls, a, ',');
      std::getline(ls, b, ',');
      const int node = std::stoi(a);
      if (node < 0 || node >= mesh.chart.node_count())
        throw std::invalid_argument("config: psi csv node index out of range");
      psi[std::size_t(node)] = std::stod(b);
    }
  } else {
    psi = make_field(mesh.chart, detail::to_double(spec, "psi"));
  }
  for (double v : psi.values)
    if (!std::isfinite(v)) throw std::invalid_argument("config: psi must be finite");
  return psi;
}

}  // namespace tmce
