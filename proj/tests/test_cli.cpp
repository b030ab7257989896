#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tmce/config.hpp"
#include "tmce/expr.hpp"
#include "tmce/run.hpp"

using namespace tmce;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

int run_tool(const std::string& args, const fs::path& log) {
  const char* bin = std::getenv("TMCE_BIN");
  REQUIRE(bin != nullptr);
  const std::string cmd = std::string(bin) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("expression whitelist") {
  const std::vector<std::string> vars{"x", "y"};
  SUBCASE("grim reaper boundary data parses and evaluates") {
    auto e = Expression::parse("-ln(cos(x))", vars);
    CHECK(e.eval({0.5, 0}) == doctest::Approx(-std::log(std::cos(0.5))));
  }
  SUBCASE("precedence and constants") {
    auto e = Expression::parse("1 + 2*x - y/4 + pi", vars);
    CHECK(e.eval({3, 8}) == doctest::Approx(1 + 6 - 2 + 3.14159265358979));
  }
  SUBCASE("nothing outside the whitelist parses") {
    CHECK_THROWS_WITH_AS(Expression::parse("tan(x)", vars),
                         doctest::Contains("unknown function"),
                         std::invalid_argument);
    CHECK_THROWS(Expression::parse("system(x)", vars));
    CHECK_THROWS(Expression::parse("x ^ 2", vars));
    CHECK_THROWS(Expression::parse("z + 1", vars));
    CHECK_THROWS(Expression::parse("(x", vars));
  }
}

TEST_CASE("run config parsing") {
  SUBCASE("round trip of a full config") {
    auto cfg = RunConfig::parse(
        "domain = euclidean_disk(1.0)\n"
        "alpha = 1.5\n"
        "h = 0.05\n"
        "h_r = 0.02\n"
        "psi = expr: 0.1*cos(theta)\n"
        "run.solvers = nodal, indicator\n"
        "run.diagnostics = mean_convexity\n"
        "mesh.n_angular = 32\n"
        "solver.cap_schedule = 2, 4\n"
        "solver.grad_tol = 1e-6\n"
        "output.dir = runs/demo\n");
    CHECK(cfg.alpha == 1.5);
    CHECK(cfg.solver.h_r == 0.02);
    CHECK(cfg.solvers.size() == 2);
    CHECK(cfg.solver.cap_schedule.size() == 2);
  }
  SUBCASE("missing alpha names the key") {
    CHECK_THROWS_WITH_AS(RunConfig::parse("domain = interval(1)\nh = 0.1\n"),
                         doctest::Contains("alpha"), std::invalid_argument);
  }
  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS_WITH_AS(RunConfig::parse("domain = interval(1)\nalpha = 1\nh = 0.1\n"
                                          "solevr.max_iters = 3\n"),
                         doctest::Contains("solevr.max_iters"), std::invalid_argument);
  }
  SUBCASE("unknown solver and diagnostic names are rejected") {
    CHECK_THROWS(RunConfig::parse(
        "domain = interval(1)\nalpha = 1\nh = 0.1\nrun.solvers = magic\n"));
    CHECK_THROWS(RunConfig::parse(
        "domain = interval(1)\nalpha = 1\nh = 0.1\nrun.diagnostics = vibes\n"));
  }
  SUBCASE("psi expressions use the chart variable names") {
    auto cfg = RunConfig::parse(
        "domain = interval(0.5)\nalpha = 1\nh = 0.125\npsi = expr:-ln(cos(x))\n");
    auto mesh = build_domain(cfg.domain, cfg.h);
    auto psi = psi_field(mesh, cfg);
    CHECK(psi[0] == doctest::Approx(-std::log(std::cos(-0.5))));
  }
}

TEST_CASE("cmd_solve end to end") {
  const fs::path dir = fs::temp_directory_path() / "tmce_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "run.cfg";
  write(cfg,
        "domain = interval(1.0)\n"
        "alpha = 1\n"
        "h = 0.015625\n"
        "psi = expr: -ln(cos(x))\n"
        "run.solvers = nodal\n"
        "output.dir = " + (dir / "out1").string() + "\n");

  SUBCASE("exit 0, report fields, and byte-identical reruns") {
    CHECK(run_tool("solve " + cfg.string(), dir / "log1.txt") == 0);
    const auto rep = nlohmann::json::parse(slurp(dir / "out1" / "report.json"));
    CHECK(rep.at("converged").get<bool>());
    CHECK(rep.at("residual_linf").get<double>() <= 1e-3);
    CHECK(rep.at("classification_counts").at("minus_inf").get<int>() == 0);
    CHECK(rep.at("config").at("alpha") == "1");
    CHECK(rep.contains("tool_version"));
    const std::string sol1 = slurp(dir / "out1" / "solution.csv");
    const std::string hist1 = slurp(dir / "out1" / "history.csv");
    CHECK(sol1.rfind("node_index,x,u,class", 0) == 0);
    fs::remove_all(dir / "out1");
    CHECK(run_tool("solve " + cfg.string(), dir / "log2.txt") == 0);
    CHECK(slurp(dir / "out1" / "solution.csv") == sol1);
    CHECK(slurp(dir / "out1" / "history.csv") == hist1);
  }

  SUBCASE("malformed config exits 1 and names the offending key") {
    const fs::path bad = dir / "bad.cfg";
    write(bad, "domain = interval(1.0)\nh = 0.05\n");
    CHECK(run_tool("solve " + bad.string(), dir / "log3.txt") == 1);
    CHECK(slurp(dir / "log3.txt").find("alpha") != std::string::npos);
  }

  SUBCASE("unknown domain exits 1") {
    const fs::path bad = dir / "bad2.cfg";
    write(bad, "domain = dodecahedron(1)\nalpha = 1\nh = 0.05\n");
    CHECK(run_tool("solve " + bad.string(), dir / "log4.txt") == 1);
  }
}

TEST_CASE("hemisphere scenario classifies and exits 0") {
  const fs::path dir = fs::temp_directory_path() / "tmce_cli_hemi";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write(dir / "run.cfg",
        "domain = hemisphere()\n"
        "alpha = 2\n"
        "h = 0.1\n"
        "psi = 0\n"
        "run.solvers = blowup_scan\n"
        "run.diagnostics = mean_convexity\n"
        "output.dir = " + (dir / "out").string() + "\n");
  CHECK(run_tool("solve " + (dir / "run.cfg").string(), dir / "log.txt") == 0);
  const auto rep = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  CHECK(rep.at("scan_stable").get<bool>());
  CHECK(rep.at("classification_counts").at("minus_inf").get<int>() > 0);
  CHECK(rep.at("diagnostics").at("mean_convexity").at("pass").get<bool>());
}

TEST_CASE("inconclusive scans exit 2") {
  const fs::path dir = fs::temp_directory_path() / "tmce_cli_inc";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write(dir / "run.cfg",
        "domain = interval(1.0)\n"
        "alpha = 1\n"
        "h = 0.03125\n"
        "psi = -4.9\n"
        "solver.cap_schedule = 5, 10\n"
        "run.solvers = blowup_scan\n"
        "output.dir = " + (dir / "out").string() + "\n");
  CHECK(run_tool("solve " + (dir / "run.cfg").string(), dir / "log.txt") == 2);
}

TEST_CASE("cmd_sweep: alpha to zero is the minimal-surface limit") {
  const fs::path dir = fs::temp_directory_path() / "tmce_cli_sweep";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write(dir / "run.cfg",
        "domain = euclidean_disk(1.0)\n"
        "alpha = 1\n"
        "h = 0.0625\n"
        "mesh.n_angular = 16\n"
        "psi = 0\n"
        "output.dir = " + (dir / "out").string() + "\n");
  CHECK(run_tool("sweep " + (dir / "run.cfg").string() +
                     " --param alpha --values 0.4,0.2,0.1",
                 dir / "log.txt") == 0);
  std::ifstream in(dir / "out" / "sweep.csv");
  std::string header, line;
  std::getline(in, header);
  CHECK(header.rfind("param,value,", 0) == 0);
  std::vector<double> sup_u;
  while (std::getline(in, line)) {
    const auto pos = line.rfind(',');
    sup_u.push_back(std::stod(line.substr(pos + 1)));
  }
  REQUIRE(sup_u.size() == 3);
  CHECK(sup_u[1] < sup_u[0]);
  CHECK(sup_u[2] < sup_u[1]);
  CHECK(sup_u[2] < 0.05);
}

TEST_CASE("cmd_verify suites") {
  std::ostringstream os;
  CHECK(verify::run("conformal", os) == 0);
  CHECK(os.str().find("PASS") != std::string::npos);
  std::ostringstream os2;
  CHECK(verify::run("nonsense", os2) == 1);
  // a pristine checkout passes the full battery through the binary
  const fs::path dir = fs::temp_directory_path() / "tmce_cli_verify";
  fs::create_directories(dir);
  CHECK(run_tool("verify all", dir / "log.txt") == 0);
  CHECK(slurp(dir / "log.txt").find("all checks passed") != std::string::npos);
}

TEST_CASE("combined solvers with dumps") {
  const fs::path dir = fs::temp_directory_path() / "tmce_cli_dumps";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write(dir / "run.cfg",
        "domain = interval(0.8)\n"
        "alpha = 1\n"
        "h = 0.05\n"
        "h_r = 0.0625\n"
        "psi = 0.2\n"
        "run.solvers = nodal, indicator\n"
        "solver.indicator_T = 2\n"
        "output.indicator_dump = 1\n"
        "output.percell_dump = 1\n"
        "output.mesh_dump = 1\n"
        "output.dir = " + (dir / "out").string() + "\n");
  CHECK(run_tool("solve " + (dir / "run.cfg").string(), dir / "log.txt") == 0);
  CHECK(slurp(dir / "out" / "indicator.csv").rfind("x0_index,r_index,lambda", 0) == 0);
  CHECK(slurp(dir / "out" / "percell.csv").rfind("cell_index,area_term", 0) == 0);
  CHECK(slurp(dir / "out" / "mesh.csv").rfind("node_index,x,g00,interior", 0) == 0);
  const auto rep = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  // the two formulations agree on the converged solution
  CHECK(rep.at("perimeter").get<double>() ==
        doctest::Approx(rep.at("energies").at("F_alpha").get<double>()).epsilon(0.05));
}

TEST_CASE("cmd_sweep: cap size sweep crosses the solvability boundary") {
  const fs::path dir = fs::temp_directory_path() / "tmce_cli_capsweep";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write(dir / "run.cfg",
        "domain = sphere_cap(0.4)\n"
        "alpha = 2\n"
        "h = 0.08\n"
        "psi = 0\n"
        "run.solvers = blowup_scan\n"
        "output.dir = " + (dir / "out").string() + "\n");
  CHECK(run_tool("sweep " + (dir / "run.cfg").string() +
                     " --param domain_size --values 0.4,1.5708",
                 dir / "log.txt") == 0);
  std::ifstream in(dir / "out" / "sweep.csv");
  std::string header, small_cap, near_hemisphere;
  std::getline(in, header);
  std::getline(in, small_cap);
  std::getline(in, near_hemisphere);
  auto field = [](const std::string& row, int idx) {
    std::stringstream ss(row);
    std::string tok;
    for (int i = 0; i <= idx; ++i) std::getline(ss, tok, ',');
    return tok;
  };
  // columns: param,value,...,n_finite(7),n_plus(8),n_minus(9)
  CHECK(std::stoi(field(small_cap, 9)) == 0);
  CHECK(std::stoi(field(near_hemisphere, 9)) > 0);
}

TEST_CASE("output root override") {
  const fs::path dir = fs::temp_directory_path() / "tmce_cli_root";
  fs::remove_all(dir);
  fs::create_directories(dir);
  RunConfig cfg;
  cfg.output_dir = "nested/out";
  setenv("TMCE_OUTPUT_ROOT", dir.c_str(), 1);
  CHECK(cfg.resolved_output_dir() == (dir / "nested/out").string());
  unsetenv("TMCE_OUTPUT_ROOT");
  CHECK(cfg.resolved_output_dir() == "nested/out");
}
