#include <CLI11.hpp>

#include <string>
#include <vector>

#include "tmce/run.hpp"
#include "tmce/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Dirichlet solver lab for the translating mean curvature equation"};
  app.set_version_flag("--version", tmce::version_string);
  app.require_subcommand(1);

  std::string solve_config;
  auto* solve = app.add_subcommand("solve", "run the solvers described by a config file");
  solve->add_option("config", solve_config, "run configuration file")->required();

  std::string suite;
  auto* verify = app.add_subcommand("verify", "run a built-in verification battery");
  verify->add_option("suite", suite,
                     "functionals|perimeter|conformal|estimates|all")
      ->required();

  std::string sweep_config, sweep_param;
  std::vector<double> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "repeat a solve across parameter values");
  sweep->add_option("config", sweep_config, "run configuration file")->required();
  sweep->add_option("--param", sweep_param, "h|T_max|alpha|domain_size")->required();
  sweep->add_option("--values", sweep_values, "parameter values")
      ->required()
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) return tmce::cmd_solve(solve_config);
  if (verify->parsed()) return tmce::cmd_verify(suite);
  if (sweep->parsed()) return tmce::cmd_sweep(sweep_config, sweep_param, sweep_values);
  return 1;
}
