// Copyright 2026 The Sweep Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// sweepctl: simulate, optimize, check and crowd commands.
//
//   sweepctl simulate --config c.json --grid 100 --out traj.csv
//   sweepctl optimize --config c.json --grid 200 --multistart 8 --seed 1 \
//       --out sol.csv --report summary.json
//   sweepctl check --config c.json --solution sol.csv --tol 1e-6 \
//       --report report.json
//   sweepctl crowd --config crowd.json --out solution.json

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "sweep/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Controlled sweeping processes: simulate, optimize, certify"};
  app.require_subcommand(1);
  sweep::CommandOptions o;
  double tau = 0.0;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "problem configuration (JSON)")
        ->required();
  };
  auto add_plot = [&](CLI::App* cmd) {
    cmd->add_option("--emit-plot-data", o.plot_data,
                    "write long-format CSV for plotting");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "catching-up simulation");
  add_config(simulate);
  simulate->add_option("--grid", o.grid, "number of mesh intervals");
  simulate->add_option("--out", o.out, "trajectory CSV (default stdout)");
  add_plot(simulate);

  CLI::App* optimize =
      app.add_subcommand("optimize", "solve the discrete approximation");
  add_config(optimize);
  optimize->add_option("--grid", o.grid, "number of mesh intervals");
  CLI::Option* tau_opt =
      optimize->add_option("--tau", tau, "override the u-band width");
  optimize->add_option("--multistart", o.multistart, "number of starts");
  optimize->add_option("--seed", o.seed, "random seed for the starts");
  optimize->add_option("--out", o.out, "solution CSV (default stdout)");
  optimize->add_option("--report", o.report, "summary JSON (default stdout)");
  optimize->add_option("--sign", o.sign, "adjoint sign: lagrangian|published");
  add_plot(optimize);

  CLI::App* check =
      app.add_subcommand("check", "check optimality conditions of a candidate");
  add_config(check);
  check->add_option("--solution", o.solution, "candidate CSV")->required();
  check->add_option("--tol", o.tol, "residual tolerance");
  check->add_option("--report", o.report, "report JSON (default stdout)");
  check->add_option("--sign", o.sign, "adjoint sign: lagrangian|published");

  CLI::App* crowd =
      app.add_subcommand("crowd", "solve the corridor crowd model");
  add_config(crowd);
  crowd->add_option("--out", o.out, "solution JSON (default stdout)");
  crowd->add_option("--sign", o.sign,
                    "certificate adjoint sign: published|lagrangian");
  add_plot(crowd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return sweep::kExitUsage;
  }
  if (tau_opt->count() > 0) o.tau = tau;

  if (simulate->parsed()) return sweep::cmd_simulate(o, std::cout, std::cerr);
  if (optimize->parsed()) return sweep::cmd_optimize(o, std::cout, std::cerr);
  if (check->parsed()) return sweep::cmd_check(o, std::cout, std::cerr);
  if (crowd->parsed()) return sweep::cmd_crowd(o, std::cout, std::cerr);
  return sweep::kExitUsage;
}
