#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "nashflow/cli.hpp"

int main(int argc, char** argv) {
  using namespace nashflow;
  CLI::App app{"Equilibria of monotone games via projected gradient flows"};
  app.require_subcommand(1);
  // "--h" is the step size, so help is long-form only.
  app.set_help_flag("--help", "Print this help message and exit");

  cli::RunSpec spec;
  std::string scheme = "euler";
  double h = 0.0;
  auto* run = app.add_subcommand("run", "Integrate a problem and certify its equilibrium");
  run->add_option("--problem", spec.problem, "Registry name or JSON problem file")->required();
  run->add_option("--x0", spec.x0, "a,b,... | fig1 | equilibrium | zero | random:<seed>")->required();
  run->add_option("--scheme", scheme, "euler | proximal")->capture_default_str();
  auto* h_opt = run->add_option("--h", h, "Time step (default min(1e-2, 0.5/L))")->check(CLI::PositiveNumber);
  run->add_option("--t-max", spec.t_max, "Final time")->capture_default_str()->check(CLI::NonNegativeNumber);
  run->add_option("--tol", spec.residual_tol, "Residual tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  run->add_option("--gamma", spec.residual_gamma, "Residual step gamma")->capture_default_str()->check(CLI::PositiveNumber);
  run->add_option("--trajectory", spec.trajectory_path, "Trajectory CSV output path");
  run->add_option("--summary", spec.summary_path, "Summary JSON output path");
  run->add_option("--record-every", spec.record_every, "Keep every k-th state")->capture_default_str();

  std::string target = "all";
  auto* verify = app.add_subcommand("verify", "Audit monotonicity, gradients, and known equilibria");
  verify->add_option("target", target, "Problem name, JSON file, or all")->capture_default_str();

  std::string pde_spec;
  auto* pde = app.add_subcommand("pde", "Run a discretized PDE game from a JSON spec");
  pde->add_option("spec", pde_spec, "PDE spec JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::kError;
  }

  if (*run) {
    try {
      spec.scheme = cli::parse_scheme(scheme);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return cli::kError;
    }
    if (*h_opt) spec.h = h;
    return cli::cmd_run(spec);
  }
  if (*verify) return cli::cmd_verify(target);
  return cli::cmd_pde(pde_spec);
}
