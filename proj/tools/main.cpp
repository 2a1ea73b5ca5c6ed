#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "experiments.hpp"

namespace {

using namespace ehdet;

void add_common(CLI::App& cmd, cli::CommonOptions& o, std::string& transmit, std::string& fc, bool needs_out) {
  cmd.add_option("--scenario", o.scenario, "scenario file")->required();
  auto* out = cmd.add_option("--out", o.out, "output directory");
  if (needs_out) out->required();
  cmd.add_option("--seed", o.seed, "master RNG seed")->capture_default_str();
  cmd.add_option("--samples", o.samples, "Monte Carlo slots per run")->capture_default_str();
  cmd.add_option("--warmup", o.warmup, "warm-up slots (0: 10 K)")->capture_default_str();
  cmd.add_option("--transmit-prob-model", transmit, "prior | decision (overrides the scenario)")
      ->check(CLI::IsMember({"prior", "decision"}));
  cmd.add_option("--fc-knowledge", fc, "genie | map_marginal (overrides the scenario)")
      ->check(CLI::IsMember({"genie", "map_marginal"}));
}

void apply_overrides(cli::CommonOptions& o, const std::string& transmit, const std::string& fc) {
  if (!transmit.empty()) o.transmit_prob_model = parse_transmit_prob_model(transmit);
  if (!fc.empty()) o.fc_knowledge = parse_fc_knowledge(fc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transmit power maps for energy-harvesting sensors in distributed detection"};
  app.require_subcommand(1);

  OptimizerSettings settings;
  std::string solver = "bisection";
  app.add_option("--solver", solver, "lambda solver")
      ->check(CLI::IsMember({"bisection", "subgradient"}))
      ->capture_default_str();
  app.add_option("--eps2", settings.eps2, "steady-state tolerance")->capture_default_str();
  app.add_option("--max-outer-iters", settings.max_outer_iters, "outer-loop iteration cap")->capture_default_str();

  cli::CommonOptions common;
  std::string transmit;
  std::string fc;

  auto* powermap = app.add_subcommand("powermap", "optimize the power map; writes powermap.csv, psi.csv, summary.csv");
  add_common(*powermap, common, transmit, fc, true);

  cli::SweepSpec spec;
  std::string variable = "p_tot";
  auto* sweep = app.add_subcommand("sweep", "optimize and simulate along one parameter; writes sweep.csv");
  add_common(*sweep, common, transmit, fc, true);
  sweep->add_option("--variable", variable, "p_tot | gamma_e | capacity_K")
      ->check(CLI::IsMember({"p_tot", "gamma_e", "capacity_K"}))
      ->capture_default_str();
  sweep->add_option("--values", spec.values, "comma-separated values")->required()->delimiter(',');
  sweep->add_option("--target-pf", common.target_pf, "NP false-alarm target")->capture_default_str();

  std::filesystem::path map_path;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo replay; writes report.csv, occupancy.csv");
  add_common(*simulate, common, transmit, fc, true);
  simulate->add_option("--map", map_path, "power map CSV (default: optimize first)");
  simulate->add_option("--target-pf", common.target_pf, "NP false-alarm target")->capture_default_str();

  cli::ValidateOptions vopts;
  auto* validate = app.add_subcommand("validate", "run the oracle checks on a scenario");
  add_common(*validate, common, transmit, fc, false);
  validate->add_option("--random-maps", vopts.random_maps, "fixed maps for the stationary check")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::kUsage;
  }

  try {
    apply_overrides(common, transmit, fc);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kUsage;
  }
  settings.solver = solver == "subgradient" ? LambdaSolver::subgradient : LambdaSolver::bisection;

  if (*powermap) return cli::cmd_powermap(common, settings, std::cerr);
  if (*sweep) {
    spec.variable = cli::parse_sweep_variable(variable);
    spec.samples = common.samples;
    spec.seed = common.seed;
    spec.warmup = common.warmup;
    spec.target_pf = common.target_pf;
    return cli::cmd_sweep(common, spec, settings, std::cerr);
  }
  if (*simulate) return cli::cmd_simulate(common, map_path, settings, std::cerr);
  vopts.common = common;
  return cli::cmd_validate(vopts, settings, std::cout);
}
