#pragma once

// Subcommand implementations behind the ehdet executable. Each command
// returns an exit code and writes human-readable progress to `log`.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ehdet/csv.hpp"
#include "ehdet/optimizer.hpp"
#include "ehdet/scenario.hpp"
#include "ehdet/simulator.hpp"

namespace ehdet::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kValidationFailure = 2,
  kNonConvergence = 3,
  kIoError = 4,
};

struct CommonOptions {
  std::filesystem::path scenario;
  std::filesystem::path out;
  std::uint64_t seed = 42;
  std::uint64_t samples = 100000;
  std::uint64_t warmup = 0;
  std::optional<TransmitProbModel> transmit_prob_model;
  std::optional<FcKnowledge> fc_knowledge;
  double target_pf = 0.1;
};

/// Loads the scenario and applies the command-line overrides.
Scenario resolve_scenario(const CommonOptions& options);

/// Calibration and evaluation use separate streams derived from `seed`, so
/// the threshold is always tested on held-out slots.
std::uint64_t calibration_seed(std::uint64_t seed);
std::uint64_t evaluation_seed(std::uint64_t seed);

struct Evaluation {
  Calibration calibration;
  MonteCarloReport report;
};

Evaluation evaluate_map(const Scenario& scenario, const PowerMap& map, std::span<const BatteryDistribution> psi,
                        std::uint64_t samples, std::uint64_t seed, std::uint64_t warmup, double target_pf = 0.1);

enum class SweepVariable { p_tot, gamma_e, capacity_K };

SweepVariable parse_sweep_variable(std::string_view s);
std::string_view to_string(SweepVariable v);

struct SweepSpec {
  SweepVariable variable = SweepVariable::p_tot;
  std::vector<double> values;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 42;
  std::uint64_t warmup = 0;
  double target_pf = 0.1;

  void validate() const;
};

Scenario apply_sweep_value(Scenario scenario, SweepVariable variable, double value);

struct SweepPoint {
  csv::SweepRow row;
  OptimizationOutcome outcome;
};

/// One optimize + calibrate + evaluate run per value; point i uses seed + i.
/// Stops at the first failing point and marks the table incomplete.
struct SweepResult {
  csv::SweepTable table;
  std::vector<SweepPoint> points;
  std::string error;
  int exit_code = kOk;
};

SweepResult run_sweep(const Scenario& base, const SweepSpec& spec, const OptimizerSettings& settings = {},
                      const std::function<void(const SweepPoint&)>& on_point = {});

struct ValidateOptions {
  CommonOptions common;
  std::uint64_t moment_draws = 1000000;
  int random_maps = 20;
};

int cmd_powermap(const CommonOptions& options, const OptimizerSettings& settings, std::ostream& log);
int cmd_sweep(const CommonOptions& options, const SweepSpec& spec, const OptimizerSettings& settings,
              std::ostream& log);
/// Replays `map_path` (or the optimized map if empty) and writes report.csv
/// and occupancy.csv.
int cmd_simulate(const CommonOptions& options, const std::filesystem::path& map_path,
                 const OptimizerSettings& settings, std::ostream& log);
int cmd_validate(const ValidateOptions& options, const OptimizerSettings& settings, std::ostream& log);

}  // namespace ehdet::cli
