#pragma once

// Independent reference computations used by the validate command and the
// test suites. None of them go through the optimizer's lambda search or the
// iterative steady-state loop.

#include <cstdint>
#include <optional>

#include "ehdet/battery.hpp"
#include "ehdet/scenario.hpp"
#include "ehdet/types.hpp"

namespace ehdet::oracles {

/// Number of integer unit maps with alpha_{l,0} = 0, alpha_{0,k} = 0 and
/// alpha_{l,k} in 0..k for l >= 1: ((K+1)!)^L per sensor.
double enumeration_size(const SensorParams& sensor, int capacity_K);

struct ExhaustiveResult {
  SensorPowerMap best;
  BatteryDistribution psi;
  double objective_j = 0.0;
  double expected_power = 0.0;
  std::uint64_t candidates = 0;
  std::uint64_t feasible = 0;
};

/// Best feasible integer map for a single-sensor scenario. Every candidate is
/// scored with the exact stationary distribution of its own chain; feasible
/// means expected power <= p_tot (with a relative slack `budget_tol`) and
/// every power within the outage cap. Returns nullopt when the enumeration
/// exceeds `max_candidates` or the scenario has more than one sensor.
std::optional<ExhaustiveResult> exhaustive_optimum(const Scenario& scenario,
                                                   double max_candidates = 2e6,
                                                   double budget_tol = 1e-9);

struct MomentCheck {
  double mean0 = 0.0, var0 = 0.0, mean1 = 0.0, var1 = 0.0;
  double max_z = 0.0;  // largest |empirical - closed form| / standard error
};

/// Samples the received-signal mixtures and compares empirical moments with
/// the moment-matched closed forms.
MomentCheck moment_match_monte_carlo(double p_f, double p_d, double power, double gain, double sigma_w2,
                                     std::uint64_t draws, std::uint64_t seed);

}  // namespace ehdet::oracles
