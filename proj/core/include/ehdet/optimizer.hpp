#pragma once

// Constrained J-divergence maximization over the transmit power map.
//
// For fixed battery distributions the problem separates per map entry once
// the multiplier lambda of the average-power budget is fixed; each entry is
// the stationarity root clamped by causality and the battery outage cap.
// lambda is then chosen by complementary slackness, and the battery
// distributions are updated to the steady state of the resulting unit map.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ehdet/battery.hpp"
#include "ehdet/detection.hpp"
#include "ehdet/scenario.hpp"
#include "ehdet/types.hpp"

namespace ehdet {

enum class LambdaSolver { bisection, subgradient };

struct OptimizerSettings {
  double eps1_rel = 1e-6;  // slackness tolerance as a fraction of p_tot
  double eps2 = 1e-6;      // steady-state tolerance
  double lambda_step = 0.0;  // subgradient step; 0 means 0.1 / p_tot
  int max_inner_iters = 10000;
  int max_outer_iters = 1000;
  double root_tol = 1e-9;  // relative bracket width for the stationarity root
  LambdaSolver solver = LambdaSolver::bisection;

  [[nodiscard]] double eps1(double p_tot) const;
  [[nodiscard]] double step(double p_tot) const;
  void validate() const;
};

/// Largest power satisfying the battery outage constraint at state k, in
/// Watts; +inf when the constraint is vacuous (Pi_1 - 1 + zeta <= 0).
double outage_cap(int k, const SensorParams& sensor, const NetworkParams& net);

/// Left side of the stationarity condition, i.e. dJ/dp at power p:
///   (a-b) s mu / (s + b mu p)^2 + (c-d) s mu / (s + d mu p)^2.
double stationarity_lhs(double p, double mu, const RocCoefficients& coeffs, double sigma_w2);

struct RootResult {
  double p = 0.0;        // negative when no non-negative root exists
  bool warning = false;  // derivative not monotone; smallest root by scan
};

/// Power p' >= 0 at which dJ/dp equals lambda. Returns -1 when dJ/dp(0) is
/// already below lambda, 0 for mu = 0, +inf for lambda = 0 with a positive
/// slope everywhere.
RootResult stationarity_root(double lambda, double mu, const RocCoefficients& coeffs, double sigma_w2,
                             double root_tol = 1e-9);

double clamp_power(double p_prime, int k, double phi, const NetworkParams& net);
int units_from_power(double p_star, int k, const NetworkParams& net);

enum class ActiveClamp : std::uint8_t { causality, outage, stationarity, flat_level };

std::string_view to_string(ActiveClamp c);

/// Map entry values for a given lambda, independent of the battery
/// distributions.
struct MapEntries {
  PowerMap map;
  std::vector<std::vector<ActiveClamp>> active;  // [sensor][level * (K+1) + k]
  bool root_warning = false;
};

MapEntries map_for_lambda(double lambda, const Scenario& scenario, const OptimizerSettings& settings);

/// sum_n sum_l sum_k p_{n,l,k} pi_{n,l} psi_{n,k}.
double expected_power(const PowerMap& map, std::span<const ChainKernel> kernels,
                      std::span<const BatteryDistribution> psi);

/// sum_n sum_l sum_k J_n(mu_l, p_{n,l,k}) pi_{n,l} psi_{n,k}. With
/// `use_units`, the power of each entry is alpha e_u / T_s instead.
double network_j(const PowerMap& map, const Scenario& scenario, std::span<const ChainKernel> kernels,
                 std::span<const BatteryDistribution> psi, bool use_units = false);

/// Lambda at which dJ/dp(0) falls below lambda for every entry, so that the
/// map is identically zero.
double lambda_upper_bound(const Scenario& scenario);

struct LambdaSearchResult {
  double lambda = 0.0;
  PowerMap map;
  std::vector<std::vector<ActiveClamp>> active;
  double expected_power = 0.0;
  int iterations = 0;
  bool converged = true;
  bool budget_floor = false;  // budget unreachable even with a zero map
  bool root_warning = false;
};

LambdaSearchResult lambda_search(std::span<const BatteryDistribution> psi, const Scenario& scenario,
                                 const OptimizerSettings& settings);

struct KktReport {
  int interior_entries = 0;
  double max_stationarity_residual = 0.0;  // max |dJ/dp(p*) - lambda| over interior entries
  double slackness = 0.0;                  // lambda (E[P] - p_tot)
  int clamp_violations = 0;                // entries breaking causality, outage, or sign
  int outage_after_rounding = 0;           // alpha e_u / T_s above the outage cap
};

KktReport kkt_report(const LambdaSearchResult& solution, const Scenario& scenario,
                     const OptimizerSettings& settings);

enum class OptimizeStatus { converged, iteration_cap, oscillation };

std::string_view to_string(OptimizeStatus s);

struct OptimizationOutcome {
  PowerMap power_map;
  std::vector<BatteryDistribution> psi_star;
  double lambda_star = 0.0;
  double objective_j = 0.0;     // evaluated at the continuous powers p*
  double realized_j = 0.0;      // evaluated at the rounded powers alpha e_u / T_s
  double expected_power = 0.0;  // continuous powers, as in the budget constraint
  KktReport kkt;
  std::vector<std::vector<ActiveClamp>> active;
  int outer_iterations = 0;
  double outer_residual = 0.0;
  OptimizeStatus status = OptimizeStatus::converged;
  bool lambda_converged = true;
  bool root_warning = false;
  std::vector<bool> convex_region;

  [[nodiscard]] bool ok() const { return status == OptimizeStatus::converged && lambda_converged; }
};

/// Alternates the lambda search on the current battery distributions with a
/// battery-chain update on the resulting unit map, starting from full
/// batteries, then re-solves the map on the converged distributions.
OptimizationOutcome optimize_power_map(const Scenario& scenario, const OptimizerSettings& settings = {});

/// Expected power of the converged solution with the budget removed; the
/// smallest p_tot at which lambda* = 0.
double saturation_budget(const Scenario& scenario, const OptimizerSettings& settings = {});

}  // namespace ehdet
