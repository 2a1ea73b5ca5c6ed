#pragma once

// Markov model of a sensor battery: harvested-energy units, gain-level
// probabilities, the one-slot transition of the state distribution, and its
// steady state.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ehdet/scenario.hpp"
#include "ehdet/types.hpp"

namespace ehdet {

/// pmf of the harvested units beta = ceil(E / e_u), E ~ Exp(mean gamma_e),
/// over 0..K with the tail beyond K folded into K.
struct ArrivalUnitPmf {
  std::vector<double> pmf;

  [[nodiscard]] int capacity() const { return static_cast<int>(pmf.size()) - 1; }
};

ArrivalUnitPmf arrival_unit_pmf(double gamma_e, double e_u, int capacity_K);

/// pi_l = P(mu_l <= g < mu_{l+1}) for exponential g with mean gamma_g.
struct GainLevelProbs {
  std::vector<double> pi;
};

GainLevelProbs gain_level_probs(double gamma_g, std::span<const double> thresholds);

/// Probability that a slot takes the energy-spending branch of the chain.
double transmit_probability(TransmitProbModel model, double pi0, double p_f, double p_d);

/// Everything about one sensor's chain except the spending map.
struct ChainKernel {
  GainLevelProbs levels;
  ArrivalUnitPmf arrivals;
  double transmit_prob = 0.5;
};

ChainKernel make_chain_kernel(const SensorParams& sensor, const NetworkParams& net);
std::vector<ChainKernel> make_chain_kernels(const Scenario& scenario);

/// One slot of the battery-state recursion under the unit map `alpha`.
BatteryDistribution battery_transition(const BatteryDistribution& psi, const SensorPowerMap& alpha,
                                       const GainLevelProbs& levels, const ArrivalUnitPmf& arrivals,
                                       double transmit_prob);

inline BatteryDistribution battery_transition(const BatteryDistribution& psi, const SensorPowerMap& alpha,
                                              const ChainKernel& kernel) {
  return battery_transition(psi, alpha, kernel.levels, kernel.arrivals, kernel.transmit_prob);
}

/// Row-stochastic (K+1)x(K+1) matrix: at(k, j) = P(b' = j | b = k).
struct TransitionMatrix {
  int size = 0;
  std::vector<double> data;

  [[nodiscard]] double at(int from, int to) const { return data[static_cast<std::size_t>(from) * size + to]; }
  double& at(int from, int to) { return data[static_cast<std::size_t>(from) * size + to]; }
};

TransitionMatrix transition_matrix(const SensorPowerMap& alpha, const ChainKernel& kernel);

struct StationaryResult {
  BatteryDistribution psi;
  bool used_power_iteration = false;  // linear system was singular (reducible chain)
};

/// Stationary distribution of the fixed-alpha chain by a direct linear solve.
/// Falls back to power iteration from a full battery when the chain has more
/// than one closed class.
StationaryResult stationary_oracle(const SensorPowerMap& alpha, const ChainKernel& kernel);

enum class SteadyStateStatus { converged, iteration_cap, oscillation };

std::string_view to_string(SteadyStateStatus s);

struct SteadyStateResult {
  std::vector<BatteryDistribution> psi;
  int iterations = 0;
  double residual = 0.0;  // last max_n max_k |psi^{q+1} - psi^q|
  SteadyStateStatus status = SteadyStateStatus::converged;
};

/// Supplies the unit map to use for the current distributions.
using AlphaUpdate = std::function<PowerMap(std::span<const BatteryDistribution>)>;

/// Alternates alpha = update(psi) and psi <- transition(psi, alpha) starting
/// from full batteries, until consecutive iterates differ by at most eps2 in
/// sup norm for every sensor.
SteadyStateResult steady_state_psi(std::span<const ChainKernel> kernels, const AlphaUpdate& update,
                                   double eps2 = 1e-6, int max_iters = 100000);

}  // namespace ehdet
