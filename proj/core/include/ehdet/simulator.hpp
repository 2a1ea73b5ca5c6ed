#pragma once

// Slot-level Monte Carlo replay of the network: channel draws, local
// decisions, battery dynamics, transmission over orthogonal AWGN channels,
// and likelihood-ratio fusion at the FC.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ehdet/scenario.hpp"
#include "ehdet/types.hpp"

namespace ehdet {

enum class Hypothesis : std::uint8_t { h0 = 0, h1 = 1 };

/// Independent per-sensor streams and one hypothesis stream, all derived
/// from a master seed. Adding a sensor leaves the other streams unchanged.
struct RngStreams {
  std::mt19937_64 hypothesis;
  std::vector<std::mt19937_64> sensors;

  RngStreams(std::uint64_t master_seed, std::size_t n_sensors);
};

struct EpisodeState {
  std::vector<int> battery;  // units, 0..K
  std::uint64_t slot = 0;

  static EpisodeState full(const Scenario& scenario);
};

/// Per-sensor candidate amplitudes at the FC with their weights. The genie
/// FC has one component (the actual amplitude); the map-marginal FC has one
/// per battery state, weighted by the steady-state distribution.
struct SensorFusionTerm {
  std::vector<double> weights;
  std::vector<double> amplitudes;
  double p_f = 0.0;
  double p_d = 0.0;
  double sigma_w2 = 1.0;
};

struct FusionModel {
  std::vector<SensorFusionTerm> sensors;
};

/// Log-likelihood ratio log f(y|H1) / f(y|H0), evaluated with log-sum-exp.
double llr(std::span<const double> y, const FusionModel& fusion);

struct SlotRecord {
  Hypothesis truth = Hypothesis::h0;
  std::vector<double> y;
  std::vector<double> gain;
  std::vector<int> level;
  std::vector<int> decision;
  std::vector<int> battery_before;
  std::vector<int> spent_units;
  std::vector<double> amplitude;  // sqrt(g p) a sensor would use for u = 1
};

/// Advances every sensor by one slot under the given true hypothesis.
SlotRecord step_episode(EpisodeState& state, const Scenario& scenario, const PowerMap& map,
                        Hypothesis truth, RngStreams& rng);

/// FC view of a slot: genie amplitudes from the record, or the battery
/// marginal of the map entries at each sensor's gain level.
FusionModel fusion_for_slot(const SlotRecord& slot, const Scenario& scenario, const PowerMap& map,
                            std::span<const BatteryDistribution> psi);

/// NP threshold with a randomized tie: decide H1 when LLR > tau, and with
/// probability tie_prob when LLR == tau.
struct Calibration {
  double tau = 0.0;
  double tie_prob = 0.0;
  double achieved_pf = 0.0;
  std::uint64_t samples = 0;
};

struct SimulationOptions {
  std::uint64_t samples = 100000;
  std::uint64_t seed = 42;
  std::uint64_t warmup = 0;  // 0 means 10 K slots
  /// Steady-state battery distributions, needed by FcKnowledge::map_marginal.
  std::vector<BatteryDistribution> psi;

  [[nodiscard]] std::uint64_t effective_warmup(const Scenario& scenario) const;
};

/// Sets tau to the (1 - target_pf) quantile of the H0 LLR over
/// `options.samples` H0 slots drawn after warm-up.
Calibration calibrate_threshold(const Scenario& scenario, const PowerMap& map, double target_pf,
                                const SimulationOptions& options);

MonteCarloReport run_monte_carlo(const Scenario& scenario, const PowerMap& map, const Calibration& threshold,
                                 const SimulationOptions& options);

}  // namespace ehdet
