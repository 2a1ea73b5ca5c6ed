#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ehdet/scenario.hpp"

namespace ehdet {

/// Transmit powers (Watts) and spent energy units for one sensor, indexed by
/// quantized gain level l = 0..L and battery state k = 0..K.
class SensorPowerMap {
 public:
  SensorPowerMap() = default;
  SensorPowerMap(int levels, int capacity_K);

  [[nodiscard]] int levels() const { return levels_; }
  [[nodiscard]] int capacity() const { return capacity_; }

  [[nodiscard]] double power(int level, int k) const { return powers_[index(level, k)]; }
  [[nodiscard]] int units(int level, int k) const { return units_[index(level, k)]; }
  void set(int level, int k, double power, int units);

  [[nodiscard]] std::span<const double> powers() const { return powers_; }
  [[nodiscard]] std::span<const int> units() const { return units_; }

  /// Checks causality, the zero level-0 row, and units <= k.
  void validate(const NetworkParams& net) const;

  bool operator==(const SensorPowerMap&) const = default;

 private:
  [[nodiscard]] std::size_t index(int level, int k) const;

  int levels_ = 0;
  int capacity_ = 0;
  std::vector<double> powers_;
  std::vector<int> units_;
};

struct PowerMap {
  std::vector<SensorPowerMap> sensors;

  /// All-zero map shaped for the scenario.
  static PowerMap zeros(const Scenario& scenario);

  void validate(const Scenario& scenario) const;
  bool operator==(const PowerMap&) const = default;
};

/// Probability of each battery state 0..K for one sensor.
struct BatteryDistribution {
  std::vector<double> psi;

  static BatteryDistribution full(int capacity_K);
  static BatteryDistribution point_mass(int capacity_K, int state);

  [[nodiscard]] int capacity() const { return static_cast<int>(psi.size()) - 1; }
  [[nodiscard]] double sum() const;
  /// Throws std::domain_error unless every entry is in [0,1] and the total is 1 within tol.
  void validate(double tol = 1e-9) const;

  bool operator==(const BatteryDistribution&) const = default;
};

double total_variation(const BatteryDistribution& a, const BatteryDistribution& b);
double sup_norm_diff(const BatteryDistribution& a, const BatteryDistribution& b);

/// Monte Carlo estimate of fusion-center performance. Raw counts are kept so
/// that reports from independent replications can be merged.
struct MonteCarloReport {
  double pd_fc = 0.0;
  double pf_fc = 0.0;
  double ci_pd = 0.0;  // 95% normal-approximation binomial half-widths
  double ci_pf = 0.0;
  double tau_fc = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;

  std::uint64_t h0_slots = 0;
  std::uint64_t h0_alarms = 0;
  std::uint64_t h1_slots = 0;
  std::uint64_t h1_detections = 0;

  std::vector<std::vector<std::uint64_t>> occupancy;  // [sensor][state] counts
  std::vector<BatteryDistribution> empirical_psi;

  /// Recomputes rates, half-widths and normalized occupancy from the counts.
  void finalize();

  bool operator==(const MonteCarloReport&) const = default;
};

/// Sums the counts of two reports over the same scenario shape.
MonteCarloReport merge_reports(const MonteCarloReport& a, const MonteCarloReport& b);

double binomial_half_width(std::uint64_t successes, std::uint64_t trials, double z = 1.959963984540054);

}  // namespace ehdet
