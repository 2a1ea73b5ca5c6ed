#include "ehdet/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ehdet {

SensorPowerMap::SensorPowerMap(int levels, int capacity_K)
    : levels_(levels),
      capacity_(capacity_K),
      powers_(static_cast<std::size_t>(levels) * (capacity_K + 1), 0.0),
      units_(static_cast<std::size_t>(levels) * (capacity_K + 1), 0) {
  if (levels < 1 || capacity_K < 0) throw std::invalid_argument("SensorPowerMap: bad shape");
}

std::size_t SensorPowerMap::index(int level, int k) const {
  return static_cast<std::size_t>(level) * (capacity_ + 1) + k;
}

void SensorPowerMap::set(int level, int k, double power, int units) {
  if (level < 0 || level >= levels_ || k < 0 || k > capacity_) {
    throw std::out_of_range("SensorPowerMap::set index out of range");
  }
  powers_[index(level, k)] = power;
  units_[index(level, k)] = units;
}

void SensorPowerMap::validate(const NetworkParams& net) const {
  if (capacity_ != net.capacity_K) throw std::domain_error("power map capacity does not match capacity_K");
  for (int l = 0; l < levels_; ++l) {
    for (int k = 0; k <= capacity_; ++k) {
      const double p = power(l, k);
      const int a = units(l, k);
      if (!(p >= 0.0) || p * net.T_s > k * net.e_u * (1.0 + 1e-12)) {
        throw std::domain_error("power map violates causality at level " + std::to_string(l) + ", state " +
                                std::to_string(k));
      }
      if (a < 0 || a > k) throw std::domain_error("power map units out of range at state " + std::to_string(k));
      if (l == 0 && (p != 0.0 || a != 0)) throw std::domain_error("power map level 0 must be zero");
    }
  }
}

PowerMap PowerMap::zeros(const Scenario& scenario) {
  PowerMap map;
  for (const auto& s : scenario.sensors) map.sensors.emplace_back(s.levels(), scenario.network.capacity_K);
  return map;
}

void PowerMap::validate(const Scenario& scenario) const {
  if (sensors.size() != scenario.sensors.size()) throw std::domain_error("power map sensor count mismatch");
  for (std::size_t n = 0; n < sensors.size(); ++n) {
    if (sensors[n].levels() != scenario.sensors[n].levels()) throw std::domain_error("power map level count mismatch");
    sensors[n].validate(scenario.network);
  }
}

BatteryDistribution BatteryDistribution::full(int capacity_K) { return point_mass(capacity_K, capacity_K); }

BatteryDistribution BatteryDistribution::point_mass(int capacity_K, int state) {
  BatteryDistribution d;
  d.psi.assign(static_cast<std::size_t>(capacity_K) + 1, 0.0);
  d.psi.at(state) = 1.0;
  return d;
}

double BatteryDistribution::sum() const { return std::accumulate(psi.begin(), psi.end(), 0.0); }

void BatteryDistribution::validate(double tol) const {
  for (const double p : psi) {
    if (!(p >= 0.0 && p <= 1.0 + tol)) throw std::domain_error("battery distribution entry outside [0,1]");
  }
  if (std::abs(sum() - 1.0) > tol) throw std::domain_error("battery distribution does not sum to 1");
}

double total_variation(const BatteryDistribution& a, const BatteryDistribution& b) {
  if (a.psi.size() != b.psi.size()) throw std::invalid_argument("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.psi.size(); ++i) s += std::abs(a.psi[i] - b.psi[i]);
  return 0.5 * s;
}

double sup_norm_diff(const BatteryDistribution& a, const BatteryDistribution& b) {
  if (a.psi.size() != b.psi.size()) throw std::invalid_argument("sup_norm_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.psi.size(); ++i) m = std::max(m, std::abs(a.psi[i] - b.psi[i]));
  return m;
}

double binomial_half_width(std::uint64_t successes, std::uint64_t trials, double z) {
  if (trials == 0) return 0.0;
  const double p = static_cast<double>(successes) / static_cast<double>(trials);
  return z * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

void MonteCarloReport::finalize() {
  pd_fc = h1_slots ? static_cast<double>(h1_detections) / static_cast<double>(h1_slots) : 0.0;
  pf_fc = h0_slots ? static_cast<double>(h0_alarms) / static_cast<double>(h0_slots) : 0.0;
  ci_pd = binomial_half_width(h1_detections, h1_slots);
  ci_pf = binomial_half_width(h0_alarms, h0_slots);
  samples = h0_slots + h1_slots;
  empirical_psi.clear();
  for (const auto& counts : occupancy) {
    BatteryDistribution d;
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
    d.psi.reserve(counts.size());
    for (const auto c : counts) d.psi.push_back(total > 0 ? static_cast<double>(c) / total : 0.0);
    empirical_psi.push_back(std::move(d));
  }
}

MonteCarloReport merge_reports(const MonteCarloReport& a, const MonteCarloReport& b) {
  if (a.occupancy.size() != b.occupancy.size()) throw std::invalid_argument("merge_reports: sensor count mismatch");
  MonteCarloReport out = a;
  out.h0_slots += b.h0_slots;
  out.h0_alarms += b.h0_alarms;
  out.h1_slots += b.h1_slots;
  out.h1_detections += b.h1_detections;
  for (std::size_t n = 0; n < out.occupancy.size(); ++n) {
    if (out.occupancy[n].size() != b.occupancy[n].size()) {
      throw std::invalid_argument("merge_reports: state count mismatch");
    }
    for (std::size_t k = 0; k < out.occupancy[n].size(); ++k) out.occupancy[n][k] += b.occupancy[n][k];
  }
  if (a.tau_fc != b.tau_fc) out.tau_fc = std::nan("");
  out.seed = std::min(a.seed, b.seed);
  out.finalize();
  return out;
}

}  // namespace ehdet
