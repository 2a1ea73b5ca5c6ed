#include "ehdet/oracles.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "ehdet/detection.hpp"
#include "ehdet/optimizer.hpp"

namespace ehdet::oracles {

double enumeration_size(const SensorParams& sensor, int capacity_K) {
  double per_level = 1.0;
  for (int k = 1; k <= capacity_K; ++k) per_level *= k + 1;
  return std::pow(per_level, sensor.levels() - 1);
}

std::optional<ExhaustiveResult> exhaustive_optimum(const Scenario& scenario, double max_candidates,
                                                   double budget_tol) {
  if (scenario.sensors.size() != 1) return std::nullopt;
  const auto& sensor = scenario.sensors.front();
  const auto& net = scenario.network;
  const int K = net.capacity_K;
  const int levels = sensor.levels();
  if (enumeration_size(sensor, K) > max_candidates) return std::nullopt;

  const auto kernel = make_chain_kernel(sensor, net);
  const auto coeffs = roc_coefficients(sensor.p_f, sensor.p_d);
  const double unit_power = net.e_u / net.T_s;

  // Free entries (l >= 1, k >= 1) in odometer order; alpha capped by k and
  // by the outage cap.
  struct Slot {
    int level, k, max_units;
  };
  std::vector<Slot> slots;
  for (int l = 1; l < levels; ++l) {
    for (int k = 1; k <= K; ++k) {
      const double phi = outage_cap(k, sensor, net);
      int cap = k;
      while (cap > 0 && cap * unit_power > phi * (1.0 + 1e-12)) --cap;
      slots.push_back({l, k, cap});
    }
  }

  std::vector<int> digits(slots.size(), 0);
  SensorPowerMap map(levels, K);
  ExhaustiveResult best;
  bool have_best = false;
  while (true) {
    for (std::size_t i = 0; i < slots.size(); ++i) {
      map.set(slots[i].level, slots[i].k, digits[i] * unit_power, digits[i]);
    }
    ++best.candidates;
    const auto psi = stationary_oracle(map, kernel).psi;
    double power = 0.0;
    double j = 0.0;
    for (int l = 0; l < levels; ++l) {
      double prow = 0.0;
      double jrow = 0.0;
      for (int k = 0; k <= K; ++k) {
        prow += map.power(l, k) * psi.psi[k];
        jrow += j_sensor(sensor.quantized_gain(l), map.power(l, k), coeffs, sensor.sigma_w2) * psi.psi[k];
      }
      power += prow * kernel.levels.pi[l];
      j += jrow * kernel.levels.pi[l];
    }
    if (power <= net.p_tot * (1.0 + budget_tol)) {
      ++best.feasible;
      if (!have_best || j > best.objective_j) {
        have_best = true;
        best.best = map;
        best.psi = psi;
        best.objective_j = j;
        best.expected_power = power;
      }
    }

    std::size_t i = 0;
    while (i < digits.size() && digits[i] == slots[i].max_units) digits[i++] = 0;
    if (i == digits.size()) break;
    ++digits[i];
  }
  return best;
}

MomentCheck moment_match_monte_carlo(double p_f, double p_d, double power, double gain, double sigma_w2,
                                     std::uint64_t draws, std::uint64_t seed) {
  if (draws < 2) throw std::invalid_argument("moment_match_monte_carlo needs at least two draws");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(sigma_w2));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double amp = std::sqrt(power * gain);
  const auto expected = moment_match(p_f, p_d, power, gain, sigma_w2);

  MomentCheck out;
  auto sample = [&](double q, double true_mean, double true_var, double& mean, double& var) {
    double s1 = 0.0, s2 = 0.0, s4 = 0.0;
    std::vector<double> ys(draws);
    for (auto& y : ys) {
      y = (unif(rng) < q ? amp : 0.0) + noise(rng);
      s1 += y;
    }
    mean = s1 / static_cast<double>(draws);
    for (const double y : ys) {
      const double d = y - mean;
      s2 += d * d;
      s4 += d * d * d * d;
    }
    var = s2 / static_cast<double>(draws - 1);
    const double m4 = s4 / static_cast<double>(draws);
    const double se_mean = std::sqrt(var / static_cast<double>(draws));
    const double se_var = std::sqrt(std::max(m4 - var * var, 1e-300) / static_cast<double>(draws));
    out.max_z = std::max({out.max_z, std::abs(mean - true_mean) / se_mean, std::abs(var - true_var) / se_var});
  };
  sample(p_f, expected.m0, expected.s0, out.mean0, out.var0);
  sample(p_d, expected.m1, expected.s1, out.mean1, out.var1);
  return out;
}

}  // namespace ehdet::oracles
