#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "ehdet/battery.hpp"

using namespace ehdet;

namespace {

double integrate_exponential(double mean, double lo, double hi) {
  // Midpoint rule on the density; hi may be large but finite.
  const int n = 200000;
  const double h = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::exp(-(lo + (i + 0.5) * h) / mean) / mean;
  return acc * h;
}

SensorPowerMap unit_map(int levels, int K, const std::function<int(int, int)>& units, double e_u = 0.1,
                        double T_s = 0.1) {
  SensorPowerMap m(levels, K);
  for (int l = 0; l < levels; ++l)
    for (int k = 0; k <= K; ++k) m.set(l, k, units(l, k) * e_u / T_s, units(l, k));
  return m;
}

ArrivalUnitPmf degenerate_arrivals(int K, int beta) {
  ArrivalUnitPmf a;
  a.pmf.assign(K + 1, 0.0);
  a.pmf[beta] = 1.0;
  return a;
}

GainLevelProbs one_level() { return GainLevelProbs{{1.0}}; }

std::vector<double> cdf(const BatteryDistribution& p) {
  std::vector<double> out;
  double acc = 0.0;
  for (double x : p.psi) out.push_back(acc += x);
  return out;
}

}  // namespace

TEST_CASE("gain level probabilities") {
  const std::vector<double> mu{0, 0.1, 0.3, 0.6, 1.2, kInfinity};
  const auto p = gain_level_probs(1.1, mu);
  REQUIRE(p.pi.size() == 5);
  CHECK(p.pi[0] == doctest::Approx(integrate_exponential(1.1, 0.0, 0.1)).epsilon(1e-10));
  CHECK(p.pi[0] == doctest::Approx(0.08690).epsilon(1e-4));
  CHECK(p.pi[2] == doctest::Approx(integrate_exponential(1.1, 0.3, 0.6)).epsilon(1e-10));
  CHECK(p.pi[4] == doctest::Approx(integrate_exponential(1.1, 1.2, 60.0)).epsilon(1e-9));
  CHECK(p.pi[4] == doctest::Approx(0.33591).epsilon(1e-4));
  double total = 0.0;
  for (double x : p.pi) total += x;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));

  // Narrow intervals far in the tail stay accurate (no cancellation).
  const auto tail = gain_level_probs(0.5, std::vector<double>{0, 30, 30 + 1e-9, kInfinity});
  CHECK(tail.pi[1] == doctest::Approx(std::exp(-60.0) * 2e-9).epsilon(1e-6));
}

TEST_CASE("arrival unit pmf") {
  const auto a = arrival_unit_pmf(0.1, 0.1, 20);
  CHECK(a.pmf[0] == 0.0);
  CHECK(a.pmf[1] == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
  CHECK(a.pmf[1] == doctest::Approx(0.63212).epsilon(1e-5));

  // Histogram of ceil(E / e_u) with the tail folded into K.
  std::mt19937_64 g(1);
  std::exponential_distribution<double> e(1.0 / 0.1);
  std::vector<double> hist(21, 0.0);
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) hist[std::min(20, static_cast<int>(std::ceil(e(g) / 0.1)))] += 1.0;
  for (int j = 0; j <= 20; ++j) {
    const double p = a.pmf[j];
    const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / draws);
    CHECK(std::abs(hist[j] / draws - p) < 5 * se + 5.0 / draws);
  }

  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto b = arrival_unit_pmf(0.01 + 5 * u(g), 0.01 + u(g), 1 + static_cast<int>(150 * u(g)));
    double total = 0.0;
    for (double x : b.pmf) {
      CHECK(x >= 0.0);
      total += x;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.pmf[0] == 0.0);
  }
  CHECK(arrival_unit_pmf(1.0, 0.1, 1).pmf == std::vector<double>{0.0, 1.0});
  CHECK_THROWS(arrival_unit_pmf(0.0, 0.1, 5));
}

TEST_CASE("transition: saturating arrivals and idle maps") {
  const int K = 6;
  const auto zero = unit_map(1, K, [](int, int) { return 0; });
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BatteryDistribution start;
  for (int k = 0; k <= K; ++k) start.psi.push_back(u(g));
  double s = start.sum();
  for (auto& x : start.psi) x /= s;

  const auto next = battery_transition(start, zero, one_level(), degenerate_arrivals(K, K), 0.7);
  CHECK(total_variation(next, BatteryDistribution::point_mass(K, K)) <= 1e-15);

  // Never spending: P(b >= m) grows every step and the chain absorbs at K.
  auto psi = BatteryDistribution::point_mass(K, 0);
  const auto arrivals = arrival_unit_pmf(0.05, 0.1, K);
  for (int step = 0; step < 200; ++step) {
    const auto nxt = battery_transition(psi, zero, one_level(), arrivals, 0.0);
    const auto c0 = cdf(psi);
    const auto c1 = cdf(nxt);
    for (int m = 0; m <= K; ++m) CHECK(c1[m] <= c0[m] + 1e-15);
    psi = nxt;
  }
  CHECK(psi.psi[K] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("transition: hand-enumerated K = 3 toy") {
  // beta = 1 always, alpha_k = k, Pi_0 = Pi_1 = 1/2. From k: idle -> min(k+1, 3), spend -> 1.
  const int K = 3;
  const auto alpha = unit_map(1, K, [](int, int k) { return k; });
  const auto arrivals = degenerate_arrivals(K, 1);
  const double P[4][4] = {{0, 1, 0, 0}, {0, .5, .5, 0}, {0, .5, 0, .5}, {0, .5, 0, .5}};

  const auto next = battery_transition(BatteryDistribution::full(K), alpha, one_level(), arrivals, 0.5);
  CHECK(next.psi == std::vector<double>{0, 0.5, 0, 0.5});

  const ChainKernel kernel{one_level(), arrivals, 0.5};
  const auto tm = transition_matrix(alpha, kernel);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(tm.at(i, j) == P[i][j]);

  // Stationary by hand: (0, 1/2, 1/4, 1/4).
  const auto st = stationary_oracle(alpha, kernel);
  CHECK_FALSE(st.used_power_iteration);
  const BatteryDistribution expected{{0.0, 0.5, 0.25, 0.25}};
  CHECK(total_variation(st.psi, expected) <= 1e-14);

  auto psi = BatteryDistribution::full(K);
  for (int i = 0; i < 200; ++i) psi = battery_transition(psi, alpha, kernel);
  CHECK(total_variation(psi, st.psi) <= 1e-10);
}

TEST_CASE("transition agrees with the explicit matrix on random chains") {
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 1 + trial % 12;
    const int levels = 1 + trial % 4;
    const auto alpha = unit_map(levels, K, [&](int l, int k) {
      return l == 0 ? 0 : std::uniform_int_distribution<int>(0, k)(g);
    });
    std::vector<double> mu{0.0};
    for (int l = 1; l < levels; ++l) mu.push_back(mu.back() + 0.1 + u(g));
    mu.push_back(kInfinity);
    const ChainKernel kernel{gain_level_probs(0.5 + u(g), mu), arrival_unit_pmf(0.05 + u(g), 0.1, K), u(g)};
    const auto tm = transition_matrix(alpha, kernel);
    for (int i = 0; i <= K; ++i) {
      double row = 0.0;
      for (int j = 0; j <= K; ++j) row += tm.at(i, j);
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
    BatteryDistribution psi;
    for (int k = 0; k <= K; ++k) psi.psi.push_back(u(g));
    const double s = psi.sum();
    for (auto& x : psi.psi) x /= s;
    const auto next = battery_transition(psi, alpha, kernel);
    CHECK_NOTHROW(next.validate(1e-9));
    for (int j = 0; j <= K; ++j) {
      double expect = 0.0;
      for (int i = 0; i <= K; ++i) expect += psi.psi[i] * tm.at(i, j);
      CHECK(next.psi[j] == doctest::Approx(expect).epsilon(1e-12).scale(1));
    }
  }
}

TEST_CASE("stationary oracle edge cases") {
  const int K = 5;
  const auto zero = unit_map(1, K, [](int, int) { return 0; });
  const ChainKernel charging{one_level(), arrival_unit_pmf(0.3, 0.1, K), 0.0};
  CHECK(total_variation(stationary_oracle(zero, charging).psi, BatteryDistribution::point_mass(K, K)) <= 1e-12);

  // beta = 1, alpha = 1, always spending: every state is closed on itself.
  const auto one = unit_map(1, K, [](int, int) { return 1; });
  const ChainKernel frozen{one_level(), degenerate_arrivals(K, 1), 1.0};
  const auto st = stationary_oracle(one, frozen);
  CHECK(st.used_power_iteration);
  CHECK(st.psi == BatteryDistribution::point_mass(K, K));
}

TEST_CASE("steady state under a fixed map equals the stationary distribution") {
  std::mt19937_64 g(8);
  const int K = 5;
  const std::vector<double> mu{0, 0.3, 1.2, kInfinity};
  const ChainKernel kernel{gain_level_probs(1.1, mu), arrival_unit_pmf(0.3, 0.1, K), 0.5};
  for (int trial = 0; trial < 20; ++trial) {
    PowerMap map{{unit_map(3, K, [&](int l, int k) { return l == 0 ? 0 : std::uniform_int_distribution<int>(0, k)(g); })}};
    const std::vector<ChainKernel> kernels{kernel};
    const auto ss = steady_state_psi(kernels, [&](std::span<const BatteryDistribution>) { return map; }, 1e-13);
    REQUIRE(ss.status == SteadyStateStatus::converged);
    CHECK(total_variation(ss.psi[0], stationary_oracle(map.sensors[0], kernel).psi) <= 1e-8);
  }
}

TEST_CASE("steady state with an idle map fills the battery") {
  const int K = 8;
  const std::vector<ChainKernel> kernels{ChainKernel{one_level(), arrival_unit_pmf(0.2, 0.1, K), 0.5}};
  const PowerMap map{{unit_map(1, K, [](int, int) { return 0; })}};
  const auto ss = steady_state_psi(kernels, [&](std::span<const BatteryDistribution>) { return map; });
  CHECK(ss.status == SteadyStateStatus::converged);
  CHECK(ss.psi[0] == BatteryDistribution::point_mass(K, K));
  CHECK(ss.iterations <= K + 1);
}

TEST_CASE("larger harvest rate dominates stochastically at steady state") {
  const int K = 5;
  const std::vector<double> mu{0, 0.3, 1.2, kInfinity};
  const PowerMap map{{unit_map(3, K, [](int l, int k) { return l == 0 ? 0 : std::min(k, 2 * l); })}};
  auto steady = [&](double gamma_e) {
    const std::vector<ChainKernel> kernels{ChainKernel{gain_level_probs(1.1, mu), arrival_unit_pmf(gamma_e, 0.1, K), 0.5}};
    return steady_state_psi(kernels, [&](std::span<const BatteryDistribution>) { return map; }, 1e-13).psi[0];
  };
  const auto low = cdf(steady(0.02));
  const auto high = cdf(steady(0.2));
  double gap = 0.0;
  for (int k = 0; k <= K; ++k) {
    CHECK(high[k] <= low[k] + 1e-12);
    gap += low[k] - high[k];
  }
  CHECK(gap > 1e-3);
}

TEST_CASE("steady state reports oscillation and the iteration cap") {
  const int K = 4;
  const std::vector<ChainKernel> kernels{ChainKernel{one_level(), degenerate_arrivals(K, 1), 1.0}};
  // Alternating maps: spend everything, then nothing.
  int calls = 0;
  const PowerMap drain{{unit_map(1, K, [](int, int k) { return k; })}};
  const PowerMap idle{{unit_map(1, K, [](int, int) { return 0; })}};
  const auto ss = steady_state_psi(kernels, [&](std::span<const BatteryDistribution>) {
    return (calls++ % 2) ? idle : drain;
  });
  CHECK(ss.status == SteadyStateStatus::oscillation);
  CHECK(ss.residual > 1e-6);

  // Rare full drains: the chain leaves the full state slowly.
  const std::vector<ChainKernel> slow{ChainKernel{one_level(), arrival_unit_pmf(0.01, 0.1, 50), 0.01}};
  const PowerMap drain50{{unit_map(1, 50, [](int, int k) { return k; })}};
  const auto capped = steady_state_psi(slow, [&](std::span<const BatteryDistribution>) { return drain50; }, 1e-6, 3);
  CHECK(capped.status == SteadyStateStatus::iteration_cap);
  CHECK(capped.iterations == 3);

  CHECK_THROWS(steady_state_psi(kernels, [&](std::span<const BatteryDistribution>) { return idle; }, 0.0));
}

TEST_CASE("transmit probability models") {
  CHECK(transmit_probability(TransmitProbModel::prior, 0.3, 0.2, 0.9) == doctest::Approx(0.7));
  CHECK(transmit_probability(TransmitProbModel::decision, 0.3, 0.2, 0.9) == doctest::Approx(0.3 * 0.2 + 0.7 * 0.9));
}
