#include "ehdet/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ehdet {

namespace {

bool monotone_regime(const RocCoefficients& c) { return c.a >= c.b && c.c >= c.d; }

// Log-spaced scan points covering the powers where dJ/dp changes: from well
// below sigma^2 / (mu max(b, d)) to far above it.
std::vector<double> scan_grid(double mu, const RocCoefficients& c, double sigma_w2) {
  const double scale = sigma_w2 / (mu * std::max(std::min(c.b, c.d), 1e-300));
  std::vector<double> grid{0.0};
  for (int i = -60; i <= 120; ++i) grid.push_back(scale * std::pow(10.0, i / 10.0));
  return grid;
}

double bisect_decreasing_crossing(double lo, double hi, double lambda, double mu, const RocCoefficients& c,
                                  double sigma_w2, double root_tol) {
  // f(lo) > 0 >= f(hi), f = lhs - lambda
  for (int it = 0; it < 400 && hi - lo > root_tol * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (stationarity_lhs(mid, mu, c, sigma_w2) > lambda) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double OptimizerSettings::eps1(double p_tot) const { return eps1_rel * p_tot; }

double OptimizerSettings::step(double p_tot) const { return lambda_step > 0.0 ? lambda_step : 0.1 / p_tot; }

void OptimizerSettings::validate() const {
  if (!(eps1_rel > 0.0 && eps2 > 0.0 && lambda_step >= 0.0 && root_tol > 0.0) || max_inner_iters < 1 ||
      max_outer_iters < 1) {
    throw std::invalid_argument("OptimizerSettings: tolerances and iteration caps must be positive");
  }
}

double outage_cap(int k, const SensorParams& sensor, const NetworkParams& net) {
  const double pi1 = net.pi1();
  const double slack = pi1 - 1.0 + sensor.zeta;
  if (slack <= 0.0) return kInfinity;
  // Joules throughout: the arrival CDF argument is k e_u (eta - 1) + alpha e_u.
  return (-net.gamma_e * std::log(slack / pi1) - k * net.e_u * (net.eta - 1.0)) / net.T_s;
}

double stationarity_lhs(double p, double mu, const RocCoefficients& c, double sigma_w2) {
  const double db = sigma_w2 + c.b * mu * p;
  const double dd = sigma_w2 + c.d * mu * p;
  return (c.a - c.b) * sigma_w2 * mu / (db * db) + (c.c - c.d) * sigma_w2 * mu / (dd * dd);
}

RootResult stationarity_root(double lambda, double mu, const RocCoefficients& c, double sigma_w2,
                             double root_tol) {
  if (mu <= 0.0) return {0.0, false};

  if (monotone_regime(c)) {
    const double f0 = stationarity_lhs(0.0, mu, c, sigma_w2) - lambda;
    if (f0 < 0.0) return {-1.0, false};
    if (f0 == 0.0) return {0.0, false};
    if (lambda <= 0.0) return {kInfinity, false};
    double hi = sigma_w2 / mu;
    while (stationarity_lhs(hi, mu, c, sigma_w2) > lambda) {
      hi *= 2.0;
      if (!std::isfinite(hi)) return {kInfinity, false};
    }
    return {bisect_decreasing_crossing(0.0, hi, lambda, mu, c, sigma_w2, root_tol), false};
  }

  // One of the two terms is negative: dJ/dp may rise before it falls.
  const auto grid = scan_grid(mu, c, sigma_w2);
  double prev = grid.front();
  bool prev_above = stationarity_lhs(prev, mu, c, sigma_w2) > lambda;
  bool ever_above = prev_above;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const bool above = stationarity_lhs(grid[i], mu, c, sigma_w2) > lambda;
    if (prev_above && !above) {
      return {bisect_decreasing_crossing(prev, grid[i], lambda, mu, c, sigma_w2, root_tol), true};
    }
    ever_above = ever_above || above;
    prev_above = above;
    prev = grid[i];
  }
  return {ever_above ? kInfinity : -1.0, true};
}

double clamp_power(double p_prime, int k, double phi, const NetworkParams& net) {
  return std::min({net.causal_power(k), phi, std::max(p_prime, 0.0)});
}

int units_from_power(double p_star, int k, const NetworkParams& net) {
  if (!(p_star > 0.0)) return 0;
  const double x = p_star * net.T_s / net.e_u;
  // Absorb representation noise so that x = 3 (1 + 1e-16) still gives 3 units.
  const double units = std::ceil(x * (1.0 - 1e-12));
  return static_cast<int>(std::min(units, static_cast<double>(k)));
}

std::string_view to_string(ActiveClamp c) {
  switch (c) {
    case ActiveClamp::causality: return "causality";
    case ActiveClamp::outage: return "outage";
    case ActiveClamp::stationarity: return "stationarity";
    case ActiveClamp::flat_level: return "flat_level";
  }
  return "unknown";
}

MapEntries map_for_lambda(double lambda, const Scenario& scenario, const OptimizerSettings& settings) {
  const auto& net = scenario.network;
  const int K = net.capacity_K;
  MapEntries out;
  out.map = PowerMap::zeros(scenario);
  out.active.resize(scenario.sensors.size());

  for (std::size_t n = 0; n < scenario.sensors.size(); ++n) {
    const auto& sensor = scenario.sensors[n];
    const auto coeffs = roc_coefficients(sensor.p_f, sensor.p_d);
    auto& sm = out.map.sensors[n];
    auto& active = out.active[n];
    active.assign(static_cast<std::size_t>(sensor.levels()) * (K + 1), ActiveClamp::flat_level);

    std::vector<double> phi(K + 1);
    for (int k = 0; k <= K; ++k) phi[k] = outage_cap(k, sensor, net);

    // Level 0 has quantized gain 0: J is flat in power there, so it stays 0.
    for (int l = 1; l < sensor.levels(); ++l) {
      const auto root = stationarity_root(lambda, sensor.quantized_gain(l), coeffs, sensor.sigma_w2, settings.root_tol);
      out.root_warning = out.root_warning || root.warning;
      const double relaxed = std::max(root.p, 0.0);
      for (int k = 0; k <= K; ++k) {
        const double candidates[3] = {net.causal_power(k), phi[k], relaxed};
        int which = 0;
        for (int i = 1; i < 3; ++i) {
          if (candidates[i] < candidates[which]) which = i;
        }
        const double p = candidates[which];
        sm.set(l, k, p, units_from_power(p, k, net));
        active[static_cast<std::size_t>(l) * (K + 1) + k] = static_cast<ActiveClamp>(which);
      }
    }
  }
  return out;
}

double expected_power(const PowerMap& map, std::span<const ChainKernel> kernels,
                      std::span<const BatteryDistribution> psi) {
  double total = 0.0;
  for (std::size_t n = 0; n < map.sensors.size(); ++n) {
    const auto& sm = map.sensors[n];
    for (int l = 0; l < sm.levels(); ++l) {
      double row = 0.0;
      for (int k = 0; k <= sm.capacity(); ++k) row += sm.power(l, k) * psi[n].psi[k];
      total += row * kernels[n].levels.pi[l];
    }
  }
  return total;
}

double network_j(const PowerMap& map, const Scenario& scenario, std::span<const ChainKernel> kernels,
                 std::span<const BatteryDistribution> psi, bool use_units) {
  const auto& net = scenario.network;
  double total = 0.0;
  for (std::size_t n = 0; n < map.sensors.size(); ++n) {
    const auto& sensor = scenario.sensors[n];
    const auto coeffs = roc_coefficients(sensor.p_f, sensor.p_d);
    const auto& sm = map.sensors[n];
    for (int l = 0; l < sm.levels(); ++l) {
      double row = 0.0;
      for (int k = 0; k <= sm.capacity(); ++k) {
        const double p = use_units ? sm.units(l, k) * net.e_u / net.T_s : sm.power(l, k);
        row += j_sensor(sensor.quantized_gain(l), p, coeffs, sensor.sigma_w2) * psi[n].psi[k];
      }
      total += row * kernels[n].levels.pi[l];
    }
  }
  return total;
}

double lambda_upper_bound(const Scenario& scenario) {
  double bound = 0.0;
  for (const auto& sensor : scenario.sensors) {
    const auto coeffs = roc_coefficients(sensor.p_f, sensor.p_d);
    for (int l = 1; l < sensor.levels(); ++l) {
      const double mu = sensor.quantized_gain(l);
      if (monotone_regime(coeffs)) {
        bound = std::max(bound, stationarity_lhs(0.0, mu, coeffs, sensor.sigma_w2));
      } else {
        for (const double p : scan_grid(mu, coeffs, sensor.sigma_w2)) {
          bound = std::max(bound, stationarity_lhs(p, mu, coeffs, sensor.sigma_w2));
        }
      }
    }
  }
  return bound > 0.0 ? bound : 1.0;
}

LambdaSearchResult lambda_search(std::span<const BatteryDistribution> psi, const Scenario& scenario,
                                 const OptimizerSettings& settings) {
  const auto kernels = make_chain_kernels(scenario);
  const double p_tot = scenario.network.p_tot;
  const double eps1 = settings.eps1(p_tot);

  LambdaSearchResult best;
  auto evaluate = [&](double lambda) {
    auto entries = map_for_lambda(lambda, scenario, settings);
    LambdaSearchResult r;
    r.lambda = lambda;
    r.expected_power = expected_power(entries.map, kernels, psi);
    r.map = std::move(entries.map);
    r.active = std::move(entries.active);
    r.root_warning = entries.root_warning;
    return r;
  };
  auto settled = [&](const LambdaSearchResult& r) {
    // |E - P| <= eps1 and |lambda (E - P)| <= eps1
    const double gap = std::abs(r.expected_power - p_tot);
    return gap <= eps1 && r.lambda * gap <= eps1;
  };

  auto at_zero = evaluate(0.0);
  if (at_zero.expected_power <= p_tot) {
    at_zero.iterations = 1;
    return at_zero;
  }

  double lambda_hi = lambda_upper_bound(scenario);
  auto high = evaluate(lambda_hi);
  int guard = 0;
  while (high.expected_power > p_tot && guard++ < 200) {
    lambda_hi *= 2.0;
    high = evaluate(lambda_hi);
  }
  if (p_tot <= 0.0) {
    high.budget_floor = true;
    return high;
  }

  if (settings.solver == LambdaSolver::subgradient) {
    const double t0 = settings.step(p_tot);
    double lambda = 0.0;
    auto current = std::move(at_zero);
    int i = 0;
    for (; i < settings.max_inner_iters; ++i) {
      const double gap = current.expected_power - p_tot;
      if ((lambda > 0.0 && std::abs(lambda * gap) <= eps1 && std::abs(gap) <= eps1) || (lambda == 0.0 && gap <= 0.0)) {
        break;
      }
      lambda = std::max(0.0, lambda + t0 * gap);
      current = evaluate(lambda);
    }
    current.iterations = i + 1;
    current.converged = i < settings.max_inner_iters;
    return current;
  }

  double lo = 0.0;
  double hi = lambda_hi;
  best = std::move(high);
  int it = 0;
  for (; it < settings.max_inner_iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto r = evaluate(mid);
    if (settled(r)) {
      r.iterations = it + 1;
      return r;
    }
    if (r.expected_power > p_tot) {
      lo = mid;
    } else {
      hi = mid;
      best = std::move(r);
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  // Bracket collapsed: return the feasible side.
  best.iterations = it + 1;
  best.converged = settled(best);
  return best;
}

KktReport kkt_report(const LambdaSearchResult& solution, const Scenario& scenario,
                     const OptimizerSettings& settings) {
  (void)settings;
  const auto& net = scenario.network;
  KktReport report;
  report.slackness = solution.lambda * (solution.expected_power - net.p_tot);
  for (std::size_t n = 0; n < scenario.sensors.size(); ++n) {
    const auto& sensor = scenario.sensors[n];
    const auto coeffs = roc_coefficients(sensor.p_f, sensor.p_d);
    const auto& sm = solution.map.sensors[n];
    for (int l = 0; l < sm.levels(); ++l) {
      for (int k = 0; k <= sm.capacity(); ++k) {
        const double p = sm.power(l, k);
        const double phi = outage_cap(k, sensor, net);
        const double slack = 1e-12 * std::max(1.0, p);
        if (!(p >= 0.0) || p > net.causal_power(k) + slack || p > phi + slack) ++report.clamp_violations;
        if (sm.units(l, k) * net.e_u / net.T_s > phi) ++report.outage_after_rounding;
        const auto active = solution.active[n][static_cast<std::size_t>(l) * (sm.capacity() + 1) + k];
        if (active == ActiveClamp::stationarity && p > 0.0) {
          ++report.interior_entries;
          const double residual =
              std::abs(stationarity_lhs(p, sensor.quantized_gain(l), coeffs, sensor.sigma_w2) - solution.lambda);
          report.max_stationarity_residual = std::max(report.max_stationarity_residual, residual);
        }
      }
    }
  }
  return report;
}

std::string_view to_string(OptimizeStatus s) {
  switch (s) {
    case OptimizeStatus::converged: return "converged";
    case OptimizeStatus::iteration_cap: return "iteration_cap";
    case OptimizeStatus::oscillation: return "oscillation";
  }
  return "unknown";
}

OptimizationOutcome optimize_power_map(const Scenario& scenario, const OptimizerSettings& settings) {
  settings.validate();
  const auto kernels = make_chain_kernels(scenario);

  bool root_warning = false;
  const AlphaUpdate update = [&](std::span<const BatteryDistribution> psi) {
    auto r = lambda_search(psi, scenario, settings);
    root_warning = root_warning || r.root_warning;
    return std::move(r.map);
  };
  auto steady = steady_state_psi(kernels, update, settings.eps2, settings.max_outer_iters);

  auto final_map = lambda_search(steady.psi, scenario, settings);

  OptimizationOutcome out;
  out.kkt = kkt_report(final_map, scenario, settings);
  out.objective_j = network_j(final_map.map, scenario, kernels, steady.psi);
  out.realized_j = network_j(final_map.map, scenario, kernels, steady.psi, true);
  out.expected_power = final_map.expected_power;
  out.lambda_star = final_map.lambda;
  out.lambda_converged = final_map.converged;
  out.root_warning = root_warning || final_map.root_warning;
  out.power_map = std::move(final_map.map);
  out.active = std::move(final_map.active);
  out.psi_star = std::move(steady.psi);
  out.outer_iterations = steady.iterations;
  out.outer_residual = steady.residual;
  switch (steady.status) {
    case SteadyStateStatus::converged: out.status = OptimizeStatus::converged; break;
    case SteadyStateStatus::iteration_cap: out.status = OptimizeStatus::iteration_cap; break;
    case SteadyStateStatus::oscillation: out.status = OptimizeStatus::oscillation; break;
  }
  out.convex_region = validate_convex_region(scenario.sensors);
  return out;
}

double saturation_budget(const Scenario& scenario, const OptimizerSettings& settings) {
  Scenario unbounded = scenario;
  unbounded.network.p_tot = std::numeric_limits<double>::max() / 4;
  return optimize_power_map(unbounded, settings).expected_power;
}

}  // namespace ehdet
