#include "ehdet/battery.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include <Eigen/Dense>

namespace ehdet {

namespace {

// exp(-a) - exp(-b) for 0 <= a < b <= inf without cancellation.
double exp_interval(double a, double b) {
  if (std::isinf(b)) return std::exp(-a);
  return -std::exp(-a) * std::expm1(-(b - a));
}

void check_shapes(const BatteryDistribution& psi, const SensorPowerMap& alpha, const GainLevelProbs& levels,
                  const ArrivalUnitPmf& arrivals) {
  const int K = psi.capacity();
  if (alpha.capacity() != K || arrivals.capacity() != K) {
    throw std::invalid_argument("battery chain: capacity mismatch between psi, map, and arrivals");
  }
  if (alpha.levels() != static_cast<int>(levels.pi.size())) {
    throw std::invalid_argument("battery chain: level count mismatch between map and gain probabilities");
  }
}

}  // namespace

ArrivalUnitPmf arrival_unit_pmf(double gamma_e, double e_u, int capacity_K) {
  if (!(gamma_e > 0.0 && e_u > 0.0) || capacity_K < 1) {
    throw std::domain_error("arrival_unit_pmf requires gamma_e, e_u > 0 and K >= 1");
  }
  ArrivalUnitPmf out;
  out.pmf.assign(static_cast<std::size_t>(capacity_K) + 1, 0.0);
  const double r = e_u / gamma_e;
  for (int j = 1; j < capacity_K; ++j) out.pmf[j] = exp_interval((j - 1) * r, j * r);
  out.pmf[capacity_K] = std::exp(-(capacity_K - 1) * r);
  return out;
}

GainLevelProbs gain_level_probs(double gamma_g, std::span<const double> thresholds) {
  if (!(gamma_g > 0.0) || thresholds.size() < 2) throw std::domain_error("gain_level_probs: bad arguments");
  GainLevelProbs out;
  out.pi.reserve(thresholds.size() - 1);
  for (std::size_t l = 0; l + 1 < thresholds.size(); ++l) {
    out.pi.push_back(exp_interval(thresholds[l] / gamma_g, thresholds[l + 1] / gamma_g));
  }
  return out;
}

double transmit_probability(TransmitProbModel model, double pi0, double p_f, double p_d) {
  const double pi1 = 1.0 - pi0;
  return model == TransmitProbModel::prior ? pi1 : pi0 * p_f + pi1 * p_d;
}

ChainKernel make_chain_kernel(const SensorParams& sensor, const NetworkParams& net) {
  return ChainKernel{
      .levels = gain_level_probs(sensor.gamma_g, sensor.thresholds),
      .arrivals = arrival_unit_pmf(net.gamma_e, net.e_u, net.capacity_K),
      .transmit_prob = transmit_probability(net.transmit_prob_model, net.pi0, sensor.p_f, sensor.p_d),
  };
}

std::vector<ChainKernel> make_chain_kernels(const Scenario& scenario) {
  std::vector<ChainKernel> out;
  out.reserve(scenario.sensors.size());
  for (const auto& s : scenario.sensors) out.push_back(make_chain_kernel(s, scenario.network));
  return out;
}

BatteryDistribution battery_transition(const BatteryDistribution& psi, const SensorPowerMap& alpha,
                                       const GainLevelProbs& levels, const ArrivalUnitPmf& arrivals,
                                       double transmit_prob) {
  check_shapes(psi, alpha, levels, arrivals);
  const int K = psi.capacity();
  const double q1 = transmit_prob;
  const double q0 = 1.0 - transmit_prob;

  BatteryDistribution next;
  next.psi.assign(psi.psi.size(), 0.0);
  for (int k = 0; k <= K; ++k) {
    const double wk = psi.psi[k];
    if (wk == 0.0) continue;
    for (int beta = 0; beta <= K; ++beta) {
      const double wb = arrivals.pmf[beta];
      if (wb == 0.0) continue;
      // idle branch: min{[k + beta]^+, K}
      next.psi[std::min(k + beta, K)] += wk * wb * q0;
      // spending branch: min{[k + beta - alpha]^+, K}
      for (int l = 0; l < alpha.levels(); ++l) {
        const int j = std::clamp(k + beta - alpha.units(l, k), 0, K);
        next.psi[j] += wk * wb * q1 * levels.pi[l];
      }
    }
  }
  next.validate(1e-9);
  return next;
}

TransitionMatrix transition_matrix(const SensorPowerMap& alpha, const ChainKernel& kernel) {
  const int K = alpha.capacity();
  check_shapes(BatteryDistribution::full(K), alpha, kernel.levels, kernel.arrivals);
  TransitionMatrix m;
  m.size = K + 1;
  m.data.assign(static_cast<std::size_t>(m.size) * m.size, 0.0);
  const double q1 = kernel.transmit_prob;
  for (int k = 0; k <= K; ++k) {
    // Row k: next-state probabilities, case by case in the target state j.
    for (int j = 0; j <= K; ++j) {
      double idle = 0.0;
      double spend = 0.0;
      for (int beta = 0; beta <= K; ++beta) {
        const double wb = kernel.arrivals.pmf[beta];
        const int idle_next = k + beta;
        const bool idle_hit = (j == K) ? idle_next >= K : idle_next == j;
        if (idle_hit) idle += wb;
        for (int l = 0; l < alpha.levels(); ++l) {
          const int raw = k + beta - alpha.units(l, k);
          const bool hit = (j == K) ? raw >= K : (j == 0 ? raw <= 0 : raw == j);
          if (hit) spend += wb * kernel.levels.pi[l];
        }
      }
      m.at(k, j) = (1.0 - q1) * idle + q1 * spend;
    }
  }
  return m;
}

StationaryResult stationary_oracle(const SensorPowerMap& alpha, const ChainKernel& kernel) {
  const auto tm = transition_matrix(alpha, kernel);
  const int n = tm.size;

  Eigen::MatrixXd system(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) system(i, j) = tm.at(j, i) - (i == j ? 1.0 : 0.0);
  system.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  lu.setThreshold(1e-12);
  StationaryResult out;
  if (lu.isInvertible()) {
    const Eigen::VectorXd x = lu.solve(rhs);
    out.psi.psi.resize(n);
    for (int i = 0; i < n; ++i) out.psi.psi[i] = std::max(0.0, x(i));
  } else {
    // More than one closed class: follow the chain from a full battery.
    out.used_power_iteration = true;
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(n);
    v(n - 1) = 1.0;
    Eigen::MatrixXd p(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) p(i, j) = tm.at(i, j);
    for (int it = 0; it < 1000000; ++it) {
      const Eigen::RowVectorXd w = v * p;
      const double diff = (w - v).cwiseAbs().maxCoeff();
      v = w;
      if (diff < 1e-15) break;
    }
    out.psi.psi.assign(v.data(), v.data() + n);
  }
  const double total = out.psi.sum();
  for (auto& x : out.psi.psi) x /= total;
  return out;
}

std::string_view to_string(SteadyStateStatus s) {
  switch (s) {
    case SteadyStateStatus::converged: return "converged";
    case SteadyStateStatus::iteration_cap: return "iteration_cap";
    case SteadyStateStatus::oscillation: return "oscillation";
  }
  return "unknown";
}

SteadyStateResult steady_state_psi(std::span<const ChainKernel> kernels, const AlphaUpdate& update, double eps2,
                                   int max_iters) {
  if (!(eps2 > 0.0)) throw std::domain_error("steady_state_psi requires eps2 > 0");
  if (kernels.empty()) throw std::invalid_argument("steady_state_psi: no sensors");

  std::vector<BatteryDistribution> psi;
  psi.reserve(kernels.size());
  for (const auto& k : kernels) psi.push_back(BatteryDistribution::full(k.arrivals.capacity()));

  auto advance = [&](const std::vector<BatteryDistribution>& current) {
    const PowerMap alpha = update(current);
    if (alpha.sensors.size() != kernels.size()) throw std::invalid_argument("steady_state_psi: map size mismatch");
    std::vector<BatteryDistribution> next;
    next.reserve(current.size());
    for (std::size_t n = 0; n < current.size(); ++n) {
      next.push_back(battery_transition(current[n], alpha.sensors[n], kernels[n]));
    }
    return next;
  };
  auto distance = [](const std::vector<BatteryDistribution>& a, const std::vector<BatteryDistribution>& b) {
    double d = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) d = std::max(d, sup_norm_diff(a[n], b[n]));
    return d;
  };

  SteadyStateResult result;
  std::deque<std::vector<BatteryDistribution>> history;  // most recent last
  int cycle_hits = 0;
  for (int q = 1;; ++q) {
    auto next = advance(psi);
    result.residual = distance(next, psi);
    result.iterations = q;
    if (result.residual <= eps2) {
      result.psi = std::move(next);
      result.status = SteadyStateStatus::converged;
      return result;
    }
    if (q >= max_iters) {
      result.psi = std::move(next);
      result.status = SteadyStateStatus::iteration_cap;
      return result;
    }

    // Period 2..4 cycle: next revisits an older iterate although consecutive
    // iterates stay apart. Three consecutive detections are required.
    bool cycle = false;
    for (std::size_t back = 1; back < history.size() + 1 && back <= 3; ++back) {
      if (distance(next, history[history.size() - back]) <= eps2) cycle = true;
    }
    cycle_hits = cycle ? cycle_hits + 1 : 0;
    if (cycle_hits >= 3) {
      result.psi = std::move(next);
      result.status = SteadyStateStatus::oscillation;
      return result;
    }

    history.push_back(psi);
    if (history.size() > 3) history.pop_front();
    psi = std::move(next);
  }
}

}  // namespace ehdet
