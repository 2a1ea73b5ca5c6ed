#include "ehdet/simulator.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace ehdet {

namespace {

constexpr std::uint64_t kHypothesisStream = 0x9e3779b97f4a7c15ULL;

std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& g) { return std::uniform_real_distribution<double>(0.0, 1.0)(g); }
double standard_normal(std::mt19937_64& g) { return std::normal_distribution<double>(0.0, 1.0)(g); }
double exponential_with_mean(std::mt19937_64& g, double mean) {
  return std::exponential_distribution<double>(1.0 / mean)(g);
}

double log_add(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == -kInfinity) return hi;
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log f(y | H) up to the Gaussian normalizer, for decision probability q.
double log_received_density(double y, const SensorFusionTerm& t, double q) {
  double acc = -kInfinity;
  const double log_q = std::log(q);
  const double log_not_q = std::log1p(-q);
  const double silent = -0.5 * y * y / t.sigma_w2;
  for (std::size_t c = 0; c < t.weights.size(); ++c) {
    if (t.weights[c] <= 0.0) continue;
    const double a = t.amplitudes[c];
    const double active = -0.5 * (y - a) * (y - a) / t.sigma_w2;
    acc = log_add(acc, std::log(t.weights[c]) + log_add(log_q + active, log_not_q + silent));
  }
  return acc;
}

Hypothesis draw_hypothesis(std::mt19937_64& g, double pi0) {
  return uniform01(g) < pi0 ? Hypothesis::h0 : Hypothesis::h1;
}

void check_inputs(const Scenario& scenario, const PowerMap& map, const SimulationOptions& options) {
  map.validate(scenario);
  if (scenario.network.fc_knowledge == FcKnowledge::map_marginal && options.psi.size() != scenario.sensors.size()) {
    throw std::invalid_argument("map_marginal fusion needs one steady-state distribution per sensor");
  }
}

}  // namespace

RngStreams::RngStreams(std::uint64_t master_seed, std::size_t n_sensors)
    : hypothesis(make_stream(master_seed, kHypothesisStream)) {
  sensors.reserve(n_sensors);
  for (std::size_t n = 0; n < n_sensors; ++n) sensors.push_back(make_stream(master_seed, n));
}

EpisodeState EpisodeState::full(const Scenario& scenario) {
  EpisodeState s;
  s.battery.assign(scenario.sensors.size(), scenario.network.capacity_K);
  return s;
}

double llr(std::span<const double> y, const FusionModel& fusion) {
  if (y.size() != fusion.sensors.size()) throw std::invalid_argument("llr: size mismatch");
  double total = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    const auto& t = fusion.sensors[n];
    const bool silent = std::all_of(t.amplitudes.begin(), t.amplitudes.end(), [](double a) { return a == 0.0; });
    if (silent || t.p_f == t.p_d) continue;
    total += log_received_density(y[n], t, t.p_d) - log_received_density(y[n], t, t.p_f);
  }
  return total;
}

SlotRecord step_episode(EpisodeState& state, const Scenario& scenario, const PowerMap& map, Hypothesis truth,
                        RngStreams& rng) {
  const auto& net = scenario.network;
  const std::size_t N = scenario.sensors.size();
  SlotRecord rec;
  rec.truth = truth;
  rec.y.resize(N);
  rec.gain.resize(N);
  rec.level.resize(N);
  rec.decision.resize(N);
  rec.battery_before = state.battery;
  rec.spent_units.resize(N);
  rec.amplitude.resize(N);

  for (std::size_t n = 0; n < N; ++n) {
    const auto& sensor = scenario.sensors[n];
    auto& g = rng.sensors[n];
    const int k = state.battery[n];

    const double gain = exponential_with_mean(g, sensor.gamma_g);
    const int level = sensor.level_of(gain);

    int u = 0;
    if (sensor.local_obs) {
      const auto& obs = *sensor.local_obs;
      const double x = (truth == Hypothesis::h1 ? obs.signal_amplitude : 0.0) + obs.noise_sigma * standard_normal(g);
      u = x > obs.lrt_threshold ? 1 : 0;
    } else {
      u = uniform01(g) < (truth == Hypothesis::h1 ? sensor.p_d : sensor.p_f) ? 1 : 0;
    }

    const int alpha = map.sensors[n].units(level, k);
    const double power = alpha * net.e_u / net.T_s;
    const double amplitude = std::sqrt(gain * power);
    const double noise = std::sqrt(sensor.sigma_w2) * standard_normal(g);
    rec.y[n] = (u == 1 ? amplitude : 0.0) + noise;

    const bool spends = net.transmit_prob_model == TransmitProbModel::prior ? truth == Hypothesis::h1 : u == 1;
    const int spent = spends ? alpha : 0;
    if (spent > k) throw std::logic_error("causality violated: spent more units than stored");

    const double energy = exponential_with_mean(g, net.gamma_e);
    const double units = std::ceil(energy / net.e_u);
    const int beta = units >= net.capacity_K ? net.capacity_K : static_cast<int>(units);
    const int next = std::clamp(k + beta - spent, 0, net.capacity_K);

    rec.gain[n] = gain;
    rec.level[n] = level;
    rec.decision[n] = u;
    rec.spent_units[n] = spent;
    rec.amplitude[n] = amplitude;
    state.battery[n] = next;
  }
  ++state.slot;
  return rec;
}

FusionModel fusion_for_slot(const SlotRecord& slot, const Scenario& scenario, const PowerMap& map,
                            std::span<const BatteryDistribution> psi) {
  const auto& net = scenario.network;
  FusionModel fm;
  fm.sensors.resize(scenario.sensors.size());
  for (std::size_t n = 0; n < scenario.sensors.size(); ++n) {
    auto& t = fm.sensors[n];
    t.p_f = scenario.sensors[n].p_f;
    t.p_d = scenario.sensors[n].p_d;
    t.sigma_w2 = scenario.sensors[n].sigma_w2;
    if (net.fc_knowledge == FcKnowledge::genie) {
      t.weights = {1.0};
      t.amplitudes = {slot.amplitude[n]};
    } else {
      const auto& sm = map.sensors[n];
      t.weights = psi[n].psi;
      t.amplitudes.resize(t.weights.size());
      for (int k = 0; k <= sm.capacity(); ++k) {
        t.amplitudes[k] = std::sqrt(slot.gain[n] * sm.units(slot.level[n], k) * net.e_u / net.T_s);
      }
    }
  }
  return fm;
}

std::uint64_t SimulationOptions::effective_warmup(const Scenario& scenario) const {
  return warmup > 0 ? warmup : 10ULL * static_cast<std::uint64_t>(scenario.network.capacity_K);
}

Calibration calibrate_threshold(const Scenario& scenario, const PowerMap& map, double target_pf,
                                const SimulationOptions& options) {
  if (!(target_pf > 0.0 && target_pf < 1.0)) throw std::domain_error("target_pf must lie in (0,1)");
  if (options.samples < 10000) throw std::domain_error("calibration needs at least 10^4 samples");
  check_inputs(scenario, map, options);

  RngStreams rng(options.seed, scenario.sensors.size());
  auto state = EpisodeState::full(scenario);
  const double pi0 = scenario.network.pi0;
  for (std::uint64_t t = 0; t < options.effective_warmup(scenario); ++t) {
    step_episode(state, scenario, map, draw_hypothesis(rng.hypothesis, pi0), rng);
  }

  std::vector<double> values;
  values.reserve(options.samples);
  while (values.size() < options.samples) {
    const auto truth = draw_hypothesis(rng.hypothesis, pi0);
    const auto slot = step_episode(state, scenario, map, truth, rng);
    if (truth == Hypothesis::h0) values.push_back(llr(slot.y, fusion_for_slot(slot, scenario, map, options.psi)));
  }
  std::sort(values.begin(), values.end());

  const auto M = static_cast<double>(values.size());
  const auto idx = static_cast<std::size_t>(
      std::clamp(std::ceil((1.0 - target_pf) * M) - 1.0, 0.0, M - 1.0));
  Calibration cal;
  cal.tau = values[idx];
  cal.samples = values.size();
  const auto upper = std::upper_bound(values.begin(), values.end(), cal.tau);
  const auto lower = std::lower_bound(values.begin(), values.end(), cal.tau);
  const auto above = static_cast<double>(values.end() - upper);
  const auto ties = static_cast<double>(upper - lower);
  cal.tie_prob = ties > 0 ? std::clamp((target_pf * M - above) / ties, 0.0, 1.0) : 0.0;
  cal.achieved_pf = (above + cal.tie_prob * ties) / M;
  return cal;
}

MonteCarloReport run_monte_carlo(const Scenario& scenario, const PowerMap& map, const Calibration& threshold,
                                 const SimulationOptions& options) {
  check_inputs(scenario, map, options);
  const auto warmup = options.effective_warmup(scenario);
  if (warmup >= options.samples) throw std::invalid_argument("warmup must be smaller than the sample count");

  RngStreams rng(options.seed, scenario.sensors.size());
  auto state = EpisodeState::full(scenario);
  const double pi0 = scenario.network.pi0;
  const int K = scenario.network.capacity_K;
  for (std::uint64_t t = 0; t < warmup; ++t) {
    step_episode(state, scenario, map, draw_hypothesis(rng.hypothesis, pi0), rng);
  }

  MonteCarloReport report;
  report.seed = options.seed;
  report.tau_fc = threshold.tau;
  report.occupancy.assign(scenario.sensors.size(), std::vector<std::uint64_t>(K + 1, 0));
  for (std::uint64_t t = 0; t < options.samples; ++t) {
    for (std::size_t n = 0; n < state.battery.size(); ++n) ++report.occupancy[n][state.battery[n]];
    const auto truth = draw_hypothesis(rng.hypothesis, pi0);
    const auto slot = step_episode(state, scenario, map, truth, rng);
    const double value = llr(slot.y, fusion_for_slot(slot, scenario, map, options.psi));
    bool decide_h1 = value > threshold.tau;
    if (value == threshold.tau && threshold.tie_prob > 0.0) decide_h1 = uniform01(rng.hypothesis) < threshold.tie_prob;
    if (truth == Hypothesis::h1) {
      ++report.h1_slots;
      report.h1_detections += decide_h1 ? 1 : 0;
    } else {
      ++report.h0_slots;
      report.h0_alarms += decide_h1 ? 1 : 0;
    }
  }
  report.finalize();
  return report;
}

}  // namespace ehdet
