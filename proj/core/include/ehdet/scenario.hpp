#pragma once

// Scenario description for an energy-harvesting distributed-detection network:
// per-sensor statistics, shared network parameters, and the key = value
// scenario file format (see docs/scenario-format.md).

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ehdet {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// How the battery chain weights the "spend energy" branch of a slot.
///   prior    - spend iff the true hypothesis is H1 (probability Pi_1).
///   decision - spend iff the local decision is u = 1 (Pi_0 p_f + Pi_1 p_d).
enum class TransmitProbModel { prior, decision };

/// What the fusion center knows about per-slot transmit amplitudes.
///   genie        - the actual amplitude sqrt(p g) of every sensor.
///   map_marginal - the channel gain only; battery state is averaged out
///                  with the steady-state distribution.
enum class FcKnowledge { genie, map_marginal };

std::string_view to_string(TransmitProbModel m);
std::string_view to_string(FcKnowledge k);
TransmitProbModel parse_transmit_prob_model(std::string_view s);
FcKnowledge parse_fc_knowledge(std::string_view s);

/// Gaussian shift-in-mean local observation x = A 1{H1} + v, v ~ N(0, sigma^2),
/// with the threshold rule u = 1{x > tau}.
struct LocalObservation {
  double signal_amplitude = 0.0;
  double noise_sigma = 1.0;
  double lrt_threshold = 0.0;
};

struct SensorParams {
  double gamma_g = 1.0;   // mean of the exponential channel gain
  double sigma_w2 = 1.0;  // receiver noise variance at the FC
  double p_f = 0.1;
  double p_d = 0.9;
  double zeta = 0.9;      // battery outage confidence
  std::vector<double> thresholds{0.0, kInfinity};  // mu_0 = 0 < ... < mu_{L+1} = inf
  std::optional<LocalObservation> local_obs;

  /// Number of quantized gain levels, L + 1 (levels are indexed 0..L).
  [[nodiscard]] int levels() const { return static_cast<int>(thresholds.size()) - 1; }
  [[nodiscard]] double quantized_gain(int level) const { return thresholds.at(level); }
  /// Level l such that mu_l <= gain < mu_{l+1}.
  [[nodiscard]] int level_of(double gain) const;

  void validate() const;
};

struct NetworkParams {
  double pi0 = 0.5;
  int capacity_K = 10;
  double e_u = 0.1;      // Joules per energy unit
  double T_s = 0.1;      // slot duration, seconds
  double gamma_e = 1.0;  // mean harvested energy per slot, Joules
  double eta = 0.2;
  double p_tot = 1.0;    // Watts
  TransmitProbModel transmit_prob_model = TransmitProbModel::prior;
  FcKnowledge fc_knowledge = FcKnowledge::genie;

  [[nodiscard]] double pi1() const { return 1.0 - pi0; }
  /// Causality cap k e_u / T_s in Watts.
  [[nodiscard]] double causal_power(int k) const { return k * e_u / T_s; }

  void validate() const;
};

struct Scenario {
  NetworkParams network;
  std::vector<SensorParams> sensors;

  void validate() const;
};

/// Invalid scenario content; field() names the offending key.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string field, const std::string& message);
  [[nodiscard]] const std::string& field() const noexcept { return field_; }
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  std::string field_;
  std::string message_;
};

Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Serializes in the format parse_scenario reads. Doubles are written in
/// shortest round-trip form, so parse(emit(s)) reproduces s exactly.
std::string emit_scenario(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

/// Membership in the (p_d, p_f) band where the per-sensor J objective is
/// convex in transmit power.
bool in_convex_region(double p_f, double p_d);
std::vector<bool> validate_convex_region(std::span<const SensorParams> sensors);

}  // namespace ehdet
