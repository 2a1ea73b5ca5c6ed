#include "ehdet/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ehdet/detection.hpp"

namespace ehdet {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_number(std::string_view text, const std::string& field, bool allow_inf = false) {
  text = trim(text);
  if (text == "inf" || text == "+inf") {
    if (!allow_inf) throw ScenarioError(field, "'inf' is only allowed as the last threshold");
    return kInfinity;
  }
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ScenarioError(field, "not a decimal number: '" + std::string(text) + "'");
  }
  if (!std::isfinite(value)) throw ScenarioError(field, "value must be finite");
  return value;
}

int parse_int(std::string_view text, const std::string& field) {
  text = trim(text);
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ScenarioError(field, "not an integer: '" + std::string(text) + "'");
  }
  return value;
}

std::vector<double> parse_thresholds(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    parts.push_back(trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  std::vector<double> out;
  out.reserve(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.push_back(parse_number(parts[i], "thresholds", i + 1 == parts.size()));
  }
  return out;
}

std::string format(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

using Block = std::map<std::string, std::string, std::less<>>;

class BlockReader {
 public:
  BlockReader(const Block& block, std::string prefix) : block_(block), prefix_(std::move(prefix)) {}

  [[nodiscard]] bool has(std::string_view key) const { return block_.find(key) != block_.end(); }

  [[nodiscard]] const std::string& raw(const std::string& key) const {
    const auto it = block_.find(key);
    if (it == block_.end()) throw ScenarioError(prefix_ + key, "missing field '" + key + "'");
    return it->second;
  }
  [[nodiscard]] double number(const std::string& key) const { return parse_number(raw(key), prefix_ + key); }
  [[nodiscard]] int integer(const std::string& key) const { return parse_int(raw(key), prefix_ + key); }

 private:
  const Block& block_;
  std::string prefix_;
};

const std::vector<std::string> kNetworkKeys{"pi0",     "capacity_K", "e_u",   "T_s",
                                            "gamma_e", "eta",        "p_tot", "transmit_prob_model",
                                            "fc_knowledge"};
const std::vector<std::string> kSensorKeys{"gamma_g", "sigma_w2", "p_f", "p_d", "zeta", "thresholds",
                                           "obs_signal_amplitude", "obs_noise_sigma", "obs_lrt_threshold"};

void check_known(const Block& block, const std::vector<std::string>& known, const std::string& prefix) {
  for (const auto& [key, value] : block) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ScenarioError(prefix + key, "unknown field '" + key + "'");
    }
  }
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ScenarioError(field, message);
}

}  // namespace

ScenarioError::ScenarioError(std::string field, const std::string& message)
    : std::runtime_error(field.empty() ? message : field + ": " + message),
      field_(std::move(field)),
      message_(message) {}

std::string_view to_string(TransmitProbModel m) {
  return m == TransmitProbModel::prior ? "prior" : "decision";
}

std::string_view to_string(FcKnowledge k) { return k == FcKnowledge::genie ? "genie" : "map_marginal"; }

TransmitProbModel parse_transmit_prob_model(std::string_view s) {
  s = trim(s);
  if (s == "prior") return TransmitProbModel::prior;
  if (s == "decision") return TransmitProbModel::decision;
  throw ScenarioError("transmit_prob_model", "expected 'prior' or 'decision', got '" + std::string(s) + "'");
}

FcKnowledge parse_fc_knowledge(std::string_view s) {
  s = trim(s);
  if (s == "genie") return FcKnowledge::genie;
  if (s == "map_marginal") return FcKnowledge::map_marginal;
  throw ScenarioError("fc_knowledge", "expected 'genie' or 'map_marginal', got '" + std::string(s) + "'");
}

int SensorParams::level_of(double gain) const {
  // thresholds[0] = 0, so upper_bound lands at index >= 1 for gain >= 0.
  const auto it = std::upper_bound(thresholds.begin(), thresholds.end(), gain);
  const auto idx = static_cast<int>(it - thresholds.begin()) - 1;
  return std::clamp(idx, 0, levels() - 1);
}

void SensorParams::validate() const {
  require(gamma_g > 0.0 && std::isfinite(gamma_g), "gamma_g", "must be positive");
  require(sigma_w2 > 0.0 && std::isfinite(sigma_w2), "sigma_w2", "must be positive");
  require(p_f > 0.0 && p_f < 1.0, "p_f", "probability out of range (0,1)");
  require(p_d > 0.0 && p_d < 1.0, "p_d", "probability out of range (0,1)");
  require(p_f < p_d, "p_f", "p_f >= p_d");
  require(zeta > 0.0 && zeta < 1.0, "zeta", "probability out of range (0,1)");
  require(thresholds.size() >= 2, "thresholds", "need at least [0, inf]");
  require(thresholds.front() == 0.0, "thresholds", "first threshold must be 0");
  require(std::isinf(thresholds.back()) && thresholds.back() > 0, "thresholds", "last threshold must be inf");
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    require(thresholds[i] > thresholds[i - 1], "thresholds", "thresholds not ascending");
  }
  for (std::size_t i = 0; i + 1 < thresholds.size(); ++i) {
    require(std::isfinite(thresholds[i]), "thresholds", "only the last threshold may be inf");
  }
  if (local_obs) {
    require(local_obs->noise_sigma > 0.0, "obs_noise_sigma", "must be positive");
  }
}

void NetworkParams::validate() const {
  require(pi0 > 0.0 && pi0 < 1.0, "pi0", "probability out of range (0,1)");
  require(capacity_K >= 1, "capacity_K", "must be at least 1");
  require(e_u > 0.0 && std::isfinite(e_u), "e_u", "must be positive");
  require(T_s > 0.0 && std::isfinite(T_s), "T_s", "must be positive");
  require(gamma_e > 0.0 && std::isfinite(gamma_e), "gamma_e", "must be positive");
  require(eta >= 0.0 && eta <= 1.0, "eta", "must lie in [0,1]");
  require(p_tot > 0.0 && std::isfinite(p_tot), "p_tot", "must be positive");
}

void Scenario::validate() const {
  network.validate();
  require(!sensors.empty(), "sensor", "scenario has no [sensor] blocks");
  for (std::size_t n = 0; n < sensors.size(); ++n) {
    try {
      sensors[n].validate();
    } catch (const ScenarioError& e) {
      throw ScenarioError("sensor[" + std::to_string(n) + "]." + e.field(),
                          e.message());
    }
  }
}

Scenario parse_scenario(std::string_view text) {
  Block network;
  std::vector<Block> sensor_blocks;
  Block* current = &network;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line == "[sensor]") {
      sensor_blocks.emplace_back();
      current = &sensor_blocks.back();
      continue;
    }
    if (line.front() == '[') {
      throw ScenarioError("", "line " + std::to_string(line_no) + ": unknown section " + std::string(line));
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ScenarioError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = std::string(trim(line.substr(0, eq)));
    const auto value = std::string(trim(line.substr(eq + 1)));
    if (!current->emplace(key, value).second) {
      throw ScenarioError(key, "duplicate field '" + key + "'");
    }
  }

  Scenario scenario;
  check_known(network, kNetworkKeys, "");
  const BlockReader net(network, "");
  auto& np = scenario.network;
  np.pi0 = net.number("pi0");
  np.capacity_K = net.integer("capacity_K");
  np.e_u = net.number("e_u");
  np.T_s = net.number("T_s");
  np.gamma_e = net.number("gamma_e");
  np.eta = net.number("eta");
  np.p_tot = net.number("p_tot");
  if (net.has("transmit_prob_model")) np.transmit_prob_model = parse_transmit_prob_model(net.raw("transmit_prob_model"));
  if (net.has("fc_knowledge")) np.fc_knowledge = parse_fc_knowledge(net.raw("fc_knowledge"));

  for (std::size_t n = 0; n < sensor_blocks.size(); ++n) {
    const std::string prefix = "sensor[" + std::to_string(n) + "].";
    check_known(sensor_blocks[n], kSensorKeys, prefix);
    const BlockReader blk(sensor_blocks[n], prefix);
    SensorParams s;
    s.gamma_g = blk.number("gamma_g");
    s.sigma_w2 = blk.number("sigma_w2");
    s.zeta = blk.number("zeta");
    try {
      s.thresholds = parse_thresholds(blk.raw("thresholds"));
    } catch (const ScenarioError& e) {
      throw ScenarioError(prefix + "thresholds", e.message());
    }

    const bool has_obs = blk.has("obs_signal_amplitude") || blk.has("obs_noise_sigma") || blk.has("obs_lrt_threshold");
    const bool has_roc = blk.has("p_f") || blk.has("p_d");
    if (has_obs && has_roc) {
      throw ScenarioError(prefix + "p_f", "p_f/p_d and obs_* fields are mutually exclusive");
    }
    if (has_obs) {
      LocalObservation obs;
      obs.signal_amplitude = blk.number("obs_signal_amplitude");
      obs.noise_sigma = blk.number("obs_noise_sigma");
      obs.lrt_threshold = blk.number("obs_lrt_threshold");
      if (!(obs.noise_sigma > 0.0)) throw ScenarioError(prefix + "obs_noise_sigma", "must be positive");
      const auto roc = lrt_local_probabilities(obs.signal_amplitude, obs.noise_sigma, obs.lrt_threshold);
      s.p_f = roc.p_f;
      s.p_d = roc.p_d;
      s.local_obs = obs;
    } else {
      s.p_f = blk.number("p_f");
      s.p_d = blk.number("p_d");
    }
    scenario.sensors.push_back(std::move(s));
  }

  scenario.validate();
  return scenario;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string emit_scenario(const Scenario& scenario) {
  std::ostringstream os;
  const auto& n = scenario.network;
  os << "pi0 = " << format(n.pi0) << '\n'
     << "capacity_K = " << n.capacity_K << '\n'
     << "e_u = " << format(n.e_u) << '\n'
     << "T_s = " << format(n.T_s) << '\n'
     << "gamma_e = " << format(n.gamma_e) << '\n'
     << "eta = " << format(n.eta) << '\n'
     << "p_tot = " << format(n.p_tot) << '\n'
     << "transmit_prob_model = " << to_string(n.transmit_prob_model) << '\n'
     << "fc_knowledge = " << to_string(n.fc_knowledge) << '\n';
  for (const auto& s : scenario.sensors) {
    os << "\n[sensor]\n"
       << "gamma_g = " << format(s.gamma_g) << '\n'
       << "sigma_w2 = " << format(s.sigma_w2) << '\n';
    if (s.local_obs) {
      os << "obs_signal_amplitude = " << format(s.local_obs->signal_amplitude) << '\n'
         << "obs_noise_sigma = " << format(s.local_obs->noise_sigma) << '\n'
         << "obs_lrt_threshold = " << format(s.local_obs->lrt_threshold) << '\n';
    } else {
      os << "p_f = " << format(s.p_f) << '\n' << "p_d = " << format(s.p_d) << '\n';
    }
    os << "zeta = " << format(s.zeta) << '\n' << "thresholds = ";
    for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
      os << (i ? ", " : "") << format(s.thresholds[i]);
    }
    os << '\n';
  }
  return os.str();
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write scenario file " + path.string());
  out << emit_scenario(scenario);
  if (!out) throw std::ios_base::failure("write failed for " + path.string());
}

bool in_convex_region(double p_f, double p_d) {
  if (!(0.0 < p_f && p_f < p_d && p_d < 1.0)) return false;
  const double root = std::sqrt(1.0 + 12.0 * p_f - 12.0 * p_f * p_f);
  const double center = 0.75 - 0.5 * p_f;
  return center - 0.25 * root <= p_d && p_d <= center + 0.25 * root;
}

std::vector<bool> validate_convex_region(std::span<const SensorParams> sensors) {
  std::vector<bool> out;
  out.reserve(sensors.size());
  for (const auto& s : sensors) out.push_back(in_convex_region(s.p_f, s.p_d));
  return out;
}

}  // namespace ehdet
