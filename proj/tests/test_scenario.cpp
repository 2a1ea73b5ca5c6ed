#include <cmath>
#include <random>
#include <string>

#include "doctest.h"
#include "ehdet/scenario.hpp"

using namespace ehdet;

namespace {

const char* kMinimal = R"(pi0 = 0.5
capacity_K = 10
e_u = 0.1
T_s = 0.1
gamma_e = 1
eta = 0.2
p_tot = 2

[sensor]
gamma_g = 1
sigma_w2 = 1
p_f = 0.2
p_d = 0.9
zeta = 0.9
thresholds = 0, 0.5, inf
)";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

// Expects parse failure and returns the diagnostic.
ScenarioError parse_error(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return e;
  }
  FAIL("scenario parsed although it should not have");
  return ScenarioError("", "");
}

// Band endpoints in long double, written out from the closed form.
bool band_oracle(long double pf, long double pd) {
  if (!(0 < pf && pf < pd && pd < 1)) return false;
  const long double r = std::sqrt(1.0L + 12.0L * pf - 12.0L * pf * pf) / 4.0L;
  const long double lo = 0.75L - pf / 2.0L - r;
  const long double hi = 0.75L - pf / 2.0L + r;
  return lo <= pd && pd <= hi;
}

}  // namespace

TEST_CASE("two-sensor scenario file loads with its parameters") {
  const auto s = load_scenario(std::string(EHDET_SCENARIO_DIR) + "/two_sensor.scn");
  REQUIRE(s.sensors.size() == 2);
  CHECK(s.network.capacity_K == 100);
  CHECK(s.network.e_u == 0.1);
  CHECK(s.network.T_s == 0.1);
  CHECK(s.network.eta == 0.2);
  CHECK(s.sensors[0].gamma_g == 1.1);
  CHECK(s.sensors[1].gamma_g == 1.2);
  CHECK(s.sensors[0].sigma_w2 == 1.0);
  CHECK(s.sensors[1].sigma_w2 == 1.5);
  CHECK(s.sensors[0].p_f == 0.2);
  CHECK(s.sensors[1].p_f == 0.1);
  CHECK(s.sensors[0].p_d == 0.9);
  CHECK(s.sensors[1].p_d == 0.75);
  for (const auto& sensor : s.sensors) {
    CHECK(sensor.zeta == 0.9);
    const std::vector<double> mu{0, 0.1, 0.3, 0.6, 1.2, kInfinity};
    CHECK(sensor.thresholds == mu);
    CHECK(sensor.levels() == 5);
  }
}

TEST_CASE("scenario diagnostics name the failing field") {
  SUBCASE("thresholds out of order") {
    const auto e = parse_error(replace(kMinimal, "0, 0.5, inf", "0, 0.3, 0.1, inf"));
    CHECK(e.message() == "thresholds not ascending");
    CHECK(e.field() == "sensor[0].thresholds");
  }
  SUBCASE("p_f above p_d") {
    auto text = replace(kMinimal, "p_f = 0.2", "p_f = 0.5");
    text = replace(text, "p_d = 0.9", "p_d = 0.4");
    CHECK(parse_error(text).message() == "p_f >= p_d");
  }
  SUBCASE("missing field") {
    const auto e = parse_error(replace(kMinimal, "zeta = 0.9\n", ""));
    CHECK(e.message() == "missing field 'zeta'");
    CHECK(e.field() == "sensor[0].zeta");
  }
  SUBCASE("probability out of range") {
    CHECK(parse_error(replace(kMinimal, "p_d = 0.9", "p_d = 1.5")).message() == "probability out of range (0,1)");
    CHECK(parse_error(replace(kMinimal, "pi0 = 0.5", "pi0 = 0")).field() == "pi0");
    CHECK(parse_error(replace(kMinimal, "zeta = 0.9", "zeta = 1")).field() == "sensor[0].zeta");
  }
  SUBCASE("inf only as the last threshold") {
    CHECK(parse_error(replace(kMinimal, "0, 0.5, inf", "0, inf, 2")).field() == "sensor[0].thresholds");
    CHECK(parse_error(replace(kMinimal, "0, 0.5, inf", "0, 0.5, 3")).field() == "sensor[0].thresholds");
    CHECK(parse_error(replace(kMinimal, "0, 0.5, inf", "0.1, 0.5, inf")).field() == "sensor[0].thresholds");
  }
  SUBCASE("unknown and duplicate keys") {
    CHECK(parse_error(std::string(kMinimal) + "colour = blue\n").field() == "sensor[0].colour");
    CHECK(parse_error(replace(kMinimal, "eta = 0.2\n", "eta = 0.2\neta = 0.3\n")).field() == "eta");
  }
  SUBCASE("network ranges") {
    CHECK(parse_error(replace(kMinimal, "capacity_K = 10", "capacity_K = 0")).field() == "capacity_K");
    CHECK(parse_error(replace(kMinimal, "capacity_K = 10", "capacity_K = 2.5")).field() == "capacity_K");
    CHECK(parse_error(replace(kMinimal, "eta = 0.2", "eta = 1.2")).field() == "eta");
    CHECK(parse_error(replace(kMinimal, "p_tot = 2", "p_tot = -1")).field() == "p_tot");
    CHECK(parse_error(replace(kMinimal, "gamma_e = 1", "gamma_e = abc")).field() == "gamma_e");
  }
  SUBCASE("no sensors") {
    const std::string text(kMinimal);
    CHECK(parse_error(text.substr(0, text.find("[sensor]"))).field() == "sensor");
  }
  SUBCASE("local observation fields exclude p_f/p_d") {
    const auto text = replace(kMinimal, "zeta = 0.9", "zeta = 0.9\nobs_signal_amplitude = 1");
    CHECK(parse_error(text).field() == "sensor[0].p_f");
  }
}

TEST_CASE("comments and whitespace are ignored") {
  const auto text = "# header\n" + replace(kMinimal, "eta = 0.2", "   eta=0.2   # trailing");
  CHECK(parse_scenario(text).network.eta == 0.2);
}

TEST_CASE("local observation derives the ROC point") {
  auto text = replace(kMinimal, "p_f = 0.2\n", "obs_signal_amplitude = 2\nobs_noise_sigma = 1\n");
  text = replace(text, "p_d = 0.9\n", "obs_lrt_threshold = 1\n");
  const auto s = parse_scenario(text);
  REQUIRE(s.sensors[0].local_obs.has_value());
  // Q(1) and Q(-1)
  CHECK(s.sensors[0].p_f == doctest::Approx(0.15865525393145707).epsilon(1e-14));
  CHECK(s.sensors[0].p_d == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  const auto again = parse_scenario(emit_scenario(s));
  CHECK(again.sensors[0].p_f == s.sensors[0].p_f);
  CHECK(again.sensors[0].local_obs->lrt_threshold == 1.0);
}

TEST_CASE("emit followed by parse is bit-exact") {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Scenario s;
    s.network.pi0 = 0.01 + 0.98 * u(g);
    s.network.capacity_K = 1 + static_cast<int>(u(g) * 200);
    s.network.e_u = 1e-3 + u(g);
    s.network.T_s = 1e-3 + u(g);
    s.network.gamma_e = 1e-3 + 10 * u(g);
    s.network.eta = u(g);
    s.network.p_tot = 1e-6 + 1e3 * u(g);
    s.network.transmit_prob_model = u(g) < 0.5 ? TransmitProbModel::prior : TransmitProbModel::decision;
    s.network.fc_knowledge = u(g) < 0.5 ? FcKnowledge::genie : FcKnowledge::map_marginal;
    const int n_sensors = 1 + trial % 3;
    for (int n = 0; n < n_sensors; ++n) {
      SensorParams p;
      p.gamma_g = 1e-3 + 5 * u(g);
      p.sigma_w2 = 1e-3 + 5 * u(g);
      p.p_f = 0.001 + 0.4 * u(g);
      p.p_d = p.p_f + (0.999 - p.p_f) * (0.01 + 0.98 * u(g));
      p.zeta = 0.01 + 0.98 * u(g);
      p.thresholds = {0.0};
      const int levels = 1 + trial % 6;
      for (int l = 1; l < levels; ++l) p.thresholds.push_back(p.thresholds.back() + 1e-3 + u(g));
      p.thresholds.push_back(kInfinity);
      s.sensors.push_back(p);
    }
    const auto back = parse_scenario(emit_scenario(s));
    CHECK(back.network.pi0 == s.network.pi0);
    CHECK(back.network.capacity_K == s.network.capacity_K);
    CHECK(back.network.e_u == s.network.e_u);
    CHECK(back.network.T_s == s.network.T_s);
    CHECK(back.network.gamma_e == s.network.gamma_e);
    CHECK(back.network.eta == s.network.eta);
    CHECK(back.network.p_tot == s.network.p_tot);
    CHECK(back.network.transmit_prob_model == s.network.transmit_prob_model);
    CHECK(back.network.fc_knowledge == s.network.fc_knowledge);
    REQUIRE(back.sensors.size() == s.sensors.size());
    for (std::size_t n = 0; n < s.sensors.size(); ++n) {
      CHECK(back.sensors[n].gamma_g == s.sensors[n].gamma_g);
      CHECK(back.sensors[n].sigma_w2 == s.sensors[n].sigma_w2);
      CHECK(back.sensors[n].p_f == s.sensors[n].p_f);
      CHECK(back.sensors[n].p_d == s.sensors[n].p_d);
      CHECK(back.sensors[n].zeta == s.sensors[n].zeta);
      CHECK(back.sensors[n].thresholds == s.sensors[n].thresholds);
    }
  }
}

TEST_CASE("level_of follows the half-open quantizer intervals") {
  SensorParams s;
  s.thresholds = {0, 0.1, 0.3, kInfinity};
  CHECK(s.level_of(0.0) == 0);
  CHECK(s.level_of(0.0999) == 0);
  CHECK(s.level_of(0.1) == 1);
  CHECK(s.level_of(0.2999) == 1);
  CHECK(s.level_of(0.3) == 2);
  CHECK(s.level_of(1e9) == 2);
}

TEST_CASE("convexity band") {
  CHECK(in_convex_region(0.2, 0.9));
  CHECK(band_oracle(0.2L, 0.9L));
  CHECK(in_convex_region(0.001, 0.999) == band_oracle(0.001L, 0.999L));
  CHECK_FALSE(in_convex_region(0.3, 0.3));
  CHECK_FALSE(in_convex_region(0.5, 0.4));

  // For p_f = 0.2 the lower edge is 0.65 - sqrt(2.92) / 4; the upper edge lies above 1.
  const double r = 0.25 * std::sqrt(1.0 + 2.4 - 0.48);
  CHECK(in_convex_region(0.2, 0.65 - r + 1e-9));
  CHECK_FALSE(in_convex_region(0.2, 0.65 - r - 1e-9));
  CHECK(in_convex_region(0.2, 0.999));

  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20000; ++i) {
    const double pf = u(g);
    const double pd = u(g);
    CHECK(in_convex_region(pf, pd) == band_oracle(pf, pd));
  }

  Scenario s = parse_scenario(kMinimal);
  s.sensors.push_back(s.sensors[0]);
  s.sensors[1].p_f = 0.05;
  s.sensors[1].p_d = 0.3;
  const auto flags = validate_convex_region(s.sensors);
  CHECK(flags == std::vector<bool>{true, band_oracle(0.05L, 0.3L)});
}
