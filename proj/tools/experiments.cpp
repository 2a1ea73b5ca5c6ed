#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ios>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ehdet/battery.hpp"
#include "ehdet/detection.hpp"
#include "ehdet/oracles.hpp"

namespace ehdet::cli {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void prepare_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoFailure("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
  }
}

template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoFailure("cannot open " + path.string() + " for writing");
  writer(os);
  os.flush();
  if (!os) throw IoFailure("write failed: " + path.string());
}

template <class Reader>
auto read_file(const std::filesystem::path& path, Reader&& reader) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoFailure("cannot open " + path.string());
  return reader(is);
}

csv::Comments header_comments(const Scenario& scenario, std::uint64_t seed) {
  const auto& net = scenario.network;
  return {
      {"seed", std::to_string(seed)},
      {"sensors", std::to_string(scenario.sensors.size())},
      {"capacity_K", std::to_string(net.capacity_K)},
      {"p_tot", csv::format_double(net.p_tot)},
      {"gamma_e", csv::format_double(net.gamma_e)},
      {"transmit_prob_model", std::string(to_string(net.transmit_prob_model))},
      {"fc_knowledge", std::string(to_string(net.fc_knowledge))},
  };
}

// Runs `body`, translating exceptions into exit codes.
template <class Body>
int guarded(std::ostream& log, Body&& body) {
  try {
    return body();
  } catch (const IoFailure& e) {
    log << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::ios_base::failure& e) {
    log << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const ScenarioError& e) {
    log << "error: scenario: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const csv::CsvError& e) {
    log << "error: csv: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kValidationFailure;
  }
}

std::vector<BatteryDistribution> steady_state_for(const Scenario& scenario, const PowerMap& map) {
  const auto kernels = make_chain_kernels(scenario);
  const auto ss = steady_state_psi(kernels, [&](std::span<const BatteryDistribution>) { return map; }, 1e-12);
  if (ss.status != SteadyStateStatus::converged) {
    throw std::runtime_error("battery chain did not reach a steady state for the supplied map");
  }
  return ss.psi;
}

struct CheckLog {
  std::ostream& log;
  int failures = 0;

  void check(const std::string& name, bool pass, const std::string& detail) {
    log << (pass ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
    if (!pass) ++failures;
  }
  void skip(const std::string& name, const std::string& why) { log << "SKIP " << name << "  " << why << '\n'; }
};

std::string fmt(double v) { return csv::format_double(v); }

}  // namespace

Scenario resolve_scenario(const CommonOptions& options) {
  auto scenario = load_scenario(options.scenario);
  if (options.transmit_prob_model) scenario.network.transmit_prob_model = *options.transmit_prob_model;
  if (options.fc_knowledge) scenario.network.fc_knowledge = *options.fc_knowledge;
  scenario.validate();
  return scenario;
}

std::uint64_t calibration_seed(std::uint64_t seed) { return splitmix64(seed ^ 0x63616c6962726174ULL); }
std::uint64_t evaluation_seed(std::uint64_t seed) { return splitmix64(seed ^ 0x6576616c75617465ULL); }

Evaluation evaluate_map(const Scenario& scenario, const PowerMap& map, std::span<const BatteryDistribution> psi,
                        std::uint64_t samples, std::uint64_t seed, std::uint64_t warmup, double target_pf) {
  SimulationOptions opts;
  opts.samples = samples;
  opts.warmup = warmup;
  opts.psi.assign(psi.begin(), psi.end());
  opts.seed = calibration_seed(seed);
  Evaluation ev;
  ev.calibration = calibrate_threshold(scenario, map, target_pf, opts);
  opts.seed = evaluation_seed(seed);
  ev.report = run_monte_carlo(scenario, map, ev.calibration, opts);
  ev.report.seed = seed;
  return ev;
}

SweepVariable parse_sweep_variable(std::string_view s) {
  if (s == "p_tot") return SweepVariable::p_tot;
  if (s == "gamma_e") return SweepVariable::gamma_e;
  if (s == "capacity_K") return SweepVariable::capacity_K;
  throw std::invalid_argument("unknown sweep variable '" + std::string(s) + "'");
}

std::string_view to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::p_tot: return "p_tot";
    case SweepVariable::gamma_e: return "gamma_e";
    case SweepVariable::capacity_K: return "capacity_K";
  }
  return "unknown";
}

void SweepSpec::validate() const {
  if (values.empty()) throw std::invalid_argument("sweep: no values");
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("sweep: values must be positive and finite");
    if (variable == SweepVariable::capacity_K && v != std::floor(v)) {
      throw std::invalid_argument("sweep: capacity_K values must be integers");
    }
  }
  auto sorted = values;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("sweep: duplicate values");
  }
}

Scenario apply_sweep_value(Scenario scenario, SweepVariable variable, double value) {
  switch (variable) {
    case SweepVariable::p_tot: scenario.network.p_tot = value; break;
    case SweepVariable::gamma_e: scenario.network.gamma_e = value; break;
    case SweepVariable::capacity_K: scenario.network.capacity_K = static_cast<int>(value); break;
  }
  scenario.validate();
  return scenario;
}

SweepResult run_sweep(const Scenario& base, const SweepSpec& spec, const OptimizerSettings& settings,
                      const std::function<void(const SweepPoint&)>& on_point) {
  spec.validate();
  // Seeds follow the rank of the value, so the input order does not matter.
  auto values = spec.values;
  std::sort(values.begin(), values.end());

  SweepResult result;
  result.table.variable = std::string(to_string(spec.variable));
  result.table.comments = header_comments(base, spec.seed);
  result.table.comments.emplace_back("samples", std::to_string(spec.samples));
  result.table.comments.emplace_back("seed_rule", "seed + rank of value");
  for (std::size_t i = 0; i < values.size(); ++i) {
    try {
      const auto scenario = apply_sweep_value(base, spec.variable, values[i]);
      SweepPoint point;
      point.outcome = optimize_power_map(scenario, settings);
      if (!point.outcome.ok()) {
        result.error = "optimizer did not converge at " + result.table.variable + "=" + fmt(values[i]) + " (" +
                       std::string(to_string(point.outcome.status)) + ")";
        result.exit_code = kNonConvergence;
        break;
      }
      const std::uint64_t seed = spec.seed + i;
      const auto ev = evaluate_map(scenario, point.outcome.power_map, point.outcome.psi_star, spec.samples, seed,
                                   spec.warmup, spec.target_pf);
      point.row = csv::SweepRow{values[i],        point.outcome.lambda_star, point.outcome.objective_j,
                                point.outcome.expected_power, ev.report.pd_fc, ev.report.pf_fc,
                                ev.report.ci_pd, ev.report.ci_pf, seed};
      result.table.rows.push_back(point.row);
      if (on_point) on_point(point);
      result.points.push_back(std::move(point));
    } catch (const std::exception& e) {
      result.error = result.table.variable + "=" + fmt(values[i]) + ": " + e.what();
      result.exit_code = kValidationFailure;
      break;
    }
  }
  result.table.complete = result.exit_code == kOk;
  return result;
}

int cmd_powermap(const CommonOptions& options, const OptimizerSettings& settings, std::ostream& log) {
  return guarded(log, [&] {
    const auto scenario = resolve_scenario(options);
    prepare_out_dir(options.out);
    const auto outcome = optimize_power_map(scenario, settings);
    const auto comments = header_comments(scenario, options.seed);

    write_file(options.out / "powermap.csv", [&](std::ostream& os) { csv::write_power_map(os, outcome.power_map, comments); });
    write_file(options.out / "psi.csv", [&](std::ostream& os) { csv::write_psi(os, outcome.psi_star, comments); });

    const double eps1 = settings.eps1(scenario.network.p_tot);
    std::vector<std::pair<std::string, std::string>> summary{
        {"lambda_star", fmt(outcome.lambda_star)},
        {"J", fmt(outcome.objective_j)},
        {"J_rounded", fmt(outcome.realized_j)},
        {"expected_power", fmt(outcome.expected_power)},
        {"p_tot", fmt(scenario.network.p_tot)},
        {"eps1", fmt(eps1)},
        {"status", std::string(to_string(outcome.status))},
        {"lambda_converged", outcome.lambda_converged ? "1" : "0"},
        {"outer_iterations", std::to_string(outcome.outer_iterations)},
        {"outer_residual", fmt(outcome.outer_residual)},
        {"kkt_interior_entries", std::to_string(outcome.kkt.interior_entries)},
        {"kkt_max_stationarity_residual", fmt(outcome.kkt.max_stationarity_residual)},
        {"kkt_slackness", fmt(outcome.kkt.slackness)},
        {"kkt_clamp_violations", std::to_string(outcome.kkt.clamp_violations)},
        {"outage_after_rounding", std::to_string(outcome.kkt.outage_after_rounding)},
    };
    for (std::size_t n = 0; n < outcome.convex_region.size(); ++n) {
      summary.emplace_back("convex_region_" + std::to_string(n), outcome.convex_region[n] ? "1" : "0");
    }
    write_file(options.out / "summary.csv", [&](std::ostream& os) { csv::write_summary(os, summary, comments); });

    log << "lambda*=" << fmt(outcome.lambda_star) << " J=" << fmt(outcome.objective_j)
        << " E[P]=" << fmt(outcome.expected_power) << " status=" << to_string(outcome.status) << '\n';
    for (std::size_t n = 0; n < outcome.convex_region.size(); ++n) {
      if (!outcome.convex_region[n]) log << "warning: sensor " << n << " lies outside the convex (p_d, p_f) band\n";
    }
    return outcome.ok() ? kOk : kNonConvergence;
  });
}

int cmd_sweep(const CommonOptions& options, const SweepSpec& spec, const OptimizerSettings& settings,
              std::ostream& log) {
  return guarded(log, [&] {
    const auto scenario = resolve_scenario(options);
    prepare_out_dir(options.out);
    const auto path = options.out / "sweep.csv";
    auto result = run_sweep(scenario, spec, settings, [&](const SweepPoint& p) {
      log << to_string(spec.variable) << "=" << fmt(p.row.value) << " lambda*=" << fmt(p.row.lambda_star)
          << " J=" << fmt(p.row.objective_j) << " pd=" << fmt(p.row.pd_fc) << " pf=" << fmt(p.row.pf_fc) << '\n';
    });
    if (!result.error.empty()) {
      result.table.comments.emplace_back("error", result.error);
      log << "error: " << result.error << '\n';
    }
    write_file(path, [&](std::ostream& os) { csv::write_sweep(os, result.table); });
    return result.exit_code;
  });
}

int cmd_simulate(const CommonOptions& options, const std::filesystem::path& map_path,
                 const OptimizerSettings& settings, std::ostream& log) {
  return guarded(log, [&] {
    const auto scenario = resolve_scenario(options);
    prepare_out_dir(options.out);
    PowerMap map;
    std::vector<BatteryDistribution> psi;
    if (map_path.empty()) {
      const auto outcome = optimize_power_map(scenario, settings);
      if (!outcome.ok()) {
        log << "error: optimizer did not converge (" << to_string(outcome.status) << ")\n";
        return static_cast<int>(kNonConvergence);
      }
      map = outcome.power_map;
      psi = outcome.psi_star;
    } else {
      map = read_file(map_path, [](std::istream& is) { return csv::read_power_map(is); });
      map.validate(scenario);
      psi = steady_state_for(scenario, map);
    }

    const auto ev = evaluate_map(scenario, map, psi, options.samples, options.seed, options.warmup, options.target_pf);
    auto comments = header_comments(scenario, options.seed);
    comments.emplace_back("calibration_seed", std::to_string(calibration_seed(options.seed)));
    comments.emplace_back("evaluation_seed", std::to_string(evaluation_seed(options.seed)));
    comments.emplace_back("target_pf", fmt(options.target_pf));
    comments.emplace_back("tie_prob", fmt(ev.calibration.tie_prob));
    comments.emplace_back("calibrated_pf", fmt(ev.calibration.achieved_pf));
    write_file(options.out / "report.csv", [&](std::ostream& os) { csv::write_report(os, ev.report, comments); });
    write_file(options.out / "occupancy.csv",
               [&](std::ostream& os) { csv::write_psi(os, ev.report.empirical_psi, comments); });
    log << "pd_fc=" << fmt(ev.report.pd_fc) << " +/- " << fmt(ev.report.ci_pd) << " pf_fc=" << fmt(ev.report.pf_fc)
        << " +/- " << fmt(ev.report.ci_pf) << " tau=" << fmt(ev.report.tau_fc) << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_validate(const ValidateOptions& options, const OptimizerSettings& settings, std::ostream& log) {
  return guarded(log, [&] {
    const auto scenario = resolve_scenario(options.common);
    const auto& net = scenario.network;
    CheckLog checks{log};

    const auto convex = validate_convex_region(scenario.sensors);
    const bool all_convex = std::all_of(convex.begin(), convex.end(), [](bool b) { return b; });
    for (std::size_t n = 0; n < convex.size(); ++n) {
      log << "sensor " << n << ": " << (convex[n] ? "convex regime" : "non-convex regime; oracle comparison only")
          << '\n';
    }

    {
      double worst = 0.0;
      for (const auto& s : scenario.sensors) {
        const auto rc = roc_coefficients(s.p_f, s.p_d);
        for (int l = 0; l < s.levels(); ++l) worst = std::max(worst, std::abs(j_sensor(s.quantized_gain(l), 0.0, rc, s.sigma_w2) - 2.0));
      }
      checks.check("zero_power_floor", worst <= 1e-12, "max|J-2|=" + fmt(worst));
    }

    {
      std::mt19937_64 g(options.common.seed);
      std::uniform_real_distribution<double> gain(0.0, 5.0);
      std::uniform_real_distribution<double> power(0.0, 50.0);
      double worst = 0.0;
      for (const auto& s : scenario.sensors) {
        const auto rc = roc_coefficients(s.p_f, s.p_d);
        for (int i = 0; i < 10000; ++i) {
          const double gi = gain(g);
          const double pi = power(g);
          const double direct = j_sensor(gi, pi, rc, s.sigma_w2);
          const double two_step = j_gaussian(moment_match(s.p_f, s.p_d, pi, gi, s.sigma_w2));
          worst = std::max(worst, std::abs(direct - two_step) / two_step);
        }
      }
      checks.check("surrogate_identity", worst <= 1e-12, "max rel diff=" + fmt(worst));
    }

    {
      double worst = 0.0;
      for (std::size_t n = 0; n < scenario.sensors.size(); ++n) {
        const auto& s = scenario.sensors[n];
        const auto mc = oracles::moment_match_monte_carlo(s.p_f, s.p_d, 1.0, s.gamma_g, s.sigma_w2,
                                                          options.moment_draws, options.common.seed + n);
        worst = std::max(worst, mc.max_z);
      }
      checks.check("moment_match_mc", worst <= 4.0, "max z=" + fmt(worst) + " tol=4");
    }

    {
      std::mt19937_64 g(options.common.seed + 7);
      const auto kernels = make_chain_kernels(scenario);
      double worst = 0.0;
      bool all_converged = true;
      for (int trial = 0; trial < options.random_maps; ++trial) {
        PowerMap map = PowerMap::zeros(scenario);
        for (auto& sm : map.sensors) {
          for (int l = 1; l < sm.levels(); ++l) {
            for (int k = 0; k <= sm.capacity(); ++k) {
              const int a = std::uniform_int_distribution<int>(0, k)(g);
              sm.set(l, k, a * net.e_u / net.T_s, a);
            }
          }
        }
        const auto ss = steady_state_psi(kernels, [&](std::span<const BatteryDistribution>) { return map; }, 1e-14);
        all_converged = all_converged && ss.status == SteadyStateStatus::converged;
        for (std::size_t n = 0; n < kernels.size(); ++n) {
          const auto exact = stationary_oracle(map.sensors[n], kernels[n]);
          worst = std::max(worst, total_variation(ss.psi[n], exact.psi));
        }
      }
      checks.check("stationary_oracle", all_converged && worst <= 1e-8,
                   std::to_string(options.random_maps) + " maps, max TV=" + fmt(worst));
    }

    const auto outcome = optimize_power_map(scenario, settings);
    checks.check("optimizer_converged", outcome.ok(),
                 std::string(to_string(outcome.status)) + " after " + std::to_string(outcome.outer_iterations) +
                     " outer iterations");
    {
      const double bound = 1e-6 * outcome.lambda_star;
      const bool pass = outcome.kkt.interior_entries == 0 || outcome.kkt.max_stationarity_residual <= bound;
      checks.check("kkt_stationarity", pass,
                   std::to_string(outcome.kkt.interior_entries) + " interior entries, max residual=" +
                       fmt(outcome.kkt.max_stationarity_residual) + " bound=" + fmt(bound));
      const double slack_bound = 1e-6 * net.p_tot;
      checks.check("kkt_slackness", std::abs(outcome.kkt.slackness) <= slack_bound,
                   "|lambda (E[P]-P)|=" + fmt(std::abs(outcome.kkt.slackness)) + " bound=" + fmt(slack_bound));
      checks.check("clamp_dominance", outcome.kkt.clamp_violations == 0,
                   std::to_string(outcome.kkt.clamp_violations) + " violations");
    }

    if (scenario.sensors.size() != 1) {
      checks.skip("exhaustive_optimum", "needs a single-sensor scenario");
    } else if (oracles::enumeration_size(scenario.sensors[0], net.capacity_K) > 2e6) {
      checks.skip("exhaustive_optimum", "enumeration of " + fmt(oracles::enumeration_size(scenario.sensors[0], net.capacity_K)) +
                                            " maps exceeds the guard of 2e6");
    } else {
      const auto ex = oracles::exhaustive_optimum(scenario);
      const double rel = std::abs(outcome.objective_j - ex->objective_j) / ex->objective_j;
      checks.check("exhaustive_optimum", rel <= 1e-3,
                   "optimizer J=" + fmt(outcome.objective_j) + " oracle J=" + fmt(ex->objective_j) +
                       " rel gap=" + fmt(rel) + " over " + std::to_string(ex->candidates) + " maps");
    }

    if (!all_convex) log << "note: non-convex regime; optimizer results are compared with oracles only\n";
    log << (checks.failures == 0 ? "all checks passed" : std::to_string(checks.failures) + " check(s) failed") << '\n';
    return checks.failures == 0 ? static_cast<int>(kOk) : static_cast<int>(kValidationFailure);
  });
}

}  // namespace ehdet::cli
