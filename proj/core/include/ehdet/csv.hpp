#pragma once

// CSV artifacts: comma-separated, '#'-prefixed comment lines, '.' decimal
// point, LF line endings. Every writer has a matching reader.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ehdet/types.hpp"

namespace ehdet::csv {

/// Comment lines are written as "# key=value".
using Comments = std::vector<std::pair<std::string, std::string>>;

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_double(double v);
double parse_double(std::string_view s);

// Power map: sensor,level,battery_state,power_watts,alpha_units; rows ordered by (n, l, k).
void write_power_map(std::ostream& os, const PowerMap& map, const Comments& comments = {});
PowerMap read_power_map(std::istream& is);

// Battery distributions: sensor,state,probability.
void write_psi(std::ostream& os, const std::vector<BatteryDistribution>& psi, const Comments& comments = {});
std::vector<BatteryDistribution> read_psi(std::istream& is);

// Monte Carlo report: metric,value,ci_low,ci_high.
void write_report(std::ostream& os, const MonteCarloReport& report, const Comments& comments = {});
MonteCarloReport read_report(std::istream& is);

struct SweepRow {
  double value = 0.0;
  double lambda_star = 0.0;
  double objective_j = 0.0;
  double expected_power = 0.0;
  double pd_fc = 0.0;
  double pf_fc = 0.0;
  double ci_pd = 0.0;
  double ci_pf = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const SweepRow&) const = default;
};

struct SweepTable {
  std::string variable;
  std::vector<SweepRow> rows;
  bool complete = true;
  Comments comments;
};

void write_sweep(std::ostream& os, const SweepTable& table);
SweepTable read_sweep(std::istream& is);

/// Key/value summary: key,value.
void write_summary(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& entries,
                   const Comments& comments = {});
std::map<std::string, std::string> read_summary(std::istream& is);

/// Comment lines seen before the header, as key=value pairs.
Comments read_comments(std::istream& is);

}  // namespace ehdet::csv
