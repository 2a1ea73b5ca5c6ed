#include "ehdet/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace ehdet::csv {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t parse_count(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) throw CsvError("not a count: '" + s + "'");
  return v;
}

int parse_index(const std::string& s) {
  const auto v = parse_count(s);
  if (v > 1000000000ULL) throw CsvError("index out of range: " + s);
  return static_cast<int>(v);
}

void write_comments(std::ostream& os, const Comments& comments) {
  for (const auto& [k, v] : comments) os << "# " << k << '=' << v << '\n';
}

// Reads comment lines and the header; returns data rows split into fields.
struct Table {
  Comments comments;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(std::istream& is, const std::string& expected_header) {
  Table t;
  std::string line;
  bool header_seen = false;
  const auto width = split(expected_header).size();
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto body = line.substr(1);
      if (!body.empty() && body[0] == ' ') body.erase(0, 1);
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        t.comments.emplace_back(body, "");
      } else {
        t.comments.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      }
      continue;
    }
    if (!header_seen) {
      if (line != expected_header) throw CsvError("unexpected header '" + line + "', wanted '" + expected_header + "'");
      header_seen = true;
      continue;
    }
    auto fields = split(line);
    if (fields.size() != width) throw CsvError("row has " + std::to_string(fields.size()) + " fields: " + line);
    t.rows.push_back(std::move(fields));
  }
  if (!header_seen) throw CsvError("missing header '" + expected_header + "'");
  return t;
}

const std::string kMapHeader = "sensor,level,battery_state,power_watts,alpha_units";
const std::string kPsiHeader = "sensor,state,probability";
const std::string kReportHeader = "metric,value,ci_low,ci_high";
const std::string kSweepHeader = "variable_value,lambda_star,J,expected_power,pd_fc,pf_fc,ci_pd,ci_pf,seed";
const std::string kSummaryHeader = "key,value";

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
  if (s == "inf") return kInfinity;
  if (s == "-inf") return -kInfinity;
  if (s == "nan") return std::nan("");
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw CsvError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

void write_power_map(std::ostream& os, const PowerMap& map, const Comments& comments) {
  write_comments(os, comments);
  os << kMapHeader << '\n';
  for (std::size_t n = 0; n < map.sensors.size(); ++n) {
    const auto& sm = map.sensors[n];
    for (int l = 0; l < sm.levels(); ++l) {
      for (int k = 0; k <= sm.capacity(); ++k) {
        os << n << ',' << l << ',' << k << ',' << format_double(sm.power(l, k)) << ',' << sm.units(l, k) << '\n';
      }
    }
  }
}

PowerMap read_power_map(std::istream& is) {
  const auto table = read_table(is, kMapHeader);
  // First pass: shape per sensor.
  std::vector<std::pair<int, int>> shape;  // (levels, K)
  for (const auto& r : table.rows) {
    const auto n = static_cast<std::size_t>(parse_index(r[0]));
    if (n >= shape.size()) shape.resize(n + 1, {0, 0});
    shape[n].first = std::max(shape[n].first, parse_index(r[1]) + 1);
    shape[n].second = std::max(shape[n].second, parse_index(r[2]));
  }
  PowerMap map;
  for (const auto& [levels, K] : shape) {
    if (levels == 0) throw CsvError("power map: sensor with no rows");
    map.sensors.emplace_back(levels, K);
  }
  std::size_t expected = 0;
  for (const auto& [levels, K] : shape) expected += static_cast<std::size_t>(levels) * (K + 1);
  if (expected != table.rows.size()) throw CsvError("power map: rows do not cover every (sensor, level, state)");
  for (const auto& r : table.rows) {
    const int units = parse_index(r[4]);
    map.sensors[parse_index(r[0])].set(parse_index(r[1]), parse_index(r[2]), parse_double(r[3]), units);
  }
  return map;
}

void write_psi(std::ostream& os, const std::vector<BatteryDistribution>& psi, const Comments& comments) {
  write_comments(os, comments);
  os << kPsiHeader << '\n';
  for (std::size_t n = 0; n < psi.size(); ++n) {
    for (std::size_t k = 0; k < psi[n].psi.size(); ++k) {
      os << n << ',' << k << ',' << format_double(psi[n].psi[k]) << '\n';
    }
  }
}

std::vector<BatteryDistribution> read_psi(std::istream& is) {
  const auto table = read_table(is, kPsiHeader);
  std::vector<BatteryDistribution> out;
  for (const auto& r : table.rows) {
    const auto n = static_cast<std::size_t>(parse_index(r[0]));
    const auto k = static_cast<std::size_t>(parse_index(r[1]));
    if (n >= out.size()) out.resize(n + 1);
    if (k != out[n].psi.size()) throw CsvError("psi: states must be listed in order starting at 0");
    out[n].psi.push_back(parse_double(r[2]));
  }
  return out;
}

void write_report(std::ostream& os, const MonteCarloReport& r, const Comments& comments) {
  write_comments(os, comments);
  os << kReportHeader << '\n';
  auto rate = [&](const char* name, double v, double ci) {
    os << name << ',' << format_double(v) << ',' << format_double(v - ci) << ',' << format_double(v + ci) << '\n';
  };
  auto scalar = [&](const char* name, const std::string& v) { os << name << ',' << v << ',' << v << ',' << v << '\n'; };
  rate("pd_fc", r.pd_fc, r.ci_pd);
  rate("pf_fc", r.pf_fc, r.ci_pf);
  scalar("tau_fc", format_double(r.tau_fc));
  scalar("samples", std::to_string(r.samples));
  scalar("seed", std::to_string(r.seed));
  scalar("h0_slots", std::to_string(r.h0_slots));
  scalar("h0_alarms", std::to_string(r.h0_alarms));
  scalar("h1_slots", std::to_string(r.h1_slots));
  scalar("h1_detections", std::to_string(r.h1_detections));
}

MonteCarloReport read_report(std::istream& is) {
  const auto table = read_table(is, kReportHeader);
  MonteCarloReport r;
  for (const auto& row : table.rows) {
    const auto& key = row[0];
    if (key == "tau_fc") r.tau_fc = parse_double(row[1]);
    else if (key == "seed") r.seed = parse_count(row[1]);
    else if (key == "h0_slots") r.h0_slots = parse_count(row[1]);
    else if (key == "h0_alarms") r.h0_alarms = parse_count(row[1]);
    else if (key == "h1_slots") r.h1_slots = parse_count(row[1]);
    else if (key == "h1_detections") r.h1_detections = parse_count(row[1]);
  }
  r.finalize();
  return r;
}

void write_sweep(std::ostream& os, const SweepTable& table) {
  Comments comments = table.comments;
  comments.insert(comments.begin(), {"status", table.complete ? "complete" : "incomplete"});
  comments.insert(comments.begin(), {"variable", table.variable});
  write_comments(os, comments);
  os << kSweepHeader << '\n';
  for (const auto& r : table.rows) {
    os << format_double(r.value) << ',' << format_double(r.lambda_star) << ',' << format_double(r.objective_j) << ','
       << format_double(r.expected_power) << ',' << format_double(r.pd_fc) << ',' << format_double(r.pf_fc) << ','
       << format_double(r.ci_pd) << ',' << format_double(r.ci_pf) << ',' << r.seed << '\n';
  }
}

SweepTable read_sweep(std::istream& is) {
  const auto table = read_table(is, kSweepHeader);
  SweepTable out;
  for (const auto& [k, v] : table.comments) {
    if (k == "variable") out.variable = v;
    else if (k == "status") out.complete = v == "complete";
    else out.comments.emplace_back(k, v);
  }
  for (const auto& r : table.rows) {
    out.rows.push_back(SweepRow{parse_double(r[0]), parse_double(r[1]), parse_double(r[2]), parse_double(r[3]),
                                parse_double(r[4]), parse_double(r[5]), parse_double(r[6]), parse_double(r[7]),
                                parse_count(r[8])});
  }
  return out;
}

void write_summary(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& entries,
                   const Comments& comments) {
  write_comments(os, comments);
  os << kSummaryHeader << '\n';
  for (const auto& [k, v] : entries) os << k << ',' << v << '\n';
}

std::map<std::string, std::string> read_summary(std::istream& is) {
  const auto table = read_table(is, kSummaryHeader);
  std::map<std::string, std::string> out;
  for (const auto& r : table.rows) out[r[0]] = r[1];
  return out;
}

Comments read_comments(std::istream& is) {
  Comments out;
  std::string line;
  while (is.peek() == '#' && std::getline(is, line)) {
    auto body = line.substr(1);
    if (!body.empty() && body[0] == ' ') body.erase(0, 1);
    const auto eq = body.find('=');
    out.emplace_back(eq == std::string::npos ? body : body.substr(0, eq),
                     eq == std::string::npos ? "" : body.substr(eq + 1));
  }
  return out;
}

}  // namespace ehdet::csv
