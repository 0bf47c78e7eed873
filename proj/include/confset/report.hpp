#pragma once

// Experiment configuration, calibration tables and simulation reports, with
// their CSV and JSON forms.

#include "confset/inference.hpp"
#include "confset/io.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace confset {

enum class Scenario { coverage, rate, test_errors, grid_consistency, indistinguishability, calibrate };

inline std::string to_string(Scenario s)
{
  switch (s) {
  case Scenario::coverage: return "coverage";
  case Scenario::rate: return "rate";
  case Scenario::test_errors: return "test_errors";
  case Scenario::grid_consistency: return "grid_consistency";
  case Scenario::indistinguishability: return "indistinguishability";
  case Scenario::calibrate: return "calibrate";
  }
  return "coverage";
}

inline Scenario scenario_from_string(const std::string& s)
{
  for (auto sc : { Scenario::coverage, Scenario::rate, Scenario::test_errors, Scenario::grid_consistency,
                   Scenario::indistinguishability, Scenario::calibrate })
    if (to_string(sc) == s) return sc;
  throw std::invalid_argument("unknown scenario: " + s);
}

/// How to build a truth. `sobolev` is a random member of Sigma(s, B) at the
/// given fill; `separated` is 1 plus one level of wavelets of smoothness t,
/// scaled so its distance from Sigma(null_s, null_B) is c n^{-t/(2t+1/2)}.
struct DensitySpec
{
  std::string id = "uniform";
  std::string kind = "uniform"; // uniform | sobolev | separated
  double s = 1.0;
  double B = 1.0;
  double fill = 1.0;
  std::uint64_t seed = 1;
  int first_level = -1;
  int finest_level = -1;
  double t = 1.0;
  double null_s = 2.0;
  double null_B = 1.0;
  double c = 1.0;
  bool c_times_M = false; // c is a multiple of the calibrated M
  bool random_signs = true;

  bool operator==(const DensitySpec&) const = default;
};

inline json to_json(const DensitySpec& d)
{
  return { { "id", d.id }, { "kind", d.kind }, { "s", d.s }, { "B", d.B }, { "fill", d.fill }, { "seed", d.seed },
           { "first_level", d.first_level }, { "finest_level", d.finest_level }, { "t", d.t },
           { "null_s", d.null_s }, { "null_B", d.null_B }, { "c", d.c }, { "c_times_M", d.c_times_M },
           { "random_signs", d.random_signs } };
}

inline DensitySpec density_spec_from_json(const json& j)
{
  DensitySpec d;
  d.id = j.value("id", d.id);
  d.kind = j.value("kind", d.kind);
  d.s = j.value("s", d.s);
  d.B = j.value("B", d.B);
  d.fill = j.value("fill", d.fill);
  d.seed = j.value("seed", d.seed);
  d.first_level = j.value("first_level", d.first_level);
  d.finest_level = j.value("finest_level", d.finest_level);
  d.t = j.value("t", d.t);
  d.null_s = j.value("null_s", d.null_s);
  d.null_B = j.value("null_B", d.null_B);
  d.c = j.value("c", d.c);
  d.c_times_M = j.value("c_times_M", d.c_times_M);
  d.random_signs = j.value("random_signs", d.random_signs);
  if (d.kind != "uniform" && d.kind != "sobolev" && d.kind != "separated")
    throw std::invalid_argument("unknown density kind: " + d.kind);
  return d;
}

struct ExperimentConfig
{
  Scenario scenario = Scenario::coverage;
  std::string basis = "haar";
  std::vector<DensitySpec> densities;
  double r = 0.8;
  double R = 1.5;
  double B0 = 1.0;
  double alpha = 0.05;
  double alphaprime = 0.05;
  double null_s = 2.0;       // test scenarios: H0 is Sigma(null_s, null_B) vs smoothness r
  double null_B = 1.0;
  std::string slack = "divergent"; // coverage with R < 2r: divergent | known_B
  std::vector<double> c_grid;      // indistinguishability sweep, in units of M
  std::vector<std::size_t> n_grid{ 1024, 4096, 16384 };
  std::size_t reps = 500;
  std::uint64_t seed = 42;
  unsigned jobs = 1;
  std::map<std::string, double> overrides;
  json calibration = json::object(); // plan for the calibrate scenario

  void validate() const
  {
    if (reps < 1) throw std::invalid_argument("reps must be at least 1");
    if (n_grid.empty()) throw std::invalid_argument("n grid must be nonempty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      if (n_grid[i] < 4) throw std::invalid_argument("sample sizes must be at least 4");
      if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw std::invalid_argument("n grid must be strictly ascending");
    }
    if (!(r > 0.5 && r <= R)) throw std::invalid_argument("need 1/2 < r <= R");
    if (!(alpha > 0.0 && alpha < 1.0) || !(alphaprime > 0.0 && alphaprime < 1.0))
      throw std::invalid_argument("alpha levels must lie in (0, 1)");
    if (!(B0 >= 1.0)) throw std::invalid_argument("B0 must be at least 1");
  }
};

inline json to_json(const ExperimentConfig& c)
{
  json dens = json::array();
  for (const auto& d : c.densities) dens.push_back(to_json(d));
  return { { "scenario", to_string(c.scenario) }, { "basis", c.basis }, { "densities", dens }, { "r", c.r },
           { "R", c.R }, { "B0", c.B0 }, { "alpha", c.alpha }, { "alphaprime", c.alphaprime },
           { "null_s", c.null_s }, { "null_B", c.null_B }, { "slack", c.slack }, { "c_grid", c.c_grid },
           { "n_grid", c.n_grid }, { "reps", c.reps }, { "seed", c.seed }, { "jobs", c.jobs },
           { "overrides", c.overrides }, { "calibration", c.calibration } };
}

inline ExperimentConfig config_from_json(const json& j)
{
  ExperimentConfig c;
  if (j.contains("scenario")) c.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  c.basis = j.value("basis", c.basis);
  if (j.contains("densities"))
    for (const auto& d : j.at("densities")) c.densities.push_back(density_spec_from_json(d));
  c.r = j.value("r", c.r);
  c.R = j.value("R", c.R);
  c.B0 = j.value("B0", c.B0);
  c.alpha = j.value("alpha", c.alpha);
  c.alphaprime = j.value("alphaprime", c.alphaprime);
  c.null_s = j.value("null_s", c.null_s);
  c.null_B = j.value("null_B", c.null_B);
  c.slack = j.value("slack", c.slack);
  c.c_grid = j.value("c_grid", c.c_grid);
  c.n_grid = j.value("n_grid", c.n_grid);
  c.reps = j.value("reps", c.reps);
  c.seed = j.value("seed", c.seed);
  c.jobs = j.value("jobs", c.jobs);
  c.overrides = j.value("overrides", c.overrides);
  c.calibration = j.value("calibration", json::object());
  return c;
}

/// Where a calibrated constant came from.
struct Provenance
{
  std::string null_density;
  std::vector<std::size_t> n;
  std::size_t reps = 0;
  double quantile = NAN;
  std::string note;

  bool operator==(const Provenance&) const = default;
};

struct CalibrationEntry
{
  double value = 0.0;
  Provenance provenance;

  bool operator==(const CalibrationEntry&) const = default;
};

struct CalibrationTable
{
  std::map<std::string, CalibrationEntry> entries;
  json config; // the exact configuration that produced the table

  void validate() const
  {
    for (const auto& [name, e] : entries)
      if (!(e.value > 0.0) || !std::isfinite(e.value))
        throw std::invalid_argument("calibrated constant " + name + " must be positive and finite");
  }

  InferenceConstants constants() const
  {
    InferenceConstants k;
    auto pick = [&](const char* name, double& dst) {
      if (auto it = entries.find(name); it != entries.end()) dst = it->second.value;
    };
    pick("kappa", k.kappa);
    pick("cs", k.cs);
    pick("z", k.z);
    pick("L", k.L);
    pick("Lprime", k.Lprime);
    pick("M", k.M);
    pick("Bprime", k.Bprime);
    return k;
  }

  bool operator==(const CalibrationTable& o) const { return entries == o.entries && config == o.config; }
};

inline json to_json(const CalibrationTable& t)
{
  json entries = json::object();
  for (const auto& [name, e] : t.entries) {
    entries[name] = { { "value", e.value },
                      { "provenance",
                        { { "null_density", e.provenance.null_density },
                          { "n", e.provenance.n },
                          { "reps", e.provenance.reps },
                          { "quantile", detail::number_to_json(e.provenance.quantile) },
                          { "note", e.provenance.note } } } };
  }
  return { { "constants", entries }, { "config", t.config } };
}

inline CalibrationTable calibration_from_json(const json& j)
{
  CalibrationTable t;
  for (const auto& [name, e] : j.at("constants").items()) {
    CalibrationEntry entry;
    entry.value = e.at("value").get<double>();
    const auto& p = e.at("provenance");
    entry.provenance.null_density = p.value("null_density", std::string());
    entry.provenance.n = p.value("n", std::vector<std::size_t>{});
    entry.provenance.reps = p.value("reps", std::size_t{ 0 });
    entry.provenance.quantile = detail::number_from_json(p.value("quantile", json()));
    entry.provenance.note = p.value("note", std::string());
    t.entries[name] = entry;
  }
  t.config = j.value("config", json::object());
  t.validate();
  return t;
}

struct ReportRow
{
  std::string scenario;
  std::size_t n = 0;
  std::string density_id;
  double s_true = NAN;
  double B_true = NAN;
  double coverage = NAN;
  double mean_diam = NAN;
  double sd_diam = NAN;
  double reject_rate = NAN;
  double shat_mode = NAN;
  double slope = NAN;
  double slope_se = NAN;
  std::uint64_t seed = 0;
  // JSON only
  std::size_t reps = 0;
  std::map<std::string, std::size_t> shat_histogram;
  double hit_rate = NAN; // share of replications selecting s_true
  double wall_time = 0.0;
};

namespace detail {

inline bool same_number(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

} // namespace detail

/// Equality of the fields the CSV carries.
inline bool csv_equal(const ReportRow& a, const ReportRow& b)
{
  using detail::same_number;
  return a.scenario == b.scenario && a.n == b.n && a.density_id == b.density_id && same_number(a.s_true, b.s_true) &&
         same_number(a.B_true, b.B_true) && same_number(a.coverage, b.coverage) &&
         same_number(a.mean_diam, b.mean_diam) && same_number(a.sd_diam, b.sd_diam) &&
         same_number(a.reject_rate, b.reject_rate) && same_number(a.shat_mode, b.shat_mode) &&
         same_number(a.slope, b.slope) && same_number(a.slope_se, b.slope_se) && a.seed == b.seed;
}

inline bool full_equal(const ReportRow& a, const ReportRow& b)
{
  return csv_equal(a, b) && a.reps == b.reps && a.shat_histogram == b.shat_histogram &&
         detail::same_number(a.hit_rate, b.hit_rate) && a.wall_time == b.wall_time;
}

struct SimReport
{
  std::vector<ReportRow> rows;
  double wall_time = 0.0;

  const ReportRow& row(const std::string& density_id, std::size_t n) const
  {
    for (const auto& r : rows)
      if (r.density_id == density_id && r.n == n) return r;
    throw std::out_of_range("no report row for " + density_id + " at n=" + std::to_string(n));
  }
};

inline bool csv_equal(const SimReport& a, const SimReport& b)
{
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    if (!csv_equal(a.rows[i], b.rows[i])) return false;
  return true;
}

inline bool full_equal(const SimReport& a, const SimReport& b)
{
  if (a.rows.size() != b.rows.size() || a.wall_time != b.wall_time) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    if (!full_equal(a.rows[i], b.rows[i])) return false;
  return true;
}

inline const char* csv_header()
{
  return "scenario,n,density_id,s_true,B_true,coverage,mean_diam,sd_diam,reject_rate,shat_mode,slope,slope_se,seed";
}

namespace detail {

inline std::string csv_number(double v) { return std::isnan(v) ? std::string() : format_double(v); }

inline double csv_parse_number(const std::string& field)
{
  if (field.empty()) return NAN;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (*end != '\0') throw std::invalid_argument("bad CSV number: " + field);
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> out(1);
  for (char ch : line) {
    if (ch == ',')
      out.emplace_back();
    else
      out.back() += ch;
  }
  return out;
}

inline void check_csv_text(const std::string& s)
{
  if (s.find_first_of(",\n\r\"") != std::string::npos)
    throw std::invalid_argument("CSV field may not contain separators or quotes: " + s);
}

} // namespace detail

/// Fixed column order; numbers at 17 significant digits, missing values
/// empty. Byte-stable for equal reports.
inline std::string to_csv(const SimReport& report)
{
  std::string out = csv_header();
  out += '\n';
  for (const auto& r : report.rows) {
    detail::check_csv_text(r.scenario);
    detail::check_csv_text(r.density_id);
    using detail::csv_number;
    out += r.scenario + ',' + std::to_string(r.n) + ',' + r.density_id + ',' + csv_number(r.s_true) + ',' +
           csv_number(r.B_true) + ',' + csv_number(r.coverage) + ',' + csv_number(r.mean_diam) + ',' +
           csv_number(r.sd_diam) + ',' + csv_number(r.reject_rate) + ',' + csv_number(r.shat_mode) + ',' +
           csv_number(r.slope) + ',' + csv_number(r.slope_se) + ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

inline SimReport parse_csv(const std::string& text)
{
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) throw std::invalid_argument("CSV header mismatch");
  SimReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 13) throw std::invalid_argument("CSV row needs 13 fields: " + line);
    ReportRow r;
    using detail::csv_parse_number;
    r.scenario = f[0];
    r.n = static_cast<std::size_t>(std::stoull(f[1]));
    r.density_id = f[2];
    r.s_true = csv_parse_number(f[3]);
    r.B_true = csv_parse_number(f[4]);
    r.coverage = csv_parse_number(f[5]);
    r.mean_diam = csv_parse_number(f[6]);
    r.sd_diam = csv_parse_number(f[7]);
    r.reject_rate = csv_parse_number(f[8]);
    r.shat_mode = csv_parse_number(f[9]);
    r.slope = csv_parse_number(f[10]);
    r.slope_se = csv_parse_number(f[11]);
    r.seed = std::stoull(f[12]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

inline json to_json(const SimReport& report)
{
  using detail::number_to_json;
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({ { "scenario", r.scenario },
                     { "n", r.n },
                     { "density_id", r.density_id },
                     { "s_true", number_to_json(r.s_true) },
                     { "B_true", number_to_json(r.B_true) },
                     { "coverage", number_to_json(r.coverage) },
                     { "mean_diam", number_to_json(r.mean_diam) },
                     { "sd_diam", number_to_json(r.sd_diam) },
                     { "reject_rate", number_to_json(r.reject_rate) },
                     { "shat_mode", number_to_json(r.shat_mode) },
                     { "slope", number_to_json(r.slope) },
                     { "slope_se", number_to_json(r.slope_se) },
                     { "seed", r.seed },
                     { "reps", r.reps },
                     { "shat_histogram", r.shat_histogram },
                     { "hit_rate", number_to_json(r.hit_rate) },
                     { "wall_time", r.wall_time } });
  }
  return { { "rows", rows }, { "wall_time", report.wall_time } };
}

inline SimReport report_from_json(const json& j)
{
  using detail::number_from_json;
  SimReport report;
  report.wall_time = j.value("wall_time", 0.0);
  for (const auto& x : j.at("rows")) {
    ReportRow r;
    r.scenario = x.at("scenario").get<std::string>();
    r.n = x.at("n").get<std::size_t>();
    r.density_id = x.at("density_id").get<std::string>();
    r.s_true = number_from_json(x.at("s_true"));
    r.B_true = number_from_json(x.at("B_true"));
    r.coverage = number_from_json(x.at("coverage"));
    r.mean_diam = number_from_json(x.at("mean_diam"));
    r.sd_diam = number_from_json(x.at("sd_diam"));
    r.reject_rate = number_from_json(x.at("reject_rate"));
    r.shat_mode = number_from_json(x.at("shat_mode"));
    r.slope = number_from_json(x.at("slope"));
    r.slope_se = number_from_json(x.at("slope_se"));
    r.seed = x.at("seed").get<std::uint64_t>();
    r.reps = x.value("reps", std::size_t{ 0 });
    r.shat_histogram = x.value("shat_histogram", std::map<std::string, std::size_t>{});
    r.hit_rate = number_from_json(x.value("hit_rate", json()));
    r.wall_time = x.value("wall_time", 0.0);
    report.rows.push_back(std::move(r));
  }
  return report;
}

enum class Format { csv, json };

inline void emit(const SimReport& report, Format format, const std::string& path)
{
  write_text_file(path, format == Format::csv ? to_csv(report) : to_json(report).dump(2) + "\n");
}

} // namespace confset
