// confset calibrate|run|emit

#include "confset/confset.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace confset;

namespace {

struct Flags
{
  std::string config;
  std::string scenario;
  double r = 0, R = 0, B0 = 0, alpha = 0, alphaprime = 0;
  std::string n;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
  std::string out;
  std::string calibration;
  std::string format;
};

void add_experiment_flags(CLI::App* cmd, Flags& f)
{
  cmd->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--scenario", f.scenario, "coverage|rate|test_errors|grid_consistency|indistinguishability");
  cmd->add_option("--r", f.r, "lower smoothness");
  cmd->add_option("--R", f.R, "upper smoothness");
  cmd->add_option("--B0", f.B0, "known radius");
  cmd->add_option("--alpha", f.alpha);
  cmd->add_option("--alpha-prime", f.alphaprime);
  cmd->add_option("--n", f.n, "comma separated sample sizes");
  cmd->add_option("--reps", f.reps);
  cmd->add_option("--seed", f.seed);
  cmd->add_option("--jobs", f.jobs);
  cmd->add_option("--out", f.out, "output path (stdout if omitted)");
}

std::vector<std::size_t> parse_n_list(const std::string& text)
{
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    const auto v = std::stoull(item, &pos);
    if (pos != item.size()) throw std::invalid_argument("bad sample size: " + item);
    out.push_back(v);
  }
  return out;
}

ExperimentConfig build_config(CLI::App* cmd, const Flags& f)
{
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : config_from_json(read_json_file(f.config));
  if (cmd->count("--scenario")) cfg.scenario = scenario_from_string(f.scenario);
  if (cmd->count("--r")) cfg.r = f.r;
  if (cmd->count("--R")) cfg.R = f.R;
  if (cmd->count("--B0")) cfg.B0 = f.B0;
  if (cmd->count("--alpha")) cfg.alpha = f.alpha;
  if (cmd->count("--alpha-prime")) cfg.alphaprime = f.alphaprime;
  if (cmd->count("--n")) cfg.n_grid = parse_n_list(f.n);
  if (cmd->count("--reps")) cfg.reps = f.reps;
  if (cmd->count("--seed")) cfg.seed = f.seed;
  if (cmd->count("--jobs")) cfg.jobs = f.jobs;
  cfg.validate();
  return cfg;
}

bool ends_with(const std::string& s, const std::string& suffix)
{
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Format format_for(const std::string& path, const std::string& requested)
{
  if (requested == "csv") return Format::csv;
  if (requested == "json") return Format::json;
  if (!requested.empty()) throw std::invalid_argument("format must be csv or json");
  return ends_with(path, ".json") ? Format::json : Format::csv;
}

void write_out(const std::string& path, const std::string& text)
{
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_text_file(path, text);
}

std::string render(const SimReport& report, Format format)
{
  return format == Format::csv ? to_csv(report) : to_json(report).dump(2) + "\n";
}

SimReport read_report(const std::string& path)
{
  if (ends_with(path, ".json")) return report_from_json(read_json_file(path));
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Adaptive L2 confidence sets for densities: calibration and Monte Carlo experiments" };
  app.require_subcommand(1);

  Flags cal_flags, run_flags;
  auto* cal = app.add_subcommand("calibrate", "Monte Carlo calibration of the inference constants");
  add_experiment_flags(cal, cal_flags);

  auto* run_cmd = app.add_subcommand("run", "run an experiment and write its report");
  add_experiment_flags(run_cmd, run_flags);
  run_cmd->add_option("--calibration", run_flags.calibration, "calibration table (default: $CONFSET_CALIBRATION)");
  run_cmd->add_option("--format", run_flags.format, "csv|json (default from --out extension)");

  std::string emit_in, emit_out, emit_format;
  auto* emit_cmd = app.add_subcommand("emit", "convert a report between CSV and JSON");
  emit_cmd->add_option("--in", emit_in, "report file (.csv or .json)")->required()->check(CLI::ExistingFile);
  emit_cmd->add_option("--out", emit_out, "output path");
  emit_cmd->add_option("--format", emit_format, "csv|json (default from --out extension)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cal) {
      auto cfg = build_config(cal, cal_flags);
      cfg.scenario = Scenario::calibrate;
      const auto table = calibrate(cfg);
      write_out(cal_flags.out, to_json(table).dump(2) + "\n");
    } else if (*run_cmd) {
      const auto cfg = build_config(run_cmd, run_flags);
      std::string table_path = run_flags.calibration;
      if (table_path.empty())
        if (const char* env = std::getenv("CONFSET_CALIBRATION")) table_path = env;
      std::optional<CalibrationTable> table;
      if (!table_path.empty()) table = calibration_from_json(read_json_file(table_path));
      const auto report = run(cfg, table);
      write_out(run_flags.out, render(report, format_for(run_flags.out, run_flags.format)));
    } else if (*emit_cmd) {
      write_out(emit_out, render(read_report(emit_in), format_for(emit_out, emit_format)));
    }
  } catch (const std::exception& e) {
    std::cerr << "confset: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
