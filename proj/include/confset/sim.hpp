#pragma once

// Monte Carlo harness: seeded replication over a thread pool, truth
// construction from specs, the experiment scenarios and the calibration of
// every constant the theory leaves unspecified.

#include "confset/density.hpp"
#include "confset/estimator.hpp"
#include "confset/inference.hpp"
#include "confset/quad_stat.hpp"
#include "confset/report.hpp"
#include "confset/rng.hpp"
#include "confset/wavelet.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace confset {

/// Runs fn(rep, rng) for rep = 0..reps-1 on up to `jobs` threads. Rep r
/// always sees the generator seeded with stream_seed(seed, r), and results
/// come back in rep order, so the output does not depend on scheduling.
template <class Fn>
auto replicate(std::size_t reps, unsigned jobs, std::uint64_t seed, Fn&& fn)
{
  using Result = decltype(fn(std::size_t{}, std::declval<Rng&>()));
  std::vector<std::optional<Result>> slots(reps);
  std::atomic<std::size_t> next{ 0 };
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t rep = next.fetch_add(1);
      if (rep >= reps) return;
      try {
        Rng rng(stream_seed(seed, rep));
        slots[rep].emplace(fn(rep, rng));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = reps;
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(reps)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<Result> out;
  out.reserve(reps);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

namespace stats {

inline double mean(const std::vector<double>& v)
{
  if (v.empty()) return NAN;
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

inline double sd(const std::vector<double>& v)
{
  if (v.size() < 2) return NAN;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

/// Smallest sample value x with at least a fraction q of the sample <= x.
inline double upper_quantile(std::vector<double> v, double q)
{
  if (v.empty()) throw std::domain_error("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const auto m = static_cast<double>(v.size());
  auto idx = static_cast<std::size_t>(std::ceil(q * m - 1e-9));
  idx = std::clamp<std::size_t>(idx, 1, v.size());
  return v[idx - 1];
}

inline double rate(const std::vector<bool>& hits)
{
  if (hits.empty()) return NAN;
  return static_cast<double>(std::count(hits.begin(), hits.end(), true)) / static_cast<double>(hits.size());
}

struct Fit
{
  double slope = NAN;
  double intercept = NAN;
  double slope_se = NAN;
};

/// Ordinary least squares of y on x with the residual-based standard error.
inline Fit ols(const std::vector<double>& x, const std::vector<double>& y)
{
  Fit f;
  const std::size_t m = x.size();
  if (m < 2 || y.size() != m) return f;
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (m > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double e = y[i] - f.intercept - f.slope * x[i];
      rss += e * e;
    }
    f.slope_se = std::sqrt(rss / static_cast<double>(m - 2) / sxx);
  }
  return f;
}

} // namespace stats

/// Level of the separated alternative for sample size n: one below the
/// test's projection level, so the perturbation is fully seen by it.
inline int separated_level(const WaveletBasis& basis, std::size_t n, double t)
{
  return std::max(level_for_rate(basis, n, t) - 1, basis.coarse_level());
}

/// Amplitude eps of 1 + eps 2^{-j(t+1/2)} sum_k b_k psi_jk whose projection
/// onto V_{j+1} lies at distance `target` from the coefficient ball.
inline double separation_amplitude(const WaveletBasis& basis, double t, int j, const BallSpec& null_spec, double target)
{
  if (!(target > 0.0)) return 0.0;
  const auto base = uniform_tree(basis, j + 1);
  const double d0 = std::sqrt(ball_distance_range(base, null_spec).near2);
  if (target <= d0) return 0.0;
  const double block = std::sqrt(target * target - d0 * d0) + null_spec.block_radius(j);
  return block * std::pow(2.0, j * t);
}

/// Builds the truth for one replication. Only `separated` specs with random
/// signs consume the generator.
inline DensityModel build_truth(const WaveletBasis& basis, const DensitySpec& spec, std::size_t n,
                                const InferenceConstants& k, Rng& rng)
{
  if (spec.kind == "uniform") {
    auto f = make_uniform(basis);
    return DensityModel(basis, f.tree(), { spec.id, INFINITY, 1.0 });
  }
  if (spec.kind == "sobolev") {
    SobolevOptions opts;
    opts.first_level = spec.first_level;
    opts.finest_level = spec.finest_level;
    auto f = make_sobolev_density(basis, BallSpec{ spec.s, spec.B }, spec.fill, spec.seed, opts);
    return DensityModel(basis, f.tree(), { spec.id, spec.s, sobolev_norm(f.tree(), spec.s) });
  }
  if (spec.kind == "separated") {
    const int j = separated_level(basis, n, spec.t);
    const double mult = spec.c_times_M ? spec.c * k.M : spec.c;
    const double target = mult * std::pow(static_cast<double>(n), -spec.t / (2.0 * spec.t + 0.5));
    const BallSpec null_spec{ spec.null_s, spec.null_B };
    const double eps = separation_amplitude(basis, spec.t, j, null_spec, target);
    std::vector<int> signs(std::size_t{ 1 } << j);
    Rng fixed(spec.seed);
    Rng& src = spec.random_signs ? rng : fixed;
    for (int& s : signs) s = src.sign();
    auto f = make_alternative(basis, spec.t, j, eps, signs);
    return DensityModel(basis, f.tree(), { spec.id, spec.t, sobolev_norm(f.tree(), spec.t) });
  }
  throw std::invalid_argument("unknown density kind: " + spec.kind);
}

/// Truths that do not vary across replications are built once.
class TruthCache
{
public:
  TruthCache(const WaveletBasis& basis, const DensitySpec& spec, std::size_t n, const InferenceConstants& k)
    : basis_(basis)
    , spec_(spec)
    , n_(n)
    , k_(k)
  {
    if (!(spec.kind == "separated" && spec.random_signs)) {
      Rng unused(0);
      fixed_.emplace(build_truth(basis, spec, n, k, unused));
    }
  }

  DensityModel get(Rng& rng) const { return fixed_ ? *fixed_ : build_truth(basis_, spec_, n_, k_, rng); }
  const std::optional<DensityModel>& fixed() const { return fixed_; }

private:
  WaveletBasis basis_;
  DensitySpec spec_;
  std::size_t n_;
  InferenceConstants k_;
  std::optional<DensityModel> fixed_;
};

/// Constants in force for a run: calibration table, then config overrides.
inline InferenceConstants resolve_constants(const ExperimentConfig& cfg, const std::optional<CalibrationTable>& table)
{
  InferenceConstants k = table ? table->constants() : InferenceConstants{};
  if (!table) k.z = 1.0 / std::sqrt(cfg.alpha);
  auto over = [&](const char* name, double& dst) {
    if (auto it = cfg.overrides.find(name); it != cfg.overrides.end()) dst = it->second;
  };
  over("kappa", k.kappa);
  over("cs", k.cs);
  over("z", k.z);
  over("L", k.L);
  over("Lprime", k.Lprime);
  over("M", k.M);
  over("Bprime", k.Bprime);
  return k;
}

namespace detail {

inline std::string format_short(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline ReportRow base_row(const ExperimentConfig& cfg, std::size_t n, const DensitySpec& spec)
{
  ReportRow row;
  row.scenario = to_string(cfg.scenario);
  row.n = n;
  row.density_id = spec.id;
  row.seed = cfg.seed;
  row.reps = cfg.reps;
  return row;
}

inline void label_row(ReportRow& row, const TruthCache& truth)
{
  if (const auto& f = truth.fixed()) {
    row.s_true = f->labels().claimed_s;
    row.B_true = f->labels().claimed_B;
  }
}

struct BallOutcome
{
  bool covered = false;
  double diameter = 0.0;
  double shat = NAN;
  double s_true = NAN;
  double B_true = NAN;
};

inline void summarize_balls(ReportRow& row, const std::vector<BallOutcome>& out)
{
  std::vector<bool> cov;
  std::vector<double> diam;
  std::size_t hits = 0;
  for (const auto& o : out) {
    cov.push_back(o.covered);
    diam.push_back(o.diameter);
    if (!std::isnan(o.shat)) {
      ++row.shat_histogram[format_short(o.shat)];
      if (std::abs(o.shat - o.s_true) < 1e-12) ++hits;
    }
  }
  row.coverage = stats::rate(cov);
  row.mean_diam = stats::mean(diam);
  row.sd_diam = stats::sd(diam);
  if (std::isnan(row.s_true) && !out.empty()) {
    row.s_true = out.front().s_true;
    row.B_true = out.front().B_true;
  }
  if (!row.shat_histogram.empty()) {
    std::size_t best = 0;
    for (const auto& [key, count] : row.shat_histogram) {
      if (count > best) {
        best = count;
        row.shat_mode = std::stod(key);
      }
    }
    row.hit_rate = static_cast<double>(hits) / static_cast<double>(out.size());
  }
}

} // namespace detail

inline RiskConfig risk_config(const ExperimentConfig& cfg, const InferenceConstants& k)
{
  RiskConfig rc;
  rc.r = cfg.r;
  rc.R = cfg.R;
  rc.alpha = cfg.alpha;
  rc.z = k.z;
  rc.kappa = k.kappa;
  rc.cs = k.cs;
  if (cfg.slack == "known_B") {
    rc.slack = SlackMode::known_B(cfg.B0, k.Bprime);
    rc.sup_bound = sup_bound(WaveletBasis::from_name(cfg.basis), cfg.r, cfg.B0);
  } else if (cfg.slack != "divergent") {
    throw std::invalid_argument("slack must be divergent or known_B");
  }
  return rc;
}

inline FullConfig full_config(const ExperimentConfig& cfg, const InferenceConstants& k)
{
  FullConfig fc;
  fc.r = cfg.r;
  fc.R = cfg.R;
  fc.B0 = cfg.B0;
  fc.alpha = cfg.alpha;
  fc.alphaprime = cfg.alphaprime;
  fc.constants = k;
  return fc;
}

/// Coverage and diameter of the risk ball (R < 2r) or of the grid-selected
/// ball (R > 2r), plus the selected-smoothness histogram for the latter.
inline std::vector<ReportRow> run_balls(const ExperimentConfig& cfg, const InferenceConstants& k)
{
  const auto basis = WaveletBasis::from_name(cfg.basis);
  const bool grid = cfg.R > 2.0 * cfg.r;
  std::vector<ReportRow> rows;
  for (const auto& spec : cfg.densities) {
    for (std::size_t n : cfg.n_grid) {
      const auto start = std::chrono::steady_clock::now();
      const TruthCache truth(basis, spec, n, k);
      auto out = replicate(cfg.reps, cfg.jobs, cfg.seed, [&](std::size_t, Rng& rng) {
        const auto f = truth.get(rng);
        const auto x = sample(f, n, rng);
        detail::BallOutcome o;
        o.s_true = f.labels().claimed_s;
        o.B_true = f.labels().claimed_B;
        ConfidenceBall ball;
        if (grid) {
          const auto res = full_confset_detail(basis, x, full_config(cfg, k));
          ball = res.ball;
          o.shat = res.selection.shat;
        } else {
          ball = risk_confset(basis, x, risk_config(cfg, k));
        }
        o.covered = contains(ball, f);
        o.diameter = ball.diameter();
        return o;
      });
      auto row = detail::base_row(cfg, n, spec);
      detail::label_row(row, truth);
      detail::summarize_balls(row, out);
      row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// L2 risk of the adaptive estimator on window [r, R]; rows carry the
/// log-log slope of mean error against n for their density.
inline std::vector<ReportRow> run_rate(const ExperimentConfig& cfg, const InferenceConstants& k)
{
  const auto basis = WaveletBasis::from_name(cfg.basis);
  std::vector<ReportRow> rows;
  for (const auto& spec : cfg.densities) {
    std::vector<double> lx, ly;
    const std::size_t first = rows.size();
    for (std::size_t n : cfg.n_grid) {
      const auto start = std::chrono::steady_clock::now();
      const TruthCache truth(basis, spec, n, k);
      const auto lcfg = LepskiConfig::for_sample_size(basis, n, cfg.r, cfg.R, k.kappa);
      auto errs = replicate(cfg.reps, cfg.jobs, cfg.seed, [&](std::size_t, Rng& rng) {
        const auto f = truth.get(rng);
        const auto x = sample(f, n, rng);
        const auto est = adaptive_estimator(basis, x, lcfg);
        const int j = std::max(est.jmax(), f.tree().jmax());
        return l2_dist(resize(est, j), resize(f.tree(), j));
      });
      auto row = detail::base_row(cfg, n, spec);
      detail::label_row(row, truth);
      row.mean_diam = stats::mean(errs);
      row.sd_diam = stats::sd(errs);
      row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(row.mean_diam));
      rows.push_back(std::move(row));
    }
    const auto fit = stats::ols(lx, ly);
    for (std::size_t i = first; i < rows.size(); ++i) {
      rows[i].slope = fit.slope;
      rows[i].slope_se = fit.slope_se;
    }
  }
  return rows;
}

/// Rejection frequency of the test of Sigma(null_s, null_B) against
/// smoothness r at each truth.
inline std::vector<ReportRow> run_tests(const ExperimentConfig& cfg, const InferenceConstants& k)
{
  const auto basis = WaveletBasis::from_name(cfg.basis);
  const BallSpec null_spec{ cfg.null_s, cfg.null_B };
  std::vector<ReportRow> rows;
  for (const auto& spec : cfg.densities) {
    for (std::size_t n : cfg.n_grid) {
      const auto start = std::chrono::steady_clock::now();
      const TruthCache truth(basis, spec, n, k);
      const double dn = default_dn(n);
      auto out = replicate(cfg.reps, cfg.jobs, cfg.seed, [&](std::size_t, Rng& rng) {
        const auto f = truth.get(rng);
        const auto x = sample(f, n, rng);
        return minimax_test(basis, x, null_spec, cfg.r, k.L, dn);
      });
      auto row = detail::base_row(cfg, n, spec);
      detail::label_row(row, truth);
      std::vector<bool> rej;
      std::vector<double> stat;
      for (const auto& v : out) {
        rej.push_back(v.reject);
        stat.push_back(v.statistic);
      }
      row.reject_rate = stats::rate(rej);
      row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// Power of the calibrated test against random-sign alternatives placed at
/// distance c M n^{-r/(2r+1/2)} from the null, for each c in the sweep.
inline std::vector<ReportRow> run_indistinguishability(const ExperimentConfig& cfg, const InferenceConstants& k)
{
  ExperimentConfig sweep = cfg;
  sweep.densities.clear();
  for (double c : cfg.c_grid) {
    DensitySpec d;
    d.id = "c=" + detail::format_short(c) + "M";
    d.kind = "separated";
    d.t = cfg.r;
    d.null_s = cfg.null_s;
    d.null_B = cfg.null_B;
    d.c = c;
    d.c_times_M = true;
    d.random_signs = true;
    sweep.densities.push_back(d);
  }
  return run_tests(sweep, k);
}

/// Power curve helper for calibration and tests: rejection rate at
/// separation c (absolute multiple of the rate) for one test setting.
inline double power_at(const WaveletBasis& basis, const BallSpec& null_spec, double t, double L, std::size_t n,
                       double c, std::size_t reps, unsigned jobs, std::uint64_t seed)
{
  DensitySpec d;
  d.kind = "separated";
  d.t = t;
  d.null_s = null_spec.s;
  d.null_B = null_spec.B;
  d.c = c;
  d.random_signs = true;
  const InferenceConstants k;
  const double dn = default_dn(n);
  auto out = replicate(reps, jobs, seed, [&](std::size_t, Rng& rng) {
    const auto f = build_truth(basis, d, n, k, rng);
    const auto x = sample(f, n, rng);
    return minimax_test(basis, x, null_spec, t, L, dn).reject;
  });
  return stats::rate(out);
}

inline CalibrationTable calibrate(const ExperimentConfig& cfg);

inline SimReport run(const ExperimentConfig& cfg, const std::optional<CalibrationTable>& table)
{
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto k = resolve_constants(cfg, table);
  SimReport report;
  switch (cfg.scenario) {
  case Scenario::coverage:
  case Scenario::grid_consistency: report.rows = run_balls(cfg, k); break;
  case Scenario::rate: report.rows = run_rate(cfg, k); break;
  case Scenario::test_errors: report.rows = run_tests(cfg, k); break;
  case Scenario::indistinguishability: report.rows = run_indistinguishability(cfg, k); break;
  case Scenario::calibrate: throw std::invalid_argument("use calibrate() for the calibrate scenario");
  }
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// The indistinguishability sweep as a standalone experiment: null
/// Sigma(2r, 1), alternatives of smoothness r.
inline SimReport indistinguishability_experiment(double r, const std::vector<double>& c_grid,
                                                 const std::vector<std::size_t>& n_grid, std::size_t reps,
                                                 std::uint64_t seed, const InferenceConstants& k, unsigned jobs = 1)
{
  ExperimentConfig cfg;
  cfg.scenario = Scenario::indistinguishability;
  cfg.r = r;
  cfg.R = 2.0 * r;
  cfg.null_s = 2.0 * r;
  cfg.null_B = 1.0;
  cfg.c_grid = c_grid;
  cfg.n_grid = n_grid;
  cfg.reps = reps;
  cfg.seed = seed;
  cfg.jobs = jobs;
  for (double c : c_grid)
    if (!(c >= 0.0)) throw std::invalid_argument("separation multipliers must be nonnegative");
  InferenceConstants kk = k;
  cfg.overrides = { { "L", kk.L }, { "M", kk.M } };
  return run(cfg, std::nullopt);
}

} // namespace confset

#include "confset/calibrate.hpp"
