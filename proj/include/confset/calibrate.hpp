#pragma once

// Monte Carlo calibration of kappa, Cs, z, L, M, B' and L'. Each constant is
// the smallest value meeting its error target on designated truths, taken
// as a maximum over every configuration and sample size in the plan.
//
// Plan keys (all optional, under "calibration" in the config):
//   windows          [[r, R], ...]             Lepski windows for kappa
//   kappa_n          [n, ...]                  sample sizes for kappa
//   risk             [{r, R, slack, B0, truths: [DensitySpec...]}, ...]
//   tests            [{s, t, B}, ...]          test settings for L and M
//   test_n           [n, ...]
//   bprime           [{r, R, B0}, ...]
//   two_class        {r, s, B}
//   truth_seeds      [seed, ...]

#include "confset/sim.hpp"

namespace confset {

namespace detail {

inline std::vector<std::size_t> n_list(const json& plan, const char* key, const std::vector<std::size_t>& fallback)
{
  return plan.contains(key) ? plan.at(key).get<std::vector<std::size_t>>() : fallback;
}

inline DensitySpec sobolev_spec(const std::string& id, double s, double B, std::uint64_t seed, int first_level)
{
  DensitySpec d;
  d.id = id;
  d.kind = "sobolev";
  d.s = s;
  d.B = B;
  d.fill = 1.0;
  d.seed = seed;
  d.first_level = first_level;
  return d;
}

/// Uniform plus ball-filling members of Sigma(s, B) whose active levels
/// start at J0, J0+2 and J0+4, one per seed.
inline std::vector<DensitySpec> extremal_members(const WaveletBasis& basis, double s, double B,
                                                 const std::vector<std::uint64_t>& seeds)
{
  std::vector<DensitySpec> out{ DensitySpec{} };
  for (int shift : { 0, 2, 4 }) {
    for (auto seed : seeds) {
      const int first = basis.coarse_level() + shift;
      out.push_back(sobolev_spec("sobolev_s" + format_short(s) + "_l" + std::to_string(first) + "_" +
                                   std::to_string(seed),
                                 s, B, seed, first));
    }
  }
  return out;
}

inline std::string join_ids(const std::vector<DensitySpec>& specs)
{
  std::string out;
  for (const auto& d : specs) {
    if (!out.empty()) out += ';';
    out += d.id;
  }
  return out;
}

struct Tracker
{
  double value = -INFINITY;
  std::string where;

  void offer(double v, const std::string& at)
  {
    if (v > value) {
      value = v;
      where = at;
    }
  }
};

} // namespace detail

/// kappa needed under f for one sample: the smallest threshold at which the
/// Lepski rule stops at jmin.
inline double kappa_needed(const WaveletBasis& basis, std::span<const double> x, const LepskiConfig& cfg)
{
  const auto full = linear_estimator(basis, x, cfg.jmax);
  const double sup = sup_norm_of(basis, full);
  const double n = static_cast<double>(x.size());
  double gap = 0.0, need = 0.0;
  for (int l = cfg.jmin + 1; l <= cfg.jmax; ++l) {
    gap += full.level_norm2(l - 1);
    need = std::max(need, gap / (sup * std::ldexp(1.0, l) / n));
  }
  return need;
}

inline CalibrationTable calibrate(const ExperimentConfig& cfg)
{
  cfg.validate();
  const auto basis = WaveletBasis::from_name(cfg.basis);
  const json& plan = cfg.calibration;
  const std::size_t reps = cfg.reps;
  const unsigned jobs = cfg.jobs;
  const std::vector<std::uint64_t> seeds =
    plan.contains("truth_seeds") ? plan.at("truth_seeds").get<std::vector<std::uint64_t>>()
                                 : std::vector<std::uint64_t>{ 1, 2 };
  // Independent streams per constant so adding one does not perturb another.
  auto seed_for = [&](std::uint64_t tag) { return stream_seed(cfg.seed, tag); };

  CalibrationTable table;
  table.config = to_json(cfg);
  InferenceConstants k = resolve_constants(cfg, std::nullopt);

  // kappa: overshoot of jmin under the uniform density at most 5%.
  {
    std::vector<std::pair<double, double>> windows{ { cfg.r, cfg.R } };
    if (plan.contains("windows")) windows = plan.at("windows").get<std::vector<std::pair<double, double>>>();
    const auto ns = detail::n_list(plan, "kappa_n", cfg.n_grid);
    const auto f = make_uniform(basis);
    detail::Tracker best;
    for (auto [r, R] : windows) {
      for (std::size_t n : ns) {
        const auto lcfg = LepskiConfig::for_sample_size(basis, n, r, R, 1.0);
        auto need = replicate(reps, jobs, seed_for(1), [&](std::size_t, Rng& rng) {
          return kappa_needed(basis, sample(f, n, rng), lcfg);
        });
        best.offer(stats::upper_quantile(need, 0.95), "window [" + detail::format_short(r) + "," +
                                                        detail::format_short(R) + "] n=" + std::to_string(n));
      }
    }
    k.kappa = std::max(best.value, 1e-6);
    table.entries["kappa"] = { k.kappa, { "uniform", ns, reps, 0.95, "binding at " + best.where } };
  }

  struct RiskEntry
  {
    double r, R;
    std::string slack;
    double B0;
    std::vector<DensitySpec> truths;
  };
  std::vector<RiskEntry> risk;
  if (plan.contains("risk")) {
    for (const auto& e : plan.at("risk")) {
      RiskEntry re{ e.at("r").get<double>(), e.at("R").get<double>(), e.value("slack", std::string("divergent")),
                    e.value("B0", cfg.B0), {} };
      if (e.contains("truths"))
        for (const auto& d : e.at("truths")) re.truths.push_back(density_spec_from_json(d));
      else
        re.truths = detail::extremal_members(basis, re.r, re.B0, seeds);
      risk.push_back(std::move(re));
    }
  } else {
    risk.push_back({ cfg.r, cfg.R, cfg.slack, cfg.B0, detail::extremal_members(basis, cfg.r, cfg.B0, seeds) });
  }

  // Cs: the degenerate term's variance, Var(U_n(f)) n(n-1) / (2^Jn ||f||_inf^2),
  // with a margin for the Monte Carlo error of a variance estimate.
  {
    detail::Tracker best;
    std::string ids;
    for (const auto& re : risk) {
      ids += (ids.empty() ? "" : ";") + detail::join_ids(re.truths);
      for (std::size_t n : cfg.n_grid) {
        const std::size_t half = n - n / 2;
        const int jn = level_for_rate(basis, half, re.r);
        for (const auto& spec : re.truths) {
          Rng unused(0);
          const auto f = build_truth(basis, spec, half, k, unused);
          const double sup = sup_norm(f);
          auto u = replicate(reps, jobs, seed_for(2), [&](std::size_t, Rng& rng) {
            const auto state = build_quad_state(basis, sample(f, half, rng), jn);
            return u_stat_centered(state, f.tree());
          });
          const double var = std::pow(stats::sd(u), 2);
          const double hn = static_cast<double>(half);
          best.offer(var * hn * (hn - 1.0) / (std::ldexp(1.0, jn) * sup * sup), spec.id + " n=" + std::to_string(n));
        }
      }
    }
    const double margin = 1.0 + 3.0 * std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(reps - 1, 1)));
    k.cs = std::max(best.value * margin, 1e-6);
    table.entries["cs"] = { k.cs, { ids, cfg.n_grid, reps, 1.0, "max variance ratio x" +
                                                                  detail::format_short(margin) + " at " + best.where } };
  }

  // z: (1 - alpha) quantile of (||P(f - fhat)||^2 - U_n) / tau.
  {
    detail::Tracker best;
    std::string ids;
    for (const auto& re : risk) {
      ids += (ids.empty() ? "" : ";") + detail::join_ids(re.truths);
      ExperimentConfig sub = cfg;
      sub.r = re.r;
      sub.R = re.R;
      sub.slack = re.slack;
      sub.B0 = re.B0;
      auto rc = risk_config(sub, k);
      rc.z = 1.0;
      for (std::size_t n : cfg.n_grid) {
        for (const auto& spec : re.truths) {
          Rng unused(0);
          const auto f = build_truth(basis, spec, n, k, unused);
          auto need = replicate(reps, jobs, seed_for(3), [&](std::size_t, Rng& rng) {
            const auto x = sample(f, n, rng);
            const auto res = risk_confset_detail(basis, x, rc);
            const auto diff = resize(f.tree(), std::max(f.tree().jmax(), res.jn));
            const double target = l2_dist(project(diff, res.jn), resize(res.ball.center, res.jn));
            return (target * target - res.u_stat) / res.tau;
          });
          best.offer(stats::upper_quantile(need, 1.0 - cfg.alpha), spec.id + " n=" + std::to_string(n));
        }
      }
    }
    k.z = std::max(best.value, 1e-6);
    table.entries["z"] = { k.z, { ids, cfg.n_grid, reps, 1.0 - cfg.alpha, "binding at " + best.where } };
  }

  struct TestEntry
  {
    double s, t, B;
  };
  std::vector<TestEntry> tests;
  if (plan.contains("tests"))
    for (const auto& e : plan.at("tests"))
      tests.push_back({ e.at("s").get<double>(), e.at("t").get<double>(), e.value("B", cfg.null_B) });
  else
    tests.push_back({ cfg.null_s, cfg.r, cfg.null_B });
  const auto test_n = detail::n_list(plan, "test_n", cfg.n_grid);

  // L: type-I error at most alpha/2 under ball-filling null members.
  {
    detail::Tracker best;
    std::string ids;
    for (const auto& te : tests) {
      const BallSpec null_spec{ te.s, te.B };
      const auto nulls = detail::extremal_members(basis, te.s, te.B, seeds);
      ids += (ids.empty() ? "" : ";") + detail::join_ids(nulls);
      for (std::size_t n : test_n) {
        const double scale = test_threshold(n, te.s, te.t, 1.0, default_dn(n));
        for (const auto& spec : nulls) {
          Rng unused(0);
          const auto f = build_truth(basis, spec, n, k, unused);
          auto need = replicate(reps, jobs, seed_for(4), [&](std::size_t, Rng& rng) {
            return minimax_test(basis, sample(f, n, rng), null_spec, te.t, 1.0, 1.0).statistic / scale;
          });
          best.offer(stats::upper_quantile(need, 1.0 - cfg.alpha / 2.0),
                     spec.id + " (s=" + detail::format_short(te.s) + ",t=" + detail::format_short(te.t) +
                       ") n=" + std::to_string(n));
        }
      }
    }
    k.L = std::max(best.value, 1e-6);
    table.entries["L"] = { k.L, { ids, test_n, reps, 1.0 - cfg.alpha / 2.0, "binding at " + best.where } };
  }

  // M: smallest separation multiple (grid step 1/8) with power >= 1 - alpha/2
  // against random-sign alternatives.
  {
    detail::Tracker best;
    for (const auto& te : tests) {
      const BallSpec null_spec{ te.s, te.B };
      for (std::size_t n : test_n) {
        auto passes = [&](int step) {
          try {
            return power_at(basis, null_spec, te.t, k.L, n, step / 8.0, reps, jobs, seed_for(5)) >=
                   1.0 - cfg.alpha / 2.0;
          } catch (const std::domain_error&) {
            return false;
          }
        };
        int lo = 0, hi = 1;
        while (!passes(hi)) {
          lo = hi;
          hi *= 2;
          if (hi > 1024) throw std::runtime_error("M search did not converge");
        }
        while (hi - lo > 1) {
          const int mid = (lo + hi) / 2;
          (passes(mid) ? hi : lo) = mid;
        }
        best.offer(hi / 8.0, "(s=" + detail::format_short(te.s) + ",t=" + detail::format_short(te.t) +
                               ",B=" + detail::format_short(te.B) + ") n=" + std::to_string(n));
      }
    }
    k.M = best.value;
    table.entries["M"] = { k.M, { "random-sign alternatives", test_n, reps, 1.0 - cfg.alpha / 2.0,
                                  "binding at " + best.where } };
  }

  // B': 99th percentile of ||fhat||_{r,2} under Sigma(r, B0)-filling truths.
  if (plan.contains("bprime")) {
    detail::Tracker best;
    std::string ids;
    for (const auto& e : plan.at("bprime")) {
      const double r = e.at("r").get<double>(), R = e.at("R").get<double>();
      const double B0 = e.value("B0", cfg.B0);
      const auto truths = detail::extremal_members(basis, r, B0, seeds);
      ids += (ids.empty() ? "" : ";") + detail::join_ids(truths);
      for (std::size_t n : cfg.n_grid) {
        const std::size_t half = n / 2;
        const auto lcfg = LepskiConfig::for_sample_size(basis, half, r, R, k.kappa);
        for (const auto& spec : truths) {
          Rng unused(0);
          const auto f = build_truth(basis, spec, n, k, unused);
          auto norms = replicate(reps, jobs, seed_for(6), [&](std::size_t, Rng& rng) {
            return sobolev_norm(adaptive_estimator(basis, sample(f, half, rng), lcfg), r);
          });
          best.offer(stats::upper_quantile(norms, 0.99), spec.id + " n=" + std::to_string(n));
        }
      }
    }
    k.Bprime = best.value;
    table.entries["Bprime"] = { k.Bprime, { ids, cfg.n_grid, reps, 0.99, "binding at " + best.where } };
  }

  // L': the two-class radius covers ||fhat - f|| with probability 1 - alpha.
  if (plan.contains("two_class")) {
    const auto& e = plan.at("two_class");
    TwoClassConfig tc;
    tc.r = e.at("r").get<double>();
    tc.s = e.at("s").get<double>();
    tc.B = e.value("B", 1.0);
    tc.L = k.L;
    tc.kappa = k.kappa;
    tc.Lprime = 1.0;
    auto truths = detail::extremal_members(basis, tc.s, tc.B, seeds);
    const auto rough = detail::extremal_members(basis, tc.r, tc.B, seeds);
    truths.insert(truths.end(), rough.begin() + 1, rough.end());
    detail::Tracker best;
    for (std::size_t n : cfg.n_grid) {
      for (const auto& spec : truths) {
        Rng unused(0);
        const auto f = build_truth(basis, spec, n, k, unused);
        auto need = replicate(reps, jobs, seed_for(7), [&](std::size_t, Rng& rng) {
          const auto res = two_class_confset_detail(basis, sample(f, n, rng), tc);
          const int j = std::max(res.ball.center.jmax(), f.tree().jmax());
          return l2_dist(resize(res.ball.center, j), resize(f.tree(), j)) / res.ball.radius;
        });
        best.offer(stats::upper_quantile(need, 1.0 - cfg.alpha), spec.id + " n=" + std::to_string(n));
      }
    }
    k.Lprime = best.value;
    table.entries["Lprime"] = { k.Lprime, { detail::join_ids(truths), cfg.n_grid, reps, 1.0 - cfg.alpha,
                                            "binding at " + best.where } };
  }

  table.validate();
  return table;
}

} // namespace confset
