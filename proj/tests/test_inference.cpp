#include <gtest/gtest.h>

#include "confset/sim.hpp"

#include <cmath>
#include <vector>

using namespace confset;

namespace {

const WaveletBasis& haar()
{
  static const auto b = WaveletBasis::haar(14);
  return b;
}

InferenceConstants calibrated()
{
  return calibration_from_json(read_json_file(std::string(CONFSET_DATA_DIR) + "/calibration.json")).constants();
}

} // namespace

TEST(Threshold, Arithmetic)
{
  EXPECT_NEAR(test_threshold(1024, 2.0, 1.0, 1.0, 1.0), std::ldexp(1.0, -8), 1e-16);
  // the larger of the two rates wins
  EXPECT_NEAR(test_threshold(1024, 1.0, 1.0, 2.0, 1.5), 3.0 * std::pow(1024.0, -2.0 / 3.0), 1e-15);
  EXPECT_NEAR(default_dn(4), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(default_dn(100000), std::sqrt(2.0 * std::log(std::log(100000.0))), 1e-15);
}

TEST(MinimaxTest, VerdictConsistency)
{
  const auto f = make_alternative(haar(), 1.0, 3, 0.5, std::vector<int>(8, 1));
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const auto x = sample(f, 1024, rng);
    const auto v = minimax_test(haar(), x, { 2.0, 1.0 }, 1.0, 0.3 + 0.05 * rep, 1.0);
    EXPECT_EQ(v.reject, v.statistic > v.threshold);
    EXPECT_EQ(v.jn, 4);
    EXPECT_GE(v.statistic, 0.0);
  }
  EXPECT_THROW(minimax_test(haar(), sample(f, 100, rng), { 1.0, 1.0 }, 1.5, 1.0, 1.0), std::invalid_argument);
}

TEST(MinimaxTest, StatisticIsInfimum)
{
  Rng rng(2);
  const auto x = sample(make_uniform(haar()), 512, rng);
  const BallSpec spec{ 2.0, 1.0 };
  const auto v = minimax_test(haar(), x, spec, 1.0, 1.0, 1.0);
  EXPECT_EQ(v.statistic, inf_abs_t_stat(build_quad_state(haar(), x, v.jn), spec));
}

TEST(GridScheduleTest, Construction)
{
  const auto g = GridSchedule::make(1.0, 5.0, 2.0, 3.0);
  EXPECT_EQ(g.values, (std::vector<double>{ 1.0, 2.0, 4.0 }));
  const auto g2 = GridSchedule::make(0.75, 2.0, 1.0, 1.0);
  EXPECT_EQ(g2.values, (std::vector<double>{ 0.75, 1.5 }));
  EXPECT_THROW(GridSchedule::make(1.0, 2.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(GridSchedule::make(1.0, 5.0, 0.5, 1.0), std::invalid_argument);
  EXPECT_NEAR(g.rho(2.0, 4096), 3.0 * std::pow(4096.0, -2.0 / 4.5), 1e-15);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_EQ(g.values[i], 2.0 * g.values[i - 1]);
}

TEST(GridSelect, TwoPointGridIsOneTest)
{
  const auto sched = GridSchedule::make(1.0, 3.0, 1.0, 3.0);
  ASSERT_EQ(sched.size(), 2u);
  Rng rng(3);
  for (double eps : { 0.0, 0.5, 1.0 }) {
    const auto f = make_alternative(haar(), 1.0, 4, eps, std::vector<int>(16, -1));
    const auto x = sample(f, 4096, rng);
    const auto sel = grid_select(haar(), x, sched, 0.5, 1.0);
    const auto v = minimax_test(haar(), x, { 2.0, 1.0 }, 1.0, 0.5, 1.0);
    ASSERT_EQ(sel.verdicts.size(), 1u);
    EXPECT_EQ(sel.verdicts[0], v);
    EXPECT_EQ(sel.shat, v.reject ? 1.0 : 2.0);
  }
}

TEST(GridSelect, StopsAtFirstRejection)
{
  const auto sched = GridSchedule::make(1.0, 5.0, 1.0, 3.0);
  const auto rough = make_alternative(haar(), 1.0, 3, 2.0, std::vector<int>(8, 1));
  const auto all = grid_select(haar(), sample(rough, 2048, 4), sched, 1e-9, 1.0);
  EXPECT_EQ(all.shat, 1.0);
  EXPECT_EQ(all.verdicts.size(), 1u);
  const auto none = grid_select(haar(), sample(make_uniform(haar()), 2048, 4), sched, 1e9, 1.0);
  EXPECT_EQ(none.shat, 4.0);
  EXPECT_EQ(none.verdicts.size(), 2u);
}

TEST(Contains, Conventions)
{
  const auto f = make_sobolev_density(haar(), { 1.0, 2.0 }, 1.0, 5, { 1, 6, 0.1 });
  ConfidenceBall ball{ f.tree(), 0.0, 3, BallTag::risk };
  EXPECT_TRUE(contains(ball, f));
  ball.center = uniform_tree(haar(), 2);
  EXPECT_FALSE(contains(ball, f));
  // the coarse centre is zero padded to the truth's levels; boundary counts
  ball.radius = l2_dist(resize(ball.center, f.tree().jmax()), f.tree());
  EXPECT_TRUE(contains(ball, f));
  ball.radius = std::nextafter(ball.radius, 0.0);
  EXPECT_FALSE(contains(ball, f));
  EXPECT_EQ(ConfidenceBall({ {}, 1.5, 0, BallTag::grid }).diameter(), 3.0);
}

TEST(RiskBall, RadiusFormulaAndSplitting)
{
  const auto f = make_sobolev_density(haar(), { 1.0, 2.0 }, 1.0, 6, { 1, -1, 0.1 });
  const auto x = sample(f, 4096, 7);
  RiskConfig cfg;
  cfg.r = 0.8;
  cfg.R = 1.5;
  cfg.kappa = 0.7;
  cfg.cs = 1.3;
  const auto res = risk_confset_detail(haar(), x, cfg);
  const std::span<const double> all(x);
  const auto lcfg = LepskiConfig::for_sample_size(haar(), 2048, 0.8, 1.5, 0.7);
  const auto fit = lepski_fit(haar(), all.first(2048), lcfg);
  EXPECT_EQ(res.ball.center, fit.estimate);
  EXPECT_EQ(res.ball.level_used, fit.level);
  EXPECT_EQ(res.jn, level_for_rate(haar(), 2048, 0.8));
  const auto state = build_quad_state(haar(), all.subspan(2048), res.jn);
  EXPECT_DOUBLE_EQ(res.u_stat, u_stat_centered(state, fit.estimate));
  const double up = std::max(res.u_stat, 0.0);
  const double tau = tau_n(fit.sup_estimate, res.jn, 2048, up, 1.3);
  const double slack = std::log(2048.0) * std::pow(2.0, -2.0 * res.jn * 0.8);
  EXPECT_DOUBLE_EQ(res.z, 1.0 / std::sqrt(0.05));
  EXPECT_NEAR(res.ball.radius, std::sqrt(res.z * tau + up + slack), 1e-15);
  EXPECT_EQ(res.ball.meta, BallTag::risk);
}

TEST(RiskBall, KnownRadiusSlack)
{
  const auto x = sample(make_uniform(haar()), 2000, 8);
  RiskConfig cfg;
  cfg.r = 1.0;
  cfg.R = 3.0;
  cfg.z = 2.0;
  cfg.slack = SlackMode::known_B(2.0, 3.0);
  cfg.sup_bound = 5.0;
  const auto res = risk_confset_detail(haar(), x, cfg);
  const double decay = std::pow(2.0, -2.0 * res.jn);
  EXPECT_NEAR(res.slack, (4.0 + 9.0) / 0.75 * decay, 1e-15);
  EXPECT_EQ(res.sup, 5.0);
  EXPECT_EQ(res.z, 2.0);
}

TEST(RiskBall, NegativeUStatIsClamped)
{
  // a truth equal to the centre's span makes U_n fluctuate around zero
  int negatives = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto x = sample(make_uniform(haar()), 1024, seed);
    const auto res = risk_confset_detail(haar(), x, RiskConfig{ 0.8, 1.5, 0.05, 0.0, 1.0, 1.0, {}, {} });
    if (res.u_stat < 0.0) {
      ++negatives;
      EXPECT_NEAR(res.ball.radius, std::sqrt(res.z * res.tau + res.slack), 1e-15);
      EXPECT_NEAR(res.tau, tau_n(res.sup, res.jn, res.n_half, 0.0, 1.0), 1e-15);
    }
    EXPECT_GT(res.ball.radius, 0.0);
  }
  EXPECT_GT(negatives, 0);
}

TEST(RiskBall, Preconditions)
{
  const auto x = sample(make_uniform(haar()), 256, 9);
  EXPECT_THROW(risk_confset(haar(), x, RiskConfig{ 1.0, 2.0, 0.05, 0.0, 1.0, 1.0, {}, {} }), std::invalid_argument);
  EXPECT_NO_THROW(risk_confset(haar(), x, RiskConfig{ 1.0, 2.0, 0.05, 0.0, 1.0, 1.0, SlackMode::known_B(1, 1), {} }));
}

TEST(TwoClassBall, RadiusCases)
{
  const auto x = sample(make_uniform(haar()), 4096, 10);
  TwoClassConfig cfg;
  cfg.r = 1.0;
  cfg.s = 2.5;
  cfg.Lprime = 2.0;
  cfg.L = 1e-12; // forces rejection
  const auto rej = two_class_confset_detail(haar(), x, cfg);
  EXPECT_TRUE(rej.verdict.reject);
  EXPECT_NEAR(rej.ball.radius, 2.0 * std::pow(4096.0, -1.0 / 3.0), 1e-15);
  cfg.L = 1e12;
  const auto acc = two_class_confset_detail(haar(), x, cfg);
  EXPECT_FALSE(acc.verdict.reject);
  EXPECT_NEAR(acc.ball.radius, 2.0 * std::pow(4096.0, -2.5 / 6.0), 1e-15);
  EXPECT_EQ(acc.ball.meta, BallTag::two_class);
  EXPECT_EQ(acc.ball.center, rej.ball.center);
  cfg.s = 2.0;
  EXPECT_THROW(two_class_confset(haar(), x, cfg), std::invalid_argument);
}

TEST(FullBall, DeterministicAndTagged)
{
  const auto f = make_sobolev_density(haar(), { 4.0, 2.0 }, 1.0, 3, { 1, 8, 0.1 });
  const auto x = sample(f, 8192, 11);
  FullConfig cfg;
  cfg.r = 1.0;
  cfg.R = 5.0;
  cfg.B0 = 2.0;
  const auto a = full_confset_detail(haar(), x, cfg);
  const auto b = full_confset_detail(haar(), x, cfg);
  EXPECT_EQ(a.ball, b.ball);
  EXPECT_EQ(a.ball.meta, BallTag::grid);
  EXPECT_EQ(a.risk.z, cfg.constants.z * std::sqrt(2.0));
  EXPECT_EQ(a.risk.sup, sup_bound(haar(), a.selection.shat, 2.0));
  cfg.R = 2.0;
  EXPECT_THROW(full_confset(haar(), x, cfg), std::invalid_argument);
}

TEST(FullBall, TwoPointGridMatchesTwoClassSelection)
{
  // with grid {r, 2r} the selection is the two-class pipeline's single test
  FullConfig cfg;
  cfg.r = 1.0;
  cfg.R = 2.5;
  cfg.B0 = 1.0;
  cfg.constants.L = 0.8;
  TwoClassConfig tc;
  tc.r = 1.0;
  tc.s = 2.0 + 1e-9;
  tc.L = 0.8;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = make_alternative(haar(), 1.0, 4, 0.3 * seed, std::vector<int>(16, 1));
    const auto x = sample(f, 4096, seed);
    const auto full = full_confset_detail(haar(), x, cfg);
    const auto v = minimax_test(haar(), x, { 2.0, 1.0 }, 1.0, 0.8, default_dn(4096));
    EXPECT_EQ(full.selection.shat, v.reject ? 1.0 : 2.0);
  }
}

TEST(SupBound, HaarValue)
{
  // Haar: one scaling function and one wavelet per level overlap each point
  const double q = std::pow(2.0, -0.5);
  EXPECT_NEAR(sup_bound(haar(), 1.0, 3.0), 3.0 * (1.0 + 1.0 / (1.0 - q)), 1e-14);
  EXPECT_THROW(sup_bound(haar(), 0.5, 1.0), std::domain_error);
  // the bound dominates members of the ball
  const auto f = make_sobolev_density(haar(), { 1.0, 3.0 }, 1.0, 2, { 3, -1, 0.1 });
  EXPECT_LE(sup_norm(f), sup_bound(haar(), 1.0, 3.0));
}

TEST(Serialization, VerdictAndBall)
{
  const TestVerdict v{ true, 0.125, 0.0625, 5 };
  EXPECT_EQ(verdict_from_json(json::parse(to_json(v).dump())), v);
  const auto f = make_sobolev_density(haar(), { 1.0, 2.0 }, 1.0, 3, { 1, 5, 0.1 });
  const ConfidenceBall b{ f.tree(), 0.1 + 1e-17, 4, BallTag::two_class };
  EXPECT_EQ(ball_from_json(json::parse(to_json(b).dump())), b);
  for (auto tag : { BallTag::two_class, BallTag::risk, BallTag::grid })
    EXPECT_EQ(ball_tag_from_string(to_string(tag)), tag);
  EXPECT_THROW(ball_tag_from_string("square"), std::invalid_argument);
}

TEST(Calibrated, TestErrorsAtFixedN)
{
  const auto k = calibrated();
  const std::size_t n = 4096;
  const BallSpec null_spec{ 2.0, 1.0 };
  const auto f0 = make_uniform(haar());
  int rejections = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed)
    rejections += minimax_test(haar(), sample(f0, n, 7000 + seed), null_spec, 1.0, k.L, default_dn(n)).reject;
  EXPECT_LE(rejections, 25);
  // separation 3 rho_n with rho_n = M n^{-t/(2t+1/2)}
  const double power = power_at(haar(), null_spec, 1.0, k.L, n, 3.0 * k.M, 500, 1, 77);
  EXPECT_GE(power, 0.95);
}

TEST(Calibrated, GridSelectsSmoothClass)
{
  const auto k = calibrated();
  const std::size_t n = 16384;
  const double B0 = 4.0;
  const auto f = make_sobolev_density(haar(), { 4.0, B0 }, 1.0, 17, { 2, -1, 0.1 });
  const auto sched = GridSchedule::make(1.0, 5.0, B0, k.M);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed)
    hits += grid_select(haar(), sample(f, n, 9000 + seed), sched, k.L, default_dn(n)).shat == 4.0;
  EXPECT_GE(hits, 270);
}

TEST(Calibrated, TwoClassKeepsSmallRadiusForSmoothTruth)
{
  const auto k = calibrated();
  const std::size_t n = 4096;
  TwoClassConfig cfg;
  cfg.r = 1.0;
  cfg.s = 2.5;
  cfg.L = k.L;
  cfg.Lprime = k.Lprime;
  cfg.kappa = k.kappa;
  const auto f = make_sobolev_density(haar(), { 2.5, 1.0 }, 1.0, 8);
  const double small = k.Lprime * std::pow(double(n), -2.5 / 6.0);
  int kept = 0, covered = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto ball = two_class_confset(haar(), sample(f, n, 400 + seed), cfg);
    kept += ball.radius == small;
    covered += contains(ball, f);
  }
  EXPECT_GE(kept, 475);
  EXPECT_GE(covered, 460);
}
