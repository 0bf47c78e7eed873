#include <gtest/gtest.h>

#include "confset/density.hpp"
#include "confset/estimator.hpp"
#include "confset/io.hpp"
#include "confset/report.hpp"

#include <cmath>
#include <vector>

using namespace confset;

namespace {

const WaveletBasis& haar()
{
  static const auto b = WaveletBasis::haar(14);
  return b;
}

double calibrated_kappa()
{
  const auto t = calibration_from_json(read_json_file(std::string(CONFSET_DATA_DIR) + "/calibration.json"));
  return t.constants().kappa;
}

double l2_error(const CoeffTree& est, const CoeffTree& f)
{
  const int j = std::max(est.jmax(), f.jmax());
  return l2_dist(resize(est, j), resize(f, j));
}

} // namespace

TEST(LepskiWindow, RoundingAndClamping)
{
  const auto cfg = LepskiConfig::for_sample_size(haar(), 4096, 1.0, 2.0, 1.0);
  EXPECT_EQ(cfg.jmin, 3); // ceil(12 / 5)
  EXPECT_EQ(cfg.jmax, 4); // floor(12 / 3)
  const auto tiny = LepskiConfig::for_sample_size(haar(), 4, 1.0, 2.0, 1.0);
  EXPECT_EQ(tiny.jmin, 1);
  EXPECT_EQ(tiny.jmax, 1);
  const auto huge = LepskiConfig::for_sample_size(WaveletBasis::haar(8), std::size_t{ 1 } << 30, 0.6, 0.6, 1.0);
  EXPECT_EQ(huge.jmax, 6);
  EXPECT_LE(huge.jmin, huge.jmax);
  EXPECT_THROW((LepskiConfig{ 1.0, 0.9, 1.0, 1, 2 }.validate(haar())), std::domain_error);
  EXPECT_THROW((LepskiConfig{ 1.0, 2.0, 0.0, 1, 2 }.validate(haar())), std::domain_error);
  EXPECT_THROW((LepskiConfig{ 1.0, 2.0, 1.0, 3, 2 }.validate(haar())), std::domain_error);
}

TEST(LinearEstimator, CoarsestIsScalingOnly)
{
  const auto x = sample(make_uniform(haar()), 100, 1);
  const auto t = linear_estimator(haar(), x, haar().coarse_level());
  EXPECT_EQ(t.coefficients().size(), 1u);
  EXPECT_DOUBLE_EQ(t.scaling()[0], 1.0);
}

TEST(LinearEstimator, Nested)
{
  const auto f = make_sobolev_density(haar(), { 1.0, 3.0 }, 1.0, 2, { 2, -1, 0.1 });
  const auto x = sample(f, 2000, 3);
  const auto fine = linear_estimator(haar(), x, 7);
  for (int j = 1; j < 7; ++j) EXPECT_LT(l2_dist(project(fine, j), linear_estimator(haar(), x, j)), 1e-12);
}

TEST(LinearEstimator, UniformLargeSample)
{
  const auto x = sample(make_uniform(haar()), 100000, 4);
  const auto t = linear_estimator(haar(), x, 6);
  EXPECT_LT(l2_dist(t, uniform_tree(haar(), 6)), 0.05);
}

TEST(SupNormEstimate, FloorAndConcentration)
{
  const auto cfg = LepskiConfig::for_sample_size(haar(), 100000, 1.0, 2.0, 1.0);
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const double s = sup_norm_estimate(haar(), sample(make_uniform(haar()), 100000, seed), cfg);
    EXPECT_GE(s, 1.0);
    inside += s <= 1.2;
  }
  EXPECT_GE(inside, 99);
  // all mass in one cell: the estimate is the resolution 2^jmax
  std::vector<double> x(50, 0.3);
  EXPECT_NEAR(sup_norm_estimate(haar(), x, cfg), std::ldexp(1.0, cfg.jmax), 1e-9);
  std::vector<double> spread{ 0.1, 0.6 };
  EXPECT_GE(sup_norm_estimate(haar(), spread, LepskiConfig{ 1.0, 1.0, 1.0, 1, 1 }), 1.0);
}

TEST(SelectLevel, TrivialCases)
{
  const auto x = sample(make_uniform(haar()), 1000, 5);
  EXPECT_EQ(select_level(haar(), x, LepskiConfig{ 1.0, 2.0, 1.0, 3, 3 }), 3);
  EXPECT_EQ(select_level(haar(), x, LepskiConfig{ 1.0, 2.0, 1e12, 2, 6 }), 2);
  EXPECT_EQ(select_level(haar(), x, LepskiConfig{ 1.0, 2.0, 1e-12, 2, 6 }), 6);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto y = sample(make_uniform(haar()), 500, seed);
    const int j = select_level(haar(), y, LepskiConfig{ 1.0, 2.0, 0.5, 2, 6 });
    EXPECT_GE(j, 2);
    EXPECT_LE(j, 6);
  }
  EXPECT_EQ(adaptive_estimator(haar(), x, LepskiConfig{ 1.0, 2.0, 1e12, 2, 6 }).jmax(), 2);
}

TEST(SelectLevel, MonotoneInKappa)
{
  const auto f = make_sobolev_density(haar(), { 1.0, 4.0 }, 1.0, 2, { 2, -1, 0.1 });
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = sample(f, 4096, seed);
    int prev = 100;
    for (double kappa : { 0.01, 0.1, 0.5, 1.0, 2.0, 8.0, 64.0 }) {
      const int j = select_level(haar(), x, LepskiConfig::for_sample_size(haar(), 4096, 0.6, 3.0, kappa));
      EXPECT_LE(j, prev);
      prev = j;
    }
  }
}

TEST(SelectLevel, MatchesDirectDefinition)
{
  const auto f = make_sobolev_density(haar(), { 1.0, 4.0 }, 1.0, 4, { 2, -1, 0.1 });
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = sample(f, 2048, seed);
    const auto cfg = LepskiConfig::for_sample_size(haar(), 2048, 0.6, 3.0, 0.7);
    const double sup = sup_norm_estimate(haar(), x, cfg);
    int expect = cfg.jmax;
    for (int j = cfg.jmin; j < cfg.jmax; ++j) {
      bool ok = true;
      for (int l = j + 1; l <= cfg.jmax; ++l) {
        const double d = l2_dist(resize(linear_estimator(haar(), x, j), l), linear_estimator(haar(), x, l));
        ok = ok && d * d <= cfg.kappa * sup * std::ldexp(1.0, l) / 2048.0;
      }
      if (ok) {
        expect = j;
        break;
      }
    }
    EXPECT_EQ(select_level(haar(), x, cfg), expect);
  }
}

TEST(OracleLevel, BalancesBiasAndVariance)
{
  CoeffTree t = uniform_tree(haar(), 8);
  for (int l = 0; l < 8; ++l) t.level(l)[0] = std::pow(2.0, -1.5 * l);
  // tail after level j is sum_{l >= j} 2^{-3l}
  const std::size_t n = 1000;
  const int j = oracle_level(t, n);
  double tail = 0.0;
  for (int l = j; l < 8; ++l) tail += std::pow(2.0, -3.0 * l);
  EXPECT_LE(tail, std::ldexp(1.0, j) / n);
  double prev = tail + std::pow(2.0, -3.0 * (j - 1));
  EXPECT_GT(prev, std::ldexp(1.0, j - 1) / n);
}

TEST(Calibrated, UniformSelectsNearJmin)
{
  const double kappa = calibrated_kappa();
  const std::size_t n = 4096;
  const auto cfg = LepskiConfig::for_sample_size(haar(), n, 0.8, 1.5, kappa);
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed)
    ok += select_level(haar(), sample(make_uniform(haar()), n, 1000 + seed), cfg) <= cfg.jmin + 1;
  EXPECT_GE(ok, 475);
}

TEST(Calibrated, OvershootRareAndErrorNearRate)
{
  const double kappa = calibrated_kappa();
  const std::size_t n = 16384;
  for (double s : { 1.0, 2.0 }) {
    const auto f = make_sobolev_density(haar(), { s, 1.0 }, 1.0, 31);
    const int jstar = oracle_level(f.tree(), n);
    const auto cfg = LepskiConfig::for_sample_size(haar(), n, 0.6, 3.0, kappa);
    const double rate = std::pow(static_cast<double>(n), -s / (2.0 * s + 1.0));
    int over = 0, within = 0, below = 0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
      const auto fit = lepski_fit(haar(), sample(f, n, 2000 + seed), cfg);
      if (fit.level > jstar) {
        ++over;
      } else {
        ++below;
        within += l2_error(fit.estimate, f.tree()) <= 5.0 * rate;
      }
    }
    EXPECT_LE(over, 25) << "s=" << s;
    EXPECT_EQ(within, below) << "s=" << s;
  }
}
