#pragma once

// Minimax goodness-of-fit test against a Sobolev ball, the grid-of-tests
// smoothness selector, and the confidence-ball constructions built on them.

#include "confset/density.hpp"
#include "confset/estimator.hpp"
#include "confset/quad_stat.hpp"
#include "confset/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace confset {

/// Constants the theory only asserts to exist. Defaults are the theoretical
/// fallbacks (Chebyshev z = 1/sqrt(alpha)); shipped values come from
/// Monte Carlo calibration.
struct InferenceConstants
{
  double kappa = 1.0;   // Lepski threshold
  double cs = 1.0;      // degenerate-term variance constant
  double z = 4.47213595499958; // 1/sqrt(0.05)
  double L = 1.0;       // test threshold
  double Lprime = 1.0;  // two-class radius
  double M = 3.0;       // separation multiplier
  double Bprime = 2.0;  // high-probability bound on ||fhat||_{r,2}
};

struct TestVerdict
{
  bool reject = false;
  double statistic = 0.0;
  double threshold = 0.0;
  int jn = 0;

  bool operator==(const TestVerdict&) const = default;
};

enum class BallTag { two_class, risk, grid };

inline std::string to_string(BallTag tag)
{
  switch (tag) {
  case BallTag::two_class: return "two_class";
  case BallTag::risk: return "risk";
  case BallTag::grid: return "grid";
  }
  return "risk";
}

inline BallTag ball_tag_from_string(const std::string& s)
{
  if (s == "two_class") return BallTag::two_class;
  if (s == "risk") return BallTag::risk;
  if (s == "grid") return BallTag::grid;
  throw std::invalid_argument("unknown confidence ball tag: " + s);
}

struct ConfidenceBall
{
  CoeffTree center;
  double radius = 0.0;
  int level_used = 0;
  BallTag meta = BallTag::risk;

  double diameter() const { return 2.0 * radius; }
  bool operator==(const ConfidenceBall&) const = default;
};

/// Closed-ball membership of f, compared in V_J for the finer of the two
/// trees (the coarser one is zero-padded).
inline bool contains(const ConfidenceBall& ball, const CoeffTree& f)
{
  const int j = std::max(ball.center.jmax(), f.jmax());
  return l2_dist(resize(ball.center, j), resize(f, j)) <= ball.radius;
}

inline bool contains(const ConfidenceBall& ball, const DensityModel& f) { return contains(ball, f.tree()); }

/// sqrt(2 log log max(n, e^e)); grows without bound but slower than any
/// power of log n.
inline double default_dn(std::size_t n)
{
  const double ee = std::exp(std::numbers::e);
  return std::sqrt(2.0 * std::log(std::log(std::max(static_cast<double>(n), ee))));
}

/// L d_n max(n^{-2s/(2s+1)}, n^{-2t/(2t+1/2)}).
inline double test_threshold(std::size_t n, double s, double t, double L, double dn)
{
  const double nn = static_cast<double>(n);
  return L * dn * std::max(std::pow(nn, -2.0 * s / (2.0 * s + 1.0)), std::pow(nn, -2.0 * t / (2.0 * t + 0.5)));
}

/// Rejects f in Sigma(s, B) when the infimum of |T_n| over the ball exceeds
/// the threshold; t <= s is the alternative smoothness.
inline TestVerdict minimax_test(const WaveletBasis& basis, std::span<const double> sample, const BallSpec& null_spec,
                                double t, double L, double dn)
{
  null_spec.validate();
  if (!(t > 0.0 && t <= null_spec.s)) throw std::invalid_argument("alternative smoothness must not exceed the null's");
  const int jn = level_for_rate(basis, sample.size(), t);
  const auto state = build_quad_state(basis, sample, jn);
  TestVerdict v;
  v.jn = jn;
  v.statistic = inf_abs_t_stat(state, null_spec);
  v.threshold = test_threshold(sample.size(), null_spec.s, t, L, dn);
  v.reject = v.statistic > v.threshold;
  return v;
}

/// Smoothness grid r, 2r, 4r, ... below R, the radius B0 of the largest
/// model and the separation multiplier M.
struct GridSchedule
{
  std::vector<double> values;
  double B0 = 1.0;
  double M = 1.0;

  static GridSchedule make(double r, double R, double B0, double M)
  {
    if (!(r > 0.5 && R > 2.0 * r)) throw std::invalid_argument("grid needs 1/2 < r and R > 2r");
    if (!(B0 >= 1.0) || !(M > 0.0)) throw std::invalid_argument("grid needs B0 >= 1 and M > 0");
    GridSchedule g;
    g.B0 = B0;
    g.M = M;
    for (double s = r; s < R; s *= 2.0) g.values.push_back(s);
    return g;
  }

  std::size_t size() const { return values.size(); }

  /// M n^{-s/(2s+1/2)}.
  double rho(double s, std::size_t n) const { return M * std::pow(static_cast<double>(n), -s / (2.0 * s + 0.5)); }
};

struct GridSelection
{
  double shat = 0.0;
  std::size_t index = 0;
  std::vector<TestVerdict> verdicts;
};

/// Tests H0: Sigma(s_{i+1}, B0) against smoothness s_i for i = 1, 2, ...
/// and stops at the first rejection; s_N when none rejects.
inline GridSelection grid_select(const WaveletBasis& basis, std::span<const double> sample, const GridSchedule& sched,
                                 double L, double dn)
{
  if (sched.size() < 2) throw std::invalid_argument("grid needs at least two smoothness values");
  GridSelection out;
  for (std::size_t i = 0; i + 1 < sched.size(); ++i) {
    const BallSpec null_spec{ sched.values[i + 1], sched.B0 };
    out.verdicts.push_back(minimax_test(basis, sample, null_spec, sched.values[i], L, dn));
    if (out.verdicts.back().reject) {
      out.shat = sched.values[i];
      out.index = i;
      return out;
    }
  }
  out.index = sched.size() - 1;
  out.shat = sched.values.back();
  return out;
}

/// sup over Sigma(r, 1) of ||P_J h - h||^2 is at most c(1) 2^{-2Jr}, with
/// c(b) = b^2 / (1 - 2^{-2r}).
inline double tail_constant(double b, double r) { return b * b / (1.0 - std::pow(2.0, -2.0 * r)); }

/// Sup-norm bound valid on Sigma(r, B0) for this basis.
inline double sup_bound(const WaveletBasis& basis, double r, double B0)
{
  if (!(r > 0.5)) throw std::domain_error("sup-norm bound needs r > 1/2");
  const int j0 = basis.coarse_level();
  const double q = std::pow(2.0, -(r - 0.5));
  return B0 * (basis.phi_overlap() * std::pow(2.0, j0 * (0.5 - r)) + basis.psi_overlap() * std::pow(q, j0) / (1.0 - q));
}

struct SlackMode
{
  enum class Kind { divergent, known_B } kind = Kind::divergent;
  double B0 = 1.0;
  double Bprime = 1.0;

  static SlackMode divergent() { return {}; }
  static SlackMode known_B(double B0, double Bprime) { return { Kind::known_B, B0, Bprime }; }
};

struct RiskConfig
{
  double r = 1.0;
  double R = 1.5;
  double alpha = 0.05;
  double z = 0.0;                  // <= 0 selects 1/sqrt(alpha)
  double kappa = 1.0;
  double cs = 1.0;
  SlackMode slack;
  std::optional<double> sup_bound; // known U; otherwise the plug-in
};

/// Everything the risk ball is built from; the harness uses the pieces.
struct RiskResult
{
  ConfidenceBall ball;
  int jn = 0;
  std::size_t n_half = 0;
  double u_stat = 0.0;
  double tau = 0.0;
  double slack = 0.0;
  double sup = 1.0;
  double z = 0.0;
};

/// Sample-split risk ball: centre from the first half, U-statistic risk
/// estimate from the second, radius^2 = z tau + max(U, 0) + slack.
inline RiskResult risk_confset_detail(const WaveletBasis& basis, std::span<const double> sample, const RiskConfig& cfg)
{
  if (cfg.slack.kind == SlackMode::Kind::divergent && !(cfg.R < 2.0 * cfg.r))
    throw std::invalid_argument("the divergent-slack risk ball needs R < 2r");
  if (sample.size() < 4) throw std::domain_error("risk ball needs at least four observations");
  const std::size_t half = sample.size() / 2;
  const auto first = sample.first(half);
  const auto second = sample.subspan(half);

  const auto lcfg = LepskiConfig::for_sample_size(basis, first.size(), cfg.r, cfg.R, cfg.kappa);
  auto fit = lepski_fit(basis, first, lcfg);

  RiskResult out;
  out.n_half = second.size();
  out.jn = level_for_rate(basis, out.n_half, cfg.r);
  const auto state = build_quad_state(basis, second, out.jn);
  out.u_stat = u_stat_centered(state, fit.estimate);
  out.sup = cfg.sup_bound ? *cfg.sup_bound : fit.sup_estimate;
  const double u_plus = std::max(out.u_stat, 0.0);
  out.tau = tau_n(out.sup, out.jn, out.n_half, u_plus, cfg.cs);
  const double decay = std::pow(2.0, -2.0 * out.jn * cfg.r);
  if (cfg.slack.kind == SlackMode::Kind::divergent)
    out.slack = std::log(static_cast<double>(out.n_half)) * decay;
  else
    out.slack = (tail_constant(cfg.slack.B0, cfg.r) + tail_constant(cfg.slack.Bprime, cfg.r)) * decay;
  out.z = cfg.z > 0.0 ? cfg.z : 1.0 / std::sqrt(cfg.alpha);
  const double radius2 = out.z * out.tau + u_plus + out.slack;
  out.ball = ConfidenceBall{ std::move(fit.estimate), std::sqrt(std::max(radius2, 0.0)), fit.level, BallTag::risk };
  return out;
}

inline ConfidenceBall risk_confset(const WaveletBasis& basis, std::span<const double> sample, const RiskConfig& cfg)
{
  return risk_confset_detail(basis, sample, cfg).ball;
}

struct TwoClassConfig
{
  double r = 1.0;
  double s = 3.0;
  double B = 1.0;
  double M = 3.0;
  double Lprime = 1.0;
  double L = 1.0;
  double dn = 0.0;   // <= 0 selects default_dn(n)
  double kappa = 1.0;
};

struct TwoClassResult
{
  ConfidenceBall ball;
  TestVerdict verdict;
};

/// Ball around the adaptive estimator with radius L' n^{-s/(2s+1)} when the
/// test keeps Sigma(s, B) and L' n^{-r/(2r+1)} when it rejects.
inline TwoClassResult two_class_confset_detail(const WaveletBasis& basis, std::span<const double> sample,
                                               const TwoClassConfig& cfg)
{
  if (!(cfg.s > 2.0 * cfg.r)) throw std::invalid_argument("two-class ball needs s > 2r; use the risk ball");
  const double dn = cfg.dn > 0.0 ? cfg.dn : default_dn(sample.size());
  TwoClassResult out;
  out.verdict = minimax_test(basis, sample, BallSpec{ cfg.s, cfg.B }, cfg.r, cfg.L, dn);
  const auto lcfg = LepskiConfig::for_sample_size(basis, sample.size(), cfg.r, cfg.s, cfg.kappa);
  auto fit = lepski_fit(basis, sample, lcfg);
  const double n = static_cast<double>(sample.size());
  const double smooth = out.verdict.reject ? cfg.r : cfg.s;
  out.ball = ConfidenceBall{ std::move(fit.estimate), cfg.Lprime * std::pow(n, -smooth / (2.0 * smooth + 1.0)),
                             fit.level, BallTag::two_class };
  return out;
}

inline ConfidenceBall two_class_confset(const WaveletBasis& basis, std::span<const double> sample,
                                        const TwoClassConfig& cfg)
{
  return two_class_confset_detail(basis, sample, cfg).ball;
}

struct FullConfig
{
  double r = 1.0;
  double R = 5.0;
  double B0 = 2.0;
  double alpha = 0.05;
  double alphaprime = 0.05;
  InferenceConstants constants;
};

struct FullResult
{
  ConfidenceBall ball;
  GridSelection selection;
  RiskResult risk;
};

/// Grid selection of the smoothness, then the known-radius risk ball on the
/// window [shat, min(2 shat, R)] at level alpha/2.
inline FullResult full_confset_detail(const WaveletBasis& basis, std::span<const double> sample, const FullConfig& cfg)
{
  if (!(cfg.R > 2.0 * cfg.r)) throw std::invalid_argument("R <= 2r: use the risk ball directly");
  const auto& k = cfg.constants;
  const auto sched = GridSchedule::make(cfg.r, cfg.R, cfg.B0, k.M);
  FullResult out;
  out.selection = grid_select(basis, sample, sched, k.L, default_dn(sample.size()));
  const double shat = out.selection.shat;

  RiskConfig rc;
  rc.r = shat;
  rc.R = std::min(2.0 * shat, cfg.R);
  rc.alpha = cfg.alpha / 2.0;
  rc.z = k.z * std::numbers::sqrt2;
  rc.kappa = k.kappa;
  rc.cs = k.cs;
  rc.slack = SlackMode::known_B(cfg.B0, k.Bprime);
  rc.sup_bound = sup_bound(basis, shat, cfg.B0);
  out.risk = risk_confset_detail(basis, sample, rc);
  out.ball = out.risk.ball;
  out.ball.meta = BallTag::grid;
  return out;
}

inline ConfidenceBall full_confset(const WaveletBasis& basis, std::span<const double> sample, const FullConfig& cfg)
{
  return full_confset_detail(basis, sample, cfg).ball;
}

} // namespace confset
