#pragma once

// Linear wavelet projection estimators and the Lepski-type choice of the
// resolution level.

#include "confset/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace confset {

struct LepskiConfig
{
  double r = 1.0;
  double R = 2.0;
  double kappa = 1.0;
  int jmin = 1;
  int jmax = 1;

  void validate(const WaveletBasis& basis) const
  {
    if (!(r > 0.5 && r <= R)) throw std::domain_error("need 1/2 < r <= R");
    if (!(kappa > 0.0)) throw std::domain_error("kappa must be positive");
    if (jmin < basis.coarse_level() || jmin > jmax || jmax >= basis.max_level())
      throw std::domain_error("invalid Lepski level window");
  }

  /// Window 2^jmin ~ n^{1/(2R+1)}, 2^jmax ~ n^{1/(2r+1)}, clamped to
  /// [J0+1, G-2]. Rounding is outward-safe: ceil for jmin, floor for jmax.
  static LepskiConfig for_sample_size(const WaveletBasis& basis, std::size_t n, double r, double R, double kappa)
  {
    LepskiConfig cfg{ r, R, kappa, 0, 0 };
    const double lg = std::log2(static_cast<double>(std::max<std::size_t>(n, 2)));
    const int lo = basis.coarse_level() + 1;
    const int hi = basis.max_level() - 2;
    cfg.jmin = std::clamp(static_cast<int>(std::ceil(lg / (2.0 * R + 1.0) - 1e-12)), lo, hi);
    cfg.jmax = std::clamp(static_cast<int>(std::floor(lg / (2.0 * r + 1.0) + 1e-12)), lo, hi);
    cfg.jmin = std::min(cfg.jmin, cfg.jmax);
    cfg.validate(basis);
    return cfg;
  }
};

/// Empirical coefficients on V_j.
inline CoeffTree linear_estimator(const WaveletBasis& basis, std::span<const double> sample, int j)
{
  if (j < basis.coarse_level()) throw std::domain_error("level below the coarse level");
  return empirical_coeffs(basis, sample, j);
}

/// max(1, sup of the synthesized estimator on the grid).
inline double sup_norm_of(const WaveletBasis& basis, const CoeffTree& tree)
{
  const auto values = synth_grid(basis, tree, basis.resolving_depth(tree.jmax()));
  double best = 1.0;
  for (double v : values) best = std::max(best, v);
  return best;
}

inline double sup_norm_estimate(const WaveletBasis& basis, std::span<const double> sample, const LepskiConfig& cfg)
{
  return sup_norm_of(basis, linear_estimator(basis, sample, cfg.jmax));
}

struct LepskiFit
{
  CoeffTree estimate; // f_n(jbar), a tree on V_jbar
  int level = 0;
  double sup_estimate = 1.0;
};

namespace detail {

/// Smallest j in [jmin, jmax] with
///   sum_{m=j}^{l-1} ||a_m||^2 <= kappa * sup * 2^l / n   for all j < l <= jmax,
/// jmax when none qualifies. The left side is ||f_n(j) - f_n(l)||^2.
inline int lepski_level(std::span<const double> level_norm2, int j0, const LepskiConfig& cfg, double sup,
                        std::size_t n)
{
  const double scale = cfg.kappa * std::max(sup, 1.0) / static_cast<double>(n);
  for (int j = cfg.jmin; j < cfg.jmax; ++j) {
    double gap = 0.0;
    bool ok = true;
    for (int l = j + 1; l <= cfg.jmax && ok; ++l) {
      gap += level_norm2[l - 1 - j0];
      ok = gap <= scale * std::ldexp(1.0, l);
    }
    if (ok) return j;
  }
  return cfg.jmax;
}

} // namespace detail

inline LepskiFit lepski_fit(const WaveletBasis& basis, std::span<const double> sample, const LepskiConfig& cfg)
{
  if (sample.size() < 2) throw std::domain_error("Lepski selection needs at least two observations");
  cfg.validate(basis);
  const auto full = linear_estimator(basis, sample, cfg.jmax);
  const double sup = sup_norm_of(basis, full);
  std::vector<double> norms;
  for (int l = full.j0(); l < full.jmax(); ++l) norms.push_back(full.level_norm2(l));
  const int level = detail::lepski_level(norms, full.j0(), cfg, sup, sample.size());
  return { project(full, level), level, sup };
}

inline int select_level(const WaveletBasis& basis, std::span<const double> sample, const LepskiConfig& cfg)
{
  return lepski_fit(basis, sample, cfg).level;
}

inline CoeffTree adaptive_estimator(const WaveletBasis& basis, std::span<const double> sample, const LepskiConfig& cfg)
{
  return lepski_fit(basis, sample, cfg).estimate;
}

/// Bias-variance balancing level of a known tree: the smallest j with
/// ||f - P_j f||^2 <= 2^j / n.
inline int oracle_level(const CoeffTree& f, std::size_t n)
{
  double tail = 0.0;
  std::vector<double> tails(static_cast<std::size_t>(f.jmax() - f.j0() + 1), 0.0);
  for (int l = f.jmax() - 1; l >= f.j0(); --l) {
    tail += f.level_norm2(l);
    tails[static_cast<std::size_t>(l - f.j0())] = tail;
  }
  for (int j = f.j0(); j <= f.jmax(); ++j) {
    if (tails[static_cast<std::size_t>(j - f.j0())] <= std::ldexp(1.0, j) / static_cast<double>(n)) return j;
  }
  return f.jmax();
}

} // namespace confset
