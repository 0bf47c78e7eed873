#pragma once

// Degenerate second-order U-statistics of the projection kernel, computed
// from per-coefficient sums in O(n 2^J) instead of over all pairs.
//
// With S_lk = sum_i psi_lk(X_i) and b = sum_i sum_lk psi_lk(X_i)^2,
//
//     Q = 2/(n(n-1)) sum_{i<j} sum_lk psi_lk(X_i) psi_lk(X_j)
//       = (sum_lk S_lk^2 - b) / (n(n-1)),
//
// and for any g in V_J, T_n(g) = Q - 2<g, a> + ||g||^2 = c + ||g - a||^2
// with a = S/n and c = Q - ||a||^2.

#include "confset/density.hpp"
#include "confset/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>

namespace confset {

struct QuadState
{
  int jn = 0;
  CoeffTree a_hat;
  double Q = 0.0;
  double b_sum = 0.0;
  std::size_t n = 0;

  /// Q - ||a||^2, the part of T_n(g) that does not depend on g.
  double offset() const { return Q - a_hat.norm2(); }
};

inline QuadState build_quad_state(const WaveletBasis& basis, std::span<const double> sample, int jn)
{
  if (sample.size() < 2) throw std::domain_error("U-statistic needs at least two observations");
  CoeffTree sums(basis.coarse_level(), jn);
  check_tree_basis(basis, sums);
  auto s = sums.coefficients();
  double b = 0.0;
  for (double x : sample) {
    double own = 0.0;
    visit_tree_basis(basis, jn, basis.cell_of(x), [&](std::size_t i, double v) {
      s[i] += v;
      own += v * v;
    });
    b += own;
  }
  const double n = static_cast<double>(sample.size());
  double ss = 0.0;
  for (double v : s) ss += v * v;
  QuadState state;
  state.jn = jn;
  state.n = sample.size();
  state.b_sum = b;
  state.Q = (ss - b) / (n * (n - 1.0));
  for (double& v : s) v /= n;
  state.a_hat = std::move(sums);
  return state;
}

namespace detail {

inline CoeffTree fit_to(const QuadState& state, const CoeffTree& g)
{
  if (g.j0() != state.a_hat.j0()) throw std::domain_error("coefficient tree shape mismatch");
  return resize(g, state.jn);
}

} // namespace detail

/// T_n(g). Trees coarser than the state are zero-padded; finer ones are
/// rejected.
inline double t_stat(const QuadState& state, const CoeffTree& g)
{
  if (g.jmax() > state.jn) throw std::domain_error("g must lie in V_Jn");
  const auto gg = detail::fit_to(state, g);
  return state.Q - 2.0 * inner(gg, state.a_hat) + gg.norm2();
}

/// inf over the coefficient ball of |T_n(g)|. As g ranges over the product
/// of block balls, ||g - a||^2 sweeps exactly [d^2, D^2], so the infimum of
/// |c + ||g - a||^2| has a closed form.
inline double inf_abs_t_stat(const QuadState& state, const BallSpec& spec)
{
  const double c = state.offset();
  const auto range = ball_distance_range(state.a_hat, spec);
  if (c + range.near2 >= 0.0) return c + range.near2;
  if (c + range.far2 >= 0.0) return 0.0;
  return -(c + range.far2);
}

/// U_n(fhat) = T_n(P_Jn fhat); unbiased for ||P_Jn(f - fhat)||^2 when fhat
/// is independent of the sample behind `state`.
inline double u_stat_centered(const QuadState& state, const CoeffTree& fhat)
{
  if (fhat.j0() != state.a_hat.j0()) throw std::domain_error("coefficient tree shape mismatch");
  return t_stat(state, resize(fhat, state.jn));
}

/// sqrt(Cs 2^Jn U^2 / (n(n-1)) + 4 U proj_err2 / n).
inline double tau_n(double supnorm, int jn, std::size_t n, double proj_err2, double cs)
{
  if (supnorm < 0.0 || proj_err2 < 0.0 || cs < 0.0) throw std::domain_error("tau_n inputs must be nonnegative");
  if (n < 2) throw std::domain_error("tau_n needs n >= 2");
  const double nn = static_cast<double>(n);
  const double first = cs * std::ldexp(1.0, jn) * supnorm * supnorm / (nn * (nn - 1.0));
  const double second = 4.0 * supnorm * proj_err2 / nn;
  return std::sqrt(first + second);
}

/// Jn with 2^Jn ~ n^{1/(2t + 1/2)}, rounded to nearest and kept inside
/// [J0+1, G-1].
inline int level_for_rate(const WaveletBasis& basis, std::size_t n, double t)
{
  if (!(t > 0.0)) throw std::domain_error("smoothness must be positive");
  const double lg = std::log2(static_cast<double>(std::max<std::size_t>(n, 2)));
  const int j = static_cast<int>(std::lround(lg / (2.0 * t + 0.5)));
  return std::clamp(j, basis.coarse_level() + 1, basis.max_level() - 1);
}

} // namespace confset
