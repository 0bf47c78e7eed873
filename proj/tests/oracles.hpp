#pragma once

// Slow, independent reference computations shared by the unit tests and the
// acceptance run.

#include "confset/density.hpp"
#include "confset/rng.hpp"
#include "confset/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

using namespace confset;

/// All basis values at x up to level jn, in tree order, by point evaluation.
inline std::vector<double> basis_values(const WaveletBasis& basis, int jn, double x)
{
  std::vector<double> out;
  const int j0 = basis.coarse_level();
  for (int k = 0; k < (1 << j0); ++k) out.push_back(basis.phi(k, x));
  for (int l = j0; l < jn; ++l)
    for (int k = 0; k < (1 << l); ++k) out.push_back(basis.psi(l, k, x));
  return out;
}

/// 2/(n(n-1)) sum_{i<j} sum_lk (psi_lk(X_i) - g_lk)(psi_lk(X_j) - g_lk);
/// g == nullptr gives Q.
inline double pairwise_t(const WaveletBasis& basis, const std::vector<double>& x, int jn, const CoeffTree* g)
{
  std::vector<std::vector<double>> v;
  for (double xi : x) {
    auto row = basis_values(basis, jn, xi);
    if (g)
      for (std::size_t i = 0; i < row.size(); ++i) row[i] -= g->coefficients()[i];
    v.push_back(std::move(row));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j)
      for (std::size_t m = 0; m < v[i].size(); ++m) acc += v[i][m] * v[j][m];
  const double n = static_cast<double>(x.size());
  return 2.0 * acc / (n * (n - 1.0));
}

/// Euclidean projection onto the ball of radius rho from the KKT condition
/// x = a / (1 + mu), mu found by bisection.
inline void kkt_project(std::span<double> a, double rho)
{
  double norm = 0.0;
  for (double v : a) norm += v * v;
  norm = std::sqrt(norm);
  if (norm <= rho) return;
  double lo = 0.0, hi = 1.0;
  while (norm / (1.0 + hi) > rho) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (norm / (1.0 + mid) > rho ? lo : hi) = mid;
  }
  for (double& v : a) v /= 1.0 + hi;
}

inline void project_blocks(CoeffTree& t, const BallSpec& spec)
{
  kkt_project(t.scaling(), spec.B * std::pow(2.0, -t.j0() * spec.s));
  for (int l = t.j0(); l < t.jmax(); ++l) kkt_project(t.level(l), spec.block_radius(l));
}

inline CoeffTree random_feasible(const CoeffTree& shape, const BallSpec& spec, Rng& rng, double scale)
{
  CoeffTree g(shape.j0(), shape.jmax());
  for (double& v : g.coefficients()) v = scale * (2.0 * rng.uniform() - 1.0);
  project_blocks(g, spec);
  return g;
}

/// Distance from a to the coefficient ball by projected gradient descent.
inline double pg_distance(const CoeffTree& a, const BallSpec& spec, std::uint64_t seed)
{
  Rng rng(seed);
  CoeffTree g = random_feasible(a, spec, rng, 0.01);
  for (int it = 0; it < 2000; ++it) {
    auto gc = g.coefficients();
    const auto ac = a.coefficients();
    for (std::size_t i = 0; i < gc.size(); ++i) gc[i] -= 0.6 * (gc[i] - ac[i]);
    project_blocks(g, spec);
  }
  return l2_dist(g, a);
}

/// min over the ball of |c + ||g - a||^2| by projected gradient descent on
/// its square from `restarts` random feasible starts.
inline double pg_inf_abs(const CoeffTree& a, double c, const BallSpec& spec, std::uint64_t seed, int restarts = 100)
{
  Rng rng(seed);
  double best = INFINITY;
  double scale = 0.0;
  for (double v : a.coefficients()) scale = std::max(scale, std::abs(v));
  for (int r = 0; r < restarts; ++r) {
    CoeffTree g = random_feasible(a, spec, rng, 2.0 * scale + 1.0);
    for (int it = 0; it < 3000; ++it) {
      const double d2 = std::pow(l2_dist(g, a), 2);
      const double h = c + d2;
      if (std::abs(h) < 1e-14) break;
      auto gc = g.coefficients();
      const auto ac = a.coefficients();
      // d/dg (h^2)/4 = h (g - a); step scaled so the move is stable
      const double step = 0.25 / (std::abs(h) + d2 + 1e-3);
      for (std::size_t i = 0; i < gc.size(); ++i) gc[i] -= step * h * (gc[i] - ac[i]);
      project_blocks(g, spec);
    }
    best = std::min(best, std::abs(c + std::pow(l2_dist(g, a), 2)));
  }
  return best;
}

} // namespace oracle
