#pragma once

// Densities on [0,1] held as coefficient trees with cached grid values and
// CDF, plus the constructions used as truths and as lower-bound
// alternatives, and the distance to a Sobolev-type coefficient ball.

#include "confset/rng.hpp"
#include "confset/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace confset {

/// Radius B ball at smoothness s: all f with sobolev_norm(f, s) <= B.
struct BallSpec
{
  double s = 1.0;
  double B = 1.0;

  void validate() const
  {
    if (!(s > 0.5)) throw std::domain_error("ball smoothness must exceed 1/2");
    if (!(B >= 1.0)) throw std::domain_error("ball radius must be at least 1");
  }

  /// Radius of the block constraint at `level`. The scaling block uses J0.
  double block_radius(int level) const { return B * std::pow(2.0, -level * s); }
};

struct DensityLabels
{
  std::string id;
  double claimed_s = std::numeric_limits<double>::quiet_NaN();
  double claimed_B = std::numeric_limits<double>::quiet_NaN();
};

class DensityModel
{
public:
  static constexpr double integral_tolerance = 1e-9;

  DensityModel(WaveletBasis basis, CoeffTree tree, DensityLabels labels = {})
    : basis_(std::move(basis))
    , tree_(std::move(tree))
    , labels_(std::move(labels))
  {
    check_tree_basis(basis_, tree_);
    grid_ = synth_grid(basis_, tree_);
    const double h = std::ldexp(1.0, -basis_.grid_depth());
    double total = 0.0;
    const double tol = 1e-12 * std::max(1.0, *std::max_element(grid_.begin(), grid_.end()));
    for (double& v : grid_) {
      if (v < 0.0) {
        if (v < -tol) throw std::domain_error("density is negative on the grid");
        v = 0.0;
      }
      total += v * h;
    }
    if (std::abs(total - 1.0) > integral_tolerance) throw std::domain_error("density does not integrate to one");
    cdf_.assign(grid_.size() + 1, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      acc += grid_[i] * h;
      cdf_[i + 1] = acc / total;
    }
    cdf_.back() = 1.0;
  }

  const WaveletBasis& basis() const { return basis_; }
  const CoeffTree& tree() const { return tree_; }
  const DensityLabels& labels() const { return labels_; }
  std::span<const double> grid_values() const { return grid_; }
  std::span<const double> cdf() const { return cdf_; }

  /// Piecewise-linear CDF through the cumulative grid masses.
  double cdf_at(double x) const
  {
    const double pos = std::ldexp(std::clamp(x, 0.0, 1.0), basis_.grid_depth());
    const auto cell = std::min(static_cast<std::size_t>(pos), grid_.size() - 1);
    const double frac = pos - static_cast<double>(cell);
    return cdf_[cell] + frac * (cdf_[cell + 1] - cdf_[cell]);
  }

private:
  WaveletBasis basis_;
  CoeffTree tree_;
  DensityLabels labels_;
  std::vector<double> grid_;
  std::vector<double> cdf_;
};

/// Tree of the constant density 1.
inline CoeffTree uniform_tree(const WaveletBasis& basis, int jmax)
{
  CoeffTree tree(basis.coarse_level(), jmax);
  const double c = 1.0 / std::sqrt(std::ldexp(1.0, basis.coarse_level()));
  for (double& v : tree.scaling()) v = c;
  return tree;
}

inline DensityModel make_uniform(const WaveletBasis& basis)
{
  return DensityModel(basis, uniform_tree(basis, basis.coarse_level() + 1), { "uniform", INFINITY, 1.0 });
}

/// Density from grid values via quadrature analysis at the finest level.
/// Exact for Haar; other bases approximate.
inline DensityModel make_from_grid(const WaveletBasis& basis, std::span<const double> values, DensityLabels labels = {})
{
  return DensityModel(basis, analyze_grid(basis, values, basis.max_level()), std::move(labels));
}

struct SobolevOptions
{
  int first_level = -1;  // defaults to J0
  int finest_level = -1; // defaults to G - 2
  double floor = 0.1;    // minimum grid value
};

/// Random member of the ball: coefficient magnitudes A 2^{-l(s+1/2)} with
/// random signs on levels [first, finest], so every level has weighted norm
/// A and the ball constraint is active at all of them. A starts at fill * B
/// and is reduced just enough to keep the density at or above the floor.
inline DensityModel make_sobolev_density(const WaveletBasis& basis, const BallSpec& spec, double fill,
                                         std::uint64_t seed, const SobolevOptions& opts = {})
{
  spec.validate();
  if (!(fill > 0.0 && fill <= 1.0)) throw std::domain_error("fill must lie in (0, 1]");
  const int first = opts.first_level < 0 ? basis.coarse_level() : opts.first_level;
  const int finest = opts.finest_level < 0 ? basis.max_level() - 2 : opts.finest_level;
  if (first < basis.coarse_level() || finest < first || finest >= basis.max_level())
    throw std::domain_error("invalid level range for sobolev density");

  Rng rng(seed);
  CoeffTree shape(basis.coarse_level(), finest + 1);
  for (int l = first; l <= finest; ++l) {
    const double mag = std::pow(2.0, -l * (spec.s + 0.5));
    for (double& v : shape.level(l)) v = mag * rng.sign();
  }
  const auto base = uniform_tree(basis, finest + 1);
  const auto shape_grid = synth_grid(basis, shape);
  const auto base_grid = synth_grid(basis, base);
  double limit = INFINITY;
  for (std::size_t i = 0; i < shape_grid.size(); ++i) {
    if (shape_grid[i] < 0.0) limit = std::min(limit, (base_grid[i] - opts.floor) / -shape_grid[i]);
  }
  double amplitude = fill * spec.B;
  if (amplitude > limit) amplitude = limit * (1.0 - 1e-9);
  if (!(amplitude >= 0.0)) throw std::domain_error("floor unreachable for this basis");

  CoeffTree tree = base;
  auto out = tree.coefficients();
  const auto sc = shape.coefficients();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += amplitude * sc[i];
  const double achieved = sobolev_norm(tree, spec.s);
  if (achieved > spec.B * (1.0 + 1e-12)) throw std::domain_error("scaling block alone exceeds the ball radius");
  return DensityModel(basis, std::move(tree), { "sobolev", spec.s, achieved });
}

namespace detail {

inline CoeffTree level_perturbation(const WaveletBasis& basis, double r, int j, double eps,
                                    std::span<const int> signs, int jmax)
{
  if (j < basis.coarse_level() || j >= basis.max_level()) throw std::domain_error("perturbation level out of range");
  if (signs.size() != (std::size_t{ 1 } << j)) throw std::domain_error("need one sign per translation");
  CoeffTree g(basis.coarse_level(), std::max(jmax, j + 1));
  const double mag = eps * std::pow(2.0, -j * (r + 0.5));
  auto block = g.level(j);
  for (std::size_t k = 0; k < block.size(); ++k) {
    if (signs[k] != 1 && signs[k] != -1) throw std::domain_error("signs must be +1 or -1");
    block[k] = mag * signs[k];
  }
  return g;
}

inline double grid_sup_abs(const WaveletBasis& basis, const CoeffTree& g)
{
  const auto values = synth_grid(basis, g, basis.resolving_depth(g.jmax()));
  double best = 0.0;
  for (double v : values) best = std::max(best, std::abs(v));
  return best;
}

} // namespace detail

/// 1 + eps 2^{-j(r+1/2)} sum_k signs_k psi_{jk}. The perturbation must stay
/// within 1/2 in sup norm so the result is at least 1/2.
inline DensityModel make_alternative(const WaveletBasis& basis, double r, int j, double eps, std::span<const int> signs)
{
  auto g = detail::level_perturbation(basis, r, j, eps, signs, j + 1);
  if (detail::grid_sup_abs(basis, g) > 0.5 + 1e-12) throw std::domain_error("alternative amplitude too large");
  auto tree = uniform_tree(basis, g.jmax());
  auto out = tree.coefficients();
  const auto gc = g.coefficients();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += gc[i];
  return DensityModel(basis, std::move(tree), { "alternative", r, NAN });
}

/// One stage f_m = f_{m-1} + eps 2^{-j(r+1/2)} sum_k signs_k psi_{jk} of the
/// nested-alternative construction. Levels must grow geometrically
/// (j >= (1 + 1/2r) j_prev) and the stage's sup-norm increment must not
/// exceed 2^{-(m+1)}.
inline DensityModel make_chain_alternative(const DensityModel& previous, int stage, double r, int j, double eps,
                                           std::span<const int> signs)
{
  if (stage < 1) throw std::domain_error("stage index starts at 1");
  const auto& basis = previous.basis();
  const int prev_level = previous.tree().finest_nonzero_level();
  if (prev_level >= basis.coarse_level()) {
    if (j <= prev_level) throw std::domain_error("stage level overlaps an existing level");
    if (static_cast<double>(j) < (1.0 + 1.0 / (2.0 * r)) * prev_level - 1e-12)
      throw std::domain_error("stage levels grow too slowly");
  }
  auto g = detail::level_perturbation(basis, r, j, eps, signs, previous.tree().jmax());
  if (detail::grid_sup_abs(basis, g) > std::ldexp(1.0, -(stage + 1)) + 1e-12)
    throw std::domain_error("stage increment exceeds its sup-norm budget");
  auto tree = resize(previous.tree(), g.jmax());
  auto out = tree.coefficients();
  const auto gc = g.coefficients();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += gc[i];
  return DensityModel(basis, std::move(tree), { "chain", r, NAN });
}

/// Squared distance from a block of norm `norm` to the centred ball of
/// radius `radius`, and the squared distance to the farthest point of it.
struct BlockRange
{
  double near2 = 0.0;
  double far2 = 0.0;
};

inline BlockRange block_range(double norm, double radius)
{
  const double gap = std::max(norm - radius, 0.0);
  return { gap * gap, (norm + radius) * (norm + radius) };
}

/// Euclidean projection onto the product of per-block balls
/// {2^{ls} ||g_l|| <= B}: each block is shrunk radially on its own, which is
/// exact because the max-constraint decouples across blocks.
inline CoeffTree project_to_ball(const CoeffTree& tree, const BallSpec& spec)
{
  spec.validate();
  CoeffTree out = tree;
  auto shrink = [](std::span<double> block, double radius) {
    double norm = 0.0;
    for (double v : block) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > radius) {
      const double factor = radius / norm;
      for (double& v : block) v *= factor;
    }
  };
  shrink(out.scaling(), spec.block_radius(tree.j0()));
  for (int l = tree.j0(); l < tree.jmax(); ++l) shrink(out.level(l), spec.block_radius(l));
  return out;
}

/// Range [near2, far2] of ||g - tree||^2 over the relaxed ball.
inline BlockRange ball_distance_range(const CoeffTree& tree, const BallSpec& spec)
{
  spec.validate();
  BlockRange total;
  auto add = [&](double norm2, double radius) {
    const auto r = block_range(std::sqrt(norm2), radius);
    total.near2 += r.near2;
    total.far2 += r.far2;
  };
  add(tree.scaling_norm2(), spec.block_radius(tree.j0()));
  for (int l = tree.j0(); l < tree.jmax(); ++l) add(tree.level_norm2(l), spec.block_radius(l));
  return total;
}

/// Distance from the V_Jn projection of `tree` to the coefficient ball.
/// Nonnegativity and unit mass are not imposed, so this is a lower bound on
/// the distance to the set of densities in the ball.
inline double dist_to_ball(const CoeffTree& tree, const BallSpec& spec, int jn)
{
  return std::sqrt(ball_distance_range(resize(tree, jn), spec).near2);
}

inline double dist_to_ball(const DensityModel& f, const BallSpec& spec, int jn)
{
  return dist_to_ball(f.tree(), spec, jn);
}

inline double sup_norm(const DensityModel& f)
{
  const auto g = f.grid_values();
  return *std::max_element(g.begin(), g.end());
}

/// n i.i.d. draws by inverting the piecewise-linear CDF (uniform within
/// each grid cell).
inline std::vector<double> sample(const DensityModel& f, std::size_t n, Rng& rng)
{
  if (n == 0) throw std::domain_error("sample size must be positive");
  const auto cdf = f.cdf();
  const double h = std::ldexp(1.0, -f.basis().grid_depth());
  const std::size_t cells = cdf.size() - 1;
  std::vector<double> out(n);
  for (double& x : out) {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u);
    auto cell = static_cast<std::size_t>(it - cdf.begin()) - 1;
    if (cell >= cells) cell = cells - 1;
    while (cell > 0 && cdf[cell + 1] <= cdf[cell]) --cell;
    const double width = cdf[cell + 1] - cdf[cell];
    const double frac = width > 0.0 ? std::clamp((u - cdf[cell]) / width, 0.0, 1.0 - 1e-12) : 0.5;
    x = (static_cast<double>(cell) + frac) * h;
  }
  return out;
}

inline std::vector<double> sample(const DensityModel& f, std::size_t n, std::uint64_t seed)
{
  Rng rng(seed);
  return sample(f, n, rng);
}

} // namespace confset
