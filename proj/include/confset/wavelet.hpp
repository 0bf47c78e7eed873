#pragma once

// Orthonormal wavelet bases on [0,1] and the coefficient-tree representation
// every other module works in.
//
// Functions are represented in the multiresolution form
//
//     f = sum_k a_k phi_{J0,k} + sum_{l=J0}^{Jmax-1} sum_k c_{lk} psi_{lk},
//
// with 2^l periodized functions per level. Point evaluation snaps x to the
// dyadic grid of 2^G cells and reads tabulated mother functions, so every
// value is a deterministic table lookup.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace confset {

enum class Family { haar, daubechies };

namespace detail {

/// Orthonormal Daubechies lowpass filters (sum = sqrt 2), extremal phase.
inline std::vector<double> daubechies_filter(int order)
{
  switch (order) {
    case 2:
      return { 0.48296291314453414337, 0.83651630373780790557,
               0.22414386804201338102, -0.12940952255126038117 };
    case 3:
      return { 0.33267055295008261600, 0.80689150931109257650,
               0.45987750211849157010, -0.13501102001025458870,
               -0.08544127388202666169, 0.03522629188570953660 };
    case 4:
      return { 0.23037781330889650086, 0.71484657055291564709,
               0.63088076792985890788, -0.02798376941685985422,
               -0.18703481171909308408, 0.03084138183556076363,
               0.03288301166688519973, -0.01059740178506903211 };
    default:
      throw std::domain_error("daubechies order must be 2, 3 or 4");
  }
}

/// Values of the scaling function at the integers 0..S: the eigenvector of
/// the refinement matrix for eigenvalue 1, normalized to sum to one.
inline std::vector<double> scaling_at_integers(const std::vector<double>& h)
{
  const int S = static_cast<int>(h.size()) - 1;
  const int m = S - 1; // unknowns phi(1)..phi(S-1); phi(0) = phi(S) = 0
  std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
  for (int row = 0; row < m; ++row) {
    const int x = row + 1;
    for (int col = 0; col < m; ++col) {
      const int y = col + 1;
      const int k = 2 * x - y;
      double v = (k >= 0 && k <= S) ? std::sqrt(2.0) * h[k] : 0.0;
      if (row == col) v -= 1.0;
      a[row][col] = v;
    }
  }
  // The system is rank deficient by one; replace the last row by sum = 1.
  std::fill(a[m - 1].begin(), a[m - 1].end(), 1.0);
  for (int row = 0; row < m - 1; ++row) a[row][m] = 0.0;
  a[m - 1][m] = 1.0;

  for (int col = 0; col < m; ++col) {
    int pivot = col;
    for (int row = col + 1; row < m; ++row)
      if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
    std::swap(a[col], a[pivot]);
    for (int row = 0; row < m; ++row) {
      if (row == col) continue;
      const double factor = a[row][col] / a[col][col];
      for (int k = col; k <= m; ++k) a[row][k] -= factor * a[col][k];
    }
  }
  std::vector<double> values(S + 1, 0.0);
  for (int row = 0; row < m; ++row) values[row + 1] = a[row][m] / a[row][row];
  return values;
}

/// Scaling function at all multiples of 2^-depth on [0, S], built by dyadic
/// refinement phi(x) = sqrt2 sum_k h_k phi(2x - k) from the integer values.
inline std::vector<double> cascade_scaling(const std::vector<double>& h, int depth)
{
  const std::int64_t S = static_cast<std::int64_t>(h.size()) - 1;
  const std::int64_t one = std::int64_t{ 1 } << depth;
  const std::int64_t last = S * one;
  std::vector<double> phi(static_cast<std::size_t>(last + 1), 0.0);
  const auto ints = scaling_at_integers(h);
  for (std::int64_t k = 0; k <= S; ++k) phi[k * one] = ints[k];

  const double root2 = std::sqrt(2.0);
  for (int d = 1; d <= depth; ++d) {
    const std::int64_t stride = one >> d;
    for (std::int64_t idx = stride; idx < last; idx += 2 * stride) {
      double acc = 0.0;
      for (std::int64_t k = 0; k <= S; ++k) {
        const std::int64_t t = 2 * idx - k * one;
        if (t >= 0 && t <= last) acc += h[k] * phi[t];
      }
      phi[idx] = root2 * acc;
    }
  }
  return phi;
}

struct BasisTables
{
  int support = 1;          // mother functions live on [0, support)
  std::vector<double> phi;  // support * 2^G samples at t / 2^G
  std::vector<double> psi;
  double phi_overlap = 1.0; // sup_x sum_k |phi(x - k)|
  double psi_overlap = 1.0;
};

inline double overlap_bound(const std::vector<double>& table, int support, std::size_t one)
{
  double best = 0.0;
  for (std::size_t t = 0; t < one; ++t) {
    double acc = 0.0;
    for (int q = 0; q < support; ++q) acc += std::abs(table[t + q * one]);
    best = std::max(best, acc);
  }
  return best;
}

inline std::shared_ptr<const BasisTables> haar_tables(int grid_depth)
{
  auto tables = std::make_shared<BasisTables>();
  const std::size_t one = std::size_t{ 1 } << grid_depth;
  tables->support = 1;
  tables->phi.assign(one, 1.0);
  tables->psi.assign(one, 1.0);
  std::fill(tables->psi.begin() + one / 2, tables->psi.end(), -1.0);
  return tables;
}

inline std::shared_ptr<const BasisTables> daubechies_tables(int order, int grid_depth)
{
  const auto h = daubechies_filter(order);
  const int S = static_cast<int>(h.size()) - 1;
  const std::int64_t one = std::int64_t{ 1 } << grid_depth;
  const auto phi_fine = cascade_scaling(h, grid_depth);

  auto tables = std::make_shared<BasisTables>();
  tables->support = S;
  tables->phi.assign(phi_fine.begin(), phi_fine.begin() + S * one);
  tables->psi.assign(static_cast<std::size_t>(S * one), 0.0);
  const double root2 = std::sqrt(2.0);
  const std::int64_t last = S * one;
  for (std::int64_t idx = 0; idx < last; ++idx) {
    double acc = 0.0;
    for (int k = 0; k <= S; ++k) {
      const std::int64_t t = 2 * idx - k * one;
      if (t < 0 || t > last) continue;
      const double g = ((k % 2) ? -1.0 : 1.0) * h[S - k];
      acc += g * phi_fine[t];
    }
    tables->psi[idx] = root2 * acc;
  }
  tables->phi_overlap = overlap_bound(tables->phi, S, static_cast<std::size_t>(one));
  tables->psi_overlap = overlap_bound(tables->psi, S, static_cast<std::size_t>(one));
  return tables;
}

} // namespace detail

/// A periodized orthonormal wavelet basis on [0,1] together with the dyadic
/// evaluation grid of 2^G cells. Cheap to copy; the tables are shared.
class WaveletBasis
{
public:
  static WaveletBasis haar(int grid_depth = 14)
  {
    check_grid_depth(grid_depth);
    return WaveletBasis(Family::haar, 1, 0, grid_depth, detail::haar_tables(grid_depth));
  }

  static WaveletBasis daubechies(int order, int grid_depth = 14, int coarse_level = 3)
  {
    check_grid_depth(grid_depth);
    auto tables = detail::daubechies_tables(order, grid_depth);
    if (coarse_level < 0 || (1 << coarse_level) < tables->support)
      throw std::domain_error("coarse level too small for the filter support");
    return WaveletBasis(Family::daubechies, order, coarse_level, grid_depth, std::move(tables));
  }

  /// "haar", "db2", "db3" or "db4".
  static WaveletBasis from_name(std::string_view name, int grid_depth = 14)
  {
    if (name == "haar") return haar(grid_depth);
    if (name.size() == 3 && name.substr(0, 2) == "db") return daubechies(name[2] - '0', grid_depth);
    throw std::invalid_argument("unknown wavelet basis: " + std::string(name));
  }

  std::string name() const
  {
    return family_ == Family::haar ? std::string("haar") : "db" + std::to_string(order_);
  }

  Family family() const { return family_; }
  int order() const { return order_; }
  /// Number of vanishing moments.
  int regularity() const { return order_; }
  int coarse_level() const { return coarse_level_; }
  int grid_depth() const { return grid_depth_; }
  std::size_t grid_size() const { return std::size_t{ 1 } << grid_depth_; }
  double phi_overlap() const { return tables_->phi_overlap; }
  double psi_overlap() const { return tables_->psi_overlap; }

  /// Finest representable level is grid_depth - 1.
  int max_level() const { return grid_depth_; }

  /// Haar functions up to level l are constant on cells of width 2^-l, so a
  /// grid of depth l already resolves them exactly.
  int resolving_depth(int jmax) const
  {
    return family_ == Family::haar ? std::max(jmax, 0) : grid_depth_;
  }

  std::size_t cell_of(double x) const
  {
    if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("point outside [0,1]");
    const auto cell = static_cast<std::size_t>(std::ldexp(x, grid_depth_));
    return std::min(cell, grid_size() - 1);
  }

  double cell_point(std::size_t cell) const { return std::ldexp(static_cast<double>(cell), -grid_depth_); }

  /// Calls f(k, value) for each periodized scaling function phi_{J0,k} that is
  /// nonzero at the left end of `cell`.
  template <class F>
  void visit_scaling(std::size_t cell, F&& f) const
  {
    visit(tables_->phi, coarse_level_, cell, f);
  }

  /// Calls f(k, value) for each nonzero psi_{level,k} at the left end of `cell`.
  template <class F>
  void visit_wavelet(int level, std::size_t cell, F&& f) const
  {
    visit(tables_->psi, level, cell, f);
  }

  double phi(int k, double x) const
  {
    check_index(coarse_level_, k);
    return pick(tables_->phi, coarse_level_, k, x);
  }

  double psi(int level, int k, double x) const
  {
    if (level < coarse_level_ || level >= max_level())
      throw std::domain_error("wavelet level out of range");
    check_index(level, k);
    return pick(tables_->psi, level, k, x);
  }

private:
  WaveletBasis(Family family, int order, int coarse_level, int grid_depth,
               std::shared_ptr<const detail::BasisTables> tables)
    : family_(family)
    , order_(order)
    , coarse_level_(coarse_level)
    , grid_depth_(grid_depth)
    , tables_(std::move(tables))
  {
  }

  static void check_grid_depth(int grid_depth)
  {
    if (grid_depth < 2 || grid_depth > 20) throw std::domain_error("grid depth must lie in [2, 20]");
  }

  static void check_index(int level, int k)
  {
    if (k < 0 || k >= (1 << level)) throw std::domain_error("translation index out of range");
  }

  template <class F>
  void visit(const std::vector<double>& table, int level, std::size_t cell, F&& f) const
  {
    const int G = grid_depth_;
    const std::uint64_t one = std::uint64_t{ 1 } << G;
    const std::uint64_t u = static_cast<std::uint64_t>(cell) << level;
    const std::int64_t base = static_cast<std::int64_t>(u >> G);
    const std::uint64_t frac = u & (one - 1);
    const std::int64_t period = std::int64_t{ 1 } << level;
    const double scale = std::sqrt(static_cast<double>(period));
    const int S = tables_->support;

    if (S == 1) {
      const double v = table[frac];
      if (v != 0.0) f(static_cast<int>(base), scale * v);
      return;
    }
    // At coarse levels several shifts of the mother function fold onto the
    // same periodized index; merge them before reporting.
    std::array<int, 8> ks{};
    std::array<double, 8> vs{};
    int count = 0;
    for (int q = 0; q < S; ++q) {
      const double v = table[frac + static_cast<std::uint64_t>(q) * one];
      if (v == 0.0) continue;
      const int k = static_cast<int>((((base - q) % period) + period) % period);
      int slot = 0;
      while (slot < count && ks[slot] != k) ++slot;
      if (slot == count) {
        ks[count] = k;
        vs[count] = 0.0;
        ++count;
      }
      vs[slot] += v;
    }
    for (int i = 0; i < count; ++i) f(ks[i], scale * vs[i]);
  }

  double pick(const std::vector<double>& table, int level, int k, double x) const
  {
    double value = 0.0;
    visit(table, level, cell_of(x), [&](int kk, double v) {
      if (kk == k) value = v;
    });
    return value;
  }

  Family family_;
  int order_;
  int coarse_level_;
  int grid_depth_;
  std::shared_ptr<const detail::BasisTables> tables_;
};

/// Multilevel coefficient array: the scaling block (2^J0 entries) followed by
/// wavelet levels J0..Jmax-1 (2^l entries each). Stored flat; wavelet level l
/// occupies [2^l, 2^(l+1)) so the tree spans V_Jmax with 2^Jmax entries.
class CoeffTree
{
public:
  CoeffTree() : CoeffTree(0, 0) {}

  CoeffTree(int j0, int jmax) : j0_(j0), jmax_(jmax)
  {
    if (j0 < 0 || jmax < j0 || jmax > 24) throw std::domain_error("invalid coefficient tree levels");
    c_.assign(std::size_t{ 1 } << jmax, 0.0);
  }

  int j0() const { return j0_; }
  int jmax() const { return jmax_; }
  std::size_t size() const { return c_.size(); }

  std::span<double> coefficients() { return c_; }
  std::span<const double> coefficients() const { return c_; }

  std::span<double> scaling() { return { c_.data(), std::size_t{ 1 } << j0_ }; }
  std::span<const double> scaling() const { return { c_.data(), std::size_t{ 1 } << j0_ }; }

  std::span<double> level(int l)
  {
    check_level(l);
    return { c_.data() + (std::size_t{ 1 } << l), std::size_t{ 1 } << l };
  }
  std::span<const double> level(int l) const
  {
    check_level(l);
    return { c_.data() + (std::size_t{ 1 } << l), std::size_t{ 1 } << l };
  }

  double scaling_norm2() const { return sum_squares(scaling()); }
  double level_norm2(int l) const { return sum_squares(level(l)); }
  double norm2() const { return sum_squares(c_); }
  double l2_norm() const { return std::sqrt(norm2()); }

  /// Finest wavelet level carrying a nonzero coefficient, or j0 - 1 if none.
  int finest_nonzero_level() const
  {
    for (int l = jmax_ - 1; l >= j0_; --l) {
      const auto block = level(l);
      if (std::any_of(block.begin(), block.end(), [](double v) { return v != 0.0; })) return l;
    }
    return j0_ - 1;
  }

  bool operator==(const CoeffTree&) const = default;

private:
  void check_level(int l) const
  {
    if (l < j0_ || l >= jmax_) throw std::domain_error("wavelet level out of range");
  }

  static double sum_squares(std::span<const double> v)
  {
    return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
  }

  int j0_;
  int jmax_;
  std::vector<double> c_;
};

/// Truncates to V_j (levels below j); j == J0 keeps the scaling block only.
inline CoeffTree project(const CoeffTree& tree, int j)
{
  if (j < tree.j0() || j > tree.jmax()) throw std::domain_error("projection level out of range");
  CoeffTree out(tree.j0(), j);
  std::copy_n(tree.coefficients().begin(), out.size(), out.coefficients().begin());
  return out;
}

/// Truncates or zero-pads to Jmax = j.
inline CoeffTree resize(const CoeffTree& tree, int j)
{
  if (j <= tree.jmax()) return project(tree, j);
  CoeffTree out(tree.j0(), j);
  std::copy(tree.coefficients().begin(), tree.coefficients().end(), out.coefficients().begin());
  return out;
}

/// max over blocks of 2^{ls} times the block's l2 norm; the scaling block is
/// weighted with 2^{J0 s}.
inline double sobolev_norm(const CoeffTree& tree, double s)
{
  if (!(s >= 0.0)) throw std::domain_error("smoothness must be nonnegative");
  double best = std::pow(2.0, tree.j0() * s) * std::sqrt(tree.scaling_norm2());
  for (int l = tree.j0(); l < tree.jmax(); ++l)
    best = std::max(best, std::pow(2.0, l * s) * std::sqrt(tree.level_norm2(l)));
  return best;
}

inline double l2_dist(const CoeffTree& a, const CoeffTree& b)
{
  if (a.j0() != b.j0() || a.jmax() != b.jmax()) throw std::domain_error("coefficient tree shape mismatch");
  double acc = 0.0;
  const auto x = a.coefficients();
  const auto y = b.coefficients();
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(acc);
}

inline double inner(const CoeffTree& a, const CoeffTree& b)
{
  if (a.j0() != b.j0() || a.jmax() != b.jmax()) throw std::domain_error("coefficient tree shape mismatch");
  const auto x = a.coefficients();
  const auto y = b.coefficients();
  return std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
}

/// Calls f(flat_index, value) for every basis function of V_jmax that is
/// nonzero at `cell`.
template <class F>
void visit_tree_basis(const WaveletBasis& basis, int jmax, std::size_t cell, F&& f)
{
  basis.visit_scaling(cell, [&](int k, double v) { f(static_cast<std::size_t>(k), v); });
  for (int l = basis.coarse_level(); l < jmax; ++l)
    basis.visit_wavelet(l, cell, [&](int k, double v) { f((std::size_t{ 1 } << l) + k, v); });
}

inline void check_tree_basis(const WaveletBasis& basis, const CoeffTree& tree)
{
  if (tree.j0() != basis.coarse_level()) throw std::domain_error("tree coarse level does not match basis");
  if (tree.jmax() > basis.max_level()) throw std::domain_error("tree finer than the evaluation grid");
}

/// Tree of sample means (1/n) sum_i psi_lk(X_i) over V_jmax.
inline CoeffTree empirical_coeffs(const WaveletBasis& basis, std::span<const double> sample, int jmax)
{
  if (sample.empty()) throw std::domain_error("empirical coefficients need a nonempty sample");
  CoeffTree tree(basis.coarse_level(), jmax);
  check_tree_basis(basis, tree);
  auto c = tree.coefficients();
  for (double x : sample) {
    visit_tree_basis(basis, jmax, basis.cell_of(x), [&](std::size_t i, double v) { c[i] += v; });
  }
  const double inv_n = 1.0 / static_cast<double>(sample.size());
  for (double& v : c) v *= inv_n;
  return tree;
}

inline double synth_at_cell(const WaveletBasis& basis, const CoeffTree& tree, std::size_t cell)
{
  const auto c = tree.coefficients();
  double acc = 0.0;
  visit_tree_basis(basis, tree.jmax(), cell, [&](std::size_t i, double v) { acc += c[i] * v; });
  return acc;
}

inline double synth_eval(const WaveletBasis& basis, const CoeffTree& tree, double x)
{
  check_tree_basis(basis, tree);
  return synth_at_cell(basis, tree, basis.cell_of(x));
}

/// Values at the left ends of all 2^depth cells of a coarser dyadic grid
/// (depth <= G); depth = G gives the full evaluation grid.
inline std::vector<double> synth_grid(const WaveletBasis& basis, const CoeffTree& tree, int depth)
{
  check_tree_basis(basis, tree);
  if (depth < 0 || depth > basis.grid_depth()) throw std::domain_error("grid depth out of range");
  const std::size_t cells = std::size_t{ 1 } << depth;
  const int shift = basis.grid_depth() - depth;
  std::vector<double> values(cells);
  for (std::size_t i = 0; i < cells; ++i) values[i] = synth_at_cell(basis, tree, i << shift);
  return values;
}

inline std::vector<double> synth_grid(const WaveletBasis& basis, const CoeffTree& tree)
{
  return synth_grid(basis, tree, basis.grid_depth());
}

/// Coefficients of grid values by Riemann quadrature on the 2^G grid.
/// Exact for Haar trees whose levels stay below G.
inline CoeffTree analyze_grid(const WaveletBasis& basis, std::span<const double> values, int jmax)
{
  if (values.size() != basis.grid_size()) throw std::domain_error("grid size mismatch");
  CoeffTree tree(basis.coarse_level(), jmax);
  check_tree_basis(basis, tree);
  auto c = tree.coefficients();
  for (std::size_t cell = 0; cell < values.size(); ++cell) {
    const double w = values[cell];
    if (w == 0.0) continue;
    visit_tree_basis(basis, jmax, cell, [&](std::size_t i, double v) { c[i] += w * v; });
  }
  const double h = std::ldexp(1.0, -basis.grid_depth());
  for (double& v : c) v *= h;
  return tree;
}

} // namespace confset
