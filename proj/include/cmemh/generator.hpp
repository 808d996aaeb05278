#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmemh/errors.hpp"
#include "cmemh/reaction_system.hpp"

namespace cmemh {

enum class GeneratorKind { exact, frozen, general };

/// values[j] is the entry at (j + offset, j), 0-based; zero where the row falls outside the matrix.
struct Band {
  std::int64_t offset = 0;
  std::vector<double> values;
};

/// Contiguous range of state indices [lo, hi], both inclusive and 1-based.
struct Window {
  StateIndex lo;
  StateIndex hi;

  std::int64_t width() const { return hi.value - lo.value + 1; }
  bool contains(StateIndex i) const { return i >= lo && i <= hi; }
  friend bool operator==(const Window&, const Window&) = default;
};

/// Sparse banded CME operator stored column-wise per band.
///
/// Column j holds -a0(x_j) on the diagonal and a_r(x_j) at row j + d_r (exact kind),
/// or the same pattern with propensities frozen at the anchor state (frozen kind).
/// Rows and columns are local to the generator; origin() is the global index of local row 1.
class CmeGenerator {
 public:
  CmeGenerator() = default;

  CmeGenerator(std::vector<double> diagonal, std::vector<Band> bands, GeneratorKind kind = GeneratorKind::general,
               std::optional<StateVector> anchor = std::nullopt, std::int64_t origin = 1)
      : diag_(std::move(diagonal)), bands_(std::move(bands)), kind_(kind), anchor_(std::move(anchor)), origin_(origin) {
    const auto n = dim();
    for (auto& b : bands_) {
      if (static_cast<std::int64_t>(b.values.size()) != n) throw DomainError("band length does not match dimension");
      for (std::int64_t j = 0; j < n; ++j) {
        const auto i = j + b.offset;
        if (i < 0 || i >= n) b.values[static_cast<std::size_t>(j)] = 0.0;
      }
    }
  }

  std::int64_t dim() const { return static_cast<std::int64_t>(diag_.size()); }
  std::span<const double> diagonal() const { return diag_; }
  const std::vector<Band>& bands() const { return bands_; }
  GeneratorKind kind() const { return kind_; }
  const std::optional<StateVector>& anchor() const { return anchor_; }
  std::int64_t origin() const { return origin_; }
  Window window() const { return {StateIndex{origin_}, StateIndex{origin_ + dim() - 1}}; }

  /// Entry at 1-based local (i, j).
  double entry(std::int64_t i, std::int64_t j) const {
    if (i < 1 || j < 1 || i > dim() || j > dim()) throw DomainError("generator entry out of range");
    double v = 0.0;
    if (i == j) v += diag_[static_cast<std::size_t>(j - 1)];
    for (const auto& b : bands_)
      if (i - j == b.offset) v += b.values[static_cast<std::size_t>(j - 1)];
    return v;
  }

  /// y = A x.
  void apply(std::span<const double> x, std::span<double> y) const {
    const auto n = static_cast<std::size_t>(dim());
    for (std::size_t j = 0; j < n; ++j) y[j] = diag_[j] * x[j];
    for (const auto& b : bands_) {
      // offsets wider than the window leave the band empty
      const auto lo = std::max<std::int64_t>(0, -b.offset);
      const auto hi = std::min<std::int64_t>(dim(), dim() - b.offset);
      const double* v = b.values.data();
      for (auto j = static_cast<std::size_t>(lo); static_cast<std::int64_t>(j) < hi; ++j) y[j + static_cast<std::size_t>(b.offset)] += v[j] * x[j];
    }
  }

  /// Maximum absolute row sum.
  double norm_inf() const {
    std::vector<double> rows(diag_.size());
    for (std::size_t j = 0; j < diag_.size(); ++j) rows[j] = std::fabs(diag_[j]);
    for (const auto& b : bands_)
      for (std::int64_t j = 0; j < dim(); ++j) {
        const auto i = j + b.offset;
        if (i >= 0 && i < dim()) rows[static_cast<std::size_t>(i)] += std::fabs(b.values[static_cast<std::size_t>(j)]);
      }
    return rows.empty() ? 0.0 : *std::max_element(rows.begin(), rows.end());
  }

  /// Maximum absolute column sum.
  double norm1() const {
    double best = 0.0;
    for (std::int64_t j = 0; j < dim(); ++j) {
      double s = std::fabs(diag_[static_cast<std::size_t>(j)]);
      for (const auto& b : bands_) s += std::fabs(b.values[static_cast<std::size_t>(j)]);
      best = std::max(best, s);
    }
    return best;
  }

  std::int64_t lower_bandwidth() const {
    std::int64_t kl = 0;
    for (const auto& b : bands_) kl = std::max(kl, b.offset);
    return std::min(kl, std::max<std::int64_t>(0, dim() - 1));
  }
  std::int64_t upper_bandwidth() const {
    std::int64_t ku = 0;
    for (const auto& b : bands_) ku = std::max(ku, -b.offset);
    return std::min(ku, std::max<std::int64_t>(0, dim() - 1));
  }

  Eigen::MatrixXd to_dense() const {
    const auto n = dim();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (std::int64_t j = 0; j < n; ++j) m(j, j) = diag_[static_cast<std::size_t>(j)];
    for (const auto& b : bands_)
      for (std::int64_t j = 0; j < n; ++j) {
        const auto i = j + b.offset;
        if (i >= 0 && i < n) m(i, j) += b.values[static_cast<std::size_t>(j)];
      }
    return m;
  }

 private:
  std::vector<double> diag_;
  std::vector<Band> bands_;
  GeneratorKind kind_ = GeneratorKind::general;
  std::optional<StateVector> anchor_;
  std::int64_t origin_ = 1;
};

/// Default cap on the number of states a generator may be assembled over.
inline constexpr std::int64_t kDefaultStateBudget = 50'000'000;

namespace detail {

inline void check_budget(std::int64_t dim, std::int64_t budget) {
  if (dim > budget)
    throw ResourceError("generator of dimension " + std::to_string(dim) + " exceeds the state budget of " +
                        std::to_string(budget) + "; use a windowed run (--window auto or an explicit width)");
}

}  // namespace detail

/// Columns lo..hi of the exact generator, truncated to that window.
inline CmeGenerator build_window_generator(const ReactionSystem& sys, const Window& w) {
  const auto q = state_count(sys);
  if (w.lo.value < 1 || w.hi.value > q || w.lo > w.hi) throw DomainError("window outside [1, Q]");
  const Kinetics kin(sys);
  const auto n = w.width();
  const int m = sys.reaction_count();
  std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
  std::vector<Band> bands(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    bands[static_cast<std::size_t>(r)].offset = index_shift(sys, r + 1);
    bands[static_cast<std::size_t>(r)].values.assign(static_cast<std::size_t>(n), 0.0);
  }
  StateVector x = state_from_index(sys, w.lo);
  for (std::int64_t j = 0; j < n; ++j) {
    double a0 = 0.0;
    for (int r = 0; r < m; ++r) {
      const double a = kin(r, x);
      a0 += a;
      bands[static_cast<std::size_t>(r)].values[static_cast<std::size_t>(j)] = a;
    }
    diag[static_cast<std::size_t>(j)] = -a0;
    // odometer increment, species 1 fastest
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (++x[i] <= sys.caps[i]) break;
      x[i] = 0;
    }
  }
  return CmeGenerator(std::move(diag), std::move(bands), GeneratorKind::exact, std::nullopt, w.lo.value);
}

/// Frozen-propensity generator restricted to a window: every band constant at a_r(xbar).
inline CmeGenerator build_frozen_window_generator(const ReactionSystem& sys, const StateVector& xbar,
                                                  const Window& w) {
  const auto q = state_count(sys);
  if (!within_caps(sys, xbar)) throw DomainError("anchor state outside caps");
  if (w.lo.value < 1 || w.hi.value > q || w.lo > w.hi) throw DomainError("window outside [1, Q]");
  const auto n = static_cast<std::size_t>(w.width());
  const int m = sys.reaction_count();
  double a0 = 0.0;
  std::vector<Band> bands(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    const double a = propensity(sys, r + 1, xbar);
    a0 += a;
    bands[static_cast<std::size_t>(r)] = Band{index_shift(sys, r + 1), std::vector<double>(n, a)};
  }
  return CmeGenerator(std::vector<double>(n, -a0), std::move(bands), GeneratorKind::frozen, xbar, w.lo.value);
}

/// Full exact generator A over all Q states.
inline CmeGenerator build_exact_generator(const ReactionSystem& sys, std::int64_t state_budget = kDefaultStateBudget) {
  const auto q = state_count(sys);
  detail::check_budget(q, state_budget);
  return build_window_generator(sys, Window{StateIndex{1}, StateIndex{q}});
}

/// Full frozen generator with propensities evaluated at xbar.
inline CmeGenerator build_frozen_generator(const ReactionSystem& sys, const StateVector& xbar,
                                           std::int64_t state_budget = kDefaultStateBudget) {
  const auto q = state_count(sys);
  detail::check_budget(q, state_budget);
  return build_frozen_window_generator(sys, xbar, Window{StateIndex{1}, StateIndex{q}});
}

/// Principal sub-matrix G[lo..hi, lo..hi] (global indices). Band offsets are preserved.
inline CmeGenerator extract_window(const CmeGenerator& g, const Window& w) {
  const auto first = w.lo.value - g.origin();
  const auto n = w.width();
  if (first < 0 || first + n > g.dim() || n < 1) throw DomainError("window outside the generator");
  auto diag_all = g.diagonal();
  std::vector<double> diag(diag_all.begin() + first, diag_all.begin() + first + n);
  std::vector<Band> bands;
  bands.reserve(g.bands().size());
  for (const auto& b : g.bands())
    bands.push_back(Band{b.offset, std::vector<double>(b.values.begin() + first, b.values.begin() + first + n)});
  return CmeGenerator(std::move(diag), std::move(bands), g.kind(), g.anchor(), w.lo.value);
}

/// Per-species sub-matrix size estimate round(mean_r a_r(x0) * tau), floored at 4.
inline std::int64_t submatrix_size_estimate(const ReactionSystem& sys, const StateVector& x0, double tau) {
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  const int m = sys.reaction_count();
  double mean = 0.0;
  for (int r = 1; r <= m; ++r) mean += propensity(sys, r, x0);
  mean /= static_cast<double>(m);
  const auto s = static_cast<std::int64_t>(std::llround(mean * tau));
  return std::max<std::int64_t>(s, 4);
}

/// Contiguous window of width >= W covering every anchor, centred on the anchors' midpoint
/// and shifted to stay inside [1, Q].
inline Window make_window(std::span<const StateIndex> anchors, std::int64_t width, std::int64_t q) {
  if (anchors.empty()) throw DomainError("make_window needs at least one anchor");
  auto [mn, mx] = std::minmax_element(anchors.begin(), anchors.end());
  const auto a = mn->value;
  const auto b = mx->value;
  if (a < 1 || b > q) throw DomainError("anchor outside [1, Q]");
  const auto w = std::min(q, std::max(width, b - a + 1));
  const auto center = a + (b - a) / 2;
  auto lo = center - (w - 1) / 2;
  lo = std::max<std::int64_t>(1, std::min(lo, q - w + 1));
  // integer rounding can leave the upper anchor one past the end
  if (lo + w - 1 < b) lo = b - w + 1;
  return Window{StateIndex{lo}, StateIndex{lo + w - 1}};
}

inline Window make_window(std::initializer_list<StateIndex> anchors, std::int64_t width, std::int64_t q) {
  return make_window(std::span<const StateIndex>(anchors.begin(), anchors.size()), width, q);
}

inline std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Debug dump as "row col value" lines in global indices, column-major, nonzeros only.
inline void write_triplets(const CmeGenerator& g, std::ostream& os) {
  const auto n = g.dim();
  std::vector<std::int64_t> offsets{0};
  for (const auto& b : g.bands()) offsets.push_back(b.offset);
  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
  for (std::int64_t j = 0; j < n; ++j)
    for (auto off : offsets) {
      const auto i = j + off;
      if (i < 0 || i >= n) continue;
      const double v = g.entry(i + 1, j + 1);
      if (v == 0.0) continue;
      os << (i + g.origin()) << ' ' << (j + g.origin()) << ' ' << format_real(v) << '\n';
    }
}

}  // namespace cmemh
