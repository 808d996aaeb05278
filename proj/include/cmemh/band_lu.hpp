#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "cmemh/errors.hpp"

namespace cmemh {

/// LU factorization with partial pivoting of an n x n band matrix with kl sub- and ku
/// super-diagonals. Storage follows the LAPACK gbtrf layout, with kl extra rows for fill-in.
template <typename T>
class BandLU {
 public:
  BandLU(std::int64_t n, std::int64_t kl, std::int64_t ku)
      : n_(n), kl_(kl), ku_(ku), ld_(2 * kl + ku + 1),
        ab_(static_cast<std::size_t>(ld_ * n), T{}), piv_(static_cast<std::size_t>(n)) {}

  std::int64_t dim() const { return n_; }

  /// 0-based (i, j); must satisfy -ku <= i - j <= kl.
  T& at(std::int64_t i, std::int64_t j) { return ab_[static_cast<std::size_t>(j * ld_ + kl_ + ku_ + i - j)]; }
  const T& at(std::int64_t i, std::int64_t j) const {
    return ab_[static_cast<std::size_t>(j * ld_ + kl_ + ku_ + i - j)];
  }

  void factor() {
    const auto kv = ku_ + kl_;
    for (std::int64_t k = 0; k < n_; ++k) {
      const auto last_row = std::min(n_ - 1, k + kl_);
      std::int64_t p = k;
      double best = std::abs(at(k, k));
      for (std::int64_t i = k + 1; i <= last_row; ++i) {
        const double v = std::abs(at(i, k));
        if (v > best) {
          best = v;
          p = i;
        }
      }
      piv_[static_cast<std::size_t>(k)] = p;
      if (best == 0.0) throw NumericError("singular band matrix in shifted solve");
      const auto last_col = std::min(n_ - 1, k + kv);
      if (p != k)
        for (std::int64_t j = k; j <= last_col; ++j) std::swap(at(k, j), at(p, j));
      const T pivot = at(k, k);
      for (std::int64_t i = k + 1; i <= last_row; ++i) {
        const T l = at(i, k) / pivot;
        at(i, k) = l;
        if (l == T{}) continue;
        for (std::int64_t j = k + 1; j <= last_col; ++j) at(i, j) -= l * at(k, j);
      }
    }
  }

  /// Overwrites b with the solution of A x = b.
  void solve(std::span<T> b) const {
    const auto kv = ku_ + kl_;
    for (std::int64_t k = 0; k < n_; ++k) {
      const auto p = piv_[static_cast<std::size_t>(k)];
      if (p != k) std::swap(b[static_cast<std::size_t>(k)], b[static_cast<std::size_t>(p)]);
      const T bk = b[static_cast<std::size_t>(k)];
      if (bk == T{}) continue;
      const auto last_row = std::min(n_ - 1, k + kl_);
      for (std::int64_t i = k + 1; i <= last_row; ++i) b[static_cast<std::size_t>(i)] -= at(i, k) * bk;
    }
    for (std::int64_t k = n_ - 1; k >= 0; --k) {
      b[static_cast<std::size_t>(k)] /= at(k, k);
      const T bk = b[static_cast<std::size_t>(k)];
      if (bk == T{}) continue;
      const auto first_row = std::max<std::int64_t>(0, k - kv);
      for (std::int64_t i = first_row; i < k; ++i) b[static_cast<std::size_t>(i)] -= at(i, k) * bk;
    }
  }

 private:
  std::int64_t n_;
  std::int64_t kl_;
  std::int64_t ku_;
  std::int64_t ld_;
  std::vector<T> ab_;
  std::vector<std::int64_t> piv_;
};

}  // namespace cmemh
