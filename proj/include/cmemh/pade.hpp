#pragma once

#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "cmemh/errors.hpp"

namespace cmemh {

namespace detail {

/// Diagonal (q,q) Pade coefficients c_j = (2q-j)! q! / ((2q)! j! (q-j)!), shared by
/// numerator N(A) = sum c_j A^j and denominator D(A) = sum c_j (-A)^j.
template <int Q>
constexpr std::array<double, Q + 1> pade_coefficients() {
  std::array<double, Q + 1> c{};
  long double v = 1.0L;
  c[0] = 1.0;
  for (int j = 1; j <= Q; ++j) {
    v = v * static_cast<long double>(Q - j + 1) / (static_cast<long double>(j) * (2 * Q - j + 1));
    c[static_cast<std::size_t>(j)] = static_cast<double>(v);
  }
  return c;
}

}  // namespace detail

/// exp(M) by the degree-(13,13) diagonal Pade approximant with scaling and squaring.
/// M is scaled by 2^-s so that its 1-norm is at most 0.5, then the result is squared s times.
inline Eigen::MatrixXd expm_pade(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw DomainError("expm_pade needs a square matrix");
  if (!m.allFinite()) throw DomainError("expm_pade: non-finite entries");
  const auto n = m.rows();
  if (n == 0) return m;

  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm > 0.5) s = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd a = m * std::ldexp(1.0, -s);

  constexpr auto c = detail::pade_coefficients<13>();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd a2 = a * a;
  const Eigen::MatrixXd a4 = a2 * a2;
  const Eigen::MatrixXd a6 = a4 * a2;

  Eigen::MatrixXd odd_inner = c[13] * a6 + c[11] * a4 + c[9] * a2;
  Eigen::MatrixXd odd = a6 * odd_inner + c[7] * a6 + c[5] * a4 + c[3] * a2 + c[1] * id;
  const Eigen::MatrixXd u = a * odd;
  Eigen::MatrixXd even_inner = c[12] * a6 + c[10] * a4 + c[8] * a2;
  const Eigen::MatrixXd v = a6 * even_inner + c[6] * a6 + c[4] * a4 + c[2] * a2 + c[0] * id;

  Eigen::MatrixXd r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < s; ++k) r = r * r;
  return r;
}

}  // namespace cmemh
