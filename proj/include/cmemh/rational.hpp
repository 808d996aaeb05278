#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cmemh/band_lu.hpp"
#include "cmemh/errors.hpp"
#include "cmemh/generator.hpp"

namespace cmemh {

using Complex = std::complex<double>;

/// Rational approximation of e^x on the negative real axis with poles in conjugate pairs.
/// Only the pole of each pair with positive imaginary part is stored.
///
///   partial_fraction:             r(x) = c + 2 Re sum_k a_k / (x - p_k)
///   incomplete_partial_fraction:  r(x) = c * prod_k (1 + 2 Re a_k / (x - p_k))
///
/// The second form is applied to a vector as a sequence of shifted solves.
struct RationalApprox {
  enum class Form { partial_fraction, incomplete_partial_fraction };

  Form form = Form::partial_fraction;
  double constant = 0.0;
  std::vector<Complex> residues;
  std::vector<Complex> poles;

  double operator()(double x) const {
    if (form == Form::partial_fraction) {
      double s = constant;
      for (std::size_t k = 0; k < poles.size(); ++k) s += 2.0 * std::real(residues[k] / (x - poles[k]));
      return s;
    }
    double y = 1.0;
    for (std::size_t k = 0; k < poles.size(); ++k) y += 2.0 * std::real(residues[k] / (x - poles[k])) * y;
    return constant * y;
  }
};

/// Trapezoid rule with k nodes on the parabolic contour z(t) = k(0.1309 - 0.1194 t^2 + 0.25 i t), t in (-pi, pi).
inline RationalApprox contour_rational(int k) {
  if (k < 2 || k % 2 != 0) throw DomainError("contour order must be an even integer >= 2");
  RationalApprox r;
  r.form = RationalApprox::Form::partial_fraction;
  const double n = k;
  for (int j = 0; j < k; ++j) {
    const double t = -std::numbers::pi + (j + 0.5) * 2.0 * std::numbers::pi / n;
    if (t <= 0.0) continue;
    const Complex z = n * Complex(0.1309 - 0.1194 * t * t, 0.25 * t);
    const Complex dz = n * Complex(-2.0 * 0.1194 * t, 0.25);
    const Complex c = Complex(0.0, -1.0 / n) * std::exp(z) * dz;
    // c / (z - x) == (-c) / (x - z)
    r.residues.push_back(-c);
    r.poles.push_back(z);
  }
  return r;
}

/// Chebyshev rational approximation of orders 14 (partial fractions) and 16 (incomplete partial fractions).
inline RationalApprox cram_rational(int k) {
  RationalApprox r;
  if (k == 14) {
    r.form = RationalApprox::Form::partial_fraction;
    r.constant = 1.8321743782540412751e-14;
    r.poles = {
        {-8.8977731864688888199, 16.630982619902085304}, {-3.7032750494234480603, 13.656371871483268171},
        {-0.2087586382501301251, 10.991260561901260913}, {3.9933697105785685194, 6.0048316422350373178},
        {5.0893450605806245066, 3.5888240290270065102},  {5.6231425727459771248, 1.1940690463439669766},
        {2.2697838292311127097, 8.4617379730402214019},
    };
    r.residues = {
        {-0.000071542880635890672853, 0.00014361043349541300111}, {0.0094390253107361688779, -0.017184791958483017511},
        {-0.37636003878226968717, 0.33518347029450104214},        {-23.498232091082701191, -5.8083591297142074004},
        {46.933274488831293047, 45.643649768827760791},           {-27.875161940145646468, -102.14733999056451434},
        {4.8071120988325088907, -1.3209793837428723881},
    };
    return r;
  }
  if (k == 16) {
    r.form = RationalApprox::Form::incomplete_partial_fraction;
    r.constant = 2.124853710495224e-16;
    r.poles = {
        {3.509103608414918, 8.436198985884374},   {5.948152268951177, 3.587457362018322},
        {-5.264971343442647, 16.22022147316793},  {1.419375897185666, 10.92536348449672},
        {6.416177699099435, 1.194122393370139},   {4.993174737717997, 5.996881713603942},
        {-1.413928462488886, 13.49772569889275},  {-10.84391707869699, 19.27744616718165},
    };
    r.residues = {
        {5.464930576870210e+3, -3.797983575308356e+4}, {9.045112476907548e+1, -1.115537522430261e+3},
        {2.344818070467641e+2, -4.228020157070496e+2}, {9.453304067358312e+1, -2.951294291446048e+2},
        {7.283792954673409e+2, -1.205646080220011e+5}, {3.648229059594851e+1, -1.155509621409682e+2},
        {2.547321630156819e+1, -2.639500283021502e+1}, {2.394538338734709e+1, -5.650522971778156e+0},
    };
    return r;
  }
  throw DomainError("CRAM order must be 14 or 16");
}

/// Above this dimension shifted systems are solved iteratively instead of by band LU.
inline constexpr std::int64_t kDirectSolveLimit = 5000;

namespace detail {

// Solves (t*A - theta I) x = rhs for a banded generator.
class ShiftedSolver {
 public:
  ShiftedSolver(const CmeGenerator& a, double t) : a_(a), t_(t) {}

  void solve(Complex theta, std::span<Complex> rhs) const {
    if (a_.dim() <= kDirectSolveLimit)
      solve_direct(theta, rhs);
    else
      solve_iterative(theta, rhs);
  }

 private:
  void solve_direct(Complex theta, std::span<Complex> rhs) const {
    const auto n = a_.dim();
    BandLU<Complex> lu(n, a_.lower_bandwidth(), a_.upper_bandwidth());
    const auto diag = a_.diagonal();
    for (std::int64_t j = 0; j < n; ++j) lu.at(j, j) = t_ * diag[static_cast<std::size_t>(j)] - theta;
    for (const auto& b : a_.bands())
      for (std::int64_t j = 0; j < n; ++j) {
        const auto i = j + b.offset;
        if (i < 0 || i >= n || b.values[static_cast<std::size_t>(j)] == 0.0) continue;
        lu.at(i, j) += t_ * b.values[static_cast<std::size_t>(j)];
      }
    lu.factor();
    lu.solve(rhs);
  }

  void solve_iterative(Complex theta, std::span<Complex> rhs) const {
    using SpMat = Eigen::SparseMatrix<Complex>;
    const auto n = a_.dim();
    std::vector<Eigen::Triplet<Complex>> trips;
    trips.reserve(static_cast<std::size_t>(n) * (a_.bands().size() + 1));
    const auto diag = a_.diagonal();
    for (std::int64_t j = 0; j < n; ++j)
      trips.emplace_back(j, j, t_ * diag[static_cast<std::size_t>(j)] - theta);
    for (const auto& b : a_.bands())
      for (std::int64_t j = 0; j < n; ++j) {
        const auto i = j + b.offset;
        if (i < 0 || i >= n || b.values[static_cast<std::size_t>(j)] == 0.0) continue;
        trips.emplace_back(i, j, Complex(t_ * b.values[static_cast<std::size_t>(j)], 0.0));
      }
    SpMat m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<Complex>> solver;
    solver.preconditioner().setDroptol(1e-6);
    solver.preconditioner().setFillfactor(4);
    solver.setTolerance(1e-14);
    solver.setMaxIterations(static_cast<int>(std::min<std::int64_t>(n, 2000)));
    solver.compute(m);
    if (solver.info() != Eigen::Success) throw NumericError("preconditioner setup failed for shifted system");
    Eigen::Map<Eigen::VectorXcd> rhs_map(rhs.data(), n);
    Eigen::VectorXcd x = solver.solve(rhs_map);
    if (solver.info() != Eigen::Success && solver.error() > 1e-10)
      throw NumericError("iterative shifted solve did not converge (residual " + std::to_string(solver.error()) + ")");
    rhs_map = x;
  }

  const CmeGenerator& a_;
  double t_;
};

}  // namespace detail

/// r(t A) b for a banded generator.
inline std::vector<double> rational_apply(const RationalApprox& r, const CmeGenerator& a, std::span<const double> b,
                                          double t = 1.0) {
  const auto n = static_cast<std::size_t>(a.dim());
  if (b.size() != n) throw DomainError("vector length does not match generator");
  const detail::ShiftedSolver solver(a, t);
  std::vector<Complex> work(n);
  std::vector<double> y(b.begin(), b.end());

  if (r.form == RationalApprox::Form::partial_fraction) {
    for (auto& v : y) v *= r.constant;
    for (std::size_t k = 0; k < r.poles.size(); ++k) {
      for (std::size_t i = 0; i < n; ++i) work[i] = b[i];
      solver.solve(r.poles[k], work);
      for (std::size_t i = 0; i < n; ++i) y[i] += 2.0 * std::real(r.residues[k] * work[i]);
    }
    return y;
  }
  for (std::size_t k = 0; k < r.poles.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) work[i] = y[i];
    solver.solve(r.poles[k], work);
    for (std::size_t i = 0; i < n; ++i) y[i] += 2.0 * std::real(r.residues[k] * work[i]);
  }
  for (auto& v : y) v *= r.constant;
  return y;
}

/// r(t A) b for a dense matrix.
inline Eigen::VectorXd rational_apply(const RationalApprox& r, const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                      double t = 1.0) {
  if (a.rows() != a.cols() || b.size() != a.rows()) throw DomainError("rational_apply: dimension mismatch");
  const Eigen::MatrixXcd ta = (t * a).cast<Complex>();
  auto solve = [&](Complex theta, const Eigen::VectorXcd& rhs) {
    Eigen::MatrixXcd shifted = ta;
    shifted.diagonal().array() -= theta;
    return Eigen::VectorXcd(shifted.partialPivLu().solve(rhs));
  };
  if (r.form == RationalApprox::Form::partial_fraction) {
    Eigen::VectorXd y = r.constant * b;
    const Eigen::VectorXcd bc = b.cast<Complex>();
    for (std::size_t k = 0; k < r.poles.size(); ++k) y += 2.0 * (r.residues[k] * solve(r.poles[k], bc)).real();
    return y;
  }
  Eigen::VectorXd y = b;
  for (std::size_t k = 0; k < r.poles.size(); ++k)
    y += 2.0 * (r.residues[k] * solve(r.poles[k], y.cast<Complex>())).real();
  return r.constant * y;
}

/// exp(tA) b by k-point parabolic contour quadrature.
inline std::vector<double> expm_contour_apply(const CmeGenerator& a, std::span<const double> b, int k = 32,
                                              double t = 1.0) {
  return rational_apply(contour_rational(k), a, b, t);
}

/// exp(tA) b by the Chebyshev rational approximation of order k (14 or 16).
inline std::vector<double> expm_cram_apply(const CmeGenerator& a, std::span<const double> b, int k = 16,
                                           double t = 1.0) {
  return rational_apply(cram_rational(k), a, b, t);
}

}  // namespace cmemh
