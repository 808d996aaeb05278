#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cmemh/errors.hpp"
#include "cmemh/pade.hpp"

namespace cmemh {

/// Linear operator view of a dense matrix, matching the CmeGenerator operator interface.
class DenseOperator {
 public:
  explicit DenseOperator(const Eigen::MatrixXd& m) : m_(m) {
    if (m.rows() != m.cols()) throw DomainError("operator must be square");
  }
  std::int64_t dim() const { return m_.rows(); }
  void apply(std::span<const double> x, std::span<double> y) const {
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), dim());
    Eigen::Map<Eigen::VectorXd> yv(y.data(), dim());
    yv.noalias() = m_ * xv;
  }
  double norm_inf() const { return m_.rows() == 0 ? 0.0 : m_.cwiseAbs().rowwise().sum().maxCoeff(); }

 private:
  const Eigen::MatrixXd& m_;
};

struct ArnoldiFactorization {
  Eigen::MatrixXd V;               // dim x m, orthonormal columns
  Eigen::MatrixXd H;               // m x m upper Hessenberg
  double beta = 0.0;               // ||b||
  std::optional<int> breakdown_at; // set when the Krylov space became invariant at step m
  double h_next = 0.0;             // h_{m+1,m}
  Eigen::VectorXd v_next;          // v_{m+1}; empty on breakdown
};

namespace detail {

template <typename Op>
Eigen::VectorXd apply_op(const Op& a, const Eigen::VectorXd& x) {
  Eigen::VectorXd y(x.size());
  a.apply(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
          std::span<double>(y.data(), static_cast<std::size_t>(y.size())));
  return y;
}

}  // namespace detail

/// Arnoldi with modified Gram-Schmidt and one reorthogonalization pass.
/// anorm scales the breakdown test; pass a negative value to have it computed.
template <typename Op>
ArnoldiFactorization arnoldi(const Op& a, const Eigen::VectorXd& b, int m, double anorm = -1.0) {
  const auto n = a.dim();
  if (b.size() != n) throw DomainError("arnoldi: vector length does not match operator");
  if (m < 1 || m > n) throw DomainError("arnoldi: need 1 <= m <= dim");
  ArnoldiFactorization f;
  f.beta = b.norm();
  if (!(f.beta > 0.0)) throw DomainError("arnoldi: starting vector is zero");
  if (anorm < 0.0) anorm = a.norm_inf();
  const double breakdown_tol = 1e-12 * std::max(anorm, 1e-300);

  f.V = Eigen::MatrixXd::Zero(n, m);
  f.H = Eigen::MatrixXd::Zero(m, m);
  f.V.col(0) = b / f.beta;
  for (int j = 0; j < m; ++j) {
    Eigen::VectorXd w = detail::apply_op(a, Eigen::VectorXd(f.V.col(j)));
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i <= j; ++i) {
        const double h = f.V.col(i).dot(w);
        f.H(i, j) += h;
        w -= h * f.V.col(i);
      }
    const double hn = w.norm();
    if (hn <= breakdown_tol || j + 1 == n) {
      f.breakdown_at = j + 1;
      f.V.conservativeResize(Eigen::NoChange, j + 1);
      f.H.conservativeResize(j + 1, j + 1);
      f.h_next = 0.0;
      return f;
    }
    if (j + 1 < m) {
      f.H(j + 1, j) = hn;
      f.V.col(j + 1) = w / hn;
    } else {
      f.h_next = hn;
      f.v_next = w / hn;
    }
  }
  return f;
}

struct KrylovOptions {
  double tol = 1e-12;
  /// Clip entries into [0, 1] afterwards; only meaningful when b is a probability vector.
  bool probability_mode = false;
  int max_step_reductions = 20;
};

struct KrylovStats {
  std::int64_t steps = 0;
  std::int64_t rejected_steps = 0;
  std::int64_t clipped_entries = 0;
  double max_clip = 0.0;
};

/// exp(tA) b by Krylov projection, ||b|| V_m exp(t H_m) e_1, applied over adaptive sub-steps
/// with the local error estimate of Sidje's expv so that stiff operators stay accurate.
template <typename Op>
Eigen::VectorXd expm_krylov_apply(const Op& a, const Eigen::VectorXd& b, int m, double t = 1.0,
                                  const KrylovOptions& opts = {}, KrylovStats* stats = nullptr) {
  const auto n = a.dim();
  if (b.size() != n) throw DomainError("expm_krylov_apply: vector length does not match operator");
  if (m < 1) throw DomainError("expm_krylov_apply: Krylov dimension must be >= 1");
  if (!b.allFinite()) throw DomainError("expm_krylov_apply: non-finite vector");
  KrylovStats local;
  KrylovStats& st = stats ? *stats : local;

  const double anorm = a.norm_inf();
  Eigen::VectorXd w = b;
  double beta = w.norm();
  if (beta == 0.0 || anorm == 0.0 || t == 0.0) return w;
  if (t < 0.0) throw DomainError("expm_krylov_apply: negative time");
  const int mm = static_cast<int>(std::min<std::int64_t>(m, n));
  const double tol = std::max(opts.tol, 1e-15);
  constexpr double gamma = 0.9;
  constexpr double delta = 1.2;

  auto round2 = [](double v) {
    const double s = std::pow(10.0, std::floor(std::log10(v)) - 1.0);
    return std::ceil(v / s) * s;
  };
  const double fact = std::pow((mm + 1) / std::exp(1.0), mm + 1) * std::sqrt(2.0 * 3.141592653589793 * (mm + 1));
  double t_new = (1.0 / anorm) * std::pow((fact * tol) / (4.0 * beta * anorm), 1.0 / mm);
  t_new = round2(t_new);
  double t_now = 0.0;

  while (t_now < t) {
    double t_step = std::min(t - t_now, t_new);
    const ArnoldiFactorization f = arnoldi(a, w, mm, anorm);
    const int mb = static_cast<int>(f.H.rows());
    const bool happy = f.breakdown_at.has_value();
    double avnorm = 0.0;
    if (!happy) avnorm = detail::apply_op(a, f.v_next).norm();

    // augmented Hessenberg carrying the error-estimate rows
    const int mx = happy ? mb : mb + 2;
    Eigen::MatrixXd hbar = Eigen::MatrixXd::Zero(mx, mx);
    hbar.topLeftCorner(mb, mb) = f.H;
    if (!happy) {
      hbar(mb, mb - 1) = f.h_next;
      hbar(mb + 1, mb) = 1.0;
    }
    if (happy) t_step = t - t_now;

    Eigen::MatrixXd fm;
    double err_loc = 0.0;
    double xm = 1.0 / mm;
    for (int reductions = 0;; ++reductions) {
      fm = expm_pade(t_step * hbar);
      if (happy) {
        err_loc = 0.0;
        break;
      }
      const double phi1 = std::fabs(f.beta * fm(mb, 0));
      const double phi2 = std::fabs(f.beta * fm(mb + 1, 0) * avnorm);
      if (phi1 > 10.0 * phi2) {
        err_loc = phi2;
        xm = 1.0 / mm;
      } else if (phi1 > phi2) {
        err_loc = (phi1 * phi2) / (phi1 - phi2);
        xm = 1.0 / mm;
      } else {
        err_loc = phi1;
        xm = 1.0 / std::max(1, mm - 1);
      }
      if (err_loc <= delta * t_step * tol) break;
      if (reductions >= opts.max_step_reductions)
        throw NumericError("Krylov step size control failed to reach the requested tolerance");
      t_step = std::min(t - t_now, round2(gamma * t_step * std::pow(t_step * tol / err_loc, xm)));
      ++st.rejected_steps;
    }

    const int used = happy ? mb : mb + 1;
    Eigen::VectorXd coeff = f.beta * fm.col(0).head(used);
    w = f.V * coeff.head(mb);
    if (!happy) w += coeff(mb) * f.v_next;
    beta = w.norm();
    t_now = t_step >= t - t_now ? t : t_now + t_step;
    ++st.steps;
    if (beta == 0.0) break;
    if (!happy) {
      t_new = gamma * t_step * std::pow(t_step * tol / std::max(err_loc, 1e-300), xm);
      t_new = round2(t_new);
    }
  }

  if (opts.probability_mode) {
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double clipped = std::clamp(w(i), 0.0, 1.0);
      if (clipped != w(i)) {
        ++st.clipped_entries;
        st.max_clip = std::max(st.max_clip, std::fabs(clipped - w(i)));
        w(i) = clipped;
      }
    }
  }
  return w;
}

/// Single entry [exp(tA)]_{ij} (1-based) from one Arnoldi run started at e_j:
/// (e_i^T V_m) (exp(t H_m) e_1).
template <typename Op>
double expm_element(const Op& a, std::int64_t i, std::int64_t j, int m, double t = 1.0) {
  const auto n = a.dim();
  if (i < 1 || j < 1 || i > n || j > n) throw DomainError("expm_element: index out of range");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e(j - 1) = 1.0;
  const auto f = arnoldi(a, e, static_cast<int>(std::min<std::int64_t>(std::max(m, 1), n)));
  const Eigen::MatrixXd eh = expm_pade(t * f.H);
  return f.V.row(i - 1).dot(eh.col(0)) * f.beta;
}

}  // namespace cmemh
