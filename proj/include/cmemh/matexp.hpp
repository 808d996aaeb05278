#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cmemh/errors.hpp"
#include "cmemh/generator.hpp"
#include "cmemh/krylov.hpp"
#include "cmemh/pade.hpp"
#include "cmemh/rational.hpp"

namespace cmemh {

/// Largest dimension for which the dense Pade engine is accepted.
inline constexpr std::int64_t kDenseBudget = 4000;

struct ExpmMethod {
  enum class Kind { pade, contour, cram, krylov };

  Kind kind = Kind::cram;
  int krylov_dim = 30;
  int order = 0;  // 0 selects the default: 16 for cram, 32 for contour
  double tol = 1e-12;

  int resolved_order() const {
    if (order != 0) return order;
    return kind == Kind::contour ? 32 : 16;
  }

  void validate() const {
    if (krylov_dim < 1) throw DomainError("Krylov dimension must be >= 1");
    if (kind == Kind::cram && resolved_order() != 14 && resolved_order() != 16)
      throw DomainError("CRAM order must be 14 or 16");
    if (kind == Kind::contour && (resolved_order() < 2 || resolved_order() % 2 != 0))
      throw DomainError("contour order must be an even integer >= 2");
    if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
  }
};

inline std::string to_string(ExpmMethod::Kind k) {
  switch (k) {
    case ExpmMethod::Kind::pade: return "pade";
    case ExpmMethod::Kind::contour: return "contour";
    case ExpmMethod::Kind::cram: return "cram";
    case ExpmMethod::Kind::krylov: return "krylov";
  }
  return "?";
}

inline ExpmMethod::Kind parse_expm_kind(std::string_view s) {
  if (s == "pade") return ExpmMethod::Kind::pade;
  if (s == "contour") return ExpmMethod::Kind::contour;
  if (s == "cram") return ExpmMethod::Kind::cram;
  if (s == "krylov") return ExpmMethod::Kind::krylov;
  throw DomainError("unknown exponential method '" + std::string(s) + "'");
}

/// exp(tA) b with the selected engine.
inline std::vector<double> expm_apply(const CmeGenerator& a, std::span<const double> b, double t,
                                      const ExpmMethod& method, KrylovStats* stats = nullptr) {
  method.validate();
  if (static_cast<std::int64_t>(b.size()) != a.dim()) throw DomainError("vector length does not match generator");
  switch (method.kind) {
    case ExpmMethod::Kind::pade: {
      if (a.dim() > kDenseBudget)
        throw ResourceError("dense Pade engine limited to dimension " + std::to_string(kDenseBudget) +
                            "; choose cram, contour or krylov");
      const Eigen::MatrixXd e = expm_pade(t * a.to_dense());
      const Eigen::VectorXd y = e * Eigen::Map<const Eigen::VectorXd>(b.data(), a.dim());
      return {y.data(), y.data() + y.size()};
    }
    case ExpmMethod::Kind::contour:
      return expm_contour_apply(a, b, method.resolved_order(), t);
    case ExpmMethod::Kind::cram:
      return expm_cram_apply(a, b, method.resolved_order(), t);
    case ExpmMethod::Kind::krylov: {
      KrylovOptions opts;
      opts.tol = method.tol;
      const Eigen::VectorXd bv = Eigen::Map<const Eigen::VectorXd>(b.data(), a.dim());
      const Eigen::VectorXd y = expm_krylov_apply(a, bv, method.krylov_dim, t, opts, stats);
      return {y.data(), y.data() + y.size()};
    }
  }
  throw DomainError("unknown exponential method");
}

/// Column j (1-based, local) of exp(tA).
inline std::vector<double> expm_column(const CmeGenerator& a, std::int64_t j, double t, const ExpmMethod& method,
                                       KrylovStats* stats = nullptr) {
  if (j < 1 || j > a.dim()) throw DomainError("column index out of range");
  std::vector<double> e(static_cast<std::size_t>(a.dim()), 0.0);
  e[static_cast<std::size_t>(j - 1)] = 1.0;
  return expm_apply(a, e, t, method, stats);
}

}  // namespace cmemh
