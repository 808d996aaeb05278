#pragma once

// Reference computations written independently of the library code paths they check.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmemh/reaction_system.hpp"
#include "cmemh/system_file.hpp"

namespace oracle {

using cmemh::ReactionSystem;
using cmemh::StateVector;

/// Every state in index order, built by nested counting with species 1 innermost.
inline std::vector<StateVector> enumerate_states(const ReactionSystem& sys) {
  std::vector<StateVector> out{StateVector{}};
  for (std::size_t i = 0; i < sys.caps.size(); ++i) {
    std::vector<StateVector> next;
    for (std::int64_t v = 0; v <= sys.caps[i]; ++v)
      for (const auto& prefix : out) {
        StateVector x = prefix;
        x.push_back(v);
        next.push_back(std::move(x));
      }
    out = std::move(next);
  }
  return out;
}

/// 1-based position of x in enumerate_states.
inline std::int64_t enumerated_index(const ReactionSystem& sys, const StateVector& x) {
  const auto all = enumerate_states(sys);
  for (std::size_t k = 0; k < all.size(); ++k)
    if (all[k] == x) return static_cast<std::int64_t>(k) + 1;
  return -1;
}

/// Mass-action propensity written out with binomial coefficients.
inline double propensity(const ReactionSystem& sys, std::size_t r, const StateVector& x) {
  const auto& spec = sys.reactions[r];
  double a = spec.rate;
  for (const auto& p : spec.param_factors) a *= sys.params.at(p);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int m = spec.reactant_orders[i];
    if (m == 0) continue;
    // C(x, m) computed by lgamma-free product
    double c = 1.0;
    for (int k = 1; k <= m; ++k) c *= static_cast<double>(x[i] - m + k) / k;
    if (x[i] < m) c = 0.0;
    a *= c;
  }
  return a;
}

/// Dense generator from the state list: column j sends a_r(x_j) to the row of state x_j + v_r
/// counted in index arithmetic, dropped when it leaves [1, Q].
inline Eigen::MatrixXd dense_generator(const ReactionSystem& sys, bool frozen = false, StateVector xbar = {}) {
  const auto states = enumerate_states(sys);
  const auto q = static_cast<std::int64_t>(states.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(q, q);
  for (std::int64_t j = 0; j < q; ++j) {
    const StateVector& x = frozen ? xbar : states[static_cast<std::size_t>(j)];
    for (std::size_t r = 0; r < sys.reactions.size(); ++r) {
      const double ar = propensity(sys, r, x);
      std::int64_t shift = 0, stride = 1;
      for (std::size_t i = 0; i < sys.caps.size(); ++i) {
        shift += stride * sys.stoich[r][i];
        stride *= sys.caps[i] + 1;
      }
      a(j, j) -= ar;
      const auto row = j + shift;
      if (row >= 0 && row < q) a(row, j) += ar;
    }
  }
  return a;
}

/// exp(tau A) for A = [[-l, m], [l, -m]].
inline Eigen::Matrix2d two_state_exp(double l, double m, double tau) {
  const double s = l + m;
  const double e = std::exp(-s * tau);
  Eigen::Matrix2d out;
  out << (m + l * e) / s, m * (1.0 - e) / s, l * (1.0 - e) / s, (l + m * e) / s;
  return out;
}

/// Truncated birth-death generator with random rates: births at +1, deaths at -1.
template <typename Rng>
Eigen::MatrixXd random_birth_death(int n, Rng& rng, double scale = 5.0) {
  std::uniform_real_distribution<double> u(0.0, scale);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    const double birth = j + 1 < n ? u(rng) : 0.0;
    const double death = j > 0 ? u(rng) : 0.0;
    if (j + 1 < n) a(j + 1, j) = birth;
    if (j > 0) a(j - 1, j) = death;
    a(j, j) = -(birth + death);
  }
  return a;
}

inline ReactionSystem load(const std::string& name) {
  return cmemh::load_system_document(std::string(CMEMH_SYSTEMS_DIR) + "/" + name + ".sys").system;
}

/// Isomerisation X1 <-> X2 with caps (1, 1): states (1,0) and (0,1) form a closed two-state chain.
inline ReactionSystem two_state(double c1, double c2) {
  ReactionSystem s;
  s.name = "two_state";
  s.species = {"A", "B"};
  s.caps = {1, 1};
  s.initial = {1, 0};
  s.reaction_names = {"fwd", "back"};
  s.reactions = {{c1, {1, 0}, {}}, {c2, {0, 1}, {}}};
  s.stoich = {{-1, 1}, {1, -1}};
  return s;
}

/// Constant-rate birth process on [0, cap].
inline ReactionSystem birth(double rate, std::int64_t cap) {
  ReactionSystem s;
  s.name = "birth";
  s.species = {"X"};
  s.caps = {cap};
  s.initial = {0};
  s.reaction_names = {"b"};
  s.reactions = {{rate, {0}, {}}};
  s.stoich = {{1}};
  return s;
}

/// Constant birth and death rates: propensities do not depend on the state.
inline ReactionSystem constant_rates(double b, double d, std::int64_t cap) {
  ReactionSystem s = birth(b, cap);
  s.name = "constant";
  s.reaction_names = {"b", "d"};
  s.reactions.push_back({d, {0}, {}});
  s.stoich.push_back({-1});
  s.initial = {cap / 2};
  return s;
}

/// Every reaction has rate zero.
inline ReactionSystem inert(std::int64_t cap) {
  ReactionSystem s = birth(0.0, cap);
  s.name = "inert";
  s.initial = {cap / 2};
  return s;
}

inline double l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s;
}

}  // namespace oracle
