#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cmemh/errors.hpp"

namespace cmemh {

using Count = std::int64_t;

/// Molecule counts, one entry per species.
using StateVector = std::vector<Count>;

/// 1-based linear index of a state, species 1 varying fastest.
struct StateIndex {
  std::int64_t value = 1;

  friend constexpr auto operator<=>(StateIndex, StateIndex) = default;
};

/// Mass-action propensity: rate * (product of named parameters) * prod_i x_i(x_i-1)...(x_i-m_i+1) / m_i!.
struct PropensitySpec {
  double rate = 0.0;
  std::vector<int> reactant_orders;
  std::vector<std::string> param_factors;
};

struct ReactionSystem {
  std::string name;
  std::vector<std::string> species;
  std::vector<Count> caps;
  StateVector initial;
  std::vector<std::string> reaction_names;
  /// stoich[r][i]: net change of species i when reaction r fires.
  std::vector<std::vector<Count>> stoich;
  std::vector<PropensitySpec> reactions;
  std::map<std::string, double> params;

  int species_count() const { return static_cast<int>(caps.size()); }
  int reaction_count() const { return static_cast<int>(reactions.size()); }
};

namespace detail {

inline bool checked_mul(std::int64_t a, std::int64_t b, std::int64_t& out) {
  return !__builtin_mul_overflow(a, b, &out);
}

inline double factorial(int m) {
  double f = 1.0;
  for (int k = 2; k <= m; ++k) f *= k;
  return f;
}

}  // namespace detail

/// Returns every violated invariant as a readable line; empty means the system is usable.
inline std::vector<std::string> validate_system(const ReactionSystem& sys) {
  std::vector<std::string> out;
  const auto n = sys.caps.size();
  const auto m = sys.reactions.size();

  if (n == 0) out.push_back("system has no species");
  if (m == 0) out.push_back("system has no reactions");
  if (!sys.species.empty() && sys.species.size() != n)
    out.push_back("species names (" + std::to_string(sys.species.size()) + ") do not match caps (" +
                  std::to_string(n) + ")");
  for (std::size_t i = 0; i < n; ++i)
    if (sys.caps[i] < 1) out.push_back("species " + std::to_string(i + 1) + ": cap must be >= 1");

  if (sys.stoich.size() != m)
    out.push_back("stoichiometry has " + std::to_string(sys.stoich.size()) + " columns, expected " +
                  std::to_string(m));
  for (std::size_t r = 0; r < sys.stoich.size(); ++r) {
    const auto& v = sys.stoich[r];
    if (v.size() != n) {
      out.push_back("reaction " + std::to_string(r + 1) + ": stoichiometry column has " +
                    std::to_string(v.size()) + " rows, expected " + std::to_string(n));
      continue;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (std::llabs(v[i]) > sys.caps[i])
        out.push_back("reaction " + std::to_string(r + 1) + ": |v| = " + std::to_string(std::llabs(v[i])) +
                      " exceeds cap " + std::to_string(sys.caps[i]) + " of species " + std::to_string(i + 1));
  }

  for (std::size_t r = 0; r < m; ++r) {
    const auto& spec = sys.reactions[r];
    const auto tag = "reaction " + std::to_string(r + 1) + ": ";
    if (!std::isfinite(spec.rate) || spec.rate < 0.0) out.push_back(tag + "rate must be finite and >= 0");
    if (spec.reactant_orders.size() != n)
      out.push_back(tag + "reactant orders have " + std::to_string(spec.reactant_orders.size()) +
                    " entries, expected " + std::to_string(n));
    for (int order : spec.reactant_orders)
      if (order < 0) out.push_back(tag + "negative reactant order");
    for (const auto& p : spec.param_factors)
      if (!sys.params.contains(p)) out.push_back(tag + "unknown parameter '" + p + "'");
  }
  for (const auto& [key, value] : sys.params)
    if (!std::isfinite(value) || value < 0.0) out.push_back("parameter " + key + " must be finite and >= 0");

  std::int64_t q = 1;
  for (auto cap : sys.caps) {
    if (cap < 1) break;
    if (!detail::checked_mul(q, cap + 1, q)) {
      out.push_back("state count overflows a 64-bit index");
      break;
    }
  }

  if (!sys.initial.empty()) {
    if (sys.initial.size() != n) {
      out.push_back("initial state has wrong length");
    } else {
      for (std::size_t i = 0; i < n; ++i)
        if (sys.initial[i] < 0 || sys.initial[i] > sys.caps[i])
          out.push_back("initial count of species " + std::to_string(i + 1) + " outside [0, cap]");
    }
  }
  return out;
}

/// Q = prod (cap_i + 1).
inline std::int64_t state_count(const ReactionSystem& sys) {
  std::int64_t q = 1;
  for (auto cap : sys.caps)
    if (!detail::checked_mul(q, cap + 1, q)) throw DomainError("state count overflows a 64-bit index");
  return q;
}

/// Index stride of each species (species 1 has stride 1).
inline std::vector<std::int64_t> index_strides(const ReactionSystem& sys) {
  std::vector<std::int64_t> s(sys.caps.size());
  std::int64_t acc = 1;
  for (std::size_t i = 0; i < sys.caps.size(); ++i) {
    s[i] = acc;
    acc *= sys.caps[i] + 1;
  }
  return s;
}

inline bool within_caps(const ReactionSystem& sys, const StateVector& x) {
  if (x.size() != sys.caps.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < 0 || x[i] > sys.caps[i]) return false;
  return true;
}

inline StateIndex state_index(const ReactionSystem& sys, const StateVector& x) {
  if (!within_caps(sys, x)) throw DomainError("state outside species caps");
  std::int64_t idx = 1;
  std::int64_t stride = 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    idx += stride * x[i];
    stride *= sys.caps[i] + 1;
  }
  return StateIndex{idx};
}

inline StateVector state_from_index(const ReactionSystem& sys, StateIndex i) {
  const auto q = state_count(sys);
  if (i.value < 1 || i.value > q) throw DomainError("state index outside [1, Q]");
  StateVector x(sys.caps.size());
  auto rest = i.value - 1;
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] = rest % (sys.caps[k] + 1);
    rest /= sys.caps[k] + 1;
  }
  return x;
}

/// d_r = I(x) - I(x - v_r); r is 1-based.
inline std::int64_t index_shift(const ReactionSystem& sys, int r) {
  const auto& v = sys.stoich.at(static_cast<std::size_t>(r - 1));
  std::int64_t d = 0;
  std::int64_t stride = 1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    d += stride * v[i];
    stride *= sys.caps[i] + 1;
  }
  return d;
}

/// Propensity of reaction r (1-based) at x.
inline double propensity(const ReactionSystem& sys, int r, const StateVector& x) {
  const auto& spec = sys.reactions.at(static_cast<std::size_t>(r - 1));
  double a = spec.rate;
  for (const auto& p : spec.param_factors) a *= sys.params.at(p);
  for (std::size_t i = 0; i < spec.reactant_orders.size(); ++i) {
    const int m = spec.reactant_orders[i];
    if (m == 0) continue;
    if (x[i] < m) return 0.0;
    a /= detail::factorial(m);
    for (int k = 0; k < m; ++k) a *= static_cast<double>(x[i] - k);
  }
  return a;
}

inline double total_propensity(const ReactionSystem& sys, const StateVector& x) {
  double a0 = 0.0;
  for (int r = 1; r <= sys.reaction_count(); ++r) a0 += propensity(sys, r, x);
  return a0;
}

/// E[x(t+tau) - x(t)] under one explicit tau-leap step.
inline std::vector<double> expected_jump(const ReactionSystem& sys, const StateVector& x, double tau) {
  std::vector<double> jump(sys.caps.size(), 0.0);
  for (int r = 1; r <= sys.reaction_count(); ++r) {
    const double a = propensity(sys, r, x) * tau;
    const auto& v = sys.stoich[static_cast<std::size_t>(r - 1)];
    for (std::size_t i = 0; i < jump.size(); ++i) jump[i] += static_cast<double>(v[i]) * a;
  }
  return jump;
}

/// Precomputed propensity coefficients for hot loops. Gives bit-identical values to propensity().
class Kinetics {
 public:
  explicit Kinetics(const ReactionSystem& sys) : n_(sys.species_count()) {
    for (const auto& spec : sys.reactions) {
      Term t;
      t.scale = spec.rate;
      for (const auto& p : spec.param_factors) t.scale *= sys.params.at(p);
      for (int i = 0; i < static_cast<int>(spec.reactant_orders.size()); ++i)
        if (spec.reactant_orders[i] > 0) t.factors.push_back({i, spec.reactant_orders[i]});
      terms_.push_back(std::move(t));
    }
  }

  int reaction_count() const { return static_cast<int>(terms_.size()); }

  /// r is 0-based here.
  double operator()(int r, const Count* x) const {
    const auto& t = terms_[static_cast<std::size_t>(r)];
    double a = t.scale;
    for (const auto& [i, m] : t.factors) {
      if (x[i] < m) return 0.0;
      a /= detail::factorial(m);
      for (int k = 0; k < m; ++k) a *= static_cast<double>(x[i] - k);
    }
    return a;
  }

  double operator()(int r, const StateVector& x) const { return (*this)(r, x.data()); }

  void all(const StateVector& x, std::vector<double>& out) const {
    out.resize(terms_.size());
    for (int r = 0; r < reaction_count(); ++r) out[static_cast<std::size_t>(r)] = (*this)(r, x.data());
  }

 private:
  struct Term {
    double scale = 0.0;
    std::vector<std::pair<int, int>> factors;
  };
  int n_;
  std::vector<Term> terms_;
};

inline std::string format_state(const StateVector& x) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
  os << ']';
  return os.str();
}

}  // namespace cmemh
