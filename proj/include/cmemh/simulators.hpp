#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cmemh/reaction_system.hpp"
#include "cmemh/rng.hpp"

namespace cmemh {

struct TrajectoryResult {
  StateVector final_state;
  std::vector<std::int64_t> firings;
  std::int64_t steps = 0;
  double wall_seconds = 0.0;
};

struct SsaStep {
  StateVector x;
  double t = 0.0;
  int reaction = 0;  // 1-based; 0 when nothing can fire
};

namespace detail {

inline void clamp_into_caps(const ReactionSystem& sys, StateVector& x) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp<Count>(x[i], 0, sys.caps[i]);
}

inline void apply_firing(const ReactionSystem& sys, StateVector& x, int r0, std::int64_t times = 1) {
  const auto& v = sys.stoich[static_cast<std::size_t>(r0)];
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += v[i] * times;
}

// One Gillespie direct-method event. Returns the 0-based reaction index or -1.
inline int ssa_event(const ReactionSystem& sys, const Kinetics& kin, StateVector& x, double& t,
                     RngStream& rng, std::vector<double>& a) {
  kin.all(x, a);
  double a0 = 0.0;
  for (double ar : a) a0 += ar;
  if (!(a0 > 0.0)) {
    t = std::numeric_limits<double>::infinity();
    return -1;
  }
  t += rng.exponential(a0);
  const double target = rng.uniform() * a0;
  const int m = static_cast<int>(a.size());
  double acc = 0.0;
  int r = -1;
  for (int k = 0; k < m; ++k) {
    if (a[static_cast<std::size_t>(k)] <= 0.0) continue;
    r = k;
    acc += a[static_cast<std::size_t>(k)];
    if (target < acc) break;
  }
  apply_firing(sys, x, r);
  clamp_into_caps(sys, x);
  return r;
}

inline void tau_leap_inplace(const ReactionSystem& sys, const Kinetics& kin, StateVector& x, double tau,
                             RngStream& rng, std::vector<double>& a, std::vector<std::int64_t>* firings) {
  kin.all(x, a);
  StateVector next = x;
  for (int r = 0; r < kin.reaction_count(); ++r) {
    const auto k = rng.poisson(a[static_cast<std::size_t>(r)] * tau);
    if (k == 0) continue;
    apply_firing(sys, next, r, k);
    if (firings) (*firings)[static_cast<std::size_t>(r)] += k;
  }
  clamp_into_caps(sys, next);
  x = std::move(next);
}

// Number of fixed steps of size tau covering [0, T]; the last one may be partial.
inline std::int64_t step_count(double t_final, double tau) {
  const double ratio = t_final / tau;
  const double nearest = std::round(ratio);
  if (std::fabs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest)) return std::max<std::int64_t>(1, std::llround(nearest));
  return static_cast<std::int64_t>(std::ceil(ratio));
}

inline double step_length(double t_final, double tau, std::int64_t step) {
  const auto n = step_count(t_final, tau);
  if (step + 1 < n) return tau;
  return t_final - tau * static_cast<double>(n - 1);
}

}  // namespace detail

/// One exact SSA event from (x, t). Returns t = +inf and x unchanged in an absorbing state.
inline SsaStep ssa_step(const ReactionSystem& sys, const StateVector& x, double t, RngStream& rng) {
  Kinetics kin(sys);
  std::vector<double> a;
  SsaStep out{x, t, 0};
  const int r = detail::ssa_event(sys, kin, out.x, out.t, rng, a);
  out.reaction = r + 1;
  if (r < 0) out.x = x;
  return out;
}

/// State at time T of one SSA trajectory started at x0.
inline TrajectoryResult ssa_run(const ReactionSystem& sys, const StateVector& x0, double t_final, RngStream& rng) {
  const auto start = std::chrono::steady_clock::now();
  Kinetics kin(sys);
  std::vector<double> a;
  TrajectoryResult res;
  res.firings.assign(static_cast<std::size_t>(sys.reaction_count()), 0);
  StateVector x = x0;
  double t = 0.0;
  for (;;) {
    StateVector trial = x;
    double t_next = t;
    const int r = detail::ssa_event(sys, kin, trial, t_next, rng, a);
    if (r < 0 || t_next > t_final) break;
    x = std::move(trial);
    t = t_next;
    ++res.firings[static_cast<std::size_t>(r)];
    ++res.steps;
  }
  res.final_state = std::move(x);
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

/// x + sum_j v_j K_j with K_j ~ Poisson(a_j(x) tau), clamped componentwise into [0, cap].
inline StateVector tau_leap_step(const ReactionSystem& sys, const StateVector& x, double tau, RngStream& rng) {
  Kinetics kin(sys);
  std::vector<double> a;
  StateVector out = x;
  detail::tau_leap_inplace(sys, kin, out, tau, rng, a, nullptr);
  return out;
}

inline TrajectoryResult tau_leap_run(const ReactionSystem& sys, const StateVector& x0, double t_final, double tau,
                                     RngStream& rng) {
  const auto start = std::chrono::steady_clock::now();
  Kinetics kin(sys);
  std::vector<double> a;
  TrajectoryResult res;
  res.firings.assign(static_cast<std::size_t>(sys.reaction_count()), 0);
  StateVector x = x0;
  const auto n = detail::step_count(t_final, tau);
  for (std::int64_t s = 0; s < n; ++s) {
    detail::tau_leap_inplace(sys, kin, x, detail::step_length(t_final, tau, s), rng, a, &res.firings);
    ++res.steps;
  }
  res.final_state = std::move(x);
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace cmemh
