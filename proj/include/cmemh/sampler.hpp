#pragma once

#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmemh/errors.hpp"
#include "cmemh/generator.hpp"
#include "cmemh/matexp.hpp"
#include "cmemh/reaction_system.hpp"
#include "cmemh/rng.hpp"
#include "cmemh/simulators.hpp"

namespace cmemh {

/// How the index window for density evaluation is chosen.
///   automatic: width min(S^N, Q) centred on the anchor state, doubled until every state involved is covered,
///              with S from submatrix_size_estimate;
///   explicit_width: make_window over {anchor, previous, proposal} with the given width;
///   full: [1, Q].
struct WindowPolicy {
  enum class Mode { automatic, explicit_width, full };
  Mode mode = Mode::automatic;
  std::int64_t width = 0;

  static WindowPolicy automatic() { return {Mode::automatic, 0}; }
  static WindowPolicy full() { return {Mode::full, 0}; }
  static WindowPolicy fixed(std::int64_t w) {
    if (w < 1) throw DomainError("window width must be >= 1");
    return {Mode::explicit_width, w};
  }

  static WindowPolicy parse(std::string_view s) {
    if (s == "auto") return automatic();
    if (s == "full") return full();
    std::int64_t w = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), w);
    if (ec != std::errc{} || ptr != s.data() + s.size() || w < 1)
      throw DomainError("window must be auto, full or a positive integer, got '" + std::string(s) + "'");
    return fixed(w);
  }

  std::string to_string() const {
    switch (mode) {
      case Mode::automatic: return "auto";
      case Mode::full: return "full";
      case Mode::explicit_width: return std::to_string(width);
    }
    return "?";
  }
};

struct ChainConfig {
  double tau = 0.4;
  double t_final = 4.0;
  std::int64_t n_samples = 1000;
  ExpmMethod expm;
  WindowPolicy window;
  std::int64_t max_rejects_per_accept = 10'000;
  std::uint64_t seed = 1;
  /// Proposals per time step. 0 returns the first accepted proposal instead.
  int chain_length = 10;
  /// Byte budget of the density-column cache per evaluator; 0 disables caching.
  std::size_t cache_bytes = std::size_t{256} << 20;
  bool keep_records = false;

  void validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("tau must be positive");
    if (!(t_final >= tau) || !std::isfinite(t_final)) throw DomainError("final time must be >= tau");
    if (n_samples < 1) throw DomainError("sample count must be >= 1");
    if (max_rejects_per_accept < 1) throw DomainError("max_rejects_per_accept must be >= 1");
    if (chain_length < 0) throw DomainError("chain length must be >= 0");
    expm.validate();
  }
};

struct ChainRecord {
  StateVector proposal;
  StateVector previous;
  StateVector anchor;
  double pi_star = 0.0;
  double pi_prev = 0.0;
  double g_star = 0.0;
  double g_prev = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double alpha = 0.0;
  double zeta = 0.0;
  bool accepted = false;
  Window window;
  std::optional<double> residual;
};

struct AcceptanceRatio {
  double alpha1 = 0.0;  // pi* / pi_prev
  double alpha2 = 0.0;  // g_prev / g*
  double alpha = 0.0;   // +inf forces acceptance, 0 forces rejection
  bool degenerate = false;
};

/// Independence-sampler ratio (pi*/pi_prev)(g_prev/g*).
/// g* = 0 rejects; pi_prev = 0 accepts exactly when pi* > 0. Never divides by zero.
inline AcceptanceRatio acceptance_ratio(double pi_star, double pi_prev, double g_prev, double g_star) {
  AcceptanceRatio r;
  if (!(g_star > 0.0)) {
    r.degenerate = true;
    r.alpha2 = std::numeric_limits<double>::infinity();
    r.alpha1 = pi_prev > 0.0 ? pi_star / pi_prev : 0.0;
    r.alpha = 0.0;
    return r;
  }
  r.alpha2 = g_prev / g_star;
  if (!(pi_prev > 0.0)) {
    r.degenerate = true;
    r.alpha1 = pi_star > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    r.alpha = r.alpha1;
    return r;
  }
  r.alpha1 = pi_star / pi_prev;
  r.alpha = r.alpha1 * r.alpha2;
  return r;
}

/// Accept iff zeta < min(1, alpha).
inline bool accept_decision(double alpha, double zeta) { return zeta < std::min(1.0, alpha); }

/// Evaluates one-step densities exp(tau A_w) delta_{I(xbar)} on windows, with an LRU cache of columns.
/// Not thread-safe; use one evaluator per worker.
class DensityEvaluator {
 public:
  DensityEvaluator(const ReactionSystem& sys, ExpmMethod method, std::size_t cache_bytes = std::size_t{256} << 20,
                   std::shared_ptr<const CmeGenerator> full_exact = nullptr)
      : sys_(sys), method_(method), cache_bytes_(cache_bytes), full_(std::move(full_exact)), q_(cmemh::state_count(sys)) {
    method_.validate();
  }

  const ReactionSystem& system() const { return sys_; }
  std::int64_t state_count() const { return q_; }
  const ExpmMethod& method() const { return method_; }

  /// Column of exp(tau A_w), A_w the exact (or frozen at xbar) generator restricted to w.
  const std::vector<double>& column(GeneratorKind kind, const StateVector& xbar, const Window& w, double tau) {
    const auto src = state_index(sys_, xbar);
    if (!w.contains(src)) throw WindowError("window does not contain the source state");
    const Key key{kind, src.value, w.lo.value, w.hi.value, std::bit_cast<std::uint64_t>(tau)};
    if (cache_bytes_ > 0) {
      if (auto it = index_.find(key); it != index_.end()) {
        ++hits_;
        lru_.splice(lru_.begin(), lru_, it->second);
        return it->second->values;
      }
    }
    ++misses_;
    const CmeGenerator a = operator_for(kind, xbar, w);
    auto values = expm_column(a, src.value - w.lo.value + 1, tau, method_, &krylov_);
    const std::size_t bytes = values.size() * sizeof(double) + 128;
    if (cache_bytes_ == 0 || bytes > cache_bytes_) {
      scratch_ = std::move(values);
      return scratch_;
    }
    while (used_bytes_ + bytes > cache_bytes_ && !lru_.empty()) {
      used_bytes_ -= lru_.back().bytes;
      index_.erase(lru_.back().key);
      lru_.pop_back();
    }
    lru_.push_front(Entry{key, std::move(values), bytes});
    index_[key] = lru_.begin();
    used_bytes_ += bytes;
    return lru_.front().values;
  }

  double density(GeneratorKind kind, const StateVector& to, const StateVector& xbar, const Window& w, double tau) {
    const auto dst = state_index(sys_, to);
    if (!w.contains(dst)) throw WindowError("window does not contain the destination state");
    const auto& col = column(kind, xbar, w, tau);
    return col[static_cast<std::size_t>(dst.value - w.lo.value)];
  }

  std::int64_t cache_hits() const { return hits_; }
  std::int64_t cache_misses() const { return misses_; }
  const KrylovStats& krylov_stats() const { return krylov_; }

 private:
  struct Key {
    GeneratorKind kind;
    std::int64_t src, lo, hi;
    std::uint64_t tau_bits;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = 1469598103934665603ull;
      for (std::uint64_t v : {static_cast<std::uint64_t>(k.kind), static_cast<std::uint64_t>(k.src),
                              static_cast<std::uint64_t>(k.lo), static_cast<std::uint64_t>(k.hi), k.tau_bits}) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      }
      return static_cast<std::size_t>(h);
    }
  };
  struct Entry {
    Key key;
    std::vector<double> values;
    std::size_t bytes;
  };

  CmeGenerator operator_for(GeneratorKind kind, const StateVector& xbar, const Window& w) const {
    if (kind == GeneratorKind::frozen) return build_frozen_window_generator(sys_, xbar, w);
    if (full_) {
      if (w == full_->window()) return *full_;
      return extract_window(*full_, w);
    }
    return build_window_generator(sys_, w);
  }

  const ReactionSystem& sys_;
  ExpmMethod method_;
  std::size_t cache_bytes_;
  std::shared_ptr<const CmeGenerator> full_;
  std::int64_t q_;
  std::list<Entry> lru_;
  std::unordered_map<Key, std::list<Entry>::iterator, KeyHash> index_;
  std::size_t used_bytes_ = 0;
  std::vector<double> scratch_;
  std::int64_t hits_ = 0;
  std::int64_t misses_ = 0;
  KrylovStats krylov_;
};

/// Window for densities from xbar covering every listed state.
inline Window resolve_window(const ReactionSystem& sys, const WindowPolicy& policy, const StateVector& xbar,
                             std::span<const StateVector> others, double tau) {
  const auto q = state_count(sys);
  std::vector<StateIndex> anchors{state_index(sys, xbar)};
  for (const auto& x : others) anchors.push_back(state_index(sys, x));
  switch (policy.mode) {
    case WindowPolicy::Mode::full:
      return Window{StateIndex{1}, StateIndex{q}};
    case WindowPolicy::Mode::explicit_width:
      return make_window(anchors, policy.width, q);
    case WindowPolicy::Mode::automatic: {
      const auto s = submatrix_size_estimate(sys, xbar, tau);
      std::int64_t width = 1;
      for (int i = 0; i < sys.species_count() && width < q; ++i) width = (width > q / s) ? q : width * s;
      width = std::min(width, q);
      for (;;) {
        const Window w = make_window({anchors.front()}, width, q);
        bool covers = true;
        for (auto a : anchors) covers = covers && w.contains(a);
        if (covers) return w;
        width = std::min(q, width * 2);
      }
    }
  }
  throw DomainError("unknown window policy");
}

/// pi(x_to | xbar) = [exp(tau A_w)]_{I(x_to), I(xbar)} with the exact generator; nullopt window means [1, Q].
inline double target_element(const ReactionSystem& sys, const CmeGenerator* exact_full, const StateVector& x_to,
                             const StateVector& xbar, double tau, const ExpmMethod& method,
                             std::optional<Window> window = std::nullopt) {
  std::shared_ptr<const CmeGenerator> shared;
  if (exact_full) shared = std::shared_ptr<const CmeGenerator>(exact_full, [](const CmeGenerator*) {});
  DensityEvaluator ev(sys, method, 0, shared);
  const auto q = state_count(sys);
  return ev.density(GeneratorKind::exact, x_to, xbar, window.value_or(Window{StateIndex{1}, StateIndex{q}}), tau);
}

/// g(x_to | xbar) from the generator with propensities frozen at xbar.
inline double proposal_element(const ReactionSystem& sys, const StateVector& x_to, const StateVector& xbar,
                               double tau, const ExpmMethod& method, std::optional<Window> window = std::nullopt) {
  DensityEvaluator ev(sys, method, 0);
  const auto q = state_count(sys);
  return ev.density(GeneratorKind::frozen, x_to, xbar, window.value_or(Window{StateIndex{1}, StateIndex{q}}), tau);
}

/// |pi over [1, Q] - pi over a width-W window around {xbar, x_to}|.
inline double window_residual(const ReactionSystem& sys, const StateVector& xbar, const StateVector& x_to, double tau,
                              std::int64_t width, const ExpmMethod& method, const CmeGenerator* exact_full = nullptr) {
  const auto q = state_count(sys);
  const Window w = make_window({state_index(sys, xbar), state_index(sys, x_to)}, width, q);
  const double full = target_element(sys, exact_full, x_to, xbar, tau, method);
  const double part = target_element(sys, exact_full, x_to, xbar, tau, method, w);
  return std::fabs(full - part);
}

struct TransitionResult {
  StateVector next;
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t max_window = 0;
  std::vector<ChainRecord> records;
};

/// One time step of the chain anchored at xbar, started from x_prev (a tau-leap draw from xbar).
///
/// chain_length > 0: runs that many independence proposals and returns the chain's final state; while the
/// current state has zero target density, proposals continue past that count.
/// chain_length == 0: returns the first accepted proposal.
inline TransitionResult mh_transition(const ReactionSystem& sys, const StateVector& xbar, const StateVector& x_prev,
                                      const ChainConfig& cfg, RngStream& rng, DensityEvaluator& ev,
                                      double tau_step = 0.0) {
  const double tau = tau_step > 0.0 ? tau_step : cfg.tau;
  const Kinetics kin(sys);
  std::vector<double> a;
  TransitionResult out;
  StateVector current = x_prev;
  std::int64_t proposals = 0;
  std::int64_t reject_run = 0;
  const bool first_accept = cfg.chain_length == 0;

  for (;;) {
    StateVector proposal = xbar;
    detail::tau_leap_inplace(sys, kin, proposal, tau, rng, a, nullptr);

    const StateVector others[2] = {current, proposal};
    const Window w = resolve_window(sys, cfg.window, xbar, others, tau);
    out.max_window = std::max(out.max_window, w.width());
    const double pi_star = ev.density(GeneratorKind::exact, proposal, xbar, w, tau);
    const double pi_prev = ev.density(GeneratorKind::exact, current, xbar, w, tau);
    const double g_star = ev.density(GeneratorKind::frozen, proposal, xbar, w, tau);
    const double g_prev = ev.density(GeneratorKind::frozen, current, xbar, w, tau);
    const auto ratio = acceptance_ratio(pi_star, pi_prev, g_prev, g_star);
    const double zeta = rng.uniform();
    const bool accepted = accept_decision(ratio.alpha, zeta);

    if (cfg.keep_records) {
      ChainRecord rec;
      rec.proposal = proposal;
      rec.previous = current;
      rec.anchor = xbar;
      rec.pi_star = pi_star;
      rec.pi_prev = pi_prev;
      rec.g_star = g_star;
      rec.g_prev = g_prev;
      rec.alpha1 = ratio.alpha1;
      rec.alpha2 = ratio.alpha2;
      rec.alpha = ratio.alpha;
      rec.zeta = zeta;
      rec.accepted = accepted;
      rec.window = w;
      out.records.push_back(std::move(rec));
    }

    ++proposals;
    bool current_positive = pi_prev > 0.0;
    if (accepted) {
      ++out.accepted;
      reject_run = 0;
      current = std::move(proposal);
      current_positive = pi_star > 0.0;
      if (first_accept) break;
    } else {
      ++out.rejected;
      if (++reject_run > cfg.max_rejects_per_accept)
        throw StallError("MH transition from " + format_state(xbar) + " exceeded " +
                             std::to_string(cfg.max_rejects_per_accept) +
                             " consecutive rejections; try a larger window",
                         out.accepted, out.rejected);
    }
    if (!first_accept && proposals >= cfg.chain_length && current_positive) break;
  }
  out.next = std::move(current);
  return out;
}

struct MhTrajectoryResult {
  TrajectoryResult trajectory;
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t max_window = 0;
  std::vector<ChainRecord> records;
};

/// Marches x0 to T in steps of tau; each step anchors at the current state and takes mh_transition's result.
inline MhTrajectoryResult mh_run_trajectory(const ReactionSystem& sys, const StateVector& x0, const ChainConfig& cfg,
                                            RngStream& rng, DensityEvaluator& ev) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const Kinetics kin(sys);
  std::vector<double> a;
  MhTrajectoryResult res;
  res.trajectory.firings.assign(static_cast<std::size_t>(sys.reaction_count()), 0);
  StateVector x = x0;
  const auto n = detail::step_count(cfg.t_final, cfg.tau);
  for (std::int64_t s = 0; s < n; ++s) {
    const double h = detail::step_length(cfg.t_final, cfg.tau, s);
    StateVector x_prev = x;
    detail::tau_leap_inplace(sys, kin, x_prev, h, rng, a, nullptr);
    auto tr = mh_transition(sys, x, x_prev, cfg, rng, ev, h);
    res.accepted += tr.accepted;
    res.rejected += tr.rejected;
    res.max_window = std::max(res.max_window, tr.max_window);
    if (cfg.keep_records)
      res.records.insert(res.records.end(), std::make_move_iterator(tr.records.begin()),
                         std::make_move_iterator(tr.records.end()));
    x = std::move(tr.next);
    ++res.trajectory.steps;
  }
  res.trajectory.final_state = std::move(x);
  res.trajectory.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace cmemh
