#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "cmemh/errors.hpp"
#include "cmemh/generator.hpp"
#include "cmemh/reaction_system.hpp"
#include "cmemh/rng.hpp"
#include "cmemh/sampler.hpp"
#include "cmemh/simulators.hpp"

namespace cmemh {

enum class SimulationMethod { ssa, tau, mh };

inline std::string to_string(SimulationMethod m) {
  switch (m) {
    case SimulationMethod::ssa: return "ssa";
    case SimulationMethod::tau: return "tau";
    case SimulationMethod::mh: return "mh";
  }
  return "?";
}

inline SimulationMethod parse_simulation_method(std::string_view s) {
  if (s == "ssa") return SimulationMethod::ssa;
  if (s == "tau") return SimulationMethod::tau;
  if (s == "mh") return SimulationMethod::mh;
  throw DomainError("unknown method '" + std::string(s) + "'");
}

/// Marginal counts per species; counts[i][k] is the number of samples with species i at k molecules.
struct Histogram {
  std::vector<std::string> species;
  std::vector<std::vector<std::int64_t>> counts;

  static Histogram empty_for(const ReactionSystem& sys) {
    Histogram h;
    h.species = sys.species;
    for (auto cap : sys.caps) h.counts.emplace_back(static_cast<std::size_t>(cap + 1), 0);
    return h;
  }

  void add(const StateVector& x) {
    for (std::size_t i = 0; i < counts.size(); ++i) ++counts[i][static_cast<std::size_t>(x[i])];
  }

  void merge(const Histogram& o) {
    for (std::size_t i = 0; i < counts.size(); ++i)
      for (std::size_t k = 0; k < counts[i].size(); ++k) counts[i][k] += o.counts[i][k];
  }

  std::int64_t total(std::size_t species_idx = 0) const {
    std::int64_t s = 0;
    for (auto c : counts.at(species_idx)) s += c;
    return s;
  }

  std::vector<double> frequencies(std::size_t species_idx) const {
    const auto n = static_cast<double>(total(species_idx));
    std::vector<double> f;
    f.reserve(counts[species_idx].size());
    for (auto c : counts[species_idx]) f.push_back(n > 0 ? static_cast<double>(c) / n : 0.0);
    return f;
  }

  double mean(std::size_t species_idx) const {
    const auto n = static_cast<double>(total(species_idx));
    double s = 0.0;
    for (std::size_t k = 0; k < counts[species_idx].size(); ++k)
      s += static_cast<double>(k) * static_cast<double>(counts[species_idx][k]);
    return n > 0 ? s / n : 0.0;
  }
};

struct EnsembleResult {
  Histogram histogram;
  std::int64_t trajectories = 0;
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t stalls = 0;
  std::string stall_message;
  std::int64_t max_window = 0;
  std::int64_t cache_hits = 0;
  std::int64_t cache_misses = 0;
  std::int64_t krylov_clipped = 0;
  std::int64_t cap_hits = 0;  // samples with some species within 5% of its cap
  double wall_seconds = 0.0;
  std::vector<double> residual_samples;
  std::vector<StateVector> final_states;  // filled only when requested

  double seconds_per_sample() const { return trajectories > 0 ? wall_seconds / static_cast<double>(trajectories) : 0.0; }
};

/// Worker count: CMEMH_THREADS if set, else the hardware concurrency; never more than the job count.
inline unsigned worker_count(std::int64_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CMEMH_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::min<std::int64_t>(n, std::max<std::int64_t>(jobs, 1)));
}

struct EnsembleOptions {
  /// Number of (anchor, proposal) pairs checked against the full matrix when a window is in use.
  int residual_samples = 10;
  std::int64_t residual_state_limit = 100'000;
  bool keep_final_states = false;
  std::shared_ptr<const CmeGenerator> full_exact;
};

/// n independent trajectories from sys.initial; trajectory i draws from RngStream(cfg.seed, i).
/// Results do not depend on the number of workers.
inline EnsembleResult ensemble_run(const ReactionSystem& sys, const ChainConfig& cfg, SimulationMethod method,
                                   std::int64_t n, const EnsembleOptions& opts = {}) {
  cfg.validate();
  if (n < 1) throw DomainError("ensemble size must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const auto q = state_count(sys);

  std::shared_ptr<const CmeGenerator> full = opts.full_exact;
  if (method == SimulationMethod::mh && !full && cfg.window.mode == WindowPolicy::Mode::full)
    full = std::make_shared<const CmeGenerator>(build_exact_generator(sys));

  const unsigned workers = worker_count(n);
  std::vector<EnsembleResult> parts(workers);
  std::vector<std::vector<ChainRecord>> sample_records(workers);
  std::atomic<bool> stop{false};
  std::mutex err_mu;
  std::exception_ptr failure;

  auto work = [&](unsigned wid) {
    auto& part = parts[wid];
    part.histogram = Histogram::empty_for(sys);
    std::optional<DensityEvaluator> ev;
    if (method == SimulationMethod::mh) ev.emplace(sys, cfg.expm, cfg.cache_bytes, full);
    try {
      for (std::int64_t i = wid; i < n && !stop.load(); i += workers) {
        RngStream rng(cfg.seed, static_cast<std::uint64_t>(i));
        StateVector x;
        switch (method) {
          case SimulationMethod::ssa:
            x = ssa_run(sys, sys.initial, cfg.t_final, rng).final_state;
            break;
          case SimulationMethod::tau:
            x = tau_leap_run(sys, sys.initial, cfg.t_final, cfg.tau, rng).final_state;
            break;
          case SimulationMethod::mh: {
            ChainConfig c = cfg;
            c.keep_records = cfg.keep_records || (i == 0 && opts.residual_samples > 0);
            auto r = mh_run_trajectory(sys, sys.initial, c, rng, *ev);
            part.accepted += r.accepted;
            part.rejected += r.rejected;
            part.max_window = std::max(part.max_window, r.max_window);
            if (i == 0) sample_records[wid] = std::move(r.records);
            x = std::move(r.trajectory.final_state);
            break;
          }
        }
        part.histogram.add(x);
        for (std::size_t s = 0; s < x.size(); ++s)
          if (static_cast<double>(x[s]) >= 0.95 * static_cast<double>(sys.caps[s])) {
            ++part.cap_hits;
            break;
          }
        if (opts.keep_final_states) part.final_states.push_back(std::move(x));
        ++part.trajectories;
      }
    } catch (const StallError& e) {
      ++part.stalls;
      part.accepted += e.accepted();
      part.rejected += e.rejected();
      part.stall_message = e.what();
      stop = true;
    } catch (...) {
      std::lock_guard lock(err_mu);
      if (!failure) failure = std::current_exception();
      stop = true;
    }
    if (ev) {
      part.cache_hits = ev->cache_hits();
      part.cache_misses = ev->cache_misses();
      part.krylov_clipped = ev->krylov_stats().clipped_entries;
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  if (failure) std::rethrow_exception(failure);

  EnsembleResult out;
  out.histogram = Histogram::empty_for(sys);
  std::vector<StateVector> finals(opts.keep_final_states ? static_cast<std::size_t>(n) : 0);
  for (unsigned w = 0; w < workers; ++w) {
    auto& p = parts[w];
    out.histogram.merge(p.histogram);
    out.trajectories += p.trajectories;
    out.accepted += p.accepted;
    out.rejected += p.rejected;
    out.stalls += p.stalls;
    if (out.stall_message.empty()) out.stall_message = p.stall_message;
    out.max_window = std::max(out.max_window, p.max_window);
    out.cache_hits += p.cache_hits;
    out.cache_misses += p.cache_misses;
    out.krylov_clipped += p.krylov_clipped;
    out.cap_hits += p.cap_hits;
    for (std::size_t k = 0; k < p.final_states.size(); ++k)
      finals[w + k * workers] = std::move(p.final_states[k]);
  }
  if (opts.keep_final_states) out.final_states = std::move(finals);

  if (method == SimulationMethod::mh && cfg.window.mode != WindowPolicy::Mode::full && opts.residual_samples > 0 &&
      q <= opts.residual_state_limit && out.stalls == 0) {
    const auto& recs = sample_records[0];
    std::shared_ptr<const CmeGenerator> exact = full;
    if (!exact) exact = std::make_shared<const CmeGenerator>(build_exact_generator(sys));
    DensityEvaluator full_ev(sys, cfg.expm, 0, exact);
    DensityEvaluator win_ev(sys, cfg.expm, 0, exact);
    const Window all{StateIndex{1}, StateIndex{q}};
    for (std::size_t k = 0; k < recs.size() && static_cast<int>(out.residual_samples.size()) < opts.residual_samples;
         ++k) {
      const auto& r = recs[k];
      const double tau = cfg.tau;
      const double a = full_ev.density(GeneratorKind::exact, r.proposal, r.anchor, all, tau);
      const double b = win_ev.density(GeneratorKind::exact, r.proposal, r.anchor, r.window, tau);
      out.residual_samples.push_back(std::fabs(a - b));
    }
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace cmemh
