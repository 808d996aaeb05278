#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>

#include "cmemh/ensemble.hpp"
#include "cmemh/sampler.hpp"
#include "oracles.hpp"

using namespace cmemh;
using Catch::Approx;

namespace {

ChainConfig quick_config(double tau, double t_final) {
  ChainConfig c;
  c.tau = tau;
  c.t_final = t_final;
  c.n_samples = 1;
  return c;
}

}  // namespace

TEST_CASE("acceptance_ratio cases") {
  auto r = acceptance_ratio(0.2, 0.4, 0.3, 0.1);
  CHECK(r.alpha1 == Approx(0.5));
  CHECK(r.alpha2 == Approx(3.0));
  CHECK(r.alpha == Approx(1.5));
  CHECK_FALSE(r.degenerate);

  CHECK(acceptance_ratio(0.3, 0.3, 0.2, 0.2).alpha == Approx(1.0));

  r = acceptance_ratio(0.5, 0.0, 0.1, 0.2);
  CHECK(r.degenerate);
  CHECK(std::isinf(r.alpha));
  CHECK(accept_decision(r.alpha, 0.999999));

  r = acceptance_ratio(0.5, 0.3, 0.1, 0.0);
  CHECK(r.alpha == 0.0);
  CHECK_FALSE(accept_decision(r.alpha, 0.0));

  CHECK(acceptance_ratio(0.0, 0.0, 0.1, 0.2).alpha == 0.0);

  CHECK(accept_decision(2.0, 0.99));
  CHECK(accept_decision(0.3, 0.29));
  CHECK_FALSE(accept_decision(0.3, 0.3));
}

TEST_CASE("acceptance_ratio never yields NaN") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution zero(0.3);
  for (int k = 0; k < 20000; ++k) {
    const auto pick = [&] { return zero(rng) ? 0.0 : u(rng); };
    const auto r = acceptance_ratio(pick(), pick(), pick(), pick());
    REQUIRE_FALSE(std::isnan(r.alpha));
    REQUIRE(r.alpha >= 0.0);
  }
}

TEST_CASE("WindowPolicy parsing") {
  CHECK(WindowPolicy::parse("auto").mode == WindowPolicy::Mode::automatic);
  CHECK(WindowPolicy::parse("full").mode == WindowPolicy::Mode::full);
  const auto w = WindowPolicy::parse("250");
  CHECK(w.mode == WindowPolicy::Mode::explicit_width);
  CHECK(w.width == 250);
  CHECK(w.to_string() == "250");
  CHECK_THROWS_AS(WindowPolicy::parse("0"), DomainError);
  CHECK_THROWS_AS(WindowPolicy::parse("wide"), DomainError);
  CHECK_THROWS_AS(WindowPolicy::parse("12x"), DomainError);
}

TEST_CASE("ChainConfig validation") {
  ChainConfig c;
  CHECK_NOTHROW(c.validate());
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = ChainConfig{};
  c.t_final = 0.1;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = ChainConfig{};
  c.chain_length = -1;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = ChainConfig{};
  c.max_rejects_per_accept = 0;
  CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("two-state densities in closed form") {
  const double l = 2.0, m = 1.0, tau = 0.3;
  const auto s = oracle::two_state(l, m);
  const StateVector from{1, 0}, to{0, 1};
  for (auto kind : {ExpmMethod::Kind::pade, ExpmMethod::Kind::cram, ExpmMethod::Kind::krylov}) {
    ExpmMethod method;
    method.kind = kind;
    INFO(to_string(kind));
    CHECK(target_element(s, nullptr, to, from, tau, method) ==
          Approx(l * (1.0 - std::exp(-(l + m) * tau)) / (l + m)).margin(1e-12));
    CHECK(target_element(s, nullptr, from, from, tau, method) ==
          Approx((m + l * std::exp(-(l + m) * tau)) / (l + m)).margin(1e-12));
    // frozen at (1,0): the forward rate l applies everywhere, the backward rate is 0
    CHECK(proposal_element(s, to, from, tau, method) == Approx(l * tau * std::exp(-l * tau)).margin(1e-12));
  }
}

TEST_CASE("target density tends to the identity as tau shrinks") {
  const auto s = oracle::load("sis_small");
  const StateVector x{5, 4};
  ExpmMethod method;
  double prev = 1.0;
  for (double tau : {1e-2, 1e-3, 1e-4, 1e-5}) {
    const double stay = target_element(s, nullptr, x, x, tau, method);
    const double off = 1.0 - stay;
    CHECK(off < prev);
    // leaving probability ~ a0(x) tau
    CHECK(off == Approx(total_propensity(s, x) * tau).epsilon(total_propensity(s, x) * tau + 1e-6));
    prev = off;
    // the frozen chain may also leave and come back, so staying is at least the no-event probability
    CHECK(proposal_element(s, x, x, tau, method) >= std::exp(-total_propensity(s, x) * tau) - 1e-12);
  }
}

TEST_CASE("proposal equals target for constant propensities") {
  const auto s = oracle::constant_rates(3.0, 2.0, 60);
  const StateVector xbar{30};
  ExpmMethod method;
  for (std::int64_t k : {25, 30, 33, 40}) {
    const StateVector to{k};
    CHECK(proposal_element(s, to, xbar, 0.5, method) ==
          Approx(target_element(s, nullptr, to, xbar, 0.5, method)).margin(1e-13));
  }
  ChainConfig cfg = quick_config(0.5, 0.5);
  cfg.keep_records = true;
  cfg.window = WindowPolicy::full();
  DensityEvaluator ev(s, cfg.expm);
  RngStream rng(3, 0);
  const auto tr = mh_transition(s, xbar, xbar, cfg, rng, ev);
  CHECK(tr.rejected == 0);
  for (const auto& r : tr.records) CHECK(r.alpha == Approx(1.0).margin(1e-9));
}

TEST_CASE("inert system stays put") {
  const auto s = oracle::inert(10);
  ChainConfig cfg = quick_config(0.4, 4.0);
  DensityEvaluator ev(s, cfg.expm);
  RngStream rng(5, 0);
  const auto tr = mh_transition(s, {5}, {5}, cfg, rng, ev);
  CHECK(tr.next == StateVector{5});
  CHECK(tr.rejected == 0);
  const auto run = mh_run_trajectory(s, {5}, cfg, rng, ev);
  CHECK(run.trajectory.final_state == StateVector{5});
  CHECK(run.trajectory.steps == 10);
}

TEST_CASE("one MH step follows the target column") {
  const auto s = oracle::load("sis_small");
  const StateVector xbar{5, 4};
  const double tau = 0.1;
  ChainConfig cfg = quick_config(tau, tau);
  cfg.window = WindowPolicy::full();
  DensityEvaluator ev(s, cfg.expm);
  const Eigen::MatrixXd e = expm_pade(tau * oracle::dense_generator(s));
  const auto j = state_index(s, xbar).value - 1;
  const int n = 20000;
  std::vector<double> freq(100, 0.0);
  for (int i = 0; i < n; ++i) {
    RngStream rng(77, static_cast<std::uint64_t>(i));
    const auto run = mh_run_trajectory(s, xbar, cfg, rng, ev);
    freq[static_cast<std::size_t>(state_index(s, run.trajectory.final_state).value - 1)] += 1.0 / n;
  }
  double l1 = 0.0;
  for (int i = 0; i < 100; ++i) l1 += std::fabs(freq[static_cast<std::size_t>(i)] - e(i, j));
  CHECK(l1 < 0.035);
  CHECK(ev.cache_hits() > 0);
}

TEST_CASE("first-accepted mode returns an accepted proposal") {
  const auto s = oracle::load("sis_small");
  ChainConfig cfg = quick_config(0.1, 0.1);
  cfg.chain_length = 0;
  cfg.keep_records = true;
  DensityEvaluator ev(s, cfg.expm);
  for (std::uint64_t i = 0; i < 50; ++i) {
    RngStream rng(9, i);
    const auto tr = mh_transition(s, {5, 4}, {5, 4}, cfg, rng, ev);
    REQUIRE(tr.accepted == 1);
    REQUIRE(tr.records.back().accepted);
    REQUIRE(tr.records.back().proposal == tr.next);
  }
}

TEST_CASE("chain records are consistent") {
  const auto s = oracle::load("schlogl");
  ChainConfig cfg = quick_config(0.4, 1.2);
  cfg.keep_records = true;
  DensityEvaluator ev(s, cfg.expm);
  RngStream rng(12, 0);
  const auto run = mh_run_trajectory(s, s.initial, cfg, rng, ev);
  REQUIRE(run.records.size() >= 30);
  CHECK(run.accepted + run.rejected == static_cast<std::int64_t>(run.records.size()));
  for (const auto& r : run.records) {
    for (const auto* x : {&r.anchor, &r.proposal, &r.previous}) REQUIRE(r.window.contains(state_index(s, *x)));
    for (double v : {r.pi_star, r.pi_prev, r.g_star, r.g_prev}) {
      REQUIRE(v >= -1e-12);
      REQUIRE(v <= 1.0 + 1e-12);
    }
    REQUIRE(r.accepted == accept_decision(r.alpha, r.zeta));
    if (r.pi_prev > 0 && r.g_star > 0) REQUIRE(r.alpha == Approx(r.alpha1 * r.alpha2).epsilon(1e-12));
    REQUIRE(r.zeta > 0.0);
    REQUIRE(r.zeta < 1.0);
  }
}

TEST_CASE("density evaluator cache and window checks") {
  const auto s = oracle::load("schlogl");
  ExpmMethod m;
  DensityEvaluator ev(s, m);
  const Window w{StateIndex{150}, StateIndex{350}};
  const double a = ev.density(GeneratorKind::exact, {260}, {250}, w, 0.4);
  const double b = ev.density(GeneratorKind::exact, {255}, {250}, w, 0.4);
  CHECK(ev.cache_misses() == 1);
  CHECK(ev.cache_hits() == 1);
  CHECK(a > 0.0);
  CHECK(b > 0.0);
  CHECK_THROWS_AS(ev.density(GeneratorKind::exact, {400}, {250}, w, 0.4), WindowError);
  CHECK_THROWS_AS(ev.density(GeneratorKind::exact, {260}, {100}, w, 0.4), WindowError);

  DensityEvaluator nocache(s, m, 0);
  nocache.density(GeneratorKind::frozen, {260}, {250}, w, 0.4);
  nocache.density(GeneratorKind::frozen, {260}, {250}, w, 0.4);
  CHECK(nocache.cache_hits() == 0);
  CHECK(nocache.cache_misses() == 2);

  // a tiny budget still returns correct values
  DensityEvaluator small(s, m, 4000);
  const double c = small.density(GeneratorKind::exact, {260}, {250}, w, 0.4);
  small.density(GeneratorKind::exact, {260}, {251}, w, 0.4);
  CHECK(small.density(GeneratorKind::exact, {260}, {250}, w, 0.4) == c);
  CHECK(c == a);
}

TEST_CASE("resolve_window covers every anchor") {
  const auto s = oracle::load("schlogl");
  const std::vector<StateVector> others{{300}, {600}};
  const auto w = resolve_window(s, WindowPolicy::automatic(), {250}, others, 0.4);
  for (auto x : {250, 300, 600}) CHECK(w.contains(state_index(s, {x})));
  const auto near = resolve_window(s, WindowPolicy::automatic(), {250}, std::vector<StateVector>{{251}}, 0.4);
  CHECK(near.width() == submatrix_size_estimate(s, {250}, 0.4));
  CHECK(resolve_window(s, WindowPolicy::full(), {250}, {}, 0.4).width() == 901);
  const auto fixed = resolve_window(s, WindowPolicy::fixed(100), {250}, std::vector<StateVector>{{400}}, 0.4);
  CHECK(fixed.width() == 151);
}

TEST_CASE("window residual") {
  const auto s = oracle::load("schlogl");
  ExpmMethod m;
  CHECK(window_residual(s, {250}, {260}, 0.4, 901, m) == 0.0);
  const double r250 = window_residual(s, {250}, {260}, 0.4, 250, m);
  const double r60 = window_residual(s, {250}, {260}, 0.4, 60, m);
  CHECK(r250 < 1e-8);
  CHECK(r60 > r250);
}

TEST_CASE("stall is reported with counts") {
  const auto s = oracle::load("schlogl");
  ChainConfig cfg = quick_config(0.4, 0.4);
  cfg.chain_length = 5000;
  cfg.max_rejects_per_accept = 1;
  DensityEvaluator ev(s, cfg.expm);
  RngStream rng(4, 0);
  try {
    mh_transition(s, {250}, {250}, cfg, rng, ev);
    FAIL("expected a stall");
  } catch (const StallError& e) {
    CHECK(e.rejected() >= 2);
    CHECK(std::string(e.what()).find("consecutive rejections") != std::string::npos);
  }

  cfg.n_samples = 3;
  const auto res = ensemble_run(s, cfg, SimulationMethod::mh, 3);
  CHECK(res.stalls >= 1);
  CHECK_FALSE(res.stall_message.empty());
}

TEST_CASE("ensemble histograms are normalised and reproducible") {
  const auto s = oracle::load("sis_small");
  ChainConfig cfg = quick_config(0.1, 0.3);
  for (auto method : {SimulationMethod::ssa, SimulationMethod::tau, SimulationMethod::mh}) {
    INFO(to_string(method));
    const auto a = ensemble_run(s, cfg, method, 200);
    CHECK(a.trajectories == 200);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(a.histogram.total(i) == 200);
      double sum = 0.0;
      for (double f : a.histogram.frequencies(i)) sum += f;
      CHECK(sum == Approx(1.0).margin(1e-12));
    }
    const auto b = ensemble_run(s, cfg, method, 200);
    CHECK(a.histogram.counts == b.histogram.counts);
    const auto one = ensemble_run(s, cfg, method, 1);
    CHECK(one.histogram.total(0) == 1);
  }
  CHECK_THROWS_AS(ensemble_run(s, cfg, SimulationMethod::ssa, 0), DomainError);
  CHECK(parse_simulation_method("mh") == SimulationMethod::mh);
  CHECK_THROWS_AS(parse_simulation_method("ode"), DomainError);
}

TEST_CASE("ensemble results do not depend on the worker count") {
  const auto s = oracle::load("sis_small");
  ChainConfig cfg = quick_config(0.1, 0.2);
  EnsembleOptions opts;
  opts.keep_final_states = true;
  ::setenv("CMEMH_THREADS", "1", 1);
  CHECK(worker_count(100) == 1);
  const auto serial = ensemble_run(s, cfg, SimulationMethod::mh, 60, opts);
  ::setenv("CMEMH_THREADS", "3", 1);
  CHECK(worker_count(100) == 3);
  CHECK(worker_count(2) == 2);
  const auto threaded = ensemble_run(s, cfg, SimulationMethod::mh, 60, opts);
  ::unsetenv("CMEMH_THREADS");
  CHECK(serial.final_states == threaded.final_states);
  CHECK(serial.histogram.counts == threaded.histogram.counts);
  CHECK(serial.accepted == threaded.accepted);
}

TEST_CASE("histogram helpers") {
  const auto s = oracle::load("sis_small");
  auto h = Histogram::empty_for(s);
  h.add({1, 2});
  h.add({3, 2});
  CHECK(h.total(0) == 2);
  CHECK(h.mean(0) == Approx(2.0));
  CHECK(h.mean(1) == Approx(2.0));
  auto g = Histogram::empty_for(s);
  g.add({9, 9});
  h.merge(g);
  CHECK(h.total(1) == 3);
  CHECK(h.counts[0][9] == 1);
}
