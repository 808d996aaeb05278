// Command-line front end: run ensembles, compare histograms, validate systems, dump generators.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cmemh/cmemh.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitStall = 3;

struct RunArgs {
  std::string system;
  std::string method = "mh";
  std::optional<double> tau;
  std::optional<double> t_final;
  std::optional<std::int64_t> samples;
  std::uint64_t seed = 1;
  std::string expm = "cram";
  int krylov_dim = 30;
  int order = 0;
  std::string window = "auto";
  std::string out;
  int chain_length = 10;
  std::int64_t max_rejects = 10'000;
  std::int64_t cache_mb = 256;
};

std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + cmemh::format_real(v[i]);
  return s;
}

int run_command(const RunArgs& a) {
  using namespace cmemh;
  const auto doc = load_system_document(a.system);
  const auto& sys = doc.system;

  ChainConfig cfg;
  const auto tau = a.tau ? a.tau : doc.run.tau;
  const auto t_final = a.t_final ? a.t_final : doc.run.t_final;
  const auto samples = a.samples ? a.samples : doc.run.samples;
  if (!tau || !t_final || !samples) {
    std::cerr << "error: --tau, --tfinal and --samples are required when the system file has no run section\n";
    return kExitUsage;
  }
  cfg.tau = *tau;
  cfg.t_final = *t_final;
  cfg.n_samples = *samples;
  cfg.seed = a.seed;
  cfg.expm.kind = parse_expm_kind(a.expm);
  cfg.expm.krylov_dim = a.krylov_dim;
  cfg.expm.order = a.order;
  cfg.window = WindowPolicy::parse(a.window);
  cfg.chain_length = a.chain_length;
  cfg.max_rejects_per_accept = a.max_rejects;
  cfg.cache_bytes = static_cast<std::size_t>(std::max<std::int64_t>(0, a.cache_mb)) << 20;
  cfg.validate();
  const auto method = parse_simulation_method(a.method);
  const auto q = state_count(sys);

  const auto result = ensemble_run(sys, cfg, method, cfg.n_samples);

  {
    std::ofstream csv(a.out, std::ios::binary);
    if (!csv) throw DomainError("cannot write '" + a.out + "'");
    write_histogram_csv(csv, result.histogram);
  }

  Diagnostics d;
  d.set("status", result.stalls > 0 ? "stall" : "ok");
  d.set("system", sys.name);
  d.set("method", to_string(method));
  d.set("tau", cfg.tau);
  d.set("tfinal", cfg.t_final);
  d.set("samples", cfg.n_samples);
  d.set("completed", result.trajectories);
  d.set("seed", static_cast<std::int64_t>(cfg.seed));
  d.set("state_count", q);
  if (method == SimulationMethod::mh) {
    d.set("expm", to_string(cfg.expm.kind));
    if (cfg.expm.kind == ExpmMethod::Kind::krylov) d.set("krylov_dim", cfg.expm.krylov_dim);
    if (cfg.expm.kind == ExpmMethod::Kind::cram || cfg.expm.kind == ExpmMethod::Kind::contour)
      d.set("expm_order", cfg.expm.resolved_order());
    d.set("chain_length", cfg.chain_length);
    d.set("window_policy", cfg.window.to_string());
    const std::int64_t width = cfg.window.mode == WindowPolicy::Mode::full ? q : result.max_window;
    d.set("window_width", width);
    d.set("accepted", result.accepted);
    d.set("rejected", result.rejected);
    d.set("rejections_per_1000_accepts",
          result.accepted > 0 ? 1000.0 * static_cast<double>(result.rejected) / static_cast<double>(result.accepted)
                              : 0.0);
    d.set("stalls", result.stalls);
    if (!result.stall_message.empty()) d.set("stall_message", result.stall_message);
    d.set("cache_hits", result.cache_hits);
    d.set("cache_misses", result.cache_misses);
    if (!result.residual_samples.empty()) {
      d.set("residual_count", static_cast<std::int64_t>(result.residual_samples.size()));
      d.set("residual_max", *std::max_element(result.residual_samples.begin(), result.residual_samples.end()));
      d.set("residual_samples", join_reals(result.residual_samples));
    }
  }
  d.set("cap_warnings", result.cap_hits);
  for (std::size_t i = 0; i < sys.species.size(); ++i) d.set("mean_" + sys.species[i], result.histogram.mean(i));
  d.set("wall_seconds", result.wall_seconds);
  d.set("seconds_per_sample", result.seconds_per_sample());
  {
    std::ofstream diag(a.out + ".diag", std::ios::binary);
    if (!diag) throw DomainError("cannot write '" + a.out + ".diag'");
    d.write(diag);
  }

  if (result.cap_hits > 0)
    std::cerr << "warning: " << result.cap_hits
              << " samples ended within 5% of a species cap; the truncated state space may distort results\n";
  if (result.stalls > 0) {
    std::cerr << "error: " << result.stall_message << "\n";
    return kExitStall;
  }
  return kExitOk;
}

int compare_command(const std::string& a, const std::string& b) {
  std::cout << "species,l1\n";
  for (const auto& [name, l1] : cmemh::compare_histograms(a, b)) std::cout << name << ',' << cmemh::format_real(l1) << '\n';
  return kExitOk;
}

int validate_command(const std::string& path) {
  const auto doc = cmemh::load_system_document(path);
  const auto& sys = doc.system;
  std::cout << "system " << sys.name << ": " << sys.species_count() << " species, " << sys.reaction_count()
            << " reactions, " << cmemh::state_count(sys) << " states\n";
  return kExitOk;
}

int dump_command(const std::string& path, const std::string& kind, const std::string& at, const std::string& window,
                 const std::string& out) {
  using namespace cmemh;
  const auto sys = load_system_document(path).system;
  const auto q = state_count(sys);
  Window w{StateIndex{1}, StateIndex{q}};
  if (!window.empty()) {
    const auto colon = window.find(':');
    if (colon == std::string::npos) throw DomainError("--window expects lo:hi");
    w = Window{StateIndex{std::stoll(window.substr(0, colon))}, StateIndex{std::stoll(window.substr(colon + 1))}};
  }
  StateVector xbar = sys.initial;
  if (!at.empty()) {
    xbar.clear();
    std::stringstream ss(at);
    for (std::string cell; std::getline(ss, cell, ',');) xbar.push_back(std::stoll(cell));
  }
  detail::check_budget(w.width(), kDefaultStateBudget);
  CmeGenerator g;
  if (kind == "exact")
    g = build_window_generator(sys, w);
  else if (kind == "frozen")
    g = build_frozen_window_generator(sys, xbar, w);
  else
    throw DomainError("--kind must be exact or frozen");
  if (out.empty()) {
    write_triplets(g, std::cout);
  } else {
    std::ofstream os(out, std::ios::binary);
    if (!os) throw DomainError("cannot write '" + out + "'");
    write_triplets(g, os);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metropolis-Hastings sampling of the chemical master equation"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run an ensemble and write a histogram CSV plus <out>.diag");
  run_cmd->add_option("--system", run.system, "system file")->required();
  run_cmd->add_option("--method", run.method, "ssa, tau or mh")->check(CLI::IsMember({"ssa", "tau", "mh"}));
  run_cmd->add_option("--tau", run.tau, "time step");
  run_cmd->add_option("--tfinal", run.t_final, "final time");
  run_cmd->add_option("--samples", run.samples, "number of trajectories");
  run_cmd->add_option("--seed", run.seed, "random seed")->capture_default_str();
  run_cmd->add_option("--expm", run.expm, "pade, contour, cram or krylov")
      ->check(CLI::IsMember({"pade", "contour", "cram", "krylov"}))
      ->capture_default_str();
  run_cmd->add_option("--krylov-dim", run.krylov_dim, "Krylov subspace dimension")->capture_default_str();
  run_cmd->add_option("--order", run.order, "contour/CRAM order (0: default)")->capture_default_str();
  run_cmd->add_option("--window", run.window, "auto, full or a width")->capture_default_str();
  run_cmd->add_option("--out", run.out, "histogram CSV path")->required();
  run_cmd->add_option("--chain-length", run.chain_length, "proposals per time step (0: first accepted)")
      ->capture_default_str();
  run_cmd->add_option("--max-rejects", run.max_rejects, "consecutive rejections before a stall")->capture_default_str();
  run_cmd->add_option("--cache-mb", run.cache_mb, "density cache per worker in MiB (0 disables)")
      ->capture_default_str();

  std::string cmp_a, cmp_b;
  auto* cmp_cmd = app.add_subcommand("compare", "per-species L1 distance between two histogram CSVs");
  cmp_cmd->add_option("a", cmp_a)->required();
  cmp_cmd->add_option("b", cmp_b)->required();

  std::string val_path;
  auto* val_cmd = app.add_subcommand("validate", "parse and validate a system file");
  val_cmd->add_option("--system", val_path, "system file")->required();

  std::string dump_path, dump_kind = "exact", dump_at, dump_window, dump_out;
  auto* dump_cmd = app.add_subcommand("dump-generator", "write generator entries as 'row col value' lines");
  dump_cmd->add_option("--system", dump_path, "system file")->required();
  dump_cmd->add_option("--kind", dump_kind, "exact or frozen")->capture_default_str();
  dump_cmd->add_option("--at", dump_at, "anchor state for frozen, comma separated (default: initial)");
  dump_cmd->add_option("--window", dump_window, "lo:hi global index range (default: all)");
  dump_cmd->add_option("--out", dump_out, "output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run_cmd) return run_command(run);
    if (*cmp_cmd) return compare_command(cmp_a, cmp_b);
    if (*val_cmd) return validate_command(val_path);
    if (*dump_cmd) return dump_command(dump_path, dump_kind, dump_at, dump_window, dump_out);
  } catch (const cmemh::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cmemh::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const cmemh::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cmemh::StallError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStall;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
