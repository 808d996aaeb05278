#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "cmemh/report.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome cli(const std::string& args) {
  const std::string cmd = std::string(CMEMH_CLI_PATH) + " " + args + " 2>/dev/null";
  Outcome o;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  while (const auto n = std::fread(buf, 1, sizeof buf, p)) o.out.append(buf, n);
  const int status = ::pclose(p);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> read_diag(const fs::path& p) {
  std::map<std::string, std::string> kv;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string sys(const std::string& name) { return std::string(CMEMH_SYSTEMS_DIR) + "/" + name + ".sys"; }

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cmemh_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

}  // namespace

TEST_CASE("ssa runs are reproducible") {
  TempDir tmp;
  const auto a = tmp / "a.csv", b = tmp / "b.csv";
  const std::string common = "run --system " + sys("sis_small") + " --method ssa --samples 300 --seed 7 --out ";
  REQUIRE(cli(common + a).code == 0);
  REQUIRE(cli(common + b).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).rfind(cmemh::kHistogramHeader, 0) == 0);
  const auto diag = read_diag(a + ".diag");
  CHECK(diag.at("status") == "ok");
  CHECK(diag.at("method") == "ssa");
  CHECK(diag.at("completed") == "300");
  CHECK(diag.at("seed") == "7");

  const auto cmp = cli("compare " + a + " " + b);
  CHECK(cmp.code == 0);
  CHECK(cmp.out == "species,l1\nS,0\nI,0\n");
}

TEST_CASE("mh run reports the full window width") {
  TempDir tmp;
  const auto out = tmp / "mh.csv";
  REQUIRE(cli("run --system " + sys("schlogl") + " --method mh --window full --samples 3 --tfinal 0.8 --out " + out)
              .code == 0);
  const auto diag = read_diag(out + ".diag");
  CHECK(diag.at("window_width") == "901");
  CHECK(diag.at("window_policy") == "full");
  CHECK(diag.at("expm") == "cram");
  CHECK(diag.at("expm_order") == "16");
  CHECK(diag.at("chain_length") == "10");
  CHECK(diag.contains("rejections_per_1000_accepts"));
  CHECK(diag.contains("seconds_per_sample"));
  CHECK_FALSE(diag.contains("residual_count"));
}

TEST_CASE("windowed mh run reports residual samples") {
  TempDir tmp;
  const auto out = tmp / "win.csv";
  REQUIRE(cli("run --system " + sys("schlogl") + " --method mh --window 250 --expm krylov --samples 2 --tfinal 0.8 --out " +
              out)
              .code == 0);
  const auto diag = read_diag(out + ".diag");
  CHECK(diag.at("window_policy") == "250");
  CHECK(std::stoll(diag.at("window_width")) >= 250);
  CHECK(diag.at("krylov_dim") == "30");
  REQUIRE(diag.contains("residual_max"));
  CHECK(std::stod(diag.at("residual_max")) < 1e-6);
}

TEST_CASE("tau-leap on an inert system is a spike") {
  TempDir tmp;
  const auto file = tmp / "inert.sys";
  {
    std::ofstream os(file);
    os << "system inert\nspecies\n  X initial=4 cap=10\nend\nreaction none\n  reactants = X\n  products = 0\n"
          "  rate = 0\nend\n";
  }
  const auto out = tmp / "inert.csv";
  REQUIRE(cli("run --system " + file + " --method tau --tau 0.1 --tfinal 1 --samples 50 --out " + out).code == 0);
  const auto t = cmemh::read_histogram_csv(out);
  REQUIRE(t.series.size() == 1);
  for (std::size_t k = 0; k < t.series[0].counts.size(); ++k)
    CHECK(t.series[0].counts[k] == (k == 4 ? 50 : 0));
}

TEST_CASE("usage errors exit with status 2") {
  TempDir tmp;
  CHECK(cli("").code == 2);
  CHECK(cli("run --system " + sys("schlogl") + " --method ode --out " + (tmp / "x.csv")).code == 2);
  CHECK(cli("run --system " + sys("schlogl") + " --window nope --samples 1 --out " + (tmp / "x.csv")).code == 2);
  CHECK(cli("run --system " + sys("schlogl") + " --tau -1 --samples 1 --out " + (tmp / "x.csv")).code == 2);
  CHECK(cli("run --system /nonexistent.sys --out " + (tmp / "x.csv")).code == 2);
  const auto bad = tmp / "bad.sys";
  {
    std::ofstream os(bad);
    os << "system bad\nspecies\n  X cap=3\nend\n";
  }
  CHECK(cli("validate --system " + bad).code == 2);
  CHECK(cli("compare " + bad + " " + bad).code == 2);
}

TEST_CASE("stall exits with status 3") {
  TempDir tmp;
  const auto out = tmp / "stall.csv";
  const auto r = cli("run --system " + sys("schlogl") +
                     " --method mh --window full --chain-length 5000 --max-rejects 1 --samples 1 --tfinal 0.4 --out " +
                     out);
  CHECK(r.code == 3);
  CHECK(read_diag(out + ".diag").at("status") == "stall");
}

TEST_CASE("validate and dump-generator") {
  const auto v = cli("validate --system " + sys("schlogl"));
  CHECK(v.code == 0);
  CHECK(v.out == "system schlogl: 1 species, 4 reactions, 901 states\n");

  const auto d = cli("dump-generator --system " + sys("schlogl") + " --window 250:252");
  REQUIRE(d.code == 0);
  std::istringstream in(d.out);
  int lines = 0;
  long row = 0, col = 0;
  double val = 0.0;
  while (in >> row >> col >> val) {
    ++lines;
    CHECK(row >= 250);
    CHECK(row <= 252);
    if (row == col) CHECK(val < 0.0);
    else CHECK(val > 0.0);
  }
  CHECK(lines == 7);
}
