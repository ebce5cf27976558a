// End-to-end checks of the command-line binary: exit codes, output files,
// and byte-level determinism of re-runs. The binary path arrives via the
// QSME_CLI environment variable set by ctest.

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("QSME_CLI");
  REQUIRE_MESSAGE(p != nullptr, "QSME_CLI must point at the built binary");
  return p;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = cli_path() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("qsme_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

const char* kQubit = R"({
  "dim": 2, "d_S": 1,
  "H": [[[0,0],[0,0]],[[0,0],[0,0]]],
  "channels": [
    {"matrix": [[[0,0],[1,0]],[[0,0],[0,0]]], "kind": "diffusive"},
    {"matrix": [[[0.5,0],[0,0]],[[0,0],[0,0]]], "kind": "diffusive"}
  ]
})";

const char* kBlockDiagonal = R"({
  "dim": 2, "d_S": 1,
  "H": [[[0,0],[0,0]],[[0,0],[0,0]]],
  "channels": [
    {"matrix": [[[1,0],[0,0]],[[0,0],[0.3,0]]], "kind": "diffusive"}
  ]
})";

const char* kThreeLevelGas = R"({
  "dim": 3, "d_S": 1,
  "H": [[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]]],
  "channels": [
    {"matrix": [[[0,0],[1,0],[1,0]],[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]]],
     "kind": "diffusive"},
    {"matrix": [[[1,0],[0,0],[0,0]],[[0,0],[1,0],[0,0]],[[0,0],[0,0],[0.5,0]]],
     "kind": "jump"}
  ]
})";

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("check: qubit passes, block-diagonal fails GAS, bad JSON errors") {
  TempDir tmp;
  write(tmp.path / "qubit.json", kQubit);
  write(tmp.path / "blockdiag.json", kBlockDiagonal);
  write(tmp.path / "broken.json", "{ this is not json");

  CHECK(run("check --model " + (tmp.path / "qubit.json").string(),
            tmp.path / "check1.log") == 0);
  const std::string out1 = slurp(tmp.path / "check1.log");
  CHECK(out1.find("\"invariant\": true") != std::string::npos);
  CHECK(out1.find("\"gas\": true") != std::string::npos);

  CHECK(run("check --model " + (tmp.path / "blockdiag.json").string(),
            tmp.path / "check2.log") == 2);
  CHECK(slurp(tmp.path / "check2.log").find("\"gas\": false") != std::string::npos);

  CHECK(run("check --model " + (tmp.path / "broken.json").string(),
            tmp.path / "check3.log") == 1);
  CHECK(run("check --model " + (tmp.path / "missing.json").string(),
            tmp.path / "check4.log") == 1);
}

TEST_CASE("rates: writes the report for GAS models, exit 2 otherwise") {
  TempDir tmp;
  write(tmp.path / "qubit.json", kQubit);
  write(tmp.path / "blockdiag.json", kBlockDiagonal);

  CHECK(run("rates --model " + (tmp.path / "qubit.json").string() + " --out " +
                (tmp.path / "r1").string(),
            tmp.path / "rates1.log") == 0);
  const std::string report = slurp(tmp.path / "r1" / "report.json");
  CHECK(report.find("\"alpha0\": 1.0") != std::string::npos);
  CHECK(report.find("\"beta0\": 1.5") != std::string::npos);
  CHECK(report.find("\"schema_version\": 1") != std::string::npos);

  CHECK(run("rates --model " + (tmp.path / "blockdiag.json").string() + " --out " +
                (tmp.path / "r2").string(),
            tmp.path / "rates2.log") == 2);

  // A three-level system with a jump channel exercises the SP path and the
  // matrix-valued certificate.
  write(tmp.path / "three.json", kThreeLevelGas);
  CHECK(run("rates --model " + (tmp.path / "three.json").string() + " --out " +
                (tmp.path / "r3").string(),
            tmp.path / "rates3.log") == 0);
  const std::string r3 = slurp(tmp.path / "r3" / "report.json");
  CHECK(r3.find("\"certificate_residual\"") != std::string::npos);
  CHECK(r3.find("\"sp\": true") != std::string::npos);
}

TEST_CASE("simulate: zero-horizon run emits a single-row CSV") {
  TempDir tmp;
  write(tmp.path / "qubit.json", kQubit);
  CHECK(run("simulate --model " + (tmp.path / "qubit.json").string() + " --out " +
                (tmp.path / "s").string() + " --t-final 0 --n-traj 2 --seed 9",
            tmp.path / "sim.log") == 0);
  const std::string csv = slurp(tmp.path / "s" / "traj_000.csv");
  std::size_t rows = 0;
  for (char c : csv) rows += (c == '\n');
  CHECK(rows == 2);  // header + one data row
  CHECK(csv.rfind("t,V,lnV,jumped_channel,mw,mj\n", 0) == 0);
}

TEST_CASE("simulate and ensemble re-runs are byte-identical") {
  TempDir tmp;
  write(tmp.path / "qubit.json", kQubit);
  const std::string common = " --model " + (tmp.path / "qubit.json").string() +
                             " --dt 1e-3 --t-final 1 --n-traj 4 --seed 123 --out ";
  CHECK(run("simulate" + common + (tmp.path / "a").string(), tmp.path / "sa.log") == 0);
  CHECK(run("simulate" + common + (tmp.path / "b").string(), tmp.path / "sb.log") == 0);
  for (int i = 0; i < 4; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "traj_%03d.csv", i);
    const std::string a = slurp(tmp.path / "a" / name);
    CHECK(!a.empty());
    CHECK(a == slurp(tmp.path / "b" / name));
  }

  CHECK(run("ensemble" + common + (tmp.path / "ea").string(), tmp.path / "ea.log") == 0);
  CHECK(run("ensemble" + common + (tmp.path / "eb").string(), tmp.path / "eb.log") == 0);
  const std::string ea = slurp(tmp.path / "ea" / "ensemble.csv");
  CHECK(!ea.empty());
  CHECK(ea == slurp(tmp.path / "eb" / "ensemble.csv"));
  CHECK(ea.rfind("t,mean_V,stderr_V,n\n", 0) == 0);
}

TEST_CASE("exponent: emits a comparison record for a GAS model") {
  TempDir tmp;
  write(tmp.path / "qubit.json", kQubit);
  CHECK(run("exponent --model " + (tmp.path / "qubit.json").string() + " --out " +
                (tmp.path / "e").string() + " --dt 1e-3 --t-final 4 --n-traj 16 --seed 5",
            tmp.path / "exp.log") == 0);
  const std::string j = slurp(tmp.path / "e" / "exponent.json");
  CHECK(j.find("\"bound_respected\"") != std::string::npos);
  CHECK(j.find("\"median_slope\"") != std::string::npos);
}

TEST_CASE("reproduce-fig1 with a light protocol writes the verdict tree") {
  TempDir tmp;
  // Coarse, fast settings: this exercises plumbing, not the acceptance bands.
  CHECK(run("reproduce-fig1 --out " + (tmp.path / "a").string() +
                " --dt 1e-3 --n-traj 8 --seed 3",
            tmp.path / "fig1.log") != 1);  // 0 or 4 depending on the draw
  CHECK(fs::exists(tmp.path / "a" / "fig1" / "verdict.json"));
  CHECK(fs::exists(tmp.path / "a" / "fig1" / "left" / "ensemble.csv"));
  CHECK(fs::exists(tmp.path / "a" / "fig1" / "left" / "fits.csv"));
  CHECK(fs::exists(tmp.path / "a" / "fig1" / "right" / "traj_000.csv"));
  const std::string verdict = slurp(tmp.path / "a" / "fig1" / "verdict.json");
  CHECK(verdict.find("\"median_slope\"") != std::string::npos);

  // identical protocol, identical bytes
  CHECK(run("reproduce-fig1 --out " + (tmp.path / "b").string() +
                " --dt 1e-3 --n-traj 8 --seed 3",
            tmp.path / "fig1b.log") != 1);
  CHECK(verdict == slurp(tmp.path / "b" / "fig1" / "verdict.json"));
  CHECK(slurp(tmp.path / "a" / "fig1" / "left" / "ensemble.csv") ==
        slurp(tmp.path / "b" / "fig1" / "left" / "ensemble.csv"));
}
