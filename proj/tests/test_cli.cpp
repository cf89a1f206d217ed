#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string bin() {
  const char* b = std::getenv("MFCX_BIN");
  REQUIRE(b != nullptr);
  return b;
}

fs::path work_root() {
  static fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "mfcx_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

int run(const std::string& args, const fs::path& log_base) {
  std::string cmd = bin() + " " + args + " > " + (log_base.string() + ".out") + " 2> " +
                    (log_base.string() + ".err");
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p);
  out << body;
}

const char* kLiqConfig = R"({
  "model": {"k": 0.5, "phi": 0.1, "A": 2.0, "lambda": 0.3, "sigma": 0.5, "T": 1.0, "s0": 10.0},
  "q0": {"kind": "gaussian", "mu": 1.0, "sd": 0.2},
  "N": 2000, "seed": 11
})";

}  // namespace

TEST_CASE("a run completes, marks the manifest, and reruns byte-identically") {
  fs::path root = work_root();
  write_file(root / "liq.json", kLiqConfig);

  std::string cfg = (root / "liq.json").string();
  CHECK(run("liquidate --config " + cfg + " --out " + (root / "a").string(), root / "a_log") == 0);
  CHECK(run("liquidate --config " + cfg + " --out " + (root / "b").string(), root / "b_log") == 0);
  CHECK(run("liquidate --config " + cfg + " --out " + (root / "c").string() + " --threads 3",
            root / "c_log") == 0);

  std::string man = slurp(root / "a" / "manifest.json");
  CHECK(man.find("\"complete\": true") != std::string::npos);
  CHECK(fs::exists(root / "a" / "trajectory.csv"));
  CHECK(fs::exists(root / "a" / "residual.json"));

  // same seed, same bytes; the thread cap must not leak into results
  CHECK(slurp(root / "a" / "trajectory.csv") == slurp(root / "b" / "trajectory.csv"));
  CHECK(slurp(root / "a" / "residual.json") == slurp(root / "b" / "residual.json"));
  CHECK(slurp(root / "a" / "trajectory.csv") == slurp(root / "c" / "trajectory.csv"));

  CHECK(run("liquidate --config " + cfg + " --out " + (root / "d").string() + " --seed 12",
            root / "d_log") == 0);
  CHECK(slurp(root / "a" / "trajectory.csv") != slurp(root / "d" / "trajectory.csv"));
}

TEST_CASE("config rejections exit 1 and leave no result files") {
  fs::path root = work_root();
  write_file(root / "bad.json", R"({"model": {"q": -3}})");
  fs::path out = root / "bad_out";
  int rc = run("liquidate --config " + (root / "bad.json").string() + " --out " + out.string(),
               root / "bad_log");
  CHECK(rc == 1);
  std::string err = slurp(root / "bad_log.err");
  CHECK(err.find("/model/q") != std::string::npos);
  CHECK(!fs::exists(out / "trajectory.csv"));
  CHECK(!fs::exists(out / "residual.json"));
  if (fs::exists(out / "manifest.json"))
    CHECK(slurp(out / "manifest.json").find("\"complete\": false") != std::string::npos);

  CHECK(run("liquidate --config " + (root / "nope.json").string() + " --out " +
                (root / "nope_out").string(),
            root / "nope_log") == 1);
  CHECK(!fs::exists(root / "nope_out"));

  CHECK(run("frobnicate --config x --out y", root / "sub_log") == 1);
}

TEST_CASE("solver failure exits 2 and records the reason next to the manifest") {
  fs::path root = work_root();
  // maximizing terminal variance is concave, so the gap cannot close
  write_file(root / "nc.json", R"({
    "instance": {"n": 1, "m": 3, "T": 1.0, "x0": 1.0,
                 "lattice": {"min": -2.0, "max": 2.0, "count": 15},
                 "cost": {"type": "terminal_variance", "weight": -2.0, "g": [0.0, 0.0, 1.0]},
                 "solver": {"max_iters": 2, "tol": 1e-12}}
  })");
  fs::path out = root / "nc_out";
  int rc = run("transport-ladder --config " + (root / "nc.json").string() + " --out " +
                   out.string(),
               root / "nc_log");
  CHECK(rc == 2);
  CHECK(fs::exists(out / "error.json"));
  std::string err = slurp(out / "error.json");
  CHECK(err.find("non_convergence") != std::string::npos);
  CHECK(slurp(out / "manifest.json").find("\"complete\": false") != std::string::npos);
  std::string stream = slurp(root / "nc_log.err");
  CHECK(stream.find("non_convergence") != std::string::npos);
}

TEST_CASE("the ladder writes rungs and kernels that agree across files") {
  fs::path root = work_root();
  write_file(root / "lad.json", R"({
    "instance": {"n": 1, "m": 3, "T": 1.0, "x0": 1.0,
                 "lattice": {"min": -2.0, "max": 2.0, "count": 9},
                 "cost": {"type": "quadratic"}}
  })");
  fs::path out = root / "lad_out";
  CHECK(run("transport-ladder --config " + (root / "lad.json").string() + " --out " +
                out.string(),
            root / "lad_log") == 0);
  CHECK(fs::exists(out / "ladder.json"));
  CHECK(fs::exists(out / "ladder.csv"));
  CHECK(fs::exists(out / "coupling_n0.json"));
  CHECK(fs::exists(out / "coupling_n1.json"));
  std::string csv = slurp(out / "ladder.csv");
  CHECK(csv.rfind("n,value,margin,gap_to_reference", 0) == 0);

  // rung order in the csv is coarse to fine
  std::istringstream lines(csv);
  std::string header, r0, r1;
  std::getline(lines, header);
  std::getline(lines, r0);
  std::getline(lines, r1);
  CHECK(r0.rfind("0,", 0) == 0);
  CHECK(r1.rfind("1,", 0) == 0);
}

TEST_CASE("a lifted coupling reports diagnostics against its own cost") {
  fs::path root = work_root();
  write_file(root / "lift.json", R"({
    "instance": {"n": 0, "family_n_max": 2, "m": 3, "T": 1.0, "x0": 1.0,
                 "lattice": {"min": -2.0, "max": 2.0, "count": 17},
                 "cost": {"type": "quadratic"}},
    "N": 2000, "seed": 5
  })");
  fs::path out = root / "lift_out";
  CHECK(run("lift --config " + (root / "lift.json").string() + " --out " + out.string(),
            root / "lift_log") == 0);
  CHECK(fs::exists(out / "paths.csv"));
  CHECK(fs::exists(out / "coupling.json"));
  std::string diag = slurp(out / "diagnostics.json");
  CHECK(diag.find("block_cost") != std::string::npos);
  CHECK(diag.find("coupling_cost") != std::string::npos);
  CHECK(slurp(out / "manifest.json").find("\"complete\": true") != std::string::npos);
}
