#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <string>

#include "json.hpp"
#include "mfcx/io.hpp"
#include "mfcx/transport/quantized_wiener.hpp"

using nlohmann::json;
using namespace mfcx;

namespace {

json liq_json() {
  return json{{"k", 0.1}, {"phi", 0.01}, {"A", 1.0}, {"lambda", 0.05},
              {"sigma", 0.5}, {"T", 1.0}};
}

std::string pointer_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.pointer;
  }
  return "";
}

}  // namespace

TEST_CASE("liquidation params round-trip and reject with a pointer") {
  LiquidationParams p = liquidation_params_from_json(liq_json());
  CHECK(p.k == 0.1);
  CHECK(p.lambda == 0.05);
  json back = to_json(p);
  CHECK(back["phi"] == 0.01);

  json bad = liq_json();
  bad["lambda"] = 3.0;  // above the 2A cap
  CHECK(pointer_of([&] { liquidation_params_from_json(bad); }) == "/model");

  json unknown = liq_json();
  unknown["kappa"] = 1.0;
  CHECK(pointer_of([&] { liquidation_params_from_json(unknown); }) == "/model/kappa");

  json mistyped = liq_json();
  mistyped["T"] = "one";
  CHECK(pointer_of([&] { liquidation_params_from_json(mistyped); }) == "/model/T");
}

TEST_CASE("initial law specs parse each kind and reject junk") {
  Q0Spec c = q0spec_from_json(json{{"kind", "constant"}, {"value", 3.0}});
  CHECK(c.mean() == doctest::Approx(3.0));
  Q0Spec tp = q0spec_from_json(json{{"kind", "two_point"}, {"x1", 1.0}, {"p1", 0.25},
                                    {"x2", 5.0}});
  CHECK(tp.mean() == doctest::Approx(0.25 * 1.0 + 0.75 * 5.0));
  Q0Spec g = q0spec_from_json(json{{"kind", "gaussian"}, {"mu", 2.0}, {"sd", 0.5}});
  CHECK(g.mean() == doctest::Approx(2.0));

  CHECK(pointer_of([] {
          q0spec_from_json(json{{"kind", "uniform"}, {"value", 1.0}});
        }) == "/q0/kind");
  CHECK(pointer_of([] {
          q0spec_from_json(json{{"kind", "gaussian"}, {"mu", 0.0}, {"sd", -1.0}}, "/init");
        }) == "/init");
}

TEST_CASE("lq params reject a missing control cost") {
  json j{{"b1", 0.3}, {"b2", 1.0}, {"bbar1", 0.0}, {"bbar2", 0.0}, {"q", 1.0},
         {"qbar", 0.0}, {"r", 0.0}, {"rbar", 0.0}, {"s", 0.0}, {"sbar", 0.0},
         {"gamma", 1.0}, {"gammabar", 0.0}, {"rho", 0.0}, {"T", 1.0}};
  CHECK(pointer_of([&] { lq_params_from_json(j); }) == "/model");
  j["r"] = 1.0;
  LQParams p = lq_params_from_json(j);
  CHECK(p.b1 == 0.3);
  json back = to_json(p);
  CHECK(back["gamma"] == 1.0);
}

TEST_CASE("cost specs build the documented functional forms") {
  json j{{"type", "integral"}, {"f", {0.0, 0.0, 1.0}}, {"g", {0.0, 0.0, 1.0}}};
  transport::CostSpec c = cost_spec_from_json(j);
  std::vector<double> v{2.0}, w{1.0};
  CHECK(c.f.value(v, w) == doctest::Approx(4.0));

  json tv{{"type", "terminal_variance"}, {"weight", -2.0}, {"f", {0.0, 0.0, 1.0}}};
  transport::CostSpec cv = cost_spec_from_json(tv);
  std::vector<double> v2{-1.0, 1.0}, w2{0.5, 0.5};
  CHECK(cv.g.value(v2, w2) == doctest::Approx(-2.0));

  // sublinear rate growth cannot price finite speeds
  json bad{{"type", "pow_abs"}, {"p", 0.5}};
  CHECK(pointer_of([&] { cost_spec_from_json(bad); }) == "/cost");

  json unk{{"type", "entropy"}};
  CHECK(pointer_of([&] { cost_spec_from_json(unk); }) == "/cost/type");
}

TEST_CASE("transport instances parse lattices and keep the analytic reference") {
  json j{{"n", 2},
         {"m", 5},
         {"T", 1.0},
         {"x0", 1.0},
         {"lattice", {{"min", -2.0}, {"max", 2.0}, {"count", 21}}},
         {"cost", {{"type", "quadratic"}}},
         {"solver", {{"max_iters", 50}, {"tol", 1e-7}}}};
  TransportInstance inst = transport_instance_from_json(j);
  CHECK(inst.n == 2);
  CHECK(inst.lattice.size() == 21);
  CHECK(inst.solver.max_iters == 50);
  REQUIRE(inst.reference.has_value());
  CHECK(*inst.reference == doctest::Approx(0.5 + std::log(2.0)).epsilon(1e-12));

  json bad = j;
  bad["family_n_max"] = 1;  // below the instance level
  CHECK_THROWS_AS(transport_instance_from_json(bad), ConfigError);
}

TEST_CASE("doubles print in shortest round-trip form") {
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-0.5) == "-0.5");
  double v = 1.0002059434507813;
  CHECK(std::stod(format_double(v)) == v);
  double tiny = 3.125e-4;
  CHECK(std::stod(format_double(tiny)) == tiny);
}

TEST_CASE("config hashes ignore key order but not values") {
  json a{{"alpha", 1.0}, {"beta", {{"x", 2}, {"y", 3}}}};
  json b{{"beta", {{"y", 3}, {"x", 2}}}, {"alpha", 1.0}};
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  json c = a;
  c["alpha"] = 1.5;
  CHECK(config_hash(a) != config_hash(c));
  CHECK(fnv1a("") == 14695981039346656037ull);  // 64-bit offset basis
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("manifest records the run and flips complete only at the end") {
  json cfg{{"seed", 7}, {"model", liq_json()}};
  json man = make_manifest("liquidate", cfg, 7);
  CHECK(man["subcommand"] == "liquidate");
  CHECK(man["seed"] == 7);
  CHECK(man["complete"] == false);
  CHECK(man["config_hash"] == config_hash(cfg));
  CHECK(man["tool"] == "mfcx");  // no timestamps: equal seeds rerun byte-identical

  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mfcx_io_test_manifest";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_manifest(dir.string(), man);
  json reread = load_json_file((dir / "manifest.json").string());
  CHECK(reread["complete"] == false);
  fs::remove_all(dir);
}

TEST_CASE("ladder serialization keeps rung order and drops the undefined margin") {
  transport::LadderResult lr;
  lr.reference = 1.1931471805599454;
  for (int n = 0; n <= 1; ++n) {
    transport::LadderRung r;
    r.n = n;
    r.value = 1.0 + 0.1 * n;
    r.margin = (n == 1) ? std::numeric_limits<double>::quiet_NaN() : 0.1;
    r.gap_to_reference = *lr.reference - r.value;
    r.report.converged = true;
    r.report.iterations = 1;
    lr.rungs.push_back(r);
  }
  json j = ladder_to_json(lr);
  REQUIRE(j["rungs"].size() == 2);
  CHECK(j["rungs"][0]["n"] == 0);
  CHECK(j["rungs"][0].contains("margin"));
  CHECK(!j["rungs"][1].contains("margin"));  // last rung has no successor
  CHECK(j["reference"] == doctest::Approx(1.1931471805599454));

  namespace fs = std::filesystem;
  fs::path csv = fs::temp_directory_path() / "mfcx_io_test_ladder.csv";
  write_ladder_csv(csv.string(), lr);
  std::ifstream in(csv);
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  CHECK(header.find("n,") == 0);
  CHECK(row1.find("nan") != std::string::npos);  // undefined margin stays explicit
  fs::remove(csv);
}

TEST_CASE("coupling serialization writes stochastic kernel rows") {
  using namespace mfcx::transport;
  auto prob = std::make_shared<const LevelProblem>(LevelProblem::build(
      quantize_wiener(1, 2, 1.0), ActionLattice::from_values({-1.0, 0.0}), 0.0));
  SolveOptions opts;
  opts.max_iters = 60;
  CostSpec c;
  c.f = LawFunctional::integral(ScalarFn::poly({0.0, 0.0, 1.0}));
  c.g = LawFunctional::var_moment(-0.5, ScalarFn::poly({0.0, 0.0, 0.2}));
  SolveReport rep = solve_Pn(c, prob, opts);
  json j = coupling_to_json(rep.coupling);
  CHECK(j["level"] == 1);
  CHECK(j["block_dt"] == 0.5);
  REQUIRE(j.contains("steps"));
  for (const auto& tbl : j["steps"]) {
    for (const auto& per_x : tbl["kernel"]) {
      for (const auto& row : per_x) {
        double sum = 0.0;
        for (const auto& p : row) sum += p.get<double>();
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }

  BruteForceReport bf = brute_force_Pn(c, prob);
  json jt = coupling_to_json(bf.coupling);
  CHECK(jt.contains("prefix_actions"));  // deterministic tree policies dump actions
  CHECK(!jt.contains("steps"));
}

TEST_CASE("file loads surface parse errors as config errors") {
  namespace fs = std::filesystem;
  fs::path bad = fs::temp_directory_path() / "mfcx_io_test_bad.json";
  {
    std::ofstream out(bad);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_json_file(bad.string()), ConfigError);
  CHECK_THROWS_AS(load_json_file((bad.string() + ".missing")), ConfigError);
  fs::remove(bad);
}
