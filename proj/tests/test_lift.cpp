#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>
#include <vector>

#include "mfcx/law.hpp"
#include "mfcx/transport/lift.hpp"
#include "mfcx/transport/solver.hpp"

using namespace mfcx::transport;

namespace {

CostSpec quadratic_cost() {
  CostSpec c;
  c.f = LawFunctional::integral(ScalarFn::poly({0.0, 0.0, 1.0}));
  c.g = LawFunctional::integral(ScalarFn::poly({0.0, 0.0, 1.0}));
  return c;
}

DiscreteCausalCoupling solved_coupling(int level, int m, const ActionLattice& lat,
                                       double x0) {
  auto prob = std::make_shared<const LevelProblem>(
      LevelProblem::build(quantize_wiener(level, m, 1.0), lat, x0));
  SolveReport rep = solve_Pn(quadratic_cost(), prob);
  REQUIRE(rep.converged);
  return rep.coupling;
}

}  // namespace

TEST_CASE("bridge hits a constant target exactly and carries real noise") {
  const double x0 = 0.7;
  auto ens = lift_bridge([&](double, double, double b) { return b; }, 1.0, x0, 2000, 128, 9);
  const mfcx::Channel& X = ens["X"];
  const mfcx::Channel& W = ens["W"];
  std::size_t last = ens.grid().nodes() - 1;
  for (std::size_t i = 0; i < 2000; ++i) CHECK(X.at(last, i) == x0);
  CHECK(std::abs(W.mean(last)) < 0.1);
  CHECK(std::abs(W.variance(last) - 1.0) < 0.15);
  CHECK(X.variance(0) == 0.0);
}

TEST_CASE("bridge splits terminal mass by the uniform draw") {
  auto psi = [](double u, double, double) { return u < 0.5 ? -1.0 : 1.0; };
  auto ens = lift_bridge(psi, 1.0, 0.0, 4000, 64, 17);
  const mfcx::Channel& X = ens["X"];
  std::size_t last = ens.grid().nodes() - 1;
  std::size_t hi = 0;
  for (std::size_t i = 0; i < 4000; ++i) {
    double v = X.at(last, i);
    CHECK((v == -1.0 || v == 1.0));
    if (v == 1.0) ++hi;
  }
  CHECK(std::abs(double(hi) / 4000.0 - 0.5) < 0.04);
}

TEST_CASE("lifted paths realize exact lattice rates on every block") {
  DiscreteCausalCoupling c =
      solved_coupling(1, 3, ActionLattice::uniform(-2.0, 2.0, 5), 1.0);
  const std::size_t N = 2000;
  LiftResult lr = lift_to_sde(c, N, 64, 7);
  REQUIRE(lr.zidx.size() == 2);
  REQUIRE(lr.atom.size() == 2);
  REQUIRE(lr.terminal.size() == N);

  const mfcx::Channel& X = lr.ens["X"];
  const mfcx::Channel& W = lr.ens["W"];
  std::size_t last = lr.ens.grid().nodes() - 1;
  std::size_t mid = last / 2;
  const double dtb = 0.5;
  const std::vector<double>& z = c.prob->lattice.z;

  for (std::size_t i = 0; i < N; ++i) {
    CHECK(lr.zidx[0][i] < 5);
    CHECK(lr.zidx[1][i] < 5);
    CHECK(lr.atom[0][i] < 3);
    CHECK(lr.atom[1][i] < 3);
    double rate0 = (X.at(mid, i) - X.at(0, i) - (W.at(mid, i) - W.at(0, i))) / dtb;
    CHECK(std::abs(rate0 - z[lr.zidx[0][i]]) < 1e-12);
    double total = lr.terminal[i] - 1.0 - W.at(last, i);
    CHECK(std::abs(total - dtb * (z[lr.zidx[0][i]] + z[lr.zidx[1][i]])) < 1e-12);
    CHECK(lr.terminal[i] == X.at(last, i));
  }
}

TEST_CASE("lift diagnostics tie back to the coupling it came from") {
  DiscreteCausalCoupling c =
      solved_coupling(1, 3, ActionLattice::uniform(-2.0, 2.0, 5), 1.0);
  LiftResult lr = lift_to_sde(c, 4000, 64, 11);
  LiftDiagnostics d = lift_diagnostics(c, lr, quadratic_cost());

  CHECK(d.coupling_cost == cost_cn(c, quadratic_cost(), 1));
  CHECK(std::abs(d.block_cost - d.coupling_cost) < 0.3);
  CHECK(d.rate_w2_max >= 0.0);
  CHECK(d.rate_w2_max < 0.5);
  CHECK(d.atom_weight_err < 0.05);  // cells carry exactly the atom weights
  CHECK(d.terminal_w2 >= 0.0);
  CHECK(d.terminal_w2 < 0.5);
  CHECK(d.conditional_w2 >= 0.0);
  CHECK(std::isfinite(d.conditional_w2));
}

TEST_CASE("empirical cell frequencies match the quantized step law") {
  DiscreteCausalCoupling c =
      solved_coupling(0, 5, ActionLattice::uniform(-2.0, 2.0, 9), 0.5);
  const std::size_t N = 6000;
  LiftResult lr = lift_to_sde(c, N, 32, 23);
  const IncrementLaw& step = c.prob->wiener.step;
  std::vector<double> freq(step.size(), 0.0);
  for (std::size_t i = 0; i < N; ++i) freq[lr.atom[0][i]] += 1.0 / double(N);
  for (std::size_t a = 0; a < step.size(); ++a) {
    double se = std::sqrt(step.p[a] * (1.0 - step.p[a]) / double(N));
    CHECK(std::abs(freq[a] - step.p[a]) < 5.0 * se + 1e-3);
  }
}

TEST_CASE("lift is reproducible by seed and rejects what it cannot carry") {
  DiscreteCausalCoupling c =
      solved_coupling(1, 2, ActionLattice::from_values({-1.0, 0.0, 1.0}), 0.0);
  LiftResult a = lift_to_sde(c, 500, 16, 99);
  LiftResult b = lift_to_sde(c, 500, 16, 99);
  CHECK(a.terminal == b.terminal);
  CHECK(a.zidx == b.zidx);
  LiftResult d = lift_to_sde(c, 500, 16, 100);
  CHECK(a.terminal != d.terminal);

  DiscreteCausalCoupling deep =
      solved_coupling(2, 2, ActionLattice::from_values({-1.0, 0.0, 1.0}), 0.0);
  CHECK_THROWS(lift_to_sde(deep, 100, 32, 1));  // only one or two blocks lift
  CHECK_THROWS(lift_to_sde(c, 100, 2, 1));      // fewer than 2 steps per block
}
