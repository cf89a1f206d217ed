#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mfcx/liquidation.hpp"

using namespace mfcx;

namespace {

LiquidationParams reference_params() {
  LiquidationParams p;
  p.k = 0.1;
  p.phi = 0.01;
  p.A = 1.0;
  p.lambda = 0.05;
  p.sigma = 0.0;
  p.T = 1.0;
  return p;
}

}  // namespace

TEST_CASE("initial rate matches the frozen reference value") {
  LiquidationSolution sol(reference_params(), Q0Spec::constant(10.0));
  CHECK(sol.alpha(0.0, 10.0) == doctest::Approx(-9.434060061410344).epsilon(1e-13));
}

TEST_CASE("inventory solves its own second-order equation") {
  // Q'' = (phi/k) Q and alpha = Q', checked by central differences on
  // the closed form for a particle whose q0 differs from the mean
  LiquidationParams p;
  p.k = 0.5;
  p.phi = 0.8;
  p.A = 1.2;
  p.lambda = 0.4;
  p.T = 1.5;
  Q0Spec q0 = Q0Spec::two_point(3.0, 0.5, 1.0);  // mean 2
  LiquidationSolution sol(p, q0);
  CHECK(sol.Eq0() == doctest::Approx(2.0));

  const double h = 1e-4;
  for (double t : {0.2, 0.75, 1.3}) {
    double qm = sol.inventory(t - h, 3.0), q = sol.inventory(t, 3.0),
           qp = sol.inventory(t + h, 3.0);
    double d1 = (qp - qm) / (2 * h);
    double d2 = (qp - 2 * q + qm) / (h * h);
    CHECK(d1 == doctest::Approx(sol.alpha(t, 3.0)).epsilon(1e-7));
    CHECK(d2 == doctest::Approx((p.phi / p.k) * q).epsilon(1e-6));
  }
}

TEST_CASE("terminal rate couples inventory and its mean") {
  LiquidationParams p;
  p.k = 0.5;
  p.phi = 0.8;
  p.A = 1.2;
  p.lambda = 0.4;
  p.T = 1.5;
  Q0Spec q0 = Q0Spec::two_point(3.0, 0.5, 1.0);
  LiquidationSolution sol(p, q0);
  for (double x : {3.0, 1.0}) {
    double lhs = sol.alpha(p.T, x);
    double rhs = (p.lambda / (2 * p.k)) * sol.mean_inventory(p.T) -
                 (p.A / p.k) * sol.inventory(p.T, x);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
  }
}

TEST_CASE("zero running penalty is the continuous limit of a small one") {
  LiquidationParams p0 = reference_params();
  p0.phi = 0.0;
  LiquidationParams pe = p0;
  pe.phi = 1e-12;
  LiquidationSolution s0(p0, Q0Spec::constant(10.0));
  LiquidationSolution se(pe, Q0Spec::constant(10.0));
  for (double t : {0.0, 0.3, 0.9, 1.0}) {
    CHECK(s0.alpha(t, 10.0) == doctest::Approx(se.alpha(t, 10.0)).epsilon(1e-6));
    CHECK(s0.inventory(t, 10.0) == doctest::Approx(se.inventory(t, 10.0)).epsilon(1e-6));
  }
  // phi = 0 makes the inventory linear in t
  double mid = 0.5 * (s0.inventory(0.0, 10.0) + s0.inventory(1.0, 10.0));
  CHECK(s0.inventory(0.5, 10.0) == doctest::Approx(mid).epsilon(1e-12));
}

TEST_CASE("parameter validation rejects ill-posed inputs") {
  LiquidationParams p = reference_params();
  p.k = 0.0;
  CHECK_THROWS(p.validate());
  p = reference_params();
  p.lambda = -0.1;
  CHECK_THROWS(p.validate());
  p = reference_params();
  p.lambda = 2 * p.A + 0.1;
  CHECK_THROWS(p.validate());
  p = reference_params();
  p.T = 0.0;
  CHECK_THROWS(p.validate());
  p = reference_params();
  p.phi = 0.0;
  p.A = 0.0;
  CHECK_THROWS(p.validate());

  CHECK_THROWS(Q0Spec::two_point(1.0, 1.5, 2.0).validate());
  CHECK_THROWS(Q0Spec::gaussian(1.0, 0.0).validate());
}

TEST_CASE("initial distribution sampling reproduces its mean") {
  Prng rng(1);
  Q0Spec tp = Q0Spec::two_point(3.0, 0.25, -1.0);
  CHECK(tp.mean() == doctest::Approx(0.0));
  double s = 0.0;
  for (int i = 0; i < 40000; ++i) s += tp.sample(rng);
  CHECK(std::abs(s / 40000) < 0.05);

  Q0Spec g = Q0Spec::gaussian(2.0, 0.5);
  CHECK(g.mean() == doctest::Approx(2.0));
  double sg = 0.0, sg2 = 0.0;
  for (int i = 0; i < 40000; ++i) {
    double v = g.sample(rng);
    sg += v;
    sg2 += v * v;
  }
  CHECK(std::abs(sg / 40000 - 2.0) < 0.02);
  CHECK(std::abs(sg2 / 40000 - 4.25) < 0.05);
}

TEST_CASE("simulated means track the closed form") {
  LiquidationParams p = reference_params();
  p.sigma = 0.5;
  Q0Spec q0 = Q0Spec::gaussian(10.0, 1.0);
  LiquidationSolution sol(p, q0);
  LiquidationSim sim = simulate_liquidation(p, q0, sol.speed(), 20000, 500, 11);
  const Channel& X = sim.ens["X"];
  for (std::size_t s = 0; s < X.nodes; s += 25) {
    double t = sim.ens.grid().t(s);
    CHECK(X.mean(s, 0) == doctest::Approx(sol.mean_inventory(t)).epsilon(0.02));
  }
  CHECK(sim.se_cost > 0.0);
  CHECK(std::isfinite(sim.mean_cost));
}

TEST_CASE("snapshots stay bounded while stepping finely") {
  LiquidationParams p = reference_params();
  LiquidationSim sim =
      simulate_liquidation(p, Q0Spec::constant(1.0), LiquidationSolution(p, Q0Spec::constant(1.0)).speed(),
                           100, 1000, 4);
  CHECK(sim.ens.grid().nodes() == 101);
  CHECK(sim.ens["X"].nodes == 101);
}

TEST_CASE("reconstructed adjoint matches the closed-form initial value") {
  LiquidationParams p;
  p.k = 0.5;
  p.phi = 0.8;
  p.A = 1.2;
  p.lambda = 0.4;
  p.T = 1.5;
  p.sigma = 0.0;
  Q0Spec q0 = Q0Spec::two_point(3.0, 0.5, 1.0);
  LiquidationSolution sol(p, q0);
  LiquidationSim sim = simulate_liquidation(p, q0, sol.speed(), 64, 3000, 9);
  attach_liquidation_adjoints(sim.ens, p);
  const Channel& X = sim.ens["X"];
  const Channel& Y = sim.ens["Y"];
  for (std::size_t i = 0; i < 8; ++i) {
    double q0i = X.at(0, i, 0);
    CHECK(Y.at(0, i, 0) == doctest::Approx(sol.adjointQ0(q0i)).epsilon(2e-3));
  }
  // second adjoint coordinate is minus the inventory pathwise
  for (std::size_t s = 0; s < X.nodes; s += 40)
    CHECK(Y.at(s, 0, 1) == doctest::Approx(-X.at(s, 0, 0)).epsilon(1e-12));
}

TEST_CASE("scaling the optimal rate can only raise the cost") {
  LiquidationParams p = reference_params();
  p.sigma = 0.5;
  Q0Spec q0 = Q0Spec::constant(10.0);
  LiquidationSolution sol(p, q0);
  auto scaled = [&](double c) {
    return Speed::affine([&sol, c](double t) { return c * sol.coefA1(t); },
                         [&sol, c](double t) { return c * sol.coefA2(t); });
  };
  double c_opt = simulate_liquidation(p, q0, sol.speed(), 20000, 500, 21).mean_cost;
  double c_lo = simulate_liquidation(p, q0, scaled(0.8), 20000, 500, 21).mean_cost;
  double c_hi = simulate_liquidation(p, q0, scaled(1.2), 20000, 500, 21).mean_cost;
  CHECK(c_opt < c_lo);
  CHECK(c_opt < c_hi);
}

TEST_CASE("equal seeds give identical simulations") {
  LiquidationParams p = reference_params();
  p.sigma = 0.5;
  Q0Spec q0 = Q0Spec::gaussian(10.0, 1.0);
  LiquidationSolution sol(p, q0);
  LiquidationSim a = simulate_liquidation(p, q0, sol.speed(), 500, 200, 33);
  LiquidationSim b = simulate_liquidation(p, q0, sol.speed(), 500, 200, 33);
  CHECK(a.cost == b.cost);
  CHECK(a.ens["X"].data == b.ens["X"].data);
}
