#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mfcx/lq.hpp"
#include "mfcx/rng.hpp"

using namespace mfcx;

namespace {

// backward RK4 for etabar' = 2A etabar + B etabar^2 + C, etabar(T) = K,
// written independently of the library's z-substitution
std::vector<double> rk4_backward(const RiccatiConstants& c, double T, std::size_t n) {
  double h = T / double(n);
  double y = c.K;
  std::vector<double> out(n + 1);
  out[n] = y;
  auto f = [&](double v) { return 2 * c.A * v + c.B * v * v + c.C; };
  for (std::size_t i = n; i-- > 0;) {
    double k1 = f(y), k2 = f(y - 0.5 * h * k1), k3 = f(y - 0.5 * h * k2), k4 = f(y - h * k3);
    y -= h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    out[i] = y;
  }
  return out;
}

LQParams counterexample_params() {
  LQParams p;
  p.b1 = 0.2;
  p.b2 = 1.0;
  p.bbar1 = 0.1;
  p.bbar2 = 0.8;
  p.q = 1.0;
  p.qbar = 0.5;
  p.r = 1.0;
  p.rbar = 0.7;
  p.s = 0.5;
  p.sbar = 0.5;
  p.gamma = 1.0;
  p.gammabar = 0.5;
  p.rho = 0.5;
  p.T = 1.0;
  p.x0 = 1.0;
  return p;
}

}  // namespace

TEST_CASE("feedback weights on a hand-solved example") {
  LQParams p;
  p.b2 = 1.0;
  p.bbar2 = 0.5;
  p.r = 1.0;
  p.rbar = 0.5;
  p.sbar = 2.0;
  LQCoefficients co = abc_coefficients(p);
  CHECK(co.a == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(co.b == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
  CHECK(co.c == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(co.c == doctest::Approx(co.a + co.b + 1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("closed-form mean adjoint agrees with backward integration") {
  // unit constants first (a double-root branch with known value -1/3)
  RiccatiConstants unit{1.0, 1.0, 1.0, 1.0};
  RiccatiClosedForm zf = RiccatiClosedForm::solve(unit, 1.0);
  CHECK(zf.eta(0.0) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(zf.eta(1.0) == doctest::Approx(1.0).epsilon(1e-12));

  Prng rng(61);
  for (int trial = 0; trial < 8; ++trial) {
    RiccatiConstants c;
    c.A = -1.0 + 2.0 * rng.next_uniform();
    c.B = 2.0 * rng.next_uniform();
    c.C = -2.0 * rng.next_uniform();
    c.K = 0.2 + 2.0 * rng.next_uniform();
    double T = 0.5 + 1.5 * rng.next_uniform();
    RiccatiClosedForm cf = RiccatiClosedForm::solve(c, T);
    auto ref = rk4_backward(c, T, 4000);
    for (std::size_t i = 0; i <= 4000; i += 500) {
      double t = T * double(i) / 4000.0;
      CHECK(cf.eta(t) == doctest::Approx(ref[i]).epsilon(1e-8));
    }
  }
}

TEST_CASE("linear branch when the quadratic coefficient vanishes") {
  RiccatiConstants c{0.5, 0.0, -1.0, 2.0};
  RiccatiClosedForm cf = RiccatiClosedForm::solve(c, 1.0);
  CHECK(cf.branch() == RiccatiClosedForm::Branch::Linear);
  auto ref = rk4_backward(c, 1.0, 2000);
  CHECK(cf.eta(0.0) == doctest::Approx(ref[0]).epsilon(1e-9));
}

TEST_CASE("oscillatory constants blow up inside the horizon") {
  // A = 0, B = -1, C = -1 turns the substitution into z'' = -z, and z
  // crosses zero before t = T - pi/2
  RiccatiConstants c{0.0, -1.0, -1.0, 0.0};
  CHECK_THROWS_AS(RiccatiClosedForm::solve(c, 3.0), RiccatiBlowup);
  try {
    RiccatiClosedForm::solve(c, 3.0);
  } catch (const RiccatiBlowup& e) {
    CHECK(e.crossing_time > 0.0);
    CHECK(e.crossing_time < 3.0);
  }
}

TEST_CASE("mean adjoint through the full pipeline matches backward integration") {
  Prng rng(17);
  int done = 0;
  while (done < 6) {
    LQParams p;
    p.b1 = -0.5 + rng.next_uniform();
    p.b2 = 0.5 + rng.next_uniform();
    p.bbar1 = -0.3 + 0.6 * rng.next_uniform();
    p.bbar2 = 0.8 * rng.next_uniform();
    p.q = 0.2 + rng.next_uniform();
    p.qbar = rng.next_uniform();
    p.r = 0.5 + rng.next_uniform();
    p.rbar = rng.next_uniform();
    p.s = rng.next_uniform();
    p.sbar = rng.next_uniform();
    p.gamma = 0.2 + rng.next_uniform();
    p.gammabar = rng.next_uniform();
    p.rho = rng.next_uniform();
    p.T = 0.5 + 1.5 * rng.next_uniform();
    p.x0 = 1.0;
    LQSolution sol = solve_lq(p, 4000);
    auto ref = rk4_backward(sol.mean_constants, p.T, 8000);
    double sup = 0.0;
    for (std::size_t i = 0; i <= 8000; i += 100) {
      double t = p.T * double(i) / 8000.0;
      sup = std::max(sup, std::abs(sol.eta_bar(t) - ref[i]));
    }
    CHECK(sup < 1e-6);
    ++done;
  }
}

TEST_CASE("frozen initial mean adjoint on the interaction instance") {
  LQSolution sol = solve_lq(counterexample_params());
  CHECK(sol.ybar.at(0) == doctest::Approx(0.7648315198449267).epsilon(1e-10));
  // terminal consistency of the tabulated fields
  CHECK(sol.ybar(sol.params.T) ==
        doctest::Approx(sol.mean_constants.K * sol.xbar(sol.params.T)).epsilon(1e-9));
}

TEST_CASE("classical reduction reproduces the frozen value") {
  LQParams p;
  p.b1 = 0.3;
  p.b2 = 1.0;
  p.q = 1.0;
  p.r = 1.0;
  p.gamma = 1.0;
  p.T = 1.0;
  p.x0 = 1.0;
  LQSolution sol = solve_lq(p);
  LQSim sim = simulate_lq(p, sol, 40000, 1000, 5);
  CHECK(std::abs(sim.cost - 1.2411746854155028) < 0.02);
  CHECK(std::abs(sim.cost - 1.2411746854155028) < 5 * sim.se_cost + 5e-3);
  // no mean terms: chi vanishes and the feedback is the classical gain
  for (double t : {0.0, 0.5, 1.0}) CHECK(std::abs(sol.chi(t)) < 1e-9);
}

TEST_CASE("stationarity holds along the synthesized optimum") {
  LQParams p = counterexample_params();
  LQSolution sol = solve_lq(p);
  LQSim sim = simulate_lq(p, sol, 20000, 1000, 7);
  attach_lq_adjoints(sim.ens, sol);
  ResidualStats st = lq_stationarity_residual(sim.ens, p, sol);
  CHECK(st.max_abs < 1e-2);
}

TEST_CASE("freezing the laws breaks optimality when interactions are on") {
  LQParams p = counterexample_params();
  LQSolution sol = solve_lq(p);
  LQSim sim = simulate_lq(p, sol, 10000, 500, 7);
  attach_lq_adjoints(sim.ens, sol);
  ResidualStats st = lq_stationarity_residual(sim.ens, p, sol);
  ResidualStats pw = lq_pointwise_residual(sim.ens, p, sol);
  CHECK(pw.max_abs > 10.0 * st.max_abs);
  CHECK(pw.max_abs > 0.05);
}

TEST_CASE("arbitrary feedback simulation agrees with the solution path") {
  LQParams p = counterexample_params();
  LQSolution sol = solve_lq(p);
  auto fb = [&sol](double t, double x, double xb) { return sol.feedback(t, x, xb); };
  LQSim a = simulate_lq(p, sol, 2000, 200, 3);
  LQSim b = simulate_lq_feedback(p, fb, 2000, 200, 3);
  CHECK(a.cost == doctest::Approx(b.cost).epsilon(1e-12));
}

TEST_CASE("validation rejects degenerate weights") {
  LQParams p;
  p.r = 0.0;
  p.rbar = 0.0;
  CHECK_THROWS(p.validate());
  p = LQParams{};
  p.q = -1.0;
  CHECK_THROWS(p.validate());
  p = LQParams{};
  p.T = 0.0;
  CHECK_THROWS(p.validate());
}
