#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mfcx/liquidation.hpp"
#include "mfcx/lq.hpp"
#include "mfcx/pontryagin.hpp"

using namespace mfcx;

namespace {

LiquidationParams coupled_params() {
  LiquidationParams p;
  p.k = 0.5;
  p.phi = 0.1;
  p.A = 2.0;
  p.lambda = 0.3;
  p.sigma = 0.5;
  p.T = 1.0;
  p.s0 = 10.0;
  return p;
}

LiquidationSim optimal_sim(const LiquidationParams& p, std::size_t N, std::size_t steps,
                           std::uint64_t seed) {
  Q0Spec q0 = Q0Spec::gaussian(1.0, 0.2);
  LiquidationSolution sol(p, q0);
  LiquidationSim sim = simulate_liquidation(p, q0, sol.speed(), N, steps, seed);
  attach_liquidation_adjoints(sim.ens, p);
  return sim;
}

}  // namespace

TEST_CASE("gradient vanishes along the closed-form optimum") {
  LiquidationParams p = coupled_params();
  LiquidationSim sim = optimal_sim(p, 4000, 500, 2);
  ResidualReport rep = necessary_residual(liquidation_model(p), sim.ens);
  CHECK(rep.equality_form);
  CHECK(rep.max_abs < 2e-3);
  CHECK(rep.scale > 0.1);  // normalization reflects the term sizes, not the cancel
}

TEST_CASE("a rescaled control is flagged with a residual of its size") {
  LiquidationParams p = coupled_params();
  Q0Spec q0 = Q0Spec::gaussian(1.0, 0.2);
  LiquidationSolution sol(p, q0);
  Speed off = Speed::affine([&sol](double t) { return 1.2 * sol.coefA1(t); },
                            [&sol](double t) { return 1.2 * sol.coefA2(t); });
  LiquidationSim sim = simulate_liquidation(p, q0, off, 4000, 500, 2);
  attach_liquidation_adjoints(sim.ens, p);
  ResidualReport rep = necessary_residual(liquidation_model(p), sim.ens);
  CHECK(rep.max_abs > 0.03);

  LiquidationSim opt = optimal_sim(p, 4000, 500, 2);
  ResidualReport ropt = necessary_residual(liquidation_model(p), opt.ens);
  CHECK(rep.max_abs > 15.0 * ropt.max_abs);
}

TEST_CASE("box form reports one-sided violations only") {
  LiquidationParams p = coupled_params();
  LiquidationSim sim = optimal_sim(p, 2000, 300, 5);
  ResidualOptions opt;
  opt.lo = {-20.0};
  opt.hi = {20.0};
  ResidualReport rep = necessary_residual(liquidation_model(p), sim.ens, opt);
  CHECK(!rep.equality_form);
  CHECK(rep.max_abs >= 0.0);
  CHECK(rep.max_abs < 0.05);  // interior optimum: best feasible direction is flat
}

TEST_CASE("interaction subsampling approximates the full average") {
  LiquidationParams p = coupled_params();
  LiquidationSim sim = optimal_sim(p, 3000, 300, 8);
  ResidualReport full = necessary_residual(liquidation_model(p), sim.ens);
  ResidualOptions opt;
  opt.base_subsample = 500;
  ResidualReport sub = necessary_residual(liquidation_model(p), sim.ens, opt);
  CHECK(std::abs(full.max_abs - sub.max_abs) < 0.02);
}

TEST_CASE("scalar statistic fast path matches the generic evaluator") {
  LQParams p;
  p.b1 = 0.2;
  p.b2 = 1.0;
  p.bbar2 = 0.8;
  p.q = 1.0;
  p.rbar = 0.7;
  p.sbar = 0.5;
  p.gammabar = 0.5;
  p.rho = 0.5;
  p.x0 = 1.0;
  LQSolution sol = solve_lq(p);
  LQSim sim = simulate_lq(p, sol, 3000, 400, 13);
  attach_lq_adjoints(sim.ens, sol);

  const double rss = p.rbar * p.sbar * (p.sbar - 2.0);
  ScalarInteractionFOC foc;
  foc.base = [&p](double, const double*, const double* a, const double* y) {
    return p.b2 * y[0] + (p.r + p.rbar) * a[0];
  };
  foc.stat = [&p, rss](double, const double*, const double* a, const double* y) {
    return p.bbar2 * y[0] + rss * a[0];
  };
  ResidualReport fast = scalar_interaction_residual(sim.ens, foc);
  ResidualReport slow = necessary_residual(lq_model(p), sim.ens);
  CHECK(fast.max_abs == doctest::Approx(slow.max_abs).epsilon(1e-6));
  CHECK(fast.per_time_max.size() == slow.per_time_max.size());
}

TEST_CASE("joint law view carries the channel means") {
  LiquidationParams p = coupled_params();
  LiquidationSim sim = optimal_sim(p, 1000, 100, 3);
  EmpiricalLaw buf;
  JointLaw mu = joint_law_at(sim.ens, 5, buf);
  CHECK(mu.dx == 2);
  CHECK(mu.da == 1);
  CHECK(mu.xbar[0] == doctest::Approx(sim.ens["X"].mean(5, 0)).epsilon(1e-12));
  CHECK(mu.xbar[1] == doctest::Approx(sim.ens["X"].mean(5, 1)).epsilon(1e-12));
  CHECK(mu.abar[0] == doctest::Approx(sim.ens["alpha"].mean(5)).epsilon(1e-12));
}

TEST_CASE("channel shape mismatches are rejected") {
  LiquidationParams p = coupled_params();
  LiquidationSim sim = optimal_sim(p, 100, 50, 1);
  LQParams wrong;  // scalar-state model against a two-dimensional ensemble
  CHECK_THROWS(necessary_residual(lq_model(wrong), sim.ens));
}
