#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mfcx/martingale.hpp"

using namespace mfcx;

TEST_CASE("reference model derivatives are the expected expressions") {
  ModelSpec m = terminal_cost_model(2.0);
  CHECK(m.dx == 1);
  CHECK(m.da == 1);
  double x = 0.7, a = -0.4;
  JointLaw mu;
  double out = 0.0;
  m.b(0.0, &x, &a, mu, &out);
  CHECK(out == doctest::Approx(a));  // drift is the control itself
  CHECK(m.f(0.0, &x, &a, mu) == doctest::Approx(0.5 * a * a));
  m.f_a(0.0, &x, &a, mu, &out);
  CHECK(out == doctest::Approx(a));
  m.g_x(&x, mu, &out);
  CHECK(out == doctest::Approx(2.0 * x));
}

TEST_CASE("closed-loop transitions hit the known mean profile") {
  // under the optimal gain the mean decays as x0 (1 + g(T-t)) / (1 + gT)
  double gamma = 1.0, T = 1.0, x0 = 1.0;
  ParticleEnsemble ens = simulate_terminal_cost_instance(gamma, T, x0, 0.0, 40000, 64, 19);
  const Channel& X = ens["X"];
  for (std::size_t s = 0; s < X.nodes; s += 16) {
    double t = ens.grid().t(s);
    double want = x0 * (1.0 + gamma * (T - t)) / (1.0 + gamma * T);
    CHECK(X.mean(s) == doctest::Approx(want).epsilon(0.02));
  }
}

TEST_CASE("the optimum passes and a tilted gain is rejected") {
  MartingaleOptions opt;
  opt.segments = 8;
  opt.level = 0.01;

  ParticleEnsemble on = simulate_terminal_cost_instance(1.0, 1.0, 1.0, 0.0, 4000, 64, 101);
  MartingaleReport r0 = martingale_condition_check(terminal_cost_model(1.0), on, opt);
  CHECK(!r0.reject);
  CHECK(r0.p_value > 0.01);
  CHECK(r0.terminal_residual < 1e-8);  // feedback cancels the terminal identity exactly
  CHECK(r0.segment_stats.size() == opt.segments);
  CHECK(r0.dof > 0);

  ParticleEnsemble off = simulate_terminal_cost_instance(1.0, 1.0, 1.0, 0.2, 4000, 64, 101);
  MartingaleReport r1 = martingale_condition_check(terminal_cost_model(1.0), off, opt);
  CHECK(r1.reject);
  CHECK(r1.stat > 10.0 * r0.stat);
  CHECK(r1.terminal_residual > 0.01);
}

TEST_CASE("the statistic is deterministic in the seed") {
  ParticleEnsemble a = simulate_terminal_cost_instance(1.0, 1.0, 1.0, 0.0, 1500, 32, 7);
  ParticleEnsemble b = simulate_terminal_cost_instance(1.0, 1.0, 1.0, 0.0, 1500, 32, 7);
  MartingaleReport ra = martingale_condition_check(terminal_cost_model(1.0), a);
  MartingaleReport rb = martingale_condition_check(terminal_cost_model(1.0), b);
  CHECK(ra.stat == rb.stat);
  CHECK(ra.p_value == rb.p_value);
}

TEST_CASE("false positive rate stays near the nominal level") {
  MartingaleOptions opt;
  opt.level = 0.01;
  int rejects = 0;
  for (std::uint64_t s = 0; s < 30; ++s) {
    ParticleEnsemble ens = simulate_terminal_cost_instance(1.0, 1.0, 1.0, 0.0, 2000, 64, s);
    if (martingale_condition_check(terminal_cost_model(1.0), ens, opt).reject) ++rejects;
  }
  CHECK(rejects <= 2);
}
