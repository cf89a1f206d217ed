#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mfcx/ensemble.hpp"
#include "mfcx/grid.hpp"
#include "mfcx/law.hpp"
#include "mfcx/parallel.hpp"
#include "mfcx/rng.hpp"
#include "mfcx/stats.hpp"

using namespace mfcx;

TEST_CASE("prng streams are reproducible and fork is a pure function") {
  Prng a(12345), b(12345);
  for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());

  Prng root(9);
  Prng c1 = root.fork(7);
  Prng c2 = root.fork(7);
  Prng c3 = root.fork(8);
  CHECK(c1.next_u64() == c2.next_u64());
  CHECK(c1.next_u64() != c3.next_u64());
}

TEST_CASE("uniform and normal draws have the right first moments") {
  Prng rng(2024);
  const int n = 100000;
  double su = 0.0, su2 = 0.0, sn = 0.0, sn2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = rng.next_uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    su += u;
    su2 += u * u;
    double z = rng.next_normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(std::abs(su / n - 0.5) < 0.005);
  CHECK(std::abs(su2 / n - 1.0 / 3.0) < 0.005);
  CHECK(std::abs(sn / n) < 0.02);
  CHECK(std::abs(sn2 / n - 1.0) < 0.03);
}

TEST_CASE("forked streams do not share draw windows") {
  // sums of many normals per fork expose orbit overlap immediately:
  // overlapping windows inflate the variance of the sums and correlate
  // neighbouring forks
  Prng root(5150);
  const int forks = 400, per = 256;
  std::vector<double> sums(forks);
  for (int f = 0; f < forks; ++f) {
    Prng r = root.fork(std::uint64_t(f));
    double s = 0.0;
    for (int i = 0; i < per; ++i) s += r.next_normal();
    sums[f] = s;
  }
  double m = 0.0;
  for (double s : sums) m += s;
  m /= forks;
  double var = 0.0, lag = 0.0;
  for (int f = 0; f < forks; ++f) {
    var += (sums[f] - m) * (sums[f] - m);
    if (f > 0) lag += (sums[f] - m) * (sums[f - 1] - m);
  }
  var /= forks - 1;
  lag /= (forks - 1) * var;
  CHECK(var / per > 0.8);
  CHECK(var / per < 1.25);
  CHECK(std::abs(lag) < 0.15);
}

TEST_CASE("discrete sampler respects weights and skips zeros") {
  DiscreteSampler ds(std::vector<double>{1.0, 0.0, 3.0});
  CHECK(ds.draw(0.0) == 0);
  CHECK(ds.draw(0.9999) == 2);
  Prng rng(3);
  int c0 = 0, c1 = 0, c2 = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    std::size_t k = ds(rng);
    if (k == 0) ++c0;
    else if (k == 1) ++c1;
    else ++c2;
  }
  CHECK(c1 == 0);
  CHECK(std::abs(double(c0) / n - 0.25) < 0.01);
  CHECK(std::abs(double(c2) / n - 0.75) < 0.01);
}

TEST_CASE("time grid hits both endpoints exactly") {
  TimeGrid g(1.5, 7);
  CHECK(g.nodes() == 8);
  CHECK(g.t(0) == 0.0);
  CHECK(g.t(7) == 1.5);
  CHECK(g.dt() == doctest::Approx(1.5 / 7).epsilon(1e-15));

  TimeGrid d = TimeGrid::dyadic(2.0, 3);
  CHECK(d.steps() == 8);
  CHECK(d.t(8) == 2.0);

  auto xs = linspace(-1.0, 1.0, 5);
  CHECK(xs.front() == -1.0);
  CHECK(xs.back() == 1.0);
  CHECK(xs[2] == doctest::Approx(0.0));
}

TEST_CASE("save stride keeps snapshots near the target and divides steps") {
  CHECK(pick_save_stride(1000, 100) == 10);
  CHECK(pick_save_stride(7, 100) == 1);
  CHECK(pick_save_stride(1, 100) == 1);
  for (std::size_t steps : {64u, 100u, 999u, 1024u, 50000u}) {
    std::size_t s = pick_save_stride(steps, 100);
    CHECK(steps % s == 0);
    CHECK(steps / s <= 1000);  // never explodes even for awkward divisors
  }
}

TEST_CASE("channel reductions match hand sums") {
  ParticleEnsemble ens(TimeGrid(1.0, 2), 4);
  Channel& x = ens.add("X", 1);
  for (std::size_t i = 0; i < 4; ++i) x.at(1, i) = double(i);  // 0 1 2 3
  CHECK(x.mean(1) == doctest::Approx(1.5));
  CHECK(x.variance(1) == doctest::Approx(1.25));
  CHECK(x.mean(0) == 0.0);
  CHECK(ens.has("X"));
  CHECK(!ens.has("Y"));
}

TEST_CASE("chi-square tail and incomplete gamma are consistent") {
  CHECK(chi2_sf(0.0, 4) == doctest::Approx(1.0));
  CHECK(chi2_sf(100.0, 4) < 1e-15);
  // chi2 with 2 dof is Exp(1/2): sf(x) = exp(-x/2)
  for (double x : {0.5, 1.0, 2.0, 5.0})
    CHECK(chi2_sf(x, 2) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-10));
  for (double a : {0.5, 1.0, 3.5})
    for (double x : {0.2, 1.0, 4.0})
      CHECK(gamma_p(a, x) + gamma_q(a, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("robust wald separates signal from noise") {
  const std::size_t n = 4000, p = 2;
  std::vector<double> phi(n * p), y_noise(n), y_signal(n);
  Prng rng(77);
  for (std::size_t i = 0; i < n; ++i) {
    double x = rng.next_normal();
    phi[i * p] = 1.0;
    phi[i * p + 1] = x;
    double eps = rng.next_normal();
    y_noise[i] = eps;
    y_signal[i] = 0.5 + 0.5 * x + 0.2 * eps;
  }
  WaldResult wn = robust_wald(phi, y_noise, n, p);
  WaldResult ws = robust_wald(phi, y_signal, n, p);
  REQUIRE(wn.ok);
  REQUIRE(ws.ok);
  CHECK(wn.dof == p);
  CHECK(wn.stat < 20.0);
  CHECK(ws.stat > 1000.0);
}

TEST_CASE("dense solve handles a known system and flags singular ones") {
  std::vector<double> A{2.0, 1.0, 1.0, 3.0};
  std::vector<double> b{5.0, 10.0};
  REQUIRE(solve_dense(2, A, b));
  CHECK(b[0] == doctest::Approx(1.0));
  CHECK(b[1] == doctest::Approx(3.0));

  std::vector<double> S{1.0, 2.0, 2.0, 4.0};
  std::vector<double> c{1.0, 2.0};
  CHECK(!solve_dense(2, S, c));
}

TEST_CASE("parallel_for covers the range once regardless of thread cap") {
  const std::size_t n = 10007;
  for (std::size_t cap : {std::size_t(0), std::size_t(1), std::size_t(3)}) {
    max_threads() = cap;
    std::vector<int> hits(n, 0);
    parallel_for(n, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) hits[i] += 1;
    });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
  max_threads() = 0;
}
