#include "mfcx/martingale.hpp"

#include <cmath>
#include <stdexcept>

#include "mfcx/parallel.hpp"
#include "mfcx/pontryagin.hpp"
#include "mfcx/rng.hpp"
#include "mfcx/stats.hpp"

namespace mfcx {

namespace {

void require_transport_form(const ModelSpec& m) {
  if (m.dx != 1 || m.da != 1 || m.dw != 1)
    throw std::invalid_argument("martingale check: needs scalar state/control");
  JointLaw mu;
  mu.xbar = {0.2};
  mu.abar = {-0.1};
  const double probes[][3] = {{0.0, 0.3, -1.3}, {0.7, -0.9, 0.4}, {0.5, 2.0, 2.0}};
  for (auto& pr : probes) {
    double out = 0.0;
    m.b(pr[0], &pr[1], &pr[2], mu, &out);
    if (std::abs(out - pr[2]) > 1e-9)
      throw std::invalid_argument("martingale check: model drift must equal the control");
  }
}

// Orthonormalize columns in place (modified Gram-Schmidt), dropping
// numerically dependent ones. Returns number of kept columns; data is
// compacted so kept columns are contiguous rows-major in `q`.
std::size_t orthonormalize(std::vector<double>& q, std::size_t n, std::size_t p) {
  std::size_t kept = 0;
  for (std::size_t col = 0; col < p; ++col) {
    // copy column col into slot `kept`
    if (col != kept)
      for (std::size_t i = 0; i < n; ++i) q[i * p + kept] = q[i * p + col];
    double norm0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm0 += q[i * p + kept] * q[i * p + kept];
    for (std::size_t j = 0; j < kept; ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += q[i * p + j] * q[i * p + kept];
      for (std::size_t i = 0; i < n; ++i) q[i * p + kept] -= dot * q[i * p + j];
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += q[i * p + kept] * q[i * p + kept];
    if (norm <= 1e-20 * std::max(norm0, 1e-300)) continue;  // dependent column
    double inv = 1.0 / std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) q[i * p + kept] *= inv;
    ++kept;
  }
  return kept;
}

}  // namespace

MartingaleReport martingale_condition_check(const ModelSpec& model,
                                            const ParticleEnsemble& ens,
                                            const MartingaleOptions& opt) {
  model.validate();
  require_transport_form(model);
  const Channel& X = ens["X"];
  const Channel& A = ens["alpha"];
  const std::size_t nodes = ens.grid().nodes();
  const std::size_t steps = nodes - 1;
  const std::size_t N = ens.N();
  if (opt.segments == 0 || steps < 2 * opt.segments)
    throw std::invalid_argument("martingale check: need at least 2 steps per segment");
  const double dt = ens.grid().dt();

  const bool fast_nu = model.f_nu.zero() || model.f_nu.probe_independent();
  const bool fast_mu = model.f_mu.zero() || model.f_mu.probe_independent();
  if (!fast_nu || !fast_mu)
    throw std::invalid_argument(
        "martingale check: probe-dependent cost kernels are not supported");

  // N per particle per node, built as running-cost gradient minus the
  // trapezoid of the compensator integrand
  std::vector<double> Nproc(nodes * N), integrand(nodes * N);
  EmpiricalLaw lawbuf;
  for (std::size_t s = 0; s < nodes; ++s) {
    const double t = ens.grid().t(s);
    JointLaw mu = joint_law_at(ens, s, lawbuf);
    double avg_nu = 0.0, avg_mu = 0.0;
    if (!model.f_nu.zero() || !model.f_mu.zero()) {
      for (std::size_t j = 0; j < N; ++j) {
        const double* xj = &X.data[s * N + j];
        const double* aj = &A.data[s * N + j];
        double v = 0.0;
        if (!model.f_nu.zero()) {
          model.f_nu.eval(t, xj, aj, mu, nullptr, nullptr, &v);
          avg_nu += v;
        }
        if (!model.f_mu.zero()) {
          model.f_mu.eval(t, xj, aj, mu, nullptr, nullptr, &v);
          avg_mu += v;
        }
      }
      avg_nu /= static_cast<double>(N);
      avg_mu /= static_cast<double>(N);
    }
    parallel_for(N, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        const double* xi = &X.data[s * N + i];
        const double* ai = &A.data[s * N + i];
        double fa = 0.0, fx = 0.0;
        model.f_a(t, xi, ai, mu, &fa);
        model.f_x(t, xi, ai, mu, &fx);
        Nproc[s * N + i] = fa + avg_nu;  // integral subtracted below
        integrand[s * N + i] = fx + avg_mu;
      }
    });
  }
  parallel_for(N, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double acc = 0.0;
      for (std::size_t s = 1; s < nodes; ++s) {
        acc += 0.5 * dt * (integrand[(s - 1) * N + i] + integrand[s * N + i]);
        Nproc[s * N + i] -= acc;
      }
    }
  });

  MartingaleReport rep;
  const std::size_t p = 4;  // features 1, X, X^2, N
  for (std::size_t seg = 0; seg < opt.segments; ++seg) {
    std::size_t s_lo = steps * seg / opt.segments;
    std::size_t s_hi = steps * (seg + 1) / opt.segments;
    std::size_t n_obs = (s_hi - s_lo) * N;
    std::vector<double> q(n_obs * p);
    std::vector<double> y(n_obs);
    // scale features to comparable magnitude before orthonormalizing
    double sx = 0.0, sn = 0.0;
    for (std::size_t s = s_lo; s < s_hi; ++s)
      for (std::size_t i = 0; i < N; ++i) {
        sx += X.data[s * N + i] * X.data[s * N + i];
        sn += Nproc[s * N + i] * Nproc[s * N + i];
      }
    sx = std::sqrt(std::max(sx / static_cast<double>(n_obs), 1e-300));
    sn = std::sqrt(std::max(sn / static_cast<double>(n_obs), 1e-300));
    std::size_t row = 0;
    for (std::size_t s = s_lo; s < s_hi; ++s)
      for (std::size_t i = 0; i < N; ++i, ++row) {
        double xv = X.data[s * N + i] / sx;
        double nv = Nproc[s * N + i] / sn;
        q[row * p + 0] = 1.0;
        q[row * p + 1] = xv;
        q[row * p + 2] = xv * xv;
        q[row * p + 3] = nv;
        y[row] = Nproc[(s + 1) * N + i] - Nproc[s * N + i];
      }
    std::size_t kept = orthonormalize(q, n_obs, p);
    if (kept == 0) continue;
    // with orthonormal columns S = I, so beta = Q'y and the robust
    // Wald reduces to c' M^{-1} c with M = sum q q' eps^2
    std::vector<double> c(kept, 0.0);
    for (std::size_t i = 0; i < n_obs; ++i)
      for (std::size_t a = 0; a < kept; ++a) c[a] += q[i * p + a] * y[i];
    std::vector<double> M(kept * kept, 0.0);
    for (std::size_t i = 0; i < n_obs; ++i) {
      double fit = 0.0;
      for (std::size_t a = 0; a < kept; ++a) fit += q[i * p + a] * c[a];
      double e2 = (y[i] - fit) * (y[i] - fit);
      for (std::size_t a = 0; a < kept; ++a)
        for (std::size_t b = a; b < kept; ++b) M[a * kept + b] += q[i * p + a] * q[i * p + b] * e2;
    }
    for (std::size_t a = 0; a < kept; ++a)
      for (std::size_t b = 0; b < a; ++b) M[a * kept + b] = M[b * kept + a];
    std::vector<double> w = c;
    if (!solve_dense(kept, M, w)) continue;
    double stat = 0.0;
    for (std::size_t a = 0; a < kept; ++a) stat += c[a] * w[a];
    if (!(stat >= 0.0) || !std::isfinite(stat)) continue;
    rep.segment_stats.push_back(stat);
    rep.stat += stat;
    rep.dof += kept;
  }
  rep.p_value = rep.dof == 0 ? 1.0 : chi2_sf(rep.stat, static_cast<double>(rep.dof));
  rep.reject = rep.p_value < opt.level;

  // terminal identity
  {
    const std::size_t s = nodes - 1;
    const double t = ens.grid().t(s);
    JointLaw mu = joint_law_at(ens, s, lawbuf);
    double avg_nu = 0.0, avg_gmu = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      const double* xj = &X.data[s * N + j];
      const double* aj = &A.data[s * N + j];
      double v = 0.0;
      if (!model.f_nu.zero()) {
        model.f_nu.eval(t, xj, aj, mu, nullptr, nullptr, &v);
        avg_nu += v;
      }
      if (!model.g_mu.zero()) {
        model.g_mu.eval(t, xj, aj, mu, nullptr, nullptr, &v);
        avg_gmu += v;
      }
    }
    avg_nu /= static_cast<double>(N);
    avg_gmu /= static_cast<double>(N);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double* xi = &X.data[s * N + i];
      const double* ai = &A.data[s * N + i];
      double fa = 0.0, gx = 0.0;
      model.f_a(t, xi, ai, mu, &fa);
      model.g_x(xi, mu, &gx);
      num += std::abs(fa + avg_nu + gx + avg_gmu);
      den += std::abs(fa) + std::abs(avg_nu) + std::abs(gx) + std::abs(avg_gmu);
    }
    rep.terminal_residual = num / std::max(den, 1e-300);
  }
  return rep;
}

ModelSpec terminal_cost_model(double gamma) {
  ModelSpec m;
  m.dx = m.da = m.dw = 1;
  m.sigma = {1.0};
  m.b = [](double, const double*, const double* a, const JointLaw&, double* out) {
    out[0] = a[0];
  };
  m.f = [](double, const double*, const double* a, const JointLaw&) {
    return 0.5 * a[0] * a[0];
  };
  m.g = [gamma](const double* x, const JointLaw&) { return 0.5 * gamma * x[0] * x[0]; };
  m.b_x = [](double, const double*, const double*, const JointLaw&, double* out) {
    out[0] = 0.0;
  };
  m.b_a = [](double, const double*, const double*, const JointLaw&, double* out) {
    out[0] = 1.0;
  };
  m.f_x = [](double, const double*, const double*, const JointLaw&, double* out) {
    out[0] = 0.0;
  };
  m.f_a = [](double, const double*, const double* a, const JointLaw&, double* out) {
    out[0] = a[0];
  };
  m.g_x = [gamma](const double* x, const JointLaw&, double* out) { out[0] = gamma * x[0]; };
  return m;
}

ParticleEnsemble simulate_terminal_cost_instance(double gamma, double T, double x0,
                                                 double delta, std::size_t N,
                                                 std::size_t steps, std::uint64_t seed) {
  if (!(gamma > 0.0) || !(T > 0.0)) throw std::invalid_argument("bad gamma or T");
  TimeGrid grid(T, steps);
  ParticleEnsemble ens(grid, N);
  Channel& X = ens.add("X", 1);
  Channel& A = ens.add("alpha", 1);

  auto eta = [gamma, T](double t) { return gamma / (1.0 + gamma * (T - t)); };
  // transition over [t0, t1] for drift (-eta(u) + delta) x:
  //   Phi = (1 + g(T-t1))/(1 + g(T-t0)) * exp(delta (t1-t0))
  //   var = int_t0^t1 Phi(u, t1)^2 du   (closed form when delta = 0)
  const std::size_t nsimp = 32;
  std::vector<double> Phi(steps), sd(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    double t0 = grid.t(s), t1 = grid.t(s + 1);
    double base = (1.0 + gamma * (T - t1)) / (1.0 + gamma * (T - t0));
    Phi[s] = base * std::exp(delta * (t1 - t0));
    double var;
    if (delta == 0.0) {
      double a1 = 1.0 + gamma * (T - t1), a0 = 1.0 + gamma * (T - t0);
      var = a1 * a1 / gamma * (1.0 / a1 - 1.0 / a0);
    } else {
      auto h = [&](double u) {
        double f = (1.0 + gamma * (T - t1)) / (1.0 + gamma * (T - u)) *
                   std::exp(delta * (t1 - u));
        return f * f;
      };
      double hstep = (t1 - t0) / static_cast<double>(nsimp);
      double acc = h(t0) + h(t1);
      for (std::size_t j = 1; j < nsimp; ++j)
        acc += (j % 2 == 1 ? 4.0 : 2.0) * h(t0 + hstep * static_cast<double>(j));
      var = acc * hstep / 3.0;
    }
    sd[s] = std::sqrt(var);
  }

  Prng root(seed);
  parallel_for(N, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      Prng rng = root.fork(i);
      double x = x0;
      X.at(0, i) = x;
      A.at(0, i) = (-eta(0.0) + delta) * x;
      for (std::size_t s = 0; s < steps; ++s) {
        x = Phi[s] * x + sd[s] * rng.next_normal();
        X.at(s + 1, i) = x;
        A.at(s + 1, i) = (-eta(grid.t(s + 1)) + delta) * x;
      }
    }
  });
  return ens;
}

}  // namespace mfcx
