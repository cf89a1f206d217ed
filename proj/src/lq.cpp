#include "mfcx/lq.hpp"

#include <cmath>
#include <string>

#include "mfcx/parallel.hpp"
#include "mfcx/rng.hpp"

namespace mfcx {

void LQParams::validate() const {
  if (!(q > 0.0) || !(r > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("lq: q, r, gamma must be positive");
  if (qbar < 0.0 || rbar < 0.0 || gammabar < 0.0)
    throw std::invalid_argument("lq: qbar, rbar, gammabar must be >= 0");
  if (!(T > 0.0)) throw std::invalid_argument("lq: T must be positive");
}

LQCoefficients abc_coefficients(const LQParams& p) {
  p.validate();
  const double den = p.r + p.rbar;
  const double den2 = p.r + p.rbar * (p.sbar - 1.0) * (p.sbar - 1.0);
  LQCoefficients co;
  co.a = -p.b2 / den;
  co.c = -(p.b2 + p.bbar2) / den2;
  co.b = -(p.bbar2 - p.rbar * p.sbar * (p.sbar - 2.0) * (p.b2 + p.bbar2) / den2) / den;
  return co;
}

RiccatiConstants mean_riccati_constants(const LQParams& p, const LQCoefficients& co) {
  RiccatiConstants c;
  c.A = -(p.b1 + p.bbar1);
  c.B = -(co.a * p.b2 + co.b * p.b2 + co.c * p.bbar2);
  c.C = -(p.q + p.qbar + p.s * p.qbar * (p.s - 2.0));
  c.K = p.gamma + p.gammabar + p.gammabar * p.rho * (p.rho - 2.0);
  return c;
}

RiccatiBlowup::RiccatiBlowup(const char* which, double t)
    : std::runtime_error(std::string("riccati blow-up in ") + which +
                         " at t = " + std::to_string(t)),
      crossing_time(t) {}

RiccatiClosedForm RiccatiClosedForm::solve(const RiccatiConstants& c, double T) {
  RiccatiClosedForm r;
  r.con_ = c;
  r.T_ = T;
  if (c.B == 0.0) {
    r.branch_ = Branch::Linear;
    return r;  // linear equation never escapes in finite time
  }
  const double delta = c.A * c.A - c.B * c.C;
  const double scale = std::max(c.A * c.A, std::abs(c.B * c.C));
  if (std::abs(delta) <= 1e-12 * std::max(scale, 1e-12)) {
    r.branch_ = Branch::DoubleRoot;
    r.c1_ = 1.0;
    r.c2_ = -c.B * c.K - c.A;
  } else if (delta > 0.0) {
    r.branch_ = Branch::RealRoots;
    const double sq = std::sqrt(delta);
    r.mu_p_ = c.A + sq;
    r.mu_m_ = c.A - sq;
    r.c1_ = (-c.B * c.K - r.mu_m_) / (2.0 * sq);
    r.c2_ = 1.0 - r.c1_;
  } else {
    r.branch_ = Branch::Oscillatory;
    r.omega_ = std::sqrt(-delta);
    r.c1_ = 1.0;
    r.c2_ = (-c.B * c.K - c.A) / r.omega_;
  }
  r.check_no_root();
  return r;
}

double RiccatiClosedForm::z(double t) const {
  const double tau = t - T_;
  switch (branch_) {
    case Branch::Linear:
      throw std::logic_error("RiccatiClosedForm: no z for the linear branch");
    case Branch::RealRoots:
      return c1_ * std::exp(mu_p_ * tau) + c2_ * std::exp(mu_m_ * tau);
    case Branch::DoubleRoot:
      return (c1_ + c2_ * tau) * std::exp(con_.A * tau);
    case Branch::Oscillatory:
      return std::exp(con_.A * tau) *
             (c1_ * std::cos(omega_ * tau) + c2_ * std::sin(omega_ * tau));
  }
  return 0.0;
}

double RiccatiClosedForm::zdot(double t) const {
  const double tau = t - T_;
  switch (branch_) {
    case Branch::Linear:
      throw std::logic_error("RiccatiClosedForm: no z for the linear branch");
    case Branch::RealRoots:
      return mu_p_ * c1_ * std::exp(mu_p_ * tau) + mu_m_ * c2_ * std::exp(mu_m_ * tau);
    case Branch::DoubleRoot:
      return (c2_ + con_.A * (c1_ + c2_ * tau)) * std::exp(con_.A * tau);
    case Branch::Oscillatory:
      return std::exp(con_.A * tau) *
             ((con_.A * c1_ + omega_ * c2_) * std::cos(omega_ * tau) +
              (con_.A * c2_ - omega_ * c1_) * std::sin(omega_ * tau));
  }
  return 0.0;
}

double RiccatiClosedForm::eta(double t) const {
  if (branch_ == Branch::Linear) {
    const double tau = t - T_;
    if (con_.A == 0.0) return con_.K + con_.C * tau;
    const double shift = con_.C / (2.0 * con_.A);
    return (con_.K + shift) * std::exp(2.0 * con_.A * tau) - shift;
  }
  return -zdot(t) / (con_.B * z(t));
}

void RiccatiClosedForm::check_no_root() const {
  // z(T) = 1; scan backward for the sign change nearest T, then bisect
  const int n = 20000;
  double prev_t = T_, prev_z = 1.0;
  for (int j = 1; j <= n; ++j) {
    double t = T_ * (1.0 - static_cast<double>(j) / n);
    double zt = z(t);
    if (zt == 0.0) throw RiccatiBlowup("mean adjoint equation", t);
    if ((zt < 0.0) != (prev_z < 0.0)) {
      double lo = t, hi = prev_t;  // root in (lo, hi)
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        if ((z(mid) < 0.0) == (zt < 0.0)) lo = mid;
        else hi = mid;
      }
      throw RiccatiBlowup("mean adjoint equation", 0.5 * (lo + hi));
    }
    prev_t = t;
    prev_z = zt;
  }
}

GridFn::GridFn(double T, std::vector<double> values) : T_(T), v_(std::move(values)) {
  if (v_.size() < 2) throw std::invalid_argument("GridFn: need at least 2 values");
  if (!(T > 0.0)) throw std::invalid_argument("GridFn: T must be positive");
}

double GridFn::operator()(double t) const {
  const double h = T_ / static_cast<double>(v_.size() - 1);
  if (t <= 0.0) return v_.front();
  if (t >= T_) return v_.back();
  double u = t / h;
  std::size_t j = static_cast<std::size_t>(u);
  if (j >= v_.size() - 1) j = v_.size() - 2;
  double w = u - static_cast<double>(j);
  return (1.0 - w) * v_[j] + w * v_[j + 1];
}

namespace {

// one classical RK4 step of size h (h < 0 integrates backward)
template <class F>
double rk4_step(const F& f, double t, double y, double h) {
  double k1 = f(t, y);
  double k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
  double k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
  double k4 = f(t + h, y + h * k3);
  return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

LQSolution solve_lq(const LQParams& p, std::size_t ode_steps) {
  p.validate();
  if (ode_steps < 2) throw std::invalid_argument("solve_lq: ode_steps too small");
  LQSolution sol;
  sol.params = p;
  sol.coeffs = abc_coefficients(p);
  sol.mean_constants = mean_riccati_constants(p, sol.coeffs);
  sol.zform = RiccatiClosedForm::solve(sol.mean_constants, p.T);

  const std::size_t M = ode_steps;
  const std::size_t H = 2 * M;  // half-step resolution
  const double h2 = p.T / static_cast<double>(H);

  std::vector<double> etabar_v(H + 1);
  for (std::size_t j = 0; j <= H; ++j)
    etabar_v[j] = sol.zform.eta(p.T * static_cast<double>(j) / static_cast<double>(H));
  sol.eta_bar = GridFn(p.T, std::move(etabar_v));

  // own-adjoint Riccati, autonomous, backward from eta(T) = gamma+gammabar
  const double ab2 = sol.coeffs.a * p.b2;
  const double qq = p.q + p.qbar;
  auto eta_rhs = [&](double, double e) { return -2.0 * p.b1 * e - ab2 * e * e - qq; };
  std::vector<double> eta_v(H + 1);
  eta_v[H] = p.gamma + p.gammabar;
  for (std::size_t j = H; j-- > 0;) {
    double t1 = p.T * static_cast<double>(j + 1) / static_cast<double>(H);
    eta_v[j] = rk4_step(eta_rhs, t1, eta_v[j + 1], -h2);
    if (!std::isfinite(eta_v[j]) || std::abs(eta_v[j]) > 1e12)
      throw RiccatiBlowup("adjoint equation", p.T * static_cast<double>(j) / H);
  }
  sol.eta = GridFn(p.T, eta_v);

  // mean flow, forward, driven by the closed-form mean Riccati solution
  const double B = sol.mean_constants.B;
  auto xbar_rhs = [&](double t, double x) {
    return ((p.b1 + p.bbar1) - B * sol.zform.eta(t)) * x;
  };
  std::vector<double> xbar_v(H + 1), ybar_v(H + 1);
  xbar_v[0] = p.x0;
  for (std::size_t j = 0; j < H; ++j) {
    double t0 = p.T * static_cast<double>(j) / static_cast<double>(H);
    xbar_v[j + 1] = rk4_step(xbar_rhs, t0, xbar_v[j], h2);
  }
  for (std::size_t j = 0; j <= H; ++j) ybar_v[j] = sol.eta_bar.at(j) * xbar_v[j];
  sol.xbar = GridFn(p.T, xbar_v);
  sol.ybar = GridFn(p.T, std::move(ybar_v));

  // mean-offset of Y = eta X + chi: linear, backward, coefficients
  // matched against the adjoint drift; validated by the residual tests
  const double bb2cb2 = sol.coeffs.b * p.b2 + sol.coeffs.c * p.bbar2;
  const double qss = p.qbar * p.s * (p.s - 2.0);
  auto chi_rhs = [&](double t, double chi) {
    double e = sol.eta(t), eb = sol.eta_bar(t), xb = sol.xbar(t);
    return -(p.b1 + ab2 * e) * chi - (e * p.bbar1 + e * bb2cb2 * eb + p.bbar1 * eb + qss) * xb;
  };
  std::vector<double> chi_v(M + 1);
  chi_v[M] = p.gammabar * p.rho * (p.rho - 2.0) * xbar_v[H];
  const double h = p.T / static_cast<double>(M);
  for (std::size_t i = M; i-- > 0;) {
    double t1 = p.T * static_cast<double>(i + 1) / static_cast<double>(M);
    chi_v[i] = rk4_step(chi_rhs, t1, chi_v[i + 1], -h);
  }
  sol.chi = GridFn(p.T, std::move(chi_v));
  return sol;
}

double LQSolution::feedback(double t, double x, double xbar_emp) const {
  return coeffs.a * eta(t) * x + coeffs.a * chi(t) + coeffs.b * eta_bar(t) * xbar_emp;
}

namespace {

LQSim run_lq_sim(const LQParams& p,
                 const std::function<double(double, double, double)>& feedback,
                 std::size_t N, std::size_t steps, std::uint64_t seed) {
  p.validate();
  if (N < 2) throw std::invalid_argument("simulate_lq: N must be >= 2");
  std::size_t stride = pick_save_stride(steps);
  TimeGrid fine(p.T, steps);
  TimeGrid coarse(p.T, steps / stride);
  LQSim sim{ParticleEnsemble(coarse, N)};
  Channel& Xc = sim.ens.add("X", 1);
  Channel& Ac = sim.ens.add("alpha", 1);
  Channel& Wc = sim.ens.add("W", 1);

  const double dt = fine.dt();
  const double sqdt = std::sqrt(dt);
  Prng root(seed);

  std::vector<double> X(N, p.x0), Wv(N, 0.0), alpha(N, 0.0), cost(N, 0.0);
  std::vector<double> dW(N);
  // one Prng per particle, advanced step by step to keep the stream
  // assignment independent of scheduling
  std::vector<Prng> rngs;
  rngs.reserve(N);
  for (std::size_t i = 0; i < N; ++i) rngs.push_back(root.fork(i));

  for (std::size_t s = 0; s <= steps; ++s) {
    const double t = fine.t(s);
    double xbar = 0.0;
    for (double v : X) xbar += v;
    xbar /= static_cast<double>(N);

    parallel_for(N, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) alpha[i] = feedback(t, X[i], xbar);
    });
    double abar = 0.0;
    for (double v : alpha) abar += v;
    abar /= static_cast<double>(N);

    const double wcost = (s == 0 || s == steps) ? 0.5 : 1.0;
    parallel_for(N, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        double dx = X[i] - p.s * xbar;
        double da = alpha[i] - p.sbar * abar;
        double f = 0.5 * (p.q * X[i] * X[i] + p.qbar * dx * dx + p.r * alpha[i] * alpha[i] +
                          p.rbar * da * da);
        cost[i] += wcost * f * dt;
      }
    });

    if (s % stride == 0) {
      std::size_t node = s / stride;
      parallel_for(N, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          Xc.at(node, i) = X[i];
          Ac.at(node, i) = alpha[i];
          Wc.at(node, i) = Wv[i];
        }
      });
    }
    if (s == steps) break;

    parallel_for(N, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) dW[i] = sqdt * rngs[i].next_normal();
    });
    parallel_for(N, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        X[i] += (p.b1 * X[i] + p.b2 * alpha[i] + p.bbar1 * xbar + p.bbar2 * abar) * dt + dW[i];
        Wv[i] += dW[i];
      }
    });
  }

  double xbarT = 0.0;
  for (double v : X) xbarT += v;
  xbarT /= static_cast<double>(N);
  for (std::size_t i = 0; i < N; ++i) {
    double dx = X[i] - p.rho * xbarT;
    cost[i] += 0.5 * (p.gamma * X[i] * X[i] + p.gammabar * dx * dx);
  }

  double m = 0.0;
  for (double c : cost) m += c;
  m /= static_cast<double>(N);
  double v = 0.0;
  for (double c : cost) v += (c - m) * (c - m);
  sim.cost = m;
  sim.se_cost = std::sqrt(v / (static_cast<double>(N) * (static_cast<double>(N) - 1)));
  return sim;
}

}  // namespace

LQSim simulate_lq(const LQParams& p, const LQSolution& sol, std::size_t N,
                  std::size_t steps, std::uint64_t seed) {
  return run_lq_sim(
      p, [&sol](double t, double x, double xb) { return sol.feedback(t, x, xb); }, N,
      steps, seed);
}

LQSim simulate_lq_feedback(const LQParams& p,
                           const std::function<double(double, double, double)>& feedback,
                           std::size_t N, std::size_t steps, std::uint64_t seed) {
  return run_lq_sim(p, feedback, N, steps, seed);
}

void attach_lq_adjoints(ParticleEnsemble& ens, const LQSolution& sol) {
  const Channel& X = ens["X"];
  Channel& Y = ens.add("Y", 1);
  Channel& Z = ens.add("Z", 1);
  const std::size_t nodes = ens.grid().nodes();
  for (std::size_t s = 0; s < nodes; ++s) {
    double t = ens.grid().t(s);
    double e = sol.eta(t), c = sol.chi(t);
    for (std::size_t i = 0; i < ens.N(); ++i) {
      Y.at(s, i) = e * X.at(s, i) + c;
      Z.at(s, i) = e;  // sigma = 1
    }
  }
}

namespace {

ResidualStats residual_from(const ParticleEnsemble& ens,
                            const std::function<double(double y, double ybar, double a,
                                                       double abar)>& res,
                            const std::function<double(double y, double ybar, double a,
                                                       double abar)>& mag) {
  const Channel& Y = ens["Y"];
  const Channel& A = ens["alpha"];
  const std::size_t nodes = ens.grid().nodes();
  const std::size_t N = ens.N();
  ResidualStats st;
  st.per_time_max.resize(nodes);
  st.per_time_mean.resize(nodes);
  double scale_acc = 0.0;
  for (std::size_t s = 0; s < nodes; ++s) {
    double ybar = Y.mean(s), abar = A.mean(s);
    double mx = 0.0, mn = 0.0, sc = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < N; ++i) {
      double rv = std::abs(res(Y.at(s, i), ybar, A.at(s, i), abar));
      sc += mag(Y.at(s, i), ybar, A.at(s, i), abar);
      mn += rv;
      if (rv > mx) {
        mx = rv;
        worst = i;
      }
    }
    sc = std::max(sc / static_cast<double>(N), 1e-300);
    st.per_time_max[s] = mx / sc;
    st.per_time_mean[s] = mn / static_cast<double>(N) / sc;
    scale_acc += sc;
    if (st.per_time_max[s] > st.max_abs) {
      st.max_abs = st.per_time_max[s];
      st.worst_time = s;
      st.worst_particle = worst;
    }
    st.mean_abs += st.per_time_mean[s];
  }
  st.mean_abs /= static_cast<double>(nodes);
  st.scale = scale_acc / static_cast<double>(nodes);
  return st;
}

}  // namespace

ResidualStats lq_stationarity_residual(const ParticleEnsemble& ens, const LQParams& p,
                                       const LQSolution&) {
  const double rss = p.rbar * p.sbar * (p.sbar - 2.0);
  return residual_from(
      ens,
      [&](double y, double yb, double a, double ab) {
        return p.b2 * y + p.bbar2 * yb + (p.r + p.rbar) * a + rss * ab;
      },
      [&](double y, double yb, double a, double ab) {
        return std::abs(p.b2 * y) + std::abs(p.bbar2 * yb) + std::abs((p.r + p.rbar) * a) +
               std::abs(rss * ab);
      });
}

ResidualStats lq_pointwise_residual(const ParticleEnsemble& ens, const LQParams& p,
                                    const LQSolution&) {
  const double rss = p.rbar * p.sbar * (p.sbar - 2.0);
  return residual_from(
      ens,
      [&](double y, double, double a, double ab) {
        return p.b2 * y + p.r * a + p.rbar * (a - p.sbar * ab);
      },
      [&](double y, double yb, double a, double ab) {
        // same normalization as the extended condition so the two
        // residuals are directly comparable
        return std::abs(p.b2 * y) + std::abs(p.bbar2 * yb) + std::abs((p.r + p.rbar) * a) +
               std::abs(rss * ab);
      });
}

ModelSpec lq_model(const LQParams& p) {
  p.validate();
  ModelSpec m;
  m.dx = m.da = m.dw = 1;
  m.sigma = {1.0};
  m.b = [p](double, const double* x, const double* a, const JointLaw& mu, double* out) {
    out[0] = p.b1 * x[0] + p.b2 * a[0] + p.bbar1 * mu.xbar[0] + p.bbar2 * mu.abar[0];
  };
  m.f = [p](double, const double* x, const double* a, const JointLaw& mu) {
    double dx = x[0] - p.s * mu.xbar[0];
    double da = a[0] - p.sbar * mu.abar[0];
    return 0.5 * (p.q * x[0] * x[0] + p.qbar * dx * dx + p.r * a[0] * a[0] + p.rbar * da * da);
  };
  m.g = [p](const double* x, const JointLaw& mu) {
    double dx = x[0] - p.rho * mu.xbar[0];
    return 0.5 * (p.gamma * x[0] * x[0] + p.gammabar * dx * dx);
  };
  m.b_x = [p](double, const double*, const double*, const JointLaw&, double* out) {
    out[0] = p.b1;
  };
  m.b_a = [p](double, const double*, const double*, const JointLaw&, double* out) {
    out[0] = p.b2;
  };
  m.f_x = [p](double, const double* x, const double*, const JointLaw& mu, double* out) {
    out[0] = p.q * x[0] + p.qbar * (x[0] - p.s * mu.xbar[0]);
  };
  m.f_a = [p](double, const double*, const double* a, const JointLaw& mu, double* out) {
    out[0] = p.r * a[0] + p.rbar * (a[0] - p.sbar * mu.abar[0]);
  };
  m.g_x = [p](const double* x, const JointLaw& mu, double* out) {
    out[0] = p.gamma * x[0] + p.gammabar * (x[0] - p.rho * mu.xbar[0]);
  };
  m.b_mu = MeasureKernel(
      [p](double, const double*, const double*, const JointLaw&, const double*,
          const double*, double* out) { out[0] = p.bbar1; },
      1, true);
  m.b_nu = MeasureKernel(
      [p](double, const double*, const double*, const JointLaw&, const double*,
          const double*, double* out) { out[0] = p.bbar2; },
      1, true);
  m.f_mu = MeasureKernel(
      [p](double, const double* x, const double*, const JointLaw& mu, const double*,
          const double*, double* out) {
        out[0] = -p.s * p.qbar * (x[0] - p.s * mu.xbar[0]);
      },
      1, true);
  m.f_nu = MeasureKernel(
      [p](double, const double*, const double* a, const JointLaw& mu, const double*,
          const double*, double* out) {
        out[0] = -p.sbar * p.rbar * (a[0] - p.sbar * mu.abar[0]);
      },
      1, true);
  m.g_mu = MeasureKernel(
      [p](double, const double* x, const double*, const JointLaw& mu, const double*,
          const double*, double* out) {
        out[0] = -p.rho * p.gammabar * (x[0] - p.rho * mu.xbar[0]);
      },
      1, true);
  return m;
}

}  // namespace mfcx
