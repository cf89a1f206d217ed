#include "mfcx/liquidation.hpp"

#include <cmath>
#include <stdexcept>

#include "mfcx/parallel.hpp"

namespace mfcx {

void LiquidationParams::validate() const {
  if (!(k > 0.0)) throw std::invalid_argument("liquidation: k must be positive");
  if (phi < 0.0) throw std::invalid_argument("liquidation: phi must be >= 0");
  if (A < 0.0) throw std::invalid_argument("liquidation: A must be >= 0");
  if (phi == 0.0 && A == 0.0)
    throw std::invalid_argument("liquidation: need phi > 0 or A > 0");
  if (lambda < 0.0 || lambda > 2.0 * A)
    throw std::invalid_argument("liquidation: lambda must lie in [0, 2A]");
  if (sigma < 0.0) throw std::invalid_argument("liquidation: sigma must be >= 0");
  if (!(T > 0.0)) throw std::invalid_argument("liquidation: T must be positive");
}

Q0Spec Q0Spec::constant(double q0) {
  Q0Spec s;
  s.kind = Kind::Constant;
  s.value = q0;
  return s;
}

Q0Spec Q0Spec::two_point(double x1, double p1, double x2) {
  Q0Spec s;
  s.kind = Kind::TwoPoint;
  s.x1 = x1;
  s.p1 = p1;
  s.x2 = x2;
  return s;
}

Q0Spec Q0Spec::gaussian(double mu, double sd) {
  Q0Spec s;
  s.kind = Kind::Gaussian;
  s.mu = mu;
  s.sd = sd;
  return s;
}

void Q0Spec::validate() const {
  if (kind == Kind::TwoPoint && (p1 < 0.0 || p1 > 1.0))
    throw std::invalid_argument("q0: two_point probability outside [0,1]");
  if (kind == Kind::Gaussian && sd < 0.0)
    throw std::invalid_argument("q0: gaussian sd must be >= 0");
}

double Q0Spec::mean() const {
  switch (kind) {
    case Kind::Constant: return value;
    case Kind::TwoPoint: return p1 * x1 + (1.0 - p1) * x2;
    case Kind::Gaussian: return mu;
  }
  return 0.0;
}

double Q0Spec::sample(Prng& rng) const {
  switch (kind) {
    case Kind::Constant: return value;
    case Kind::TwoPoint: return rng.next_uniform() < p1 ? x1 : x2;
    case Kind::Gaussian: return mu + sd * rng.next_normal();
  }
  return 0.0;
}

Speed Speed::tabulated(std::vector<double> values_at_nodes) {
  Speed s;
  s.table_ = std::move(values_at_nodes);
  return s;
}

Speed Speed::affine(std::function<double(double)> coef_q0,
                    std::function<double(double)> coef_Eq0) {
  Speed s;
  s.c1_ = std::move(coef_q0);
  s.c2_ = std::move(coef_Eq0);
  return s;
}

double Speed::eval(double t, std::size_t node, double q0, double Eq0) const {
  if (!table_.empty()) {
    if (node >= table_.size()) throw std::out_of_range("Speed: node beyond table");
    return table_[node];
  }
  if (c1_) return c1_(t) * q0 + c2_(t) * Eq0;
  if (!fn_) throw std::logic_error("Speed: empty policy");
  return fn_(t, q0, Eq0);
}

LiquidationSolution::LiquidationSolution(const LiquidationParams& p, const Q0Spec& q0)
    : params_(p), Eq0_(q0.mean()) {
  p.validate();
  q0.validate();
  r_ = std::sqrt(p.phi / p.k);
  sk_ = std::sqrt(p.phi * p.k);
  if (p.phi > 0.0) {
    E1_ = sk_ * std::cosh(r_ * p.T) + p.A * std::sinh(r_ * p.T);
    E2_ = 2.0 * sk_ * std::cosh(r_ * p.T) + (2.0 * p.A - p.lambda) * std::sinh(r_ * p.T);
  } else {
    // r -> 0 limits of E1/r and E2/r; divided out of the coefficients
    E1_ = p.k + p.A * p.T;
    E2_ = 2.0 * p.k + (2.0 * p.A - p.lambda) * p.T;
  }
}

double LiquidationSolution::coefB1(double t) const {
  const auto& p = params_;
  if (p.phi == 0.0) return (p.k + p.A * (p.T - t)) / E1_;
  return (sk_ * std::cosh(r_ * (p.T - t)) + p.A * std::sinh(r_ * (p.T - t))) / E1_;
}

double LiquidationSolution::coefA1(double t) const {
  const auto& p = params_;
  if (p.phi == 0.0) return -p.A / E1_;
  return -r_ * (sk_ * std::sinh(r_ * (p.T - t)) + p.A * std::cosh(r_ * (p.T - t))) / E1_;
}

double LiquidationSolution::coefB2(double t) const {
  const auto& p = params_;
  if (p.phi == 0.0) return p.lambda * p.k * t / (E1_ * E2_);
  return p.lambda * sk_ * std::sinh(r_ * t) / (E1_ * E2_);
}

double LiquidationSolution::coefA2(double t) const {
  const auto& p = params_;
  if (p.phi == 0.0) return p.lambda * p.k / (E1_ * E2_);
  return p.lambda * p.phi * std::cosh(r_ * t) / (E1_ * E2_);
}

double LiquidationSolution::adjointQ0(double q0) const {
  // stationarity at t=0: Y_Q + s0 + 2k alpha_0 - lambda Eq0 = 0
  return params_.lambda * Eq0_ - params_.s0 - 2.0 * params_.k * alpha(0.0, q0);
}

Speed LiquidationSolution::speed() const {
  LiquidationSolution copy = *this;
  return Speed::affine([copy](double t) { return copy.coefA1(t); },
                       [copy](double t) { return copy.coefA2(t); });
}

LiquidationSim simulate_liquidation(const LiquidationParams& p, const Q0Spec& q0spec,
                                    const Speed& speed, std::size_t N,
                                    std::size_t steps, std::uint64_t seed,
                                    std::size_t save_stride) {
  p.validate();
  q0spec.validate();
  if (N == 0) throw std::invalid_argument("simulate_liquidation: N must be >= 1");
  if (save_stride == 0) save_stride = pick_save_stride(steps);
  if (steps % save_stride != 0)
    throw std::invalid_argument("simulate_liquidation: save_stride must divide steps");
  TimeGrid fine(p.T, steps);
  TimeGrid coarse(p.T, steps / save_stride);
  if (speed.is_tabulated() && speed.table_nodes() != fine.nodes())
    throw std::invalid_argument("simulate_liquidation: tabulated speed length != fine nodes");

  LiquidationSim sim{ParticleEnsemble(coarse, N), std::vector<double>(N, 0.0)};
  Channel& X = sim.ens.add("X", 2);
  Channel& Al = sim.ens.add("alpha", 1);
  Channel& Wc = sim.ens.add("W", 1);
  Channel& IQ = sim.ens.add("intQ", 1);  // int_0^t Q ds, fine trapezoid

  const double Eq0 = q0spec.mean();
  const double dt = fine.dt();
  const double sqdt = std::sqrt(dt);
  Prng root(seed);

  std::vector<double> q0(N);
  parallel_for(N, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      Prng rng = root.fork(i);
      q0[i] = q0spec.sample(rng);
    }
  });
  double q0bar = 0.0;
  for (double v : q0) q0bar += v;
  q0bar /= static_cast<double>(N);

  // Affine policies: hoist the time coefficients out of the particle
  // loop so the hot path is two fused multiplies per rate.
  std::vector<double> a1s, a2s;
  if (speed.is_affine()) {
    a1s.resize(fine.nodes());
    a2s.resize(fine.nodes());
    for (std::size_t s = 0; s < fine.nodes(); ++s) {
      a1s[s] = speed.coef_q0(fine.t(s));
      a2s[s] = speed.coef_Eq0(fine.t(s));
    }
  }
  auto rate = [&](std::size_t s, std::size_t i) {
    if (!a1s.empty()) return a1s[s] * q0[i] + a2s[s] * Eq0;
    return speed.eval(fine.t(s), s, q0[i], Eq0);
  };

  // The mean rate couples particles through the S drift but never
  // depends on the realized state, so the whole schedule is computable
  // up front, at fine resolution, as a sequential reduction.
  std::vector<double> mean_rate(fine.nodes(), 0.0);
  if (!a1s.empty()) {
    for (std::size_t s = 0; s < fine.nodes(); ++s)
      mean_rate[s] = a1s[s] * q0bar + a2s[s] * Eq0;
  } else {
    parallel_for(fine.nodes(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t s = lo; s < hi; ++s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i) acc += rate(s, i);
        mean_rate[s] = acc / static_cast<double>(N);
      }
    });
  }

  parallel_for(N, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      Prng rng = root.fork(i);
      (void)q0spec.sample(rng);  // skip the q0 draw to realign the stream
      double Q = q0[i], S = p.s0, Wv = 0.0, intq = 0.0, run = 0.0;
      auto snapshot = [&](std::size_t s) {
        std::size_t node = s / save_stride;
        X.at(node, i, 0) = Q;
        X.at(node, i, 1) = S;
        Al.at(node, i) = rate(s, i);
        Wc.at(node, i) = Wv;
        IQ.at(node, i) = intq;
      };
      snapshot(0);
      for (std::size_t s = 0; s < steps; ++s) {
        double a = rate(s, i);
        double h = p.k * a * a + p.phi * Q * Q + a * S;
        run += (s == 0) ? 0.5 * h : h;
        double dW = sqdt * rng.next_normal();
        double Qn = Q + a * dt;
        S += p.lambda * mean_rate[s] * dt + p.sigma * dW;
        Wv += dW;
        intq += 0.5 * dt * (Q + Qn);
        Q = Qn;
        if ((s + 1) % save_stride == 0) snapshot(s + 1);
      }
      double aT = rate(steps, i);
      run += 0.5 * (p.k * aT * aT + p.phi * Q * Q + aT * S);
      sim.cost[i] = run * dt - Q * S + p.A * Q * Q;
    }
  });

  double m = 0.0;
  for (double c : sim.cost) m += c;
  m /= static_cast<double>(N);
  double v = 0.0;
  for (double c : sim.cost) v += (c - m) * (c - m);
  sim.mean_cost = m;
  sim.se_cost = N > 1 ? std::sqrt(v / (static_cast<double>(N) * (static_cast<double>(N) - 1)))
                      : 0.0;
  return sim;
}

void attach_liquidation_adjoints(ParticleEnsemble& ens, const LiquidationParams& p) {
  const Channel& X = ens["X"];
  const Channel& W = ens["W"];
  const bool have_intq = ens.has("intQ");
  const Channel* IQ = have_intq ? &ens["intQ"] : nullptr;
  const std::size_t nodes = ens.grid().nodes();
  const std::size_t last = nodes - 1;
  const double dt = ens.grid().dt();
  Channel& Y = ens.add("Y", 2);
  Channel& Z = ens.add("Z", 2);

  parallel_for(ens.N(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double QT = X.at(last, i, 0), ST = X.at(last, i, 1), WT = W.at(last, i);
      // Y[0] adjoint of Q: terminal grad_Q g = 2AQ_T - S_T, then
      // Y0(t) = Y0(T) + 2 phi int_t^T Q ds + sigma (W_T - W_t)
      double yT = 2.0 * p.A * QT - ST;
      double itq = 0.0;  // trapezoid of Q over [t, T], accumulated backward
      for (std::size_t s = nodes; s-- > 0;) {
        if (have_intq)
          itq = IQ->at(last, i) - IQ->at(s, i);
        else if (s < last)
          itq += 0.5 * dt * (X.at(s, i, 0) + X.at(s + 1, i, 0));
        Y.at(s, i, 0) = yT + 2.0 * p.phi * itq + p.sigma * (WT - W.at(s, i));
        Y.at(s, i, 1) = -X.at(s, i, 0);
        Z.at(s, i, 0) = -p.sigma;
        Z.at(s, i, 1) = 0.0;
      }
    }
  });
}

ModelSpec liquidation_model(const LiquidationParams& p) {
  p.validate();
  ModelSpec m;
  m.dx = 2;
  m.da = 1;
  m.dw = 1;
  m.sigma = {0.0, p.sigma};
  const double k = p.k, phi = p.phi, A = p.A, lam = p.lambda;

  m.b = [lam](double, const double*, const double* a, const JointLaw& mu, double* out) {
    out[0] = a[0];
    out[1] = lam * mu.abar[0];
  };
  m.f = [k, phi](double, const double* x, const double* a, const JointLaw&) {
    return k * a[0] * a[0] + phi * x[0] * x[0] + a[0] * x[1];
  };
  m.g = [A](const double* x, const JointLaw&) {
    return A * x[0] * x[0] - x[0] * x[1];
  };
  m.b_x = [](double, const double*, const double*, const JointLaw&, double* out) {
    out[0] = out[1] = out[2] = out[3] = 0.0;
  };
  m.b_a = [](double, const double*, const double*, const JointLaw&, double* out) {
    out[0] = 1.0;
    out[1] = 0.0;
  };
  m.f_x = [phi](double, const double* x, const double* a, const JointLaw&, double* out) {
    out[0] = 2.0 * phi * x[0];
    out[1] = a[0];
  };
  m.f_a = [k](double, const double* x, const double* a, const JointLaw&, double* out) {
    out[0] = 2.0 * k * a[0] + x[1];
  };
  m.g_x = [A](const double* x, const JointLaw&, double* out) {
    out[0] = 2.0 * A * x[0] - x[1];
    out[1] = -x[0];
  };
  // only the S drift sees the law, through the mean rate
  m.b_nu = MeasureKernel(
      [lam](double, const double*, const double*, const JointLaw&, const double*,
            const double*, double* out) {
        out[0] = 0.0;
        out[1] = lam;
      },
      2, true);
  return m;
}

}  // namespace mfcx
