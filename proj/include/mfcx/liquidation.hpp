#pragma once
#include <cstdint>
#include <functional>
#include <vector>

#include "mfcx/ensemble.hpp"
#include "mfcx/model.hpp"
#include "mfcx/rng.hpp"

namespace mfcx {

// Optimal execution with price impact through the mean trading rate:
//   dQ = alpha dt
//   dS = lambda*E[alpha] dt + sigma dW
// cost  E[ int (k alpha^2 + phi Q^2 + alpha S) dt - Q_T S_T + A Q_T^2 ].
// Well-posedness needs lambda in [0, 2A] and at least one of phi, A
// positive.
struct LiquidationParams {
  double k = 1.0;
  double phi = 0.0;
  double A = 1.0;
  double lambda = 0.0;
  double sigma = 0.0;
  double T = 1.0;
  double s0 = 0.0;
  void validate() const;
};

// Initial inventory distribution.
struct Q0Spec {
  enum class Kind { Constant, TwoPoint, Gaussian } kind = Kind::Constant;
  double value = 0.0;              // Constant
  double x1 = 0.0, p1 = 0.5, x2 = 0.0;  // TwoPoint: x1 w.p. p1, else x2
  double mu = 0.0, sd = 1.0;       // Gaussian

  static Q0Spec constant(double q0);
  static Q0Spec two_point(double x1, double p1, double x2);
  static Q0Spec gaussian(double mu, double sd);

  double mean() const;
  double sample(Prng& rng) const;
  void validate() const;
};

// Trading-rate policy: a function of (t, q0, E[q0]), a tabulated
// deterministic path applied to every particle, or an affine form
// c1(t) q0 + c2(t) Eq0. The affine form is what the optimum (and any
// rescaling of it) looks like; the simulator exploits it to take
// exact O(1) per-step means and to hoist the time coefficients out of
// the particle loop.
class Speed {
 public:
  Speed() = default;
  explicit Speed(std::function<double(double t, double q0, double Eq0)> fn)
      : fn_(std::move(fn)) {}
  static Speed tabulated(std::vector<double> values_at_nodes);
  static Speed affine(std::function<double(double)> coef_q0,
                      std::function<double(double)> coef_Eq0);

  double eval(double t, std::size_t node, double q0, double Eq0) const;
  bool is_tabulated() const { return !table_.empty(); }
  bool is_affine() const { return static_cast<bool>(c1_); }
  std::size_t table_nodes() const { return table_.size(); }
  double coef_q0(double t) const { return c1_(t); }
  double coef_Eq0(double t) const { return c2_(t); }

 private:
  std::function<double(double, double, double)> fn_;
  std::function<double(double)> c1_, c2_;
  std::vector<double> table_;
};

// Closed-form optimum. Both the optimal rate and the inventory are
// affine in (q0, E[q0]):
//   alpha(t) = A1(t) q0 + A2(t) Eq0,   Q(t) = B1(t) q0 + B2(t) Eq0.
// Coefficients are hyperbolic in r = sqrt(phi/k); the phi == 0 branch
// uses the analytic r -> 0 limits.
class LiquidationSolution {
 public:
  LiquidationSolution(const LiquidationParams& p, const Q0Spec& q0);

  const LiquidationParams& params() const { return params_; }
  double Eq0() const { return Eq0_; }
  double r() const { return r_; }

  double coefA1(double t) const;
  double coefA2(double t) const;
  double coefB1(double t) const;
  double coefB2(double t) const;

  double alpha(double t, double q0) const { return coefA1(t) * q0 + coefA2(t) * Eq0_; }
  double inventory(double t, double q0) const { return coefB1(t) * q0 + coefB2(t) * Eq0_; }
  double mean_alpha(double t) const { return (coefA1(t) + coefA2(t)) * Eq0_; }
  double mean_inventory(double t) const { return (coefB1(t) + coefB2(t)) * Eq0_; }

  // adjoint of Q at t=0 for a particle starting at q0 (FOC solved for it)
  double adjointQ0(double q0) const;

  Speed speed() const;

 private:
  LiquidationParams params_;
  double Eq0_;
  double r_, sk_;   // r = sqrt(phi/k), sk = sqrt(phi*k)
  double E1_, E2_;  // denominators at horizon T
};

struct LiquidationSim {
  ParticleEnsemble ens;          // channels X (Q,S), alpha, W
  std::vector<double> cost;      // per-particle realized cost
  double mean_cost = 0.0;
  double se_cost = 0.0;          // standard error of the mean
};

// Forward Euler on a uniform grid; per-particle noise streams are
// forked from `seed`, so results are independent of thread count and
// two runs with equal seeds are exactly reproducible.
//
// The integrator always runs at the full resolution `steps`; the
// ensemble keeps snapshots every `save_stride` steps (0 = pick the
// largest divisor of steps giving at most ~101 saved nodes) so that
// large-N runs stay within memory. Costs and the running inventory
// integral (channel "intQ", used by the adjoint reconstruction) are
// accumulated at full resolution.
LiquidationSim simulate_liquidation(const LiquidationParams& p, const Q0Spec& q0,
                                    const Speed& speed, std::size_t N,
                                    std::size_t steps, std::uint64_t seed,
                                    std::size_t save_stride = 0);

// Adds adjoint channels Y (dim 2, aligned with X) and Z (dim 2) built
// backward from Y_T = grad_x g; exact for rates that are deterministic
// given (q0, Eq0). Y[1] = -Q pathwise, Z = (-sigma, 0).
void attach_liquidation_adjoints(ParticleEnsemble& ens, const LiquidationParams& p);

// Generic-model view of the same dynamics, for the optimality checkers.
ModelSpec liquidation_model(const LiquidationParams& p);

}  // namespace mfcx
