#pragma once
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mfcx/ensemble.hpp"
#include "mfcx/model.hpp"

namespace mfcx {

// Scalar linear-quadratic model with mean interactions in both state
// and control:
//   dX = (b1 X + b2 a + bbar1 E[X] + bbar2 E[a]) dt + dW
//   f  = 1/2 [ q X^2 + qbar (X - s E[X])^2 + r a^2 + rbar (a - sbar E[a])^2 ]
//   g  = 1/2 [ gamma X^2 + gammabar (X - rho E[X])^2 ]
struct LQParams {
  double b1 = 0.0, b2 = 1.0, bbar1 = 0.0, bbar2 = 0.0;
  double q = 1.0, qbar = 0.0, r = 1.0, rbar = 0.0;
  double s = 0.0, sbar = 0.0;
  double gamma = 1.0, gammabar = 0.0, rho = 0.0;
  double T = 1.0;
  double x0 = 0.0;
  void validate() const;
};

// Feedback weights: the stationarity condition solved for the rate
// gives a = rate per unit of own adjoint, b = per unit of mean
// adjoint; c = a + b closes the mean dynamics.
struct LQCoefficients {
  double a = 0.0, b = 0.0, c = 0.0;
};

LQCoefficients abc_coefficients(const LQParams& p);

struct RiccatiConstants {
  double A = 0.0, B = 0.0, C = 0.0, K = 0.0;
};

// Constants of the mean-adjoint Riccati equation
//   etabar' = 2A etabar + B etabar^2 + C,  etabar(T) = K.
RiccatiConstants mean_riccati_constants(const LQParams& p, const LQCoefficients& co);

// Thrown when a Riccati solution escapes to infinity inside [0, T].
struct RiccatiBlowup : std::runtime_error {
  RiccatiBlowup(const char* which, double t);
  double crossing_time;
};

// Closed form via the substitution etabar = -zdot/(B z), which turns
// the Riccati equation into zddot - 2A zdot + BC z = 0 with z(T) = 1,
// zdot(T) = -BK. Three branches by the sign of A^2 - BC, plus the
// linear equation when B = 0. Blow-up = z crossing zero in [0, T].
class RiccatiClosedForm {
 public:
  enum class Branch { Linear, RealRoots, DoubleRoot, Oscillatory };

  // throws RiccatiBlowup when z has a root in [0, T]
  static RiccatiClosedForm solve(const RiccatiConstants& c, double T);

  Branch branch() const { return branch_; }
  double z(double t) const;
  double zdot(double t) const;
  double eta(double t) const;  // the Riccati solution itself
  const RiccatiConstants& constants() const { return con_; }

 private:
  RiccatiConstants con_;
  double T_ = 1.0;
  Branch branch_ = Branch::Linear;
  double mu_p_ = 0.0, mu_m_ = 0.0, omega_ = 0.0;
  double c1_ = 0.0, c2_ = 0.0;
  void check_no_root() const;
};

// Function tabulated on a uniform grid over [0, T], evaluated by
// clamped linear interpolation.
class GridFn {
 public:
  GridFn() = default;
  GridFn(double T, std::vector<double> values);
  double operator()(double t) const;
  std::size_t nodes() const { return v_.size(); }
  double at(std::size_t i) const { return v_[i]; }
  double T() const { return T_; }

 private:
  double T_ = 0.0;
  std::vector<double> v_;
};

struct LQSolution {
  LQParams params;
  LQCoefficients coeffs;
  RiccatiConstants mean_constants;
  RiccatiClosedForm zform;       // mean-adjoint Riccati, closed form
  GridFn eta_bar;                // tabulated zform.eta
  GridFn eta;                    // own-adjoint Riccati, RK4 backward
  GridFn chi;                    // mean-offset of the adjoint ansatz
  GridFn xbar, ybar;             // deterministic mean flow, ybar = etabar*xbar

  // optimal rate given own state and the (empirical) state mean:
  // a*eta(t)*x + a*chi(t) + b*etabar(t)*xbar
  double feedback(double t, double x, double xbar_emp) const;
};

// Solves all decoupling fields. ode_steps controls the RK4/tabulation
// resolution (half-step storage internally).
LQSolution solve_lq(const LQParams& p, std::size_t ode_steps = 10000);

struct LQSim {
  ParticleEnsemble ens;  // channels X, alpha, W
  double cost = 0.0;
  double se_cost = 0.0;
};

// Euler-Maruyama under the synthesized feedback; interaction means are
// taken over the ensemble at each step.
LQSim simulate_lq(const LQParams& p, const LQSolution& sol, std::size_t N,
                  std::size_t steps, std::uint64_t seed);

// Same scheme under an arbitrary feedback (t, x, xbar_emp) -> rate.
LQSim simulate_lq_feedback(const LQParams& p,
                           const std::function<double(double, double, double)>& feedback,
                           std::size_t N, std::size_t steps, std::uint64_t seed);

// Adds Y = eta X + chi and Z = eta channels.
void attach_lq_adjoints(ParticleEnsemble& ens, const LQSolution& sol);

struct ResidualStats {
  double max_abs = 0.0;        // over times of per-time normalized max
  double mean_abs = 0.0;       // time average of per-time normalized mean
  std::vector<double> per_time_max;
  std::vector<double> per_time_mean;
  std::size_t worst_time = 0;
  std::size_t worst_particle = 0;
  double scale = 1.0;          // time-averaged normalization
};

// b2 Y + bbar2 E[Y] + (r+rbar) alpha + rbar sbar (sbar-2) E[alpha],
// normalized per time by the mean magnitude of the four summands.
ResidualStats lq_stationarity_residual(const ParticleEnsemble& ens, const LQParams& p,
                                       const LQSolution& sol);

// Residual of minimizing the Hamiltonian pointwise in the rate while
// freezing the laws: b2 Y + r alpha + rbar (alpha - sbar E[alpha]).
// Differs from the condition above by bbar2 E[Y] + rbar sbar (sbar-1) E[alpha].
ResidualStats lq_pointwise_residual(const ParticleEnsemble& ens, const LQParams& p,
                                    const LQSolution& sol);

// Generic-model view for the optimality checkers.
ModelSpec lq_model(const LQParams& p);

}  // namespace mfcx
