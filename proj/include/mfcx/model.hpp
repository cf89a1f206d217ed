#pragma once
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mfcx/law.hpp"

namespace mfcx {

// Law argument passed to model callbacks. Every built-in model reads
// only the means; the full joint law (dim dx+da, X coordinates first)
// is attached when a caller has one so that statistic-based
// interactions (variance, higher moments) stay expressible.
struct JointLaw {
  std::size_t dx = 1;
  std::size_t da = 1;
  std::vector<double> xbar;
  std::vector<double> abar;
  const EmpiricalLaw* joint = nullptr;
};

// Derivative of a scalar or vector function with respect to the joint
// law of (state, control), in either the state direction (out block of
// x'-gradients) or the control direction (a'-gradients). The kernel is
// evaluated at a base point (t, x, a, mu) and a probe point (xp, ap).
//
// probe_independent marks kernels that are constant in (xp, ap); the
// ensemble average over base points is then one number shared by every
// probe, which turns the O(N^2) interaction sums into O(N).
class MeasureKernel {
 public:
  using Fn = std::function<void(double t, const double* x, const double* a,
                                const JointLaw& mu, const double* xp,
                                const double* ap, double* out)>;

  MeasureKernel() = default;  // identically zero
  MeasureKernel(Fn fn, std::size_t out_dim, bool probe_independent)
      : fn_(std::move(fn)), out_dim_(out_dim), probe_independent_(probe_independent) {}

  bool zero() const { return !fn_; }
  bool probe_independent() const { return probe_independent_; }
  std::size_t out_dim() const { return out_dim_; }

  void eval(double t, const double* x, const double* a, const JointLaw& mu,
            const double* xp, const double* ap, double* out) const {
    if (!fn_) {
      for (std::size_t k = 0; k < out_dim_; ++k) out[k] = 0.0;
      return;
    }
    fn_(t, x, a, mu, xp, ap, out);
  }

 private:
  Fn fn_;
  std::size_t out_dim_ = 0;
  bool probe_independent_ = true;
};

// Controlled dynamics dX = b dt + sigma dW with running cost f and
// terminal cost g, all allowed to depend on the joint law of state and
// control. sigma is constant (uncontrolled, law-free). Derivative
// callbacks are mandatory for b, f, g in x and a; measure kernels may
// be zero when the function does not touch the law.
struct ModelSpec {
  std::size_t dx = 1, da = 1, dw = 1;
  std::vector<double> sigma;  // row-major dx x dw

  std::function<void(double t, const double* x, const double* a, const JointLaw&,
                     double* out)> b;                       // out: dx
  std::function<double(double t, const double* x, const double* a, const JointLaw&)> f;
  std::function<double(const double* x, const JointLaw&)> g;

  std::function<void(double, const double*, const double*, const JointLaw&,
                     double*)> b_x;                         // Jacobian dx x dx
  std::function<void(double, const double*, const double*, const JointLaw&,
                     double*)> b_a;                         // dx x da
  std::function<void(double, const double*, const double*, const JointLaw&,
                     double*)> f_x;                         // dx
  std::function<void(double, const double*, const double*, const JointLaw&,
                     double*)> f_a;                         // da
  std::function<void(const double*, const JointLaw&, double*)> g_x;  // dx

  MeasureKernel b_mu;  // out dx*dx: d b_i / d(x-law) probe gradient j
  MeasureKernel b_nu;  // out dx*da
  MeasureKernel f_mu;  // out dx
  MeasureKernel f_nu;  // out da
  MeasureKernel g_mu;  // out dx

  void validate() const {
    if (dx == 0 || da == 0 || dw == 0) throw std::invalid_argument("ModelSpec: zero dimension");
    if (sigma.size() != dx * dw) throw std::invalid_argument("ModelSpec: sigma size != dx*dw");
    if (!b || !f || !g || !b_x || !b_a || !f_x || !f_a || !g_x)
      throw std::invalid_argument("ModelSpec: missing callback");
    auto want = [](const MeasureKernel& k, std::size_t d, const char* name) {
      if (!k.zero() && k.out_dim() != d)
        throw std::invalid_argument(std::string("ModelSpec: bad kernel dim for ") + name);
    };
    want(b_mu, dx * dx, "b_mu");
    want(b_nu, dx * da, "b_nu");
    want(f_mu, dx, "f_mu");
    want(f_nu, da, "f_nu");
    want(g_mu, dx, "g_mu");
  }
};

// H(t,x,y,z,a,mu) = b.y + sum_ik sigma_ik z_ik + f
inline double hamiltonian_eval(const ModelSpec& m, double t, const double* x,
                               const double* y, const double* z, const double* a,
                               const JointLaw& mu) {
  std::vector<double> bv(m.dx);
  m.b(t, x, a, mu, bv.data());
  double h = 0.0;
  for (std::size_t i = 0; i < m.dx; ++i) h += bv[i] * y[i];
  for (std::size_t i = 0; i < m.dx * m.dw; ++i) h += m.sigma[i] * z[i];
  return h + m.f(t, x, a, mu);
}

}  // namespace mfcx
