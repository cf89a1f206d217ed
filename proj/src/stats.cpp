#include "mfcx/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace mfcx {

namespace {

// lower regularized gamma by power series; needs x < a+1 for fast
// convergence
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// upper regularized gamma by Lentz continued fraction; needs x >= a+1
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi2_sf(double x, double k) {
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * k, 0.5 * x);
}

bool solve_dense(std::size_t n, std::vector<double>& A, std::vector<double>& b) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t rw = col + 1; rw < n; ++rw)
      if (std::abs(A[rw * n + col]) > std::abs(A[piv * n + col])) piv = rw;
    if (std::abs(A[piv * n + col]) < 1e-300) return false;
    if (piv != col) {
      for (std::size_t k = 0; k < n; ++k) std::swap(A[col * n + k], A[piv * n + k]);
      std::swap(b[col], b[piv]);
    }
    double inv = 1.0 / A[col * n + col];
    for (std::size_t rw = col + 1; rw < n; ++rw) {
      double f = A[rw * n + col] * inv;
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) A[rw * n + k] -= f * A[col * n + k];
      b[rw] -= f * b[col];
    }
  }
  for (std::size_t rw = n; rw-- > 0;) {
    double acc = b[rw];
    for (std::size_t k = rw + 1; k < n; ++k) acc -= A[rw * n + k] * b[k];
    b[rw] = acc / A[rw * n + rw];
  }
  return true;
}

WaldResult robust_wald(const std::vector<double>& phi, const std::vector<double>& y,
                       std::size_t n_obs, std::size_t p) {
  WaldResult out;
  out.dof = p;
  if (phi.size() != n_obs * p || y.size() != n_obs || n_obs <= p) return out;

  std::vector<double> S(p * p, 0.0), c(p, 0.0);
  for (std::size_t i = 0; i < n_obs; ++i) {
    const double* row = &phi[i * p];
    for (std::size_t a = 0; a < p; ++a) {
      c[a] += row[a] * y[i];
      for (std::size_t b2 = a; b2 < p; ++b2) S[a * p + b2] += row[a] * row[b2];
    }
  }
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b2 = 0; b2 < a; ++b2) S[a * p + b2] = S[b2 * p + a];

  std::vector<double> Sc = S, beta = c;
  if (!solve_dense(p, Sc, beta)) return out;

  std::vector<double> M(p * p, 0.0);
  for (std::size_t i = 0; i < n_obs; ++i) {
    const double* row = &phi[i * p];
    double fit = 0.0;
    for (std::size_t a = 0; a < p; ++a) fit += row[a] * beta[a];
    double e2 = (y[i] - fit) * (y[i] - fit);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b2 = a; b2 < p; ++b2) M[a * p + b2] += row[a] * row[b2] * e2;
  }
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b2 = 0; b2 < a; ++b2) M[a * p + b2] = M[b2 * p + a];

  std::vector<double> w = c;
  if (!solve_dense(p, M, w)) return out;
  double stat = 0.0;
  for (std::size_t a = 0; a < p; ++a) stat += c[a] * w[a];
  out.stat = stat;
  out.ok = stat >= 0.0 && std::isfinite(stat);
  return out;
}

}  // namespace mfcx
