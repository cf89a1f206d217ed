#pragma once
#include <cstddef>
#include <vector>

namespace mfcx {

// Regularized incomplete gamma functions (series / continued fraction).
double gamma_p(double a, double x);  // P(a,x), lower
double gamma_q(double a, double x);  // Q(a,x) = 1 - P(a,x)

// survival function of a chi-square with k degrees of freedom
double chi2_sf(double x, double k);

// In-place solve of a dense n x n system with partial pivoting.
// Returns false when the matrix is numerically singular.
bool solve_dense(std::size_t n, std::vector<double>& A, std::vector<double>& b);

// Wald statistic for H0: beta = 0 in y = Phi beta + eps with
// heteroskedasticity-robust covariance. Because the normal equations
// give S beta = Phi'y, the statistic reduces to (Phi'y)' M^{-1} (Phi'y)
// with M = sum_i phi_i phi_i' eps_i^2.
struct WaldResult {
  double stat = 0.0;
  std::size_t dof = 0;
  bool ok = false;
};
WaldResult robust_wald(const std::vector<double>& phi, const std::vector<double>& y,
                       std::size_t n_obs, std::size_t p);

}  // namespace mfcx
