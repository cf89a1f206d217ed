#pragma once
#include <cstddef>
#include <vector>

namespace mfcx {

// Weighted atoms in R^d, stored flat (atom i occupies
// data[i*dim .. i*dim+dim)). Weights are kept explicitly; uniform laws
// just store 1/n. Weights must be nonnegative and sum to 1 within 1e-9
// (normalize() fixes drift after pruning).
struct EmpiricalLaw {
  std::size_t dim = 1;
  std::vector<double> atoms;    // size == count()*dim
  std::vector<double> weights;  // size == count()

  std::size_t count() const { return weights.size(); }
  double atom(std::size_t i, std::size_t k = 0) const { return atoms[i * dim + k]; }

  void push(const double* x, double w);
  void push1(double x, double w);
  void normalize();
  // drops atoms with weight <= eps and renormalizes
  void prune(double eps = 0.0);

  static EmpiricalLaw uniform_from(const std::vector<double>& samples);

  double mean(std::size_t k = 0) const;
  double variance(std::size_t k = 0) const;
  double moment(std::size_t k, int order) const;
  // int f d(law) for scalar f of coordinate k
  template <class F>
  double integrate(F&& f, std::size_t k = 0) const {
    double s = 0.0;
    for (std::size_t i = 0; i < count(); ++i) s += weights[i] * f(atom(i, k));
    return s;
  }
};

// Exact squared 2-Wasserstein distance between one-dimensional laws via
// the quantile coupling (two-pointer sweep over sorted atoms).
double wasserstein2_sq_1d(const EmpiricalLaw& a, const EmpiricalLaw& b);

}  // namespace mfcx
