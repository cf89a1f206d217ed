#include "mfcx/law.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mfcx {

void EmpiricalLaw::push(const double* x, double w) {
  atoms.insert(atoms.end(), x, x + dim);
  weights.push_back(w);
}

void EmpiricalLaw::push1(double x, double w) {
  if (dim != 1) throw std::logic_error("push1 on multi-dimensional law");
  atoms.push_back(x);
  weights.push_back(w);
}

void EmpiricalLaw::normalize() {
  double s = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(s > 0.0)) throw std::invalid_argument("EmpiricalLaw: total weight not positive");
  for (double& w : weights) w /= s;
}

void EmpiricalLaw::prune(double eps) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < count(); ++i) {
    if (weights[i] > eps) {
      if (j != i) {
        weights[j] = weights[i];
        for (std::size_t k = 0; k < dim; ++k) atoms[j * dim + k] = atoms[i * dim + k];
      }
      ++j;
    }
  }
  weights.resize(j);
  atoms.resize(j * dim);
  normalize();
}

EmpiricalLaw EmpiricalLaw::uniform_from(const std::vector<double>& samples) {
  EmpiricalLaw law;
  law.dim = 1;
  law.atoms = samples;
  law.weights.assign(samples.size(), 1.0 / static_cast<double>(samples.size()));
  return law;
}

double EmpiricalLaw::mean(std::size_t k) const {
  double s = 0.0;
  for (std::size_t i = 0; i < count(); ++i) s += weights[i] * atom(i, k);
  return s;
}

double EmpiricalLaw::variance(std::size_t k) const {
  double m = mean(k);
  double s = 0.0;
  for (std::size_t i = 0; i < count(); ++i) {
    double d = atom(i, k) - m;
    s += weights[i] * d * d;
  }
  return s;
}

double EmpiricalLaw::moment(std::size_t k, int order) const {
  double s = 0.0;
  for (std::size_t i = 0; i < count(); ++i) s += weights[i] * std::pow(atom(i, k), order);
  return s;
}

double wasserstein2_sq_1d(const EmpiricalLaw& a, const EmpiricalLaw& b) {
  if (a.dim != 1 || b.dim != 1)
    throw std::invalid_argument("wasserstein2_sq_1d: laws must be one-dimensional");
  auto sorted = [](const EmpiricalLaw& l) {
    std::vector<std::size_t> idx(l.count());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t i, std::size_t j) { return l.atoms[i] < l.atoms[j]; });
    return idx;
  };
  auto ia = sorted(a), ib = sorted(b);
  // walk both quantile functions, pairing mass greedily
  std::size_t i = 0, j = 0;
  double wa = a.weights[ia[0]], wb = b.weights[ib[0]];
  double acc = 0.0;
  while (true) {
    double m = std::min(wa, wb);
    double d = a.atoms[ia[i]] - b.atoms[ib[j]];
    acc += m * d * d;
    wa -= m;
    wb -= m;
    if (wa <= 1e-15) {
      if (++i == a.count()) break;
      wa = a.weights[ia[i]];
    }
    if (wb <= 1e-15) {
      if (++j == b.count()) break;
      wb = b.weights[ib[j]];
    }
  }
  return acc;
}

}  // namespace mfcx
