#include "mfcx/ensemble.hpp"

#include <stdexcept>

namespace mfcx {

std::size_t pick_save_stride(std::size_t steps, std::size_t target) {
  std::size_t stride = (steps + target - 1) / target;
  while (stride > 1 && steps % stride != 0) --stride;
  return stride == 0 ? 1 : stride;
}

double Channel::mean(std::size_t t, std::size_t k) const {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) s += at(t, i, k);
  return s / static_cast<double>(N);
}

double Channel::variance(std::size_t t, std::size_t k) const {
  double m = mean(t, k);
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    double d = at(t, i, k) - m;
    s += d * d;
  }
  return s / static_cast<double>(N);
}

EmpiricalLaw Channel::law_at(std::size_t t, std::size_t k) const {
  EmpiricalLaw law;
  law.dim = 1;
  law.atoms.resize(N);
  for (std::size_t i = 0; i < N; ++i) law.atoms[i] = at(t, i, k);
  law.weights.assign(N, 1.0 / static_cast<double>(N));
  return law;
}

Channel& ParticleEnsemble::add(const std::string& name, std::size_t dim) {
  auto [it, inserted] = channels_.try_emplace(name, grid_.nodes(), N_, dim);
  if (!inserted) throw std::logic_error("ParticleEnsemble: duplicate channel " + name);
  return it->second;
}

Channel& ParticleEnsemble::operator[](const std::string& name) {
  auto it = channels_.find(name);
  if (it == channels_.end()) throw std::out_of_range("ParticleEnsemble: no channel " + name);
  return it->second;
}

const Channel& ParticleEnsemble::operator[](const std::string& name) const {
  auto it = channels_.find(name);
  if (it == channels_.end()) throw std::out_of_range("ParticleEnsemble: no channel " + name);
  return it->second;
}

}  // namespace mfcx
