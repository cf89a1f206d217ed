#pragma once
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "mfcx/grid.hpp"
#include "mfcx/law.hpp"

namespace mfcx {

// Time-indexed particle block: value(t, i, k) for node t, particle i,
// coordinate k. Laid out particle-major per node so per-node reductions
// stream contiguously.
struct Channel {
  std::size_t nodes = 0;
  std::size_t N = 0;
  std::size_t dim = 1;
  std::vector<double> data;  // size nodes*N*dim

  Channel() = default;
  Channel(std::size_t nodes_, std::size_t N_, std::size_t dim_ = 1)
      : nodes(nodes_), N(N_), dim(dim_), data(nodes_ * N_ * dim_, 0.0) {}

  double& at(std::size_t t, std::size_t i, std::size_t k = 0) {
    return data[(t * N + i) * dim + k];
  }
  double at(std::size_t t, std::size_t i, std::size_t k = 0) const {
    return data[(t * N + i) * dim + k];
  }

  double mean(std::size_t t, std::size_t k = 0) const;
  double variance(std::size_t t, std::size_t k = 0) const;
  EmpiricalLaw law_at(std::size_t t, std::size_t k = 0) const;
};

// Largest divisor of steps with steps/divisor <= target; simulators
// use it to keep snapshot storage bounded while stepping finely.
std::size_t pick_save_stride(std::size_t steps, std::size_t target = 100);

// A simulated interacting-particle system: shared time grid, named
// channels (state, control, adjoints, noise), all with N particles.
// Channels may have different dims but must share nodes and N.
class ParticleEnsemble {
 public:
  ParticleEnsemble(TimeGrid grid, std::size_t N) : grid_(grid), N_(N) {}

  const TimeGrid& grid() const { return grid_; }
  std::size_t N() const { return N_; }

  Channel& add(const std::string& name, std::size_t dim = 1);
  bool has(const std::string& name) const { return channels_.count(name) != 0; }
  Channel& operator[](const std::string& name);
  const Channel& operator[](const std::string& name) const;
  const std::map<std::string, Channel>& channels() const { return channels_; }

 private:
  TimeGrid grid_;
  std::size_t N_;
  std::map<std::string, Channel> channels_;
};

}  // namespace mfcx
