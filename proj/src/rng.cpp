#include "mfcx/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace mfcx {

DiscreteSampler::DiscreteSampler(const std::vector<double>& weights) {
  if (weights.empty()) throw std::invalid_argument("DiscreteSampler: empty weights");
  cum_.resize(weights.size());
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0) throw std::invalid_argument("DiscreteSampler: negative weight");
    s += weights[i];
    cum_[i] = s;
  }
  if (!(s > 0.0)) throw std::invalid_argument("DiscreteSampler: zero total weight");
  for (double& c : cum_) c /= s;
  cum_.back() = 1.0;
}

std::size_t DiscreteSampler::draw(double u) const {
  auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
  if (it == cum_.end()) --it;
  return static_cast<std::size_t>(it - cum_.begin());
}

}  // namespace mfcx
