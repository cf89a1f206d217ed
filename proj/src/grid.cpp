#include "mfcx/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace mfcx {

TimeGrid::TimeGrid(double T, std::size_t steps) : T_(T), steps_(steps) {
  if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: T must be positive");
  if (steps == 0) throw std::invalid_argument("TimeGrid: steps must be >= 1");
  dt_ = T / static_cast<double>(steps);
}

double TimeGrid::t(std::size_t i) const {
  if (i >= steps_) return T_;
  return dt_ * static_cast<double>(i);
}

TimeGrid TimeGrid::dyadic(double T, int level) {
  if (level < 0) throw std::invalid_argument("TimeGrid: level must be >= 0");
  return TimeGrid(T, std::size_t{1} << level);
}

std::vector<double> linspace(double a, double b, std::size_t count) {
  if (count < 2) throw std::invalid_argument("linspace: need at least 2 points");
  std::vector<double> out(count);
  double h = (b - a) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = a + h * static_cast<double>(i);
  out.back() = b;
  return out;
}

}  // namespace mfcx
