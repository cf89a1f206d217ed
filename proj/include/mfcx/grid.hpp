#pragma once
#include <cstddef>
#include <vector>

namespace mfcx {

// Uniform time grid on [0,T] with `steps` intervals, so steps+1 nodes.
class TimeGrid {
 public:
  TimeGrid(double T, std::size_t steps);

  double T() const { return T_; }
  std::size_t steps() const { return steps_; }
  std::size_t nodes() const { return steps_ + 1; }
  double dt() const { return dt_; }
  // t(i) is exact at both endpoints: t(0) == 0, t(steps) == T.
  double t(std::size_t i) const;

  static TimeGrid dyadic(double T, int level);

 private:
  double T_;
  std::size_t steps_;
  double dt_;
};

std::vector<double> linspace(double a, double b, std::size_t count);

}  // namespace mfcx
