#pragma once
#include <cstdint>
#include <functional>
#include <vector>

#include "mfcx/ensemble.hpp"
#include "mfcx/model.hpp"

namespace mfcx {

// Where the control is allowed to live. Empty bounds mean the whole
// space, in which case first-order optimality is an equality.
struct ResidualOptions {
  std::vector<double> lo, hi;       // box per control coordinate, or empty
  std::size_t random_actions = 32;  // interior test actions besides corners
  std::uint64_t seed = 42;
  // probe-dependent kernels cost O(N^2); a positive value averages the
  // interaction over that many base particles instead of all of them
  std::size_t base_subsample = 0;
};

struct ResidualReport {
  bool equality_form = true;
  double max_abs = 0.0;   // worst per-time normalized violation
  double mean_abs = 0.0;  // time average of per-time normalized means
  std::vector<double> per_time_max;
  std::vector<double> per_time_mean;
  std::size_t worst_time = 0;
  std::size_t worst_particle = 0;
  double scale = 1.0;  // time-averaged normalization
};

// First-order optimality along an ensemble carrying channels X, alpha,
// Y, Z. The gradient tested is
//   G_i = d_a H(t, X_i, Y_i, Z_i, alpha_i, law)
//       + avg_j [ d_nu H(t, X_j, Y_j, Z_j, alpha_j, law)(X_i, alpha_i) ],
// where the average runs over the same ensemble (the independent copy
// is the empirical law itself). With a box, the violation at particle
// i is max over test actions a of (G_i . (alpha_i - a))_+; without,
// it is |G_i|. Both are normalized per time by the mean magnitude of
// the gradient summands (d_a f, d_a b . Y, interaction) taken before
// they cancel, so a tight optimum reads as ~0 rather than ~1.
ResidualReport necessary_residual(const ModelSpec& model, const ParticleEnsemble& ens,
                                  const ResidualOptions& opt = {});

// Fast path for interactions through one scalar statistic: the
// optimality gradient splits as base(particle) + mean over particles
// of stat(particle). Matches the generic evaluator exactly on models
// whose kernels are probe-independent scalars.
struct ScalarInteractionFOC {
  std::function<double(double t, const double* x, const double* a, const double* y)> base;
  std::function<double(double t, const double* x, const double* a, const double* y)> stat;
};

ResidualReport scalar_interaction_residual(const ParticleEnsemble& ens,
                                           const ScalarInteractionFOC& foc);

// Builds the joint law view of a node: means of X and alpha plus the
// flattened empirical law. `law` receives the atoms and must outlive
// the returned view.
JointLaw joint_law_at(const ParticleEnsemble& ens, std::size_t node, EmpiricalLaw& law);

}  // namespace mfcx
