#include "mfcx/pontryagin.hpp"

#include <cmath>
#include <stdexcept>

#include "mfcx/parallel.hpp"
#include "mfcx/rng.hpp"

namespace mfcx {

JointLaw joint_law_at(const ParticleEnsemble& ens, std::size_t node, EmpiricalLaw& law) {
  const Channel& X = ens["X"];
  const Channel& A = ens["alpha"];
  const std::size_t N = ens.N();
  JointLaw mu;
  mu.dx = X.dim;
  mu.da = A.dim;
  mu.xbar.assign(X.dim, 0.0);
  mu.abar.assign(A.dim, 0.0);
  law.dim = X.dim + A.dim;
  law.atoms.resize(N * law.dim);
  law.weights.assign(N, 1.0 / static_cast<double>(N));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < X.dim; ++k) {
      double v = X.at(node, i, k);
      law.atoms[i * law.dim + k] = v;
      mu.xbar[k] += v;
    }
    for (std::size_t k = 0; k < A.dim; ++k) {
      double v = A.at(node, i, k);
      law.atoms[i * law.dim + X.dim + k] = v;
      mu.abar[k] += v;
    }
  }
  for (double& v : mu.xbar) v /= static_cast<double>(N);
  for (double& v : mu.abar) v /= static_cast<double>(N);
  mu.joint = &law;
  return mu;
}

namespace {

double norm2(const double* v, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += v[k] * v[k];
  return std::sqrt(s);
}

}  // namespace

ResidualReport necessary_residual(const ModelSpec& model, const ParticleEnsemble& ens,
                                  const ResidualOptions& opt) {
  model.validate();
  const Channel& X = ens["X"];
  const Channel& A = ens["alpha"];
  const Channel& Y = ens["Y"];
  const Channel& Z = ens["Z"];
  if (X.dim != model.dx || A.dim != model.da || Y.dim != model.dx ||
      Z.dim != model.dx * model.dw)
    throw std::invalid_argument("necessary_residual: channel dims do not match model");
  const bool box = !opt.lo.empty();
  if (box && (opt.lo.size() != model.da || opt.hi.size() != model.da))
    throw std::invalid_argument("necessary_residual: box bounds must have da entries");

  const std::size_t nodes = ens.grid().nodes();
  const std::size_t N = ens.N();
  const std::size_t da = model.da, dx = model.dx;

  // test actions: box corners plus seeded interior draws
  std::vector<std::vector<double>> actions;
  if (box) {
    std::size_t corners = std::size_t{1} << da;
    for (std::size_t c = 0; c < corners; ++c) {
      std::vector<double> a(da);
      for (std::size_t k = 0; k < da; ++k) a[k] = (c >> k) & 1 ? opt.hi[k] : opt.lo[k];
      actions.push_back(std::move(a));
    }
    Prng rng(opt.seed);
    for (std::size_t j = 0; j < opt.random_actions; ++j) {
      std::vector<double> a(da);
      for (std::size_t k = 0; k < da; ++k)
        a[k] = opt.lo[k] + (opt.hi[k] - opt.lo[k]) * rng.next_uniform();
      actions.push_back(std::move(a));
    }
  }

  const bool fast = (model.b_nu.zero() || model.b_nu.probe_independent()) &&
                    (model.f_nu.zero() || model.f_nu.probe_independent());

  ResidualReport rep;
  rep.equality_form = !box;
  rep.per_time_max.assign(nodes, 0.0);
  rep.per_time_mean.assign(nodes, 0.0);
  std::vector<std::size_t> worst_at(nodes, 0);
  std::vector<double> scales(nodes, 0.0);

  parallel_for(nodes, [&](std::size_t lo_t, std::size_t hi_t) {
    std::vector<double> fa(da), bnu(dx * da), fnu(da), ba(dx * da);
    std::vector<double> grad(da), inter(da), total(da), bay(da);
    EmpiricalLaw lawbuf;
    for (std::size_t snode = lo_t; snode < hi_t; ++snode) {
      const double t = ens.grid().t(snode);
      JointLaw mu = joint_law_at(ens, snode, lawbuf);

      // interaction term shared by all probes when kernels ignore them
      std::vector<double> shared_inter(da, 0.0);
      std::size_t base_count = (opt.base_subsample && opt.base_subsample < N)
                                   ? opt.base_subsample
                                   : N;
      auto interaction_into = [&](const double* xp, const double* ap, double* out) {
        for (std::size_t k = 0; k < da; ++k) out[k] = 0.0;
        Prng pick(opt.seed ^ (snode * 0x9e3779b9ull));
        for (std::size_t jj = 0; jj < base_count; ++jj) {
          std::size_t j = (base_count == N)
                              ? jj
                              : static_cast<std::size_t>(pick.next_uniform() * N);
          const double* xj = &X.data[(snode * N + j) * dx];
          const double* aj = &A.data[(snode * N + j) * da];
          const double* yj = &Y.data[(snode * N + j) * dx];
          if (!model.f_nu.zero()) {
            model.f_nu.eval(t, xj, aj, mu, xp, ap, fnu.data());
            for (std::size_t k = 0; k < da; ++k) out[k] += fnu[k];
          }
          if (!model.b_nu.zero()) {
            model.b_nu.eval(t, xj, aj, mu, xp, ap, bnu.data());
            for (std::size_t k = 0; k < da; ++k) {
              double acc = 0.0;
              for (std::size_t r = 0; r < dx; ++r) acc += bnu[r * da + k] * yj[r];
              out[k] += acc;
            }
          }
        }
        for (std::size_t k = 0; k < da; ++k) out[k] /= static_cast<double>(base_count);
      };
      if (fast) interaction_into(nullptr, nullptr, shared_inter.data());

      double mx = 0.0, mn = 0.0, sc = 0.0;
      std::size_t worst = 0;
      for (std::size_t i = 0; i < N; ++i) {
        const double* xi = &X.data[(snode * N + i) * dx];
        const double* ai = &A.data[(snode * N + i) * da];
        const double* yi = &Y.data[(snode * N + i) * dx];
        model.f_a(t, xi, ai, mu, fa.data());
        model.b_a(t, xi, ai, mu, ba.data());
        for (std::size_t k = 0; k < da; ++k) {
          double acc = 0.0;
          for (std::size_t r = 0; r < dx; ++r) acc += ba[r * da + k] * yi[r];
          bay[k] = acc;
          grad[k] = fa[k] + acc;
        }
        if (fast) inter = shared_inter;
        else interaction_into(xi, ai, inter.data());
        for (std::size_t k = 0; k < da; ++k) total[k] = grad[k] + inter[k];

        double viol;
        if (!box) {
          viol = norm2(total.data(), da);
        } else {
          viol = 0.0;
          for (const auto& a : actions) {
            double dot = 0.0;
            for (std::size_t k = 0; k < da; ++k) dot += total[k] * (ai[k] - a[k]);
            if (dot > viol) viol = dot;
          }
        }
        // scale from the terms that have to cancel, not from their sum,
        // otherwise a perfect optimum normalizes to exactly one
        sc += norm2(fa.data(), da) + norm2(bay.data(), da) + norm2(inter.data(), da);
        mn += viol;
        if (viol > mx) {
          mx = viol;
          worst = i;
        }
      }
      sc = std::max(sc / static_cast<double>(N), 1e-300);
      rep.per_time_max[snode] = mx / sc;
      rep.per_time_mean[snode] = mn / static_cast<double>(N) / sc;
      worst_at[snode] = worst;
      scales[snode] = sc;
    }
  });

  for (std::size_t s = 0; s < nodes; ++s) {
    if (rep.per_time_max[s] > rep.max_abs) {
      rep.max_abs = rep.per_time_max[s];
      rep.worst_time = s;
      rep.worst_particle = worst_at[s];
    }
    rep.mean_abs += rep.per_time_mean[s];
    rep.scale += scales[s];
  }
  rep.mean_abs /= static_cast<double>(nodes);
  rep.scale /= static_cast<double>(nodes);
  return rep;
}

ResidualReport scalar_interaction_residual(const ParticleEnsemble& ens,
                                           const ScalarInteractionFOC& foc) {
  const Channel& X = ens["X"];
  const Channel& A = ens["alpha"];
  const Channel& Y = ens["Y"];
  const std::size_t nodes = ens.grid().nodes();
  const std::size_t N = ens.N();
  ResidualReport rep;
  rep.equality_form = true;
  rep.per_time_max.assign(nodes, 0.0);
  rep.per_time_mean.assign(nodes, 0.0);
  std::vector<std::size_t> worst_at(nodes, 0);
  std::vector<double> scales(nodes, 0.0);

  parallel_for(nodes, [&](std::size_t lo_t, std::size_t hi_t) {
    for (std::size_t snode = lo_t; snode < hi_t; ++snode) {
      const double t = ens.grid().t(snode);
      double stat = 0.0;
      for (std::size_t j = 0; j < N; ++j)
        stat += foc.stat(t, &X.data[(snode * N + j) * X.dim],
                         &A.data[(snode * N + j) * A.dim],
                         &Y.data[(snode * N + j) * Y.dim]);
      stat /= static_cast<double>(N);
      double mx = 0.0, mn = 0.0, sc = 0.0;
      std::size_t worst = 0;
      for (std::size_t i = 0; i < N; ++i) {
        double base = foc.base(t, &X.data[(snode * N + i) * X.dim],
                               &A.data[(snode * N + i) * A.dim],
                               &Y.data[(snode * N + i) * Y.dim]);
        double v = std::abs(base + stat);
        sc += std::abs(base) + std::abs(stat);
        mn += v;
        if (v > mx) {
          mx = v;
          worst = i;
        }
      }
      sc = std::max(sc / static_cast<double>(N), 1e-300);
      rep.per_time_max[snode] = mx / sc;
      rep.per_time_mean[snode] = mn / static_cast<double>(N) / sc;
      worst_at[snode] = worst;
      scales[snode] = sc;
    }
  });

  for (std::size_t s = 0; s < nodes; ++s) {
    if (rep.per_time_max[s] > rep.max_abs) {
      rep.max_abs = rep.per_time_max[s];
      rep.worst_time = s;
      rep.worst_particle = worst_at[s];
    }
    rep.mean_abs += rep.per_time_mean[s];
    rep.scale += scales[s];
  }
  rep.mean_abs /= static_cast<double>(nodes);
  rep.scale /= static_cast<double>(nodes);
  return rep;
}

}  // namespace mfcx
