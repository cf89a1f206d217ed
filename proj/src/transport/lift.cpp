#include "mfcx/transport/lift.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mfcx/parallel.hpp"
#include "mfcx/rng.hpp"

namespace mfcx::transport {

using mfcx::Channel;
using mfcx::EmpiricalLaw;
using mfcx::ParticleEnsemble;
using mfcx::Prng;
using mfcx::TimeGrid;
using mfcx::pick_save_stride;

mfcx::ParticleEnsemble lift_bridge(const BridgeMap& psi, double T, double x0, std::size_t N,
                                   std::size_t steps, std::uint64_t seed) {
    if (steps < 2) throw std::invalid_argument("lift_bridge: need steps >= 2");
    const double dt = T / double(steps);
    const double sqdt = std::sqrt(dt);
    const std::size_t stride = pick_save_stride(steps);
    const std::size_t nodes = steps / stride + 1;

    ParticleEnsemble ens(TimeGrid(T, steps / stride), N);
    Channel& X = ens.add("X");
    Channel& W = ens.add("W");
    Prng root(seed);

    mfcx::parallel_for(N, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Prng rng = root.fork(i);
            double u = rng.next_uniform();
            double x = x0, w = 0.0;
            X.at(0, i) = x;
            W.at(0, i) = w;
            std::size_t node = 1;
            for (std::size_t s = 0; s < steps; ++s) {
                double dw = sqdt * rng.next_normal();
                if (s + 1 == steps) {
                    w += dw;
                    x = psi(u, w, x0);  // exact terminal assignment
                } else {
                    double t = double(s) * dt;
                    double drift = (psi(u, w, x0) - x) / (T - t);
                    x += drift * dt + dw;
                    w += dw;
                }
                if ((s + 1) % stride == 0 && node < nodes) {
                    X.at(node, i) = x;
                    W.at(node, i) = w;
                    ++node;
                }
            }
        }
    });
    return ens;
}

namespace {

// standard normal CDF boundaries at the cumulative atom weights, solved by
// bisection on erf; the cells then carry exactly the atom probabilities
std::vector<double> quantile_boundaries(const IncrementLaw& law, double var) {
    const double sd = std::sqrt(var);
    std::vector<double> bounds;
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < law.size(); ++i) {
        cum += law.p[i];
        double target = 2.0 * cum - 1.0;  // erf(x / (sd*sqrt(2))) = target
        double lo = -40.0 * sd, hi = 40.0 * sd;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            if (std::erf(mid / (sd * 1.4142135623730951)) < target)
                lo = mid;
            else
                hi = mid;
        }
        bounds.push_back(0.5 * (lo + hi));
    }
    return bounds;
}

std::size_t cell_of(const std::vector<double>& bounds, double w) {
    return std::size_t(std::upper_bound(bounds.begin(), bounds.end(), w) - bounds.begin());
}

// inverse-CDF sampler rows over action indices
struct KernelRows {
    std::size_t nz = 0;
    std::vector<std::vector<double>> weight;  // [row][zi], rows may be empty

    void add(std::size_t row, std::size_t zi, double w, std::size_t rows_total) {
        if (weight.empty()) weight.assign(rows_total, {});
        if (weight[row].empty()) weight[row].assign(nz, 0.0);
        weight[row][zi] += w;
    }
    std::size_t draw(std::size_t row, double u) const {
        const auto& w = weight[row];
        double tot = 0.0;
        for (double x : w) tot += x;
        double target = u * tot, cum = 0.0;
        for (std::size_t zi = 0; zi < w.size(); ++zi) {
            cum += w[zi];
            if (target < cum) return zi;
        }
        for (std::size_t zi = w.size(); zi-- > 0;)
            if (w[zi] > 0.0) return zi;
        return 0;
    }
    bool empty_row(std::size_t row) const {
        if (weight[row].empty()) return true;
        for (double x : weight[row])
            if (x > 0.0) return false;
        return true;
    }
};

}  // namespace

LiftResult lift_to_sde(const DiscreteCausalCoupling& coupling, std::size_t N,
                       std::size_t steps, std::uint64_t seed) {
    coupling.validate();
    const LevelProblem& prob = *coupling.prob;
    const int level = coupling.level();
    if (level > 1) throw std::invalid_argument("lift_to_sde: level 0 or 1 required");
    const std::size_t blocks = prob.steps();
    if (steps < 2 * blocks) throw std::invalid_argument("lift_to_sde: need steps >= 2 per block");

    const double T = prob.wiener.T;
    const double dtb = prob.dt();  // block length
    const std::size_t nz = prob.n_actions();
    const std::size_t m = prob.wiener.step.size();
    const std::vector<double>& atoms = prob.wiener.step.v;
    std::vector<double> bounds = quantile_boundaries(prob.wiener.step, dtb);

    // stage-0 rows: conditional action law given the first cell
    KernelRows rows0;
    rows0.nz = nz;
    // stage-1 rows keyed (a1 * m + j2) * nz + zi0
    KernelRows rows1;
    rows1.nz = nz;
    if (coupling.tree) {
        for (std::size_t a1 = 0; a1 < m; ++a1) {
            std::size_t zi0 = coupling.tree->act[0][a1];
            rows0.add(a1, zi0, 1.0, m);
            if (blocks == 2) {
                for (std::size_t j2 = 0; j2 < m; ++j2) {
                    std::size_t zi1 = coupling.tree->act[1][a1 * m + j2];
                    rows1.add((a1 * m + j2) * nz + zi0, zi1, 1.0, m * m * nz);
                }
            }
        }
    } else {
        for (std::size_t p = 0; p < coupling.markov.size(); ++p) {
            double wp = coupling.weight[p];
            if (wp == 0.0) continue;
            const MarkovPolicy& pol = coupling.markov[p];
            for (std::size_t a1 = 0; a1 < m; ++a1) {
                std::size_t x1 = prob.wiener.next[0][0][a1];
                std::size_t zi0 = pol.act[0][x1];  // s_count(0) == 1
                rows0.add(a1, zi0, wp, m);
                if (blocks == 2) {
                    std::size_t si1 = prob.snext[0][0][zi0];
                    for (std::size_t j2 = 0; j2 < m; ++j2) {
                        std::size_t x2 = prob.wiener.next[1][x1][j2];
                        std::size_t zi1 = pol.act[1][x2 * prob.s_count(1) + si1];
                        rows1.add((a1 * m + j2) * nz + zi0, zi1, wp, m * m * nz);
                    }
                }
            }
        }
    }

    const std::size_t sub = steps / blocks;  // Euler steps per block
    const double dt = dtb / double(sub);
    const double sqdt = std::sqrt(dt);
    const std::size_t stride = pick_save_stride(blocks * sub);
    const std::size_t nodes = blocks * sub / stride + 1;

    LiftResult res{ParticleEnsemble(TimeGrid(T, blocks * sub / stride), N), {}, {}, {}};
    Channel& X = res.ens.add("X");
    Channel& W = res.ens.add("W");
    res.terminal.assign(N, 0.0);
    res.atom.assign(blocks, std::vector<std::uint16_t>(N, 0));
    res.zidx.assign(blocks, std::vector<std::uint16_t>(N, 0));
    Prng root(seed);
    const double x0 = prob.x0;

    mfcx::parallel_for(N, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> us(blocks);
        for (std::size_t i = lo; i < hi; ++i) {
            Prng rng = root.fork(i);
            for (std::size_t b = 0; b < blocks; ++b) us[b] = rng.next_uniform();
            double x = x0, w = 0.0;
            X.at(0, i) = x;
            W.at(0, i) = w;
            std::size_t node = 1, gstep = 0;
            std::size_t a1 = 0, zi0 = 0;
            for (std::size_t b = 0; b < blocks; ++b) {
                const double x_start = x, w_start = w;
                const double t_end = dtb * double(b + 1);
                auto target = [&](double wcur) {
                    std::size_t cell = cell_of(bounds, wcur - w_start);
                    std::size_t zi;
                    if (b == 0) {
                        zi = rows0.draw(cell, us[0]);
                    } else {
                        std::size_t row = (a1 * m + cell) * nz + zi0;
                        // unreachable atom combinations fall back to stage-0 rows
                        zi = rows1.empty_row(row) ? rows0.draw(cell, us[b])
                                                  : rows1.draw(row, us[b]);
                    }
                    return x_start + (wcur - w_start) + dtb * prob.lattice.z[zi];
                };
                for (std::size_t s = 0; s < sub; ++s, ++gstep) {
                    double dw = sqdt * rng.next_normal();
                    if (s + 1 == sub) {
                        w += dw;
                    } else {
                        double t = dtb * double(b) + dt * double(s);
                        double drift = (target(w) - x) / (t_end - t);
                        x += drift * dt + dw;
                        w += dw;
                    }
                    if ((gstep + 1) % stride == 0 && node < nodes && s + 1 < sub) {
                        X.at(node, i) = x;
                        W.at(node, i) = w;
                        ++node;
                    }
                }
                // exact endpoint assignment for the block
                std::size_t cell = cell_of(bounds, w - w_start);
                std::size_t zi;
                if (b == 0) {
                    zi = rows0.draw(cell, us[0]);
                    a1 = cell;
                    zi0 = zi;
                } else {
                    std::size_t row = (a1 * m + cell) * nz + zi0;
                    zi = rows1.empty_row(row) ? rows0.draw(cell, us[b]) : rows1.draw(row, us[b]);
                }
                x = x_start + (w - w_start) + dtb * prob.lattice.z[zi];
                res.atom[b][i] = std::uint16_t(cell);
                res.zidx[b][i] = std::uint16_t(zi);
                if (gstep % stride == 0 && node < nodes) {
                    X.at(node, i) = x;
                    W.at(node, i) = w;
                    ++node;
                }
            }
            res.terminal[i] = x;
        }
    });
    return res;
}

LiftDiagnostics lift_diagnostics(const DiscreteCausalCoupling& coupling,
                                 const LiftResult& lift, const CostSpec& cost) {
    const LevelProblem& prob = *coupling.prob;
    const std::size_t blocks = prob.steps();
    const std::size_t nz = prob.n_actions();
    const std::size_t N = lift.terminal.size();
    const double dtb = prob.dt();

    LiftDiagnostics diag;
    diag.coupling_cost = cost_cn(coupling, cost, coupling.level());
    PolicyMoments mom = coupling_moments(coupling);

    for (std::size_t b = 0; b < blocks; ++b) {
        std::vector<double> freq(nz, 0.0);
        for (std::size_t i = 0; i < N; ++i) freq[lift.zidx[b][i]] += 1.0 / double(N);
        diag.block_cost += dtb * cost.f.value(prob.lattice.z, freq);

        EmpiricalLaw emp, ref;
        for (std::size_t zi = 0; zi < nz; ++zi) {
            if (freq[zi] > 0.0) emp.push1(prob.lattice.z[zi], freq[zi]);
            if (mom.rate[b][zi] > 0.0) ref.push1(prob.lattice.z[zi], mom.rate[b][zi]);
        }
        diag.rate_w2_max = std::max(diag.rate_w2_max, mfcx::wasserstein2_sq_1d(emp, ref));

        std::vector<double> cellfreq(prob.wiener.step.size(), 0.0);
        for (std::size_t i = 0; i < N; ++i) cellfreq[lift.atom[b][i]] += 1.0 / double(N);
        for (std::size_t a = 0; a < cellfreq.size(); ++a)
            diag.atom_weight_err =
                std::max(diag.atom_weight_err, std::abs(cellfreq[a] - prob.wiener.step.p[a]));
    }

    EmpiricalLaw emp_term = EmpiricalLaw::uniform_from(lift.terminal);
    EmpiricalLaw ref_term;
    for (std::size_t s = 0; s < mom.terminal.size(); ++s)
        if (mom.terminal[s] > 0.0) ref_term.push1(prob.term_u[s], mom.terminal[s]);
    diag.block_cost += cost.g.value(lift.terminal, std::vector<double>(N, 1.0 / double(N)));
    diag.terminal_w2 = mfcx::wasserstein2_sq_1d(emp_term, ref_term);

    // terminal law conditioned on the realized atom path, against the
    // coupling's conditional given the same atoms
    std::map<std::vector<std::uint16_t>, std::vector<double>> groups;
    for (std::size_t i = 0; i < N; ++i) {
        std::vector<std::uint16_t> key(blocks);
        for (std::size_t b = 0; b < blocks; ++b) key[b] = lift.atom[b][i];
        groups[key].push_back(lift.terminal[i]);
    }
    JointTable table = to_joint_table(coupling);
    double cw2 = 0.0;
    for (const auto& [key, vals] : groups) {
        EmpiricalLaw ref_c;
        for (std::size_t a = 0; a < table.prob.size(); ++a) {
            if (table.xpath[a] != key) continue;
            double u = prob.x0;
            for (std::size_t b = 0; b < blocks; ++b)
                u += prob.wiener.step.v[table.xpath[a][b]] +
                     dtb * prob.lattice.z[table.zpath[a][b]];
            ref_c.push1(u, table.prob[a]);
        }
        if (ref_c.count() == 0) continue;
        ref_c.normalize();
        EmpiricalLaw emp_c = EmpiricalLaw::uniform_from(vals);
        cw2 += (double(vals.size()) / double(N)) * mfcx::wasserstein2_sq_1d(emp_c, ref_c);
    }
    diag.conditional_w2 = cw2;
    return diag;
}

}
