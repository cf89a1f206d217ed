#include "mfcx/transport/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mfcx/parallel.hpp"

namespace mfcx::transport {

DPResult dp_linear_oracle(const LevelProblem& prob, const LinearCost& cost) {
    const std::size_t steps = prob.steps();
    const std::size_t nz = prob.n_actions();
    if (cost.h.size() != steps || cost.G.size() != prob.term_states())
        throw std::invalid_argument("dp_linear_oracle: cost shape mismatch");

    // actions scanned in magnitude order so that strict improvement keeps
    // the least-magnitude winner on ties
    std::vector<std::size_t> zorder(nz);
    for (std::size_t i = 0; i < nz; ++i) zorder[i] = i;
    std::sort(zorder.begin(), zorder.end(), [&](std::size_t a, std::size_t b) {
        double ma = std::abs(prob.lattice.z[a]), mb = std::abs(prob.lattice.z[b]);
        if (ma != mb) return ma < mb;
        return prob.lattice.z[a] < prob.lattice.z[b];
    });

    DPResult res;
    res.policy.act.assign(steps, {});
    std::vector<double> V = cost.G;
    std::vector<double> W, Vd;
    for (std::size_t d = steps; d-- > 0;) {
        const std::size_t scur = prob.s_count(d);
        const std::size_t snxt = prob.s_count(d + 1);
        const std::size_t nx1 = prob.wiener.xsupp[d + 1].size();
        auto& act = res.policy.act[d];
        act.assign(nx1 * scur, 0);
        // W(x1, si) = min over z of h[d][z] + V(x1, snext(si, z))
        W.assign(nx1 * scur, 0.0);
        parallel_for(nx1, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t x1 = lo; x1 < hi; ++x1) {
                for (std::size_t si = 0; si < scur; ++si) {
                    double best = std::numeric_limits<double>::infinity();
                    std::size_t bz = 0;
                    for (std::size_t oz = 0; oz < nz; ++oz) {
                        std::size_t zi = zorder[oz];
                        double val = cost.h[d][zi] + V[x1 * snxt + prob.snext[d][si][zi]];
                        if (val < best) {
                            best = val;
                            bz = zi;
                        }
                    }
                    W[x1 * scur + si] = best;
                    act[x1 * scur + si] = std::uint16_t(bz);
                }
            }
        });
        const std::size_t nx0 = prob.wiener.xsupp[d].size();
        Vd.assign(nx0 * scur, 0.0);
        parallel_for(nx0, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t xi = lo; xi < hi; ++xi) {
                for (std::size_t si = 0; si < scur; ++si) {
                    double tot = 0.0;
                    for (std::size_t j = 0; j < prob.wiener.step.size(); ++j)
                        tot += prob.wiener.step.p[j] *
                               W[prob.wiener.next[d][xi][j] * scur + si];
                    Vd[xi * scur + si] = tot;
                }
            }
        });
        V.swap(Vd);
    }
    res.value = V[0];
    return res;
}

namespace {

LinearCost linearize(const CostSpec& cost, const LevelProblem& prob,
                     const PolicyMoments& at) {
    LinearCost lc;
    const std::size_t steps = prob.steps();
    const double dt = prob.dt();
    lc.h.assign(steps, {});
    std::vector<double> var;
    for (std::size_t d = 0; d < steps; ++d) {
        cost.f.variation(prob.lattice.z, at.rate[d], prob.lattice.z, var);
        lc.h[d].resize(var.size());
        for (std::size_t zi = 0; zi < var.size(); ++zi) lc.h[d][zi] = dt * var[zi];
    }
    cost.g.variation(prob.term_u, at.terminal, prob.term_u, lc.G);
    return lc;
}

double dot_moments(const LinearCost& lc, const PolicyMoments& mom) {
    double s = 0.0;
    for (std::size_t d = 0; d < lc.h.size(); ++d)
        for (std::size_t zi = 0; zi < lc.h[d].size(); ++zi)
            s += lc.h[d][zi] * mom.rate[d][zi];
    for (std::size_t i = 0; i < lc.G.size(); ++i) s += lc.G[i] * mom.terminal[i];
    return s;
}

void blend(PolicyMoments& cur, const PolicyMoments& vertex, double gamma) {
    for (std::size_t d = 0; d < cur.rate.size(); ++d)
        for (std::size_t zi = 0; zi < cur.rate[d].size(); ++zi)
            cur.rate[d][zi] = (1.0 - gamma) * cur.rate[d][zi] + gamma * vertex.rate[d][zi];
    for (std::size_t i = 0; i < cur.terminal.size(); ++i)
        cur.terminal[i] = (1.0 - gamma) * cur.terminal[i] + gamma * vertex.terminal[i];
}

void push_policy(DiscreteCausalCoupling& coupling, MarkovPolicy policy, double gamma) {
    for (double& w : coupling.weight) w *= (1.0 - gamma);
    for (std::size_t p = 0; p < coupling.markov.size(); ++p) {
        if (coupling.markov[p] == policy) {
            coupling.weight[p] += gamma;
            return;
        }
    }
    coupling.markov.push_back(std::move(policy));
    coupling.weight.push_back(gamma);
}

}  // namespace

SolveReport solve_Pn(const CostSpec& cost, std::shared_ptr<const LevelProblem> prob,
                     const SolveOptions& opts, const WarmStart* warm_start) {
    cost.validate();
    const LevelProblem& lp = *prob;

    SolveReport rep;
    rep.coupling.prob = prob;

    // initial vertex from the linearization at the warm start, or at the
    // zero-control moments when no warm start is given
    LinearCost lc0;
    if (warm_start) {
        const double dt = lp.dt();
        lc0.h.assign(lp.steps(), {});
        std::vector<double> var;
        for (std::size_t d = 0; d < lp.steps(); ++d) {
            cost.f.variation(lp.lattice.z, warm_start->rate[d], lp.lattice.z, var);
            lc0.h[d].resize(var.size());
            for (std::size_t zi = 0; zi < var.size(); ++zi) lc0.h[d][zi] = dt * var[zi];
        }
        cost.g.variation(warm_start->terminal_values, warm_start->terminal_weights,
                         lp.term_u, lc0.G);
    } else {
        lc0 = linearize(cost, lp, zero_policy_moments(lp));
    }
    DPResult dp = dp_linear_oracle(lp, lc0);
    PolicyMoments cur = policy_moments(lp, dp.policy);
    rep.coupling.markov.push_back(dp.policy);
    rep.coupling.weight.push_back(1.0);
    double cur_value = cost_of_moments(lp, cost, cur);
    rep.gap = std::numeric_limits<double>::infinity();

    for (std::size_t k = 0; k < opts.max_iters; ++k) {
        rep.iterations = k + 1;
        LinearCost lc = linearize(cost, lp, cur);
        dp = dp_linear_oracle(lp, lc);
        rep.gap = dot_moments(lc, cur) - dp.value;
        if (rep.gap <= opts.tol) {
            rep.converged = true;
            break;
        }
        PolicyMoments vertex = policy_moments(lp, dp.policy);
        double gamma = 2.0 / double(k + 2);
        bool improved = false;
        for (int half = 0; half < 50; ++half) {
            PolicyMoments cand = cur;
            blend(cand, vertex, gamma);
            double cand_value = cost_of_moments(lp, cost, cand);
            if (cand_value <= cur_value) {
                cur = std::move(cand);
                cur_value = cand_value;
                push_policy(rep.coupling, dp.policy, gamma);
                improved = true;
                break;
            }
            gamma *= 0.5;
        }
        if (!improved) break;  // step collapsed; gap stays above tol
    }
    rep.value = cur_value;
    return rep;
}

BruteForceReport brute_force_Pn(const CostSpec& cost,
                                std::shared_ptr<const LevelProblem> prob, double policy_cap) {
    cost.validate();
    const LevelProblem& lp = *prob;
    const std::size_t steps = lp.steps();
    const std::size_t m = lp.wiener.step.size();
    const std::size_t nz = lp.n_actions();

    std::size_t nodes = 0, layer = 1;
    for (std::size_t d = 0; d < steps; ++d) {
        layer *= m;
        nodes += layer;
    }
    if (double(nodes) * std::log(double(nz)) > std::log(policy_cap))
        throw std::runtime_error("brute_force_Pn: policy count exceeds cap");

    // enumerate the m^steps increment paths once with their prefix codes
    std::size_t npaths = 1;
    for (std::size_t d = 0; d < steps; ++d) npaths *= m;
    if (npaths > 10'000'000) throw std::runtime_error("brute_force_Pn: path count exceeds cap");
    std::vector<std::vector<std::uint16_t>> paths(npaths, std::vector<std::uint16_t>(steps));
    std::vector<double> pathp(npaths, 1.0);
    for (std::size_t p = 0; p < npaths; ++p) {
        std::size_t rem = p;
        for (std::size_t d = steps; d-- > 0;) {
            paths[p][d] = std::uint16_t(rem % m);
            rem /= m;
        }
        for (std::size_t d = 0; d < steps; ++d) pathp[p] *= lp.wiener.step.p[paths[p][d]];
    }

    TreePolicy pol;
    pol.act.assign(steps, {});
    layer = 1;
    for (std::size_t d = 0; d < steps; ++d) {
        layer *= m;
        pol.act[d].assign(layer, 0);
    }

    std::vector<std::vector<double>> rate(steps, std::vector<double>(nz));
    std::vector<double> terminal(lp.term_states());
    double best = std::numeric_limits<double>::infinity();
    TreePolicy best_pol = pol;

    // odometer over all decision-node assignments
    std::vector<std::uint16_t*> slots;
    for (auto& lvl : pol.act)
        for (auto& a : lvl) slots.push_back(&a);

    bool done = false;
    while (!done) {
        for (auto& r : rate) std::fill(r.begin(), r.end(), 0.0);
        std::fill(terminal.begin(), terminal.end(), 0.0);
        for (std::size_t p = 0; p < npaths; ++p) {
            std::size_t xi = 0, si = 0, code = 0;
            for (std::size_t d = 0; d < steps; ++d) {
                std::size_t j = paths[p][d];
                code = code * m + j;
                std::size_t zi = pol.act[d][code];
                rate[d][zi] += pathp[p];
                xi = lp.wiener.next[d][xi][j];
                si = lp.snext[d][si][zi];
            }
            terminal[xi * lp.s_count(steps) + si] += pathp[p];
        }
        double total = 0.0;
        for (std::size_t d = 0; d < steps; ++d)
            total += lp.dt() * cost.f.value(lp.lattice.z, rate[d]);
        total += cost.g.value(lp.term_u, terminal);
        if (total < best) {
            best = total;
            best_pol = pol;
        }
        // advance the odometer
        std::size_t pos = 0;
        while (pos < slots.size()) {
            if (std::size_t(*slots[pos]) + 1 < nz) {
                ++*slots[pos];
                break;
            }
            *slots[pos] = 0;
            ++pos;
        }
        done = pos == slots.size();
    }

    BruteForceReport rep;
    rep.value = best;
    rep.coupling.prob = prob;
    rep.coupling.tree = std::move(best_pol);
    rep.deterministic_exact = cost.f.linear_in_law() && cost.g.linear_in_law();
    return rep;
}

LadderResult ladder(const CostSpec& cost, int n_max, int m, double T, double x0,
                    const ActionLattice& base_lattice, const SolveOptions& opts,
                    std::optional<double> reference) {
    if (n_max < 0 || n_max > 6)
        throw std::invalid_argument("ladder: need 0 <= n_max <= 6");
    if (!base_lattice.is_uniform())
        throw std::invalid_argument("ladder: uniform base lattice required");
    cost.validate();

    WienerFamily fam = quantize_wiener_family(n_max, m, T);
    LadderResult out;
    out.reference = reference;
    out.rungs.resize(n_max + 1);

    // fine to coarse; the projected optimum of rung n+1 seeds the
    // linearization of rung n
    std::vector<SolveReport> reports(n_max + 1);
    const DiscreteCausalCoupling* finer = nullptr;
    for (int n = n_max; n >= 0; --n) {
        auto prob = std::make_shared<LevelProblem>(LevelProblem::build(
            fam.levels[n], base_lattice.refined(n_max - n), x0));
        WarmStart warm;
        bool have_warm = false;
        if (finer) {
            ProjectedMoments pm = project_moments(*finer, n);
            warm.rate.assign(prob->steps(), std::vector<double>(prob->n_actions(), 0.0));
            for (std::size_t b = 0; b < pm.rate_values.size(); ++b) {
                // block averages of the finer lattice land exactly on this one
                for (std::size_t i = 0; i < pm.rate_values[b].size(); ++i) {
                    if (pm.rate_weights[b][i] == 0.0) continue;
                    double v = pm.rate_values[b][i];
                    std::size_t zi = std::size_t(
                        std::lround((v - prob->lattice.z.front()) / prob->lattice.spacing()));
                    warm.rate[b][std::min(zi, prob->n_actions() - 1)] +=
                        pm.rate_weights[b][i];
                }
            }
            warm.terminal_values = finer->prob->term_u;
            warm.terminal_weights = pm.terminal;
            have_warm = true;
        }
        reports[n] = solve_Pn(cost, prob, opts, have_warm ? &warm : nullptr);
        if (!reports[n].converged) out.all_converged = false;
        finer = &reports[n].coupling;
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int n = 0; n <= n_max; ++n) {
        LadderRung& rung = out.rungs[n];
        rung.n = n;
        rung.value = reports[n].value;
        rung.report = std::move(reports[n]);
        rung.gap_to_reference = reference ? *reference - rung.value : nan;
    }
    for (int n = 0; n <= n_max; ++n)
        out.rungs[n].margin =
            n < n_max ? out.rungs[n + 1].value - out.rungs[n].value : nan;
    return out;
}

}
