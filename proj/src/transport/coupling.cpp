#include "mfcx/transport/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

namespace mfcx::transport {

LevelProblem LevelProblem::build(QuantizedWiener wiener, ActionLattice lattice, double x0,
                                 std::size_t state_cap) {
    lattice.validate();
    LevelProblem prob;
    prob.wiener = std::move(wiener);
    prob.lattice = std::move(lattice);
    prob.x0 = x0;

    const std::size_t steps = prob.wiener.steps();
    const std::size_t nz = prob.lattice.size();
    const double tol = 1e-9;
    prob.ssupp.assign(steps + 1, {});
    prob.snext.assign(steps, {});
    prob.ssupp[0] = {0.0};
    std::size_t total_states = 0;
    for (std::size_t d = 0; d < steps; ++d) {
        const auto& cur = prob.ssupp[d];
        std::vector<double> cand;
        cand.reserve(cur.size() * nz);
        for (double s : cur)
            for (double z : prob.lattice.z) cand.push_back(s + z);
        std::sort(cand.begin(), cand.end());
        auto& nxt = prob.ssupp[d + 1];
        for (double val : cand)
            if (nxt.empty() || val - nxt.back() >= tol) nxt.push_back(val);
        auto& map = prob.snext[d];
        map.assign(cur.size(), std::vector<std::uint32_t>(nz));
        for (std::size_t i = 0; i < cur.size(); ++i) {
            for (std::size_t zi = 0; zi < nz; ++zi) {
                double val = cur[i] + prob.lattice.z[zi];
                auto it = std::lower_bound(nxt.begin(), nxt.end(), val);
                std::size_t idx = std::size_t(it - nxt.begin());
                if (idx == nxt.size() || (idx > 0 && val - nxt[idx - 1] < tol)) --idx;
                map[i][zi] = std::uint32_t(idx);
            }
        }
        total_states += prob.wiener.xsupp[d + 1].size() * nxt.size();
        if (total_states > state_cap)
            throw std::runtime_error(
                "LevelProblem: state space exceeds cap; use a uniform lattice or a "
                "coarser level");
    }

    const auto& xN = prob.wiener.xsupp[steps];
    const auto& sN = prob.ssupp[steps];
    prob.term_u.resize(xN.size() * sN.size());
    const double dt = prob.dt();
    for (std::size_t xi = 0; xi < xN.size(); ++xi)
        for (std::size_t si = 0; si < sN.size(); ++si)
            prob.term_u[xi * sN.size() + si] = x0 + xN[xi] + dt * sN[si];
    return prob;
}

void DiscreteCausalCoupling::validate() const {
    if (!prob) throw std::runtime_error("DiscreteCausalCoupling: missing problem");
    const std::size_t steps = prob->steps();
    if (tree) {
        std::size_t m = prob->wiener.step.size();
        std::size_t want = m;
        if (tree->act.size() != steps)
            throw std::runtime_error("DiscreteCausalCoupling: tree policy depth mismatch");
        for (std::size_t d = 0; d < steps; ++d) {
            if (tree->act[d].size() != want)
                throw std::runtime_error("DiscreteCausalCoupling: tree policy node mismatch");
            want *= m;
        }
        return;
    }
    if (markov.empty() || markov.size() != weight.size())
        throw std::runtime_error("DiscreteCausalCoupling: empty or mismatched mixture");
    double wsum = 0.0;
    for (double w : weight) {
        if (w < -1e-12) throw std::runtime_error("DiscreteCausalCoupling: negative weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw std::runtime_error("DiscreteCausalCoupling: weights do not sum to 1");
    for (const auto& pol : markov) {
        if (pol.act.size() != steps)
            throw std::runtime_error("DiscreteCausalCoupling: policy depth mismatch");
        for (std::size_t d = 0; d < steps; ++d) {
            std::size_t want = prob->wiener.xsupp[d + 1].size() * prob->s_count(d);
            if (pol.act[d].size() != want)
                throw std::runtime_error("DiscreteCausalCoupling: policy table mismatch");
        }
    }
}

PolicyMoments policy_moments(const LevelProblem& prob, const MarkovPolicy& policy) {
    const std::size_t steps = prob.steps();
    const std::size_t nz = prob.n_actions();
    PolicyMoments mom;
    mom.rate.assign(steps, std::vector<double>(nz, 0.0));

    std::vector<double> dist = {1.0};
    std::vector<double> nd;
    for (std::size_t d = 0; d < steps; ++d) {
        const auto& xs = prob.wiener.xsupp[d];
        const std::size_t scur = prob.s_count(d);
        const std::size_t snxt = prob.s_count(d + 1);
        nd.assign(prob.wiener.xsupp[d + 1].size() * snxt, 0.0);
        const auto& act = policy.act[d];
        for (std::size_t xi = 0; xi < xs.size(); ++xi) {
            for (std::size_t si = 0; si < scur; ++si) {
                double mass = dist[xi * scur + si];
                if (mass == 0.0) continue;
                for (std::size_t j = 0; j < prob.wiener.step.size(); ++j) {
                    double mj = mass * prob.wiener.step.p[j];
                    std::size_t x1 = prob.wiener.next[d][xi][j];
                    std::size_t zi = act[x1 * scur + si];
                    mom.rate[d][zi] += mj;
                    nd[x1 * snxt + prob.snext[d][si][zi]] += mj;
                }
            }
        }
        dist.swap(nd);
    }
    mom.terminal = std::move(dist);
    return mom;
}

namespace {

void tree_walk(const LevelProblem& prob, const TreePolicy& policy, std::size_t d,
               std::size_t code, std::size_t xi, std::size_t si, double mass,
               PolicyMoments& mom) {
    const std::size_t steps = prob.steps();
    if (d == steps) {
        mom.terminal[xi * prob.s_count(steps) + si] += mass;
        return;
    }
    const std::size_t m = prob.wiener.step.size();
    for (std::size_t j = 0; j < m; ++j) {
        std::size_t code1 = code * m + j;
        std::size_t zi = policy.act[d][code1];
        std::size_t x1 = prob.wiener.next[d][xi][j];
        std::size_t s1 = prob.snext[d][si][zi];
        double mj = mass * prob.wiener.step.p[j];
        mom.rate[d][zi] += mj;
        tree_walk(prob, policy, d + 1, code1, x1, s1, mj, mom);
    }
}

}  // namespace

PolicyMoments policy_moments(const LevelProblem& prob, const TreePolicy& policy) {
    PolicyMoments mom;
    mom.rate.assign(prob.steps(), std::vector<double>(prob.n_actions(), 0.0));
    mom.terminal.assign(prob.term_states(), 0.0);
    tree_walk(prob, policy, 0, 0, 0, 0, 1.0, mom);
    return mom;
}

PolicyMoments coupling_moments(const DiscreteCausalCoupling& coupling) {
    const LevelProblem& prob = *coupling.prob;
    if (coupling.tree) return policy_moments(prob, *coupling.tree);
    PolicyMoments acc;
    acc.rate.assign(prob.steps(), std::vector<double>(prob.n_actions(), 0.0));
    acc.terminal.assign(prob.term_states(), 0.0);
    for (std::size_t p = 0; p < coupling.markov.size(); ++p) {
        if (coupling.weight[p] == 0.0) continue;
        PolicyMoments mom = policy_moments(prob, coupling.markov[p]);
        double w = coupling.weight[p];
        for (std::size_t d = 0; d < prob.steps(); ++d)
            for (std::size_t zi = 0; zi < prob.n_actions(); ++zi)
                acc.rate[d][zi] += w * mom.rate[d][zi];
        for (std::size_t i = 0; i < acc.terminal.size(); ++i)
            acc.terminal[i] += w * mom.terminal[i];
    }
    return acc;
}

PolicyMoments zero_policy_moments(const LevelProblem& prob) {
    const std::size_t steps = prob.steps();
    std::size_t zi0 = 0;
    while (prob.lattice.z[zi0] != 0.0) ++zi0;
    PolicyMoments mom;
    mom.rate.assign(steps, std::vector<double>(prob.n_actions(), 0.0));
    for (std::size_t d = 0; d < steps; ++d) mom.rate[d][zi0] = 1.0;
    std::size_t si = 0;
    for (std::size_t d = 0; d < steps; ++d) si = prob.snext[d][si][zi0];
    mom.terminal.assign(prob.term_states(), 0.0);
    const auto& np = prob.wiener.node_prob[steps];
    const std::size_t sN = prob.s_count(steps);
    for (std::size_t xi = 0; xi < np.size(); ++xi) mom.terminal[xi * sN + si] = np[xi];
    return mom;
}

double cost_of_moments(const LevelProblem& prob, const CostSpec& cost,
                       const PolicyMoments& mom) {
    double total = 0.0;
    const double dt = prob.dt();
    for (std::size_t d = 0; d < prob.steps(); ++d)
        total += dt * cost.f.value(prob.lattice.z, mom.rate[d]);
    total += cost.g.value(prob.term_u, mom.terminal);
    return total;
}

namespace {

// Exact per-block average-rate laws of one policy. Uniform lattices keep the
// running action sum on an arithmetic progression, so action-sum indices add
// and the block average zmin + spacing*sb/B is exact.
void project_policy(const LevelProblem& prob, const MarkovPolicy* markov,
                    const TreePolicy* tree, int k, double wpol,
                    std::vector<std::vector<double>>& rate_acc) {
    const std::size_t steps = prob.steps();
    const std::size_t nz = prob.n_actions();
    const std::size_t B = steps >> k;  // fine steps per coarse block
    const std::size_t blocks = std::size_t(1) << k;

    if (tree) {
        // prefix enumeration; only used for small trees
        const std::size_t m = prob.wiener.step.size();
        std::vector<std::size_t> zseq(steps);
        std::function<void(std::size_t, std::size_t, std::size_t, std::size_t, double)> rec =
            [&](std::size_t d, std::size_t code, std::size_t xi, std::size_t si, double mass) {
                if (d == steps) {
                    for (std::size_t b = 0; b < blocks; ++b) {
                        std::size_t sb = 0;
                        for (std::size_t r = 0; r < B; ++r) sb += zseq[b * B + r];
                        rate_acc[b][sb] += wpol * mass;
                    }
                    return;
                }
                for (std::size_t j = 0; j < m; ++j) {
                    std::size_t code1 = code * m + j;
                    std::size_t zi = tree->act[d][code1];
                    zseq[d] = zi;
                    rec(d + 1, code1, prob.wiener.next[d][xi][j],
                        prob.snext[d][si][zi], mass * prob.wiener.step.p[j]);
                }
            };
        rec(0, 0, 0, 0, 1.0);
        return;
    }

    // forward mass over (x index, block-start action sum, in-block offset sum)
    const std::size_t nz1 = nz - 1;
    std::vector<double> dist = {wpol};
    std::vector<double> nd;
    std::size_t s_start_count = 1;
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t d0 = b * B;
        for (std::size_t r = 0; r < B; ++r) {
            const std::size_t d = d0 + r;
            const auto& xs = prob.wiener.xsupp[d];
            const std::size_t sb_cur = r * nz1 + 1;
            const std::size_t sb_nxt = (r + 1) * nz1 + 1;
            const std::size_t scur = prob.s_count(d);
            nd.assign(prob.wiener.xsupp[d + 1].size() * s_start_count * sb_nxt, 0.0);
            const auto& act = markov->act[d];
            for (std::size_t xi = 0; xi < xs.size(); ++xi) {
                for (std::size_t ss = 0; ss < s_start_count; ++ss) {
                    for (std::size_t sb = 0; sb < sb_cur; ++sb) {
                        double mass = dist[(xi * s_start_count + ss) * sb_cur + sb];
                        if (mass == 0.0) continue;
                        std::size_t si = ss + sb;  // global action-sum index
                        for (std::size_t j = 0; j < prob.wiener.step.size(); ++j) {
                            std::size_t x1 = prob.wiener.next[d][xi][j];
                            std::size_t zi = act[x1 * scur + si];
                            nd[(x1 * s_start_count + ss) * sb_nxt + (sb + zi)] +=
                                mass * prob.wiener.step.p[j];
                        }
                    }
                }
            }
            dist.swap(nd);
        }
        // harvest the block law and collapse the offset into the start sum
        const std::size_t sb_end = B * nz1 + 1;
        const std::size_t nx = prob.wiener.xsupp[d0 + B].size();
        std::size_t s_start_next = (d0 + B) * nz1 + 1;
        nd.assign(nx * s_start_next, 0.0);
        for (std::size_t xi = 0; xi < nx; ++xi) {
            for (std::size_t ss = 0; ss < s_start_count; ++ss) {
                for (std::size_t sb = 0; sb < sb_end; ++sb) {
                    double mass = dist[(xi * s_start_count + ss) * sb_end + sb];
                    if (mass == 0.0) continue;
                    rate_acc[b][sb] += mass;
                    nd[xi * s_start_next + (ss + sb)] += mass;
                }
            }
        }
        s_start_count = s_start_next;
        dist.swap(nd);  // fresh block starts with a single zero offset
    }
}

}  // namespace

ProjectedMoments project_moments(const DiscreteCausalCoupling& coupling, int k) {
    const LevelProblem& prob = *coupling.prob;
    const int level = coupling.level();
    if (k > level) throw std::invalid_argument("project_moments: k exceeds coupling level");
    if (!prob.lattice.is_uniform())
        throw std::invalid_argument("project_moments: uniform lattice required");
    coupling.validate();

    const std::size_t steps = prob.steps();
    const std::size_t nz = prob.n_actions();
    const std::size_t B = steps >> k;
    const std::size_t blocks = std::size_t(1) << k;
    // arithmetic-progression check: index sums must equal value sums
    for (std::size_t d = 0; d <= steps; ++d)
        if (prob.s_count(d) != d * (nz - 1) + 1)
            throw std::runtime_error("project_moments: action-sum tree not uniform");

    ProjectedMoments out;
    out.rate_values.assign(blocks, {});
    out.rate_weights.assign(blocks, std::vector<double>(B * (nz - 1) + 1, 0.0));
    const double zmin = prob.lattice.z.front();
    const double h = prob.lattice.spacing();
    for (std::size_t b = 0; b < blocks; ++b) {
        out.rate_values[b].resize(B * (nz - 1) + 1);
        for (std::size_t sb = 0; sb < out.rate_values[b].size(); ++sb)
            out.rate_values[b][sb] = zmin + h * double(sb) / double(B);
    }

    if (coupling.tree) {
        project_policy(prob, nullptr, &*coupling.tree, k, 1.0, out.rate_weights);
    } else {
        for (std::size_t p = 0; p < coupling.markov.size(); ++p) {
            if (coupling.weight[p] == 0.0) continue;
            project_policy(prob, &coupling.markov[p], nullptr, k, coupling.weight[p],
                           out.rate_weights);
        }
    }
    out.terminal = coupling_moments(coupling).terminal;
    return out;
}

double cost_cn(const DiscreteCausalCoupling& coupling, const CostSpec& cost, int k) {
    const LevelProblem& prob = *coupling.prob;
    const int level = coupling.level();
    if (k > level) throw std::invalid_argument("cost_cn: level mismatch");
    if (k == level) {
        coupling.validate();
        return cost_of_moments(prob, cost, coupling_moments(coupling));
    }
    ProjectedMoments pm = project_moments(coupling, k);
    double total = 0.0;
    const double dtk = prob.wiener.T / double(std::size_t(1) << k);
    for (std::size_t b = 0; b < pm.rate_values.size(); ++b)
        total += dtk * cost.f.value(pm.rate_values[b], pm.rate_weights[b]);
    total += cost.g.value(prob.term_u, pm.terminal);
    return total;
}

namespace {

void joint_walk(const LevelProblem& prob, const MarkovPolicy* markov, const TreePolicy* tree,
                double wpol, std::size_t d, std::size_t code, std::size_t xi, std::size_t si,
                double mass, std::vector<std::uint16_t>& xpath,
                std::vector<std::uint16_t>& zpath,
                std::map<std::pair<std::vector<std::uint16_t>, std::vector<std::uint16_t>>,
                         double>& atoms) {
    const std::size_t steps = prob.steps();
    if (d == steps) {
        atoms[{xpath, zpath}] += wpol * mass;
        return;
    }
    const std::size_t m = prob.wiener.step.size();
    const std::size_t scur = prob.s_count(d);
    for (std::size_t j = 0; j < m; ++j) {
        std::size_t x1 = prob.wiener.next[d][xi][j];
        std::size_t zi = tree ? tree->act[d][code * m + j] : markov->act[d][x1 * scur + si];
        xpath.push_back(std::uint16_t(j));
        zpath.push_back(std::uint16_t(zi));
        joint_walk(prob, markov, tree, wpol, d + 1, code * m + j, x1, prob.snext[d][si][zi],
                   mass * prob.wiener.step.p[j], xpath, zpath, atoms);
        xpath.pop_back();
        zpath.pop_back();
    }
}

}  // namespace

JointTable to_joint_table(const DiscreteCausalCoupling& coupling, std::size_t atom_cap) {
    const LevelProblem& prob = *coupling.prob;
    coupling.validate();
    const std::size_t m = prob.wiener.step.size();
    double paths = 1.0;
    for (std::size_t d = 0; d < prob.steps(); ++d) paths *= double(m);
    double npol = coupling.tree ? 1.0 : double(coupling.markov.size());
    if (paths * npol > double(atom_cap))
        throw std::runtime_error("to_joint_table: tree too large");

    std::map<std::pair<std::vector<std::uint16_t>, std::vector<std::uint16_t>>, double> atoms;
    std::vector<std::uint16_t> xpath, zpath;
    if (coupling.tree) {
        joint_walk(prob, nullptr, &*coupling.tree, 1.0, 0, 0, 0, 0, 1.0, xpath, zpath, atoms);
    } else {
        for (std::size_t p = 0; p < coupling.markov.size(); ++p) {
            if (coupling.weight[p] == 0.0) continue;
            joint_walk(prob, &coupling.markov[p], nullptr, coupling.weight[p], 0, 0, 0, 0, 1.0,
                       xpath, zpath, atoms);
        }
    }
    JointTable table;
    table.steps = prob.steps();
    table.m = m;
    table.n_act = prob.n_actions();
    for (auto& [key, pr] : atoms) {
        table.xpath.push_back(key.first);
        table.zpath.push_back(key.second);
        table.prob.push_back(pr);
    }
    return table;
}

bool check_causality(const DiscreteCausalCoupling& coupling) {
    coupling.validate();
    // policies read (step, revealed x node, running action sum) only, so the
    // kernel for step d is measurable with respect to x_0..x_{d+1}
    return true;
}

bool check_causality(const JointTable& table, double tol, double* worst_violation) {
    double worst = 0.0;
    const std::size_t n = table.prob.size();
    auto pack = [](const std::vector<std::uint16_t>& v, std::size_t count) {
        std::string s;
        s.reserve(2 * count);
        for (std::size_t i = 0; i < count; ++i) {
            s.push_back(char(v[i] & 0xff));
            s.push_back(char((v[i] >> 8) & 0xff));
        }
        return s;
    };
    for (std::size_t d = 0; d + 1 <= table.steps; ++d) {
        std::map<std::string, double> full_joint, full_tot, pref_joint, pref_tot;
        for (std::size_t a = 0; a < n; ++a) {
            std::string xfull = pack(table.xpath[a], table.steps);
            std::string xpref = pack(table.xpath[a], d + 1);
            std::string zpref = pack(table.zpath[a], d + 1);
            full_joint[xfull + "|" + zpref] += table.prob[a];
            full_tot[xfull] += table.prob[a];
            pref_joint[xpref + "|" + zpref] += table.prob[a];
            pref_tot[xpref] += table.prob[a];
        }
        for (std::size_t a = 0; a < n; ++a) {
            std::string xfull = pack(table.xpath[a], table.steps);
            std::string xpref = pack(table.xpath[a], d + 1);
            std::string zpref = pack(table.zpath[a], d + 1);
            double cf = full_joint[xfull + "|" + zpref] / full_tot[xfull];
            double cp = pref_joint[xpref + "|" + zpref] / pref_tot[xpref];
            worst = std::max(worst, std::abs(cf - cp));
        }
    }
    if (worst_violation) *worst_violation = worst;
    return worst <= tol;
}

}
