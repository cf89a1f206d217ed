#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "mfcx/transport/cost.hpp"
#include "mfcx/transport/lattice.hpp"
#include "mfcx/transport/quantized_wiener.hpp"

namespace mfcx::transport {

// One rung of the discretized problem: the increment tree, the action
// lattice, and a recombining tree of running action sums that mirrors the
// x tree. The pair (x index, action-sum index) is a sufficient state: the
// terminal point is x0 + x + dt * (sum of actions) and per-step rate laws
// are read off the transitions.
struct LevelProblem {
    QuantizedWiener wiener;
    ActionLattice lattice;
    double x0 = 0.0;

    // ssupp[d]: sorted support of sums of d lattice values actually reachable;
    // snext[d][si][zi] indexes ssupp[d+1]
    std::vector<std::vector<double>> ssupp;
    std::vector<std::vector<std::vector<std::uint32_t>>> snext;
    std::vector<double> term_u;  // [xi * |ssupp[steps]| + si]

    std::size_t steps() const { return wiener.steps(); }
    double dt() const { return wiener.dt(); }
    std::size_t n_actions() const { return lattice.size(); }
    std::size_t s_count(std::size_t d) const { return ssupp[d].size(); }
    std::size_t term_states() const { return term_u.size(); }

    // states are capped because non-uniform lattices can make the running
    // action-sum support grow combinatorially
    static LevelProblem build(QuantizedWiener wiener, ActionLattice lattice, double x0,
                              std::size_t state_cap = 10'000'000);
};

// Deterministic policy on the recombined state space: the action for step d
// is chosen after the step's increment is revealed, so it is indexed by the
// post-increment x node and the pre-step action-sum node.
// act[d][x1 * s_count(d) + si] is an index into the lattice.
struct MarkovPolicy {
    std::vector<std::vector<std::uint16_t>> act;

    bool operator==(const MarkovPolicy& other) const { return act == other.act; }
};

// Deterministic policy on the non-recombined prefix tree, used by the
// exhaustive oracle. act[d][code] with code the base-m encoding of the
// increment indices (j_1..j_{d+1}).
struct TreePolicy {
    std::vector<std::vector<std::uint16_t>> act;
};

// Convex combination of deterministic policies. Mixtures arise as the
// iterates of the conditional-gradient solver; the exhaustive oracle
// returns a single tree policy instead.
struct DiscreteCausalCoupling {
    std::shared_ptr<const LevelProblem> prob;
    std::vector<double> weight;
    std::vector<MarkovPolicy> markov;
    std::optional<TreePolicy> tree;

    int level() const { return prob->wiener.level; }
    void validate() const;
};

// Per-step rate laws (indexed by the lattice) plus the terminal-state
// weights. These are the linear images of the coupling that every cost
// functional reads, and the objects the solver interpolates.
struct PolicyMoments {
    std::vector<std::vector<double>> rate;  // [step][lattice index]
    std::vector<double> terminal;           // [terminal state]
};

PolicyMoments policy_moments(const LevelProblem& prob, const MarkovPolicy& policy);
PolicyMoments policy_moments(const LevelProblem& prob, const TreePolicy& policy);
PolicyMoments coupling_moments(const DiscreteCausalCoupling& coupling);
PolicyMoments zero_policy_moments(const LevelProblem& prob);

// cost at the coupling's own level: dt * sum of f over per-step rate laws
// plus g on the terminal law
double cost_of_moments(const LevelProblem& prob, const CostSpec& cost,
                       const PolicyMoments& mom);

// Rate laws of the coupling after projecting to level k <= level(): rates are
// averaged over blocks of 2^(level-k) steps, exactly, including the policy
// feedback inside each block. Uniform lattices only. values/weights are
// parallel per coarse step.
struct ProjectedMoments {
    std::vector<std::vector<double>> rate_values;
    std::vector<std::vector<double>> rate_weights;
    std::vector<double> terminal;  // same terminal states as the fine level
};
ProjectedMoments project_moments(const DiscreteCausalCoupling& coupling, int k);

// c^k of the coupling viewed at level k <= its own level. k equal to the
// level evaluates the coupling directly; k below it evaluates the exact
// block-average projection. Throws on k above the level.
double cost_cn(const DiscreteCausalCoupling& coupling, const CostSpec& cost, int k);

// Flat list of path atoms: per atom the increment indices, the action
// indices, and the probability. Intended for small trees.
struct JointTable {
    std::size_t steps = 0;
    std::size_t m = 0;        // increment branching
    std::size_t n_act = 0;    // lattice size
    std::vector<std::vector<std::uint16_t>> xpath;
    std::vector<std::vector<std::uint16_t>> zpath;
    std::vector<double> prob;
};

JointTable to_joint_table(const DiscreteCausalCoupling& coupling,
                          std::size_t atom_cap = 2'000'000);

// Structural check: policy tables read only the revealed increments and the
// running action sum, so solver couplings are causal by construction. Also
// validates table shapes and weights.
bool check_causality(const DiscreteCausalCoupling& coupling);

// Factorization check on a raw joint table: for every step d, the
// conditional law of the actions up to d given the whole increment path
// must coincide with the one given only the increments up to d+1.
bool check_causality(const JointTable& table, double tol = 1e-10,
                     double* worst_violation = nullptr);

}
