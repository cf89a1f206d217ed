#pragma once

#include <optional>
#include <vector>

#include "mfcx/transport/coupling.hpp"

namespace mfcx::transport {

// Linear objective on couplings: per-step action weights (already scaled by
// whatever time weight applies) plus per-terminal-state weights. This is the
// image of any first-variation linearization, and it is separable over the
// tree, which is what the backward recursion needs.
struct LinearCost {
    std::vector<std::vector<double>> h;  // [step][lattice index]
    std::vector<double> G;               // [terminal state]
};

struct DPResult {
    double value = 0.0;
    MarkovPolicy policy;
};

// Exact minimizer of a LinearCost over causal couplings. A deterministic
// recombined-state policy attains the minimum; ties go to the action of
// least magnitude, negative first, for cross-platform determinism.
DPResult dp_linear_oracle(const LevelProblem& prob, const LinearCost& cost);

struct SolveOptions {
    std::size_t max_iters = 200;
    double tol = 1e-6;
};

struct SolveReport {
    double value = 0.0;
    double gap = 0.0;  // final linearization gap; a duality gap for convex costs
    std::size_t iterations = 0;
    bool converged = false;
    DiscreteCausalCoupling coupling;
};

// Initial linearization point. Rate laws live on the problem's own lattice;
// the terminal law may sit on any finite support (a finer rung's terminal
// states project onto coarse values but not onto coarse state indices).
struct WarmStart {
    std::vector<std::vector<double>> rate;  // [step][lattice index]
    std::vector<double> terminal_values;
    std::vector<double> terminal_weights;
};

// Conditional-gradient solve of the level problem. The objective is convex
// in the coupling whenever f and g pass the mixture-convexity probes; each
// iteration linearizes at the current moments, calls the DP oracle, and
// takes a 2/(k+2) step shortened until the value does not increase. Stops
// when the linearization gap falls below tol. On non-convergence the best
// iterate and its gap are returned with converged = false.
SolveReport solve_Pn(const CostSpec& cost, std::shared_ptr<const LevelProblem> prob,
                     const SolveOptions& opts = {},
                     const WarmStart* warm_start = nullptr);

struct BruteForceReport {
    double value = 0.0;
    DiscreteCausalCoupling coupling;
    // mixtures of policies cannot improve on the best deterministic one only
    // when the cost is linear in the laws; nonlinear costs are flagged
    bool deterministic_exact = true;
};

// Exhaustive minimum over deterministic prefix-tree policies. The policy
// count |lattice|^(number of decision nodes) must stay below policy_cap.
BruteForceReport brute_force_Pn(const CostSpec& cost,
                                std::shared_ptr<const LevelProblem> prob,
                                double policy_cap = 1e7);

struct LadderRung {
    int n = 0;
    double value = 0.0;
    double margin = 0.0;            // value(n+1) - value(n); NaN on the last rung
    double gap_to_reference = 0.0;  // reference - value; NaN without a reference
    SolveReport report;
};

struct LadderResult {
    std::vector<LadderRung> rungs;
    std::optional<double> reference;
    bool all_converged = true;
};

// Solves every rung 0..n_max on one refinement-consistent increment family.
// Rung n uses the base lattice refined (n_max - n) times so that block
// averages of fine-rung actions stay representable, which keeps cross-rung
// comparisons exact. Rungs are solved fine-to-coarse; each coarse rung is
// warm-started from the projection of the finer optimum.
LadderResult ladder(const CostSpec& cost, int n_max, int m, double T, double x0,
                    const ActionLattice& base_lattice, const SolveOptions& opts = {},
                    std::optional<double> reference = std::nullopt);

}
