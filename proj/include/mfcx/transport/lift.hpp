#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mfcx/ensemble.hpp"
#include "mfcx/transport/coupling.hpp"

namespace mfcx::transport {

// Terminal target as a function of the independent uniform draw, the current
// Brownian value and the start point. The bridge drift steers the state to
// the target evaluated at the endpoint.
using BridgeMap = std::function<double(double u, double w, double x0)>;

// Simulates dX = (psi(U, W_t, x0) - X_t)/(T - t) dt + dW_t on [0, T] by
// Euler stepping, with the closed-form assignment X_T = psi(U, W_T, x0) on
// the final step. Channels "X" and "W" are snapshotted on a bounded stride.
// Per particle, the uniform U is drawn before the path normals.
mfcx::ParticleEnsemble lift_bridge(const BridgeMap& psi, double T, double x0, std::size_t N,
                                   std::size_t steps, std::uint64_t seed);

// Paths realizing a level-0 or level-1 coupling against a true Brownian
// carrier. The policy is re-read on the continuous path: the increment over
// each block is binned into its quantile cell, the action is drawn from the
// coupling kernel by inverse CDF, and a per-block bridge steers to the
// endpoint x_start + (W_end - W_start) + dt * z. Realized block rates are
// then exact lattice actions; only the terminal positions carry the
// cell-versus-atom quantization spread.
struct LiftResult {
    mfcx::ParticleEnsemble ens;  // channels "X", "W"
    std::vector<double> terminal;
    std::vector<std::vector<std::uint16_t>> atom;  // [block][particle] cell index
    std::vector<std::vector<std::uint16_t>> zidx;  // [block][particle] action index
};

LiftResult lift_to_sde(const DiscreteCausalCoupling& coupling, std::size_t N,
                       std::size_t steps, std::uint64_t seed);

struct LiftDiagnostics {
    double block_cost = 0.0;       // cost of the lifted paths in block-rate form
    double coupling_cost = 0.0;    // cost_cn of the input coupling
    double rate_w2_max = 0.0;      // worst per-block W2^2, empirical vs coupling rates
    double terminal_w2 = 0.0;      // W2^2 of the terminal laws
    double atom_weight_err = 0.0;  // worst |cell frequency - atom probability|
    double conditional_w2 = 0.0;   // frequency-weighted terminal W2^2 given the atom path
};

LiftDiagnostics lift_diagnostics(const DiscreteCausalCoupling& coupling,
                                 const LiftResult& lift, const CostSpec& cost);

}
