#pragma once

#include <cstdint>
#include <vector>

namespace mfcx::transport {

// Finite law of one increment. Support sorted ascending, weights positive.
struct IncrementLaw {
    std::vector<double> v;
    std::vector<double> p;

    std::size_t size() const { return v.size(); }
    double mean() const;
    double variance() const;
};

// m-point Gauss-Hermite quantization of N(0, var). Exact for polynomial
// moments up to degree 2m-1, so mean and variance are exact for m >= 2.
IncrementLaw gauss_hermite_law(int m, double var);

// Law of the sum of two independent increments. Values closer than tol are
// merged; the first value of a cluster is kept as representative.
IncrementLaw convolve(const IncrementLaw& a, const IncrementLaw& b, double tol = 1e-11);

// k-fold convolution of a law with itself.
IncrementLaw convolve_power(const IncrementLaw& base, std::size_t k, double tol = 1e-11);

// Recombining tree of partial sums of iid increments over 2^level steps.
// xsupp[d] is the sorted support after d steps, xsupp[0] = {0}.
// next[d][i][j] indexes xsupp[d+1] at xsupp[d][i] + step.v[j].
struct QuantizedWiener {
    int level = 0;
    int m = 0;          // quantization points per finest increment
    double T = 1.0;
    IncrementLaw step;  // shared by all steps at this level
    std::vector<std::vector<double>> xsupp;
    std::vector<std::vector<std::vector<std::uint32_t>>> next;
    std::vector<std::vector<double>> node_prob;

    std::size_t steps() const { return std::size_t(1) << level; }
    double dt() const { return T / double(steps()); }

    // step mean 0 within 1e-12, step variance T*2^-level within 1e-9,
    // node probabilities sum to 1 per depth
    void validate() const;
};

// Standalone quantization: each of the 2^level steps carries its own
// m-point law of N(0, T*2^-level).
QuantizedWiener quantize_wiener(int level, int m, double T);

// Refinement-consistent family: the level-n step law is the 2^(n_max-n)-fold
// convolution of the level-n_max law, so every coarse tree is the exact
// marginalization of the finest one. Required for rung-to-rung comparisons.
struct WienerFamily {
    int n_max = 0;
    int m = 0;
    double T = 1.0;
    std::vector<QuantizedWiener> levels;
};

WienerFamily quantize_wiener_family(int n_max, int m, double T);

}
