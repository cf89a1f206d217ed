#pragma once

#include <cstddef>
#include <vector>

namespace mfcx::transport {

// Finite set of admissible control rates. Sorted ascending, distinct,
// must contain 0 so the zero control is always feasible.
struct ActionLattice {
    std::vector<double> z;

    static ActionLattice uniform(double zmin, double zmax, std::size_t count);
    static ActionLattice from_values(std::vector<double> values);

    std::size_t size() const { return z.size(); }
    bool is_uniform(double tol = 1e-9) const;
    double spacing() const;  // uniform lattices only

    // count' = (count-1)*2^halvings + 1 over the same range; uniform only.
    // Block averages of 2^halvings points of this lattice land exactly on
    // the refined one, which keeps coarse-rung comparisons exact.
    ActionLattice refined(int halvings) const;

    void validate() const;
};

}
