#include "mfcx/transport/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfcx::transport {

ActionLattice ActionLattice::uniform(double zmin, double zmax, std::size_t count) {
    if (count < 2 || !(zmin < zmax))
        throw std::invalid_argument("ActionLattice::uniform: need zmin < zmax and count >= 2");
    ActionLattice lat;
    lat.z.resize(count);
    double h = (zmax - zmin) / double(count - 1);
    for (std::size_t i = 0; i < count; ++i) {
        double v = zmin + double(i) * h;
        if (std::abs(v) < 1e-12 * std::max(std::abs(zmin), std::abs(zmax))) v = 0.0;
        lat.z[i] = v;
    }
    lat.z.back() = zmax;
    lat.validate();
    return lat;
}

ActionLattice ActionLattice::from_values(std::vector<double> values) {
    ActionLattice lat;
    lat.z = std::move(values);
    std::sort(lat.z.begin(), lat.z.end());
    lat.z.erase(std::unique(lat.z.begin(), lat.z.end()), lat.z.end());
    lat.validate();
    return lat;
}

bool ActionLattice::is_uniform(double tol) const {
    if (z.size() < 2) return true;
    double h = (z.back() - z.front()) / double(z.size() - 1);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (std::abs(z[i] - (z.front() + double(i) * h)) > tol * std::max(1.0, std::abs(z[i])))
            return false;
    }
    return true;
}

double ActionLattice::spacing() const {
    if (z.size() < 2) return 0.0;
    return (z.back() - z.front()) / double(z.size() - 1);
}

ActionLattice ActionLattice::refined(int halvings) const {
    if (halvings < 0) throw std::invalid_argument("ActionLattice::refined: need halvings >= 0");
    if (!is_uniform())
        throw std::invalid_argument("ActionLattice::refined: lattice must be uniform");
    if (halvings == 0) return *this;
    std::size_t count = (z.size() - 1) * (std::size_t(1) << halvings) + 1;
    return uniform(z.front(), z.back(), count);
}

void ActionLattice::validate() const {
    if (z.empty()) throw std::invalid_argument("ActionLattice: empty");
    for (std::size_t i = 1; i < z.size(); ++i)
        if (!(z[i] > z[i - 1])) throw std::invalid_argument("ActionLattice: values not increasing");
    bool has_zero = false;
    for (double v : z) has_zero = has_zero || v == 0.0;
    if (!has_zero) throw std::invalid_argument("ActionLattice: must contain 0");
}

}
