#include "mfcx/transport/quantized_wiener.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfcx::transport {

double IncrementLaw::mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += p[i] * v[i];
    return s;
}

double IncrementLaw::variance() const {
    double m1 = mean(), s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        double d = v[i] - m1;
        s += p[i] * d * d;
    }
    return s;
}

namespace {

// Physicists' Gauss-Hermite rule (weight e^{-x^2}) by Newton iteration on the
// orthonormal recurrence. Nodes ascending, weights sum to sqrt(pi).
void gauss_hermite_physicists(int m, std::vector<double>& x, std::vector<double>& w) {
    x.assign(m, 0.0);
    w.assign(m, 0.0);
    const double pim4 = 0.7511255444649425;  // pi^{-1/4}
    int half = (m + 1) / 2;
    double z = 0.0, z1 = 0.0, z2 = 0.0;
    for (int i = 0; i < half; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * m + 1.0) - 1.85575 * std::pow(2.0 * m + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            z -= 1.14 * std::pow(double(m), 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * z2;  // z2 holds the first root here
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * z2;
        } else {
            z = 2.0 * z - z2;
        }
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 1; j <= m; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * m) * p2;
            double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        z2 = z1;
        z1 = z;
        x[m - 1 - i] = z;        // largest roots first from the initial guesses
        x[i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[m - 1 - i] = w[i];
    }
    if (m % 2 == 1) x[m / 2] = 0.0;
}

}  // namespace

IncrementLaw gauss_hermite_law(int m, double var) {
    if (m < 2) throw std::invalid_argument("gauss_hermite_law: need m >= 2");
    if (!(var > 0.0)) throw std::invalid_argument("gauss_hermite_law: need var > 0");
    std::vector<double> x, w;
    gauss_hermite_physicists(m, x, w);
    IncrementLaw law;
    law.v.resize(m);
    law.p.resize(m);
    double wsum = 0.0;
    for (int i = 0; i < m; ++i) wsum += w[i];
    double sd = std::sqrt(var);
    for (int i = 0; i < m; ++i) {
        law.v[i] = std::sqrt(2.0) * x[i] * sd;  // physicists' -> N(0, var) nodes
        law.p[i] = w[i] / wsum;
    }
    // exact symmetry; also pins the middle node of odd rules to 0
    for (int i = 0; i < m / 2; ++i) law.v[i] = -law.v[m - 1 - i];
    if (m % 2 == 1) law.v[m / 2] = 0.0;
    return law;
}

IncrementLaw convolve(const IncrementLaw& a, const IncrementLaw& b, double tol) {
    std::vector<std::pair<double, double>> items;
    items.reserve(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            items.emplace_back(a.v[i] + b.v[j], a.p[i] * b.p[j]);
    std::sort(items.begin(), items.end());
    IncrementLaw out;
    for (const auto& [val, pr] : items) {
        if (!out.v.empty() && val - out.v.back() < tol) {
            out.p.back() += pr;
        } else {
            out.v.push_back(val);
            out.p.push_back(pr);
        }
    }
    return out;
}

IncrementLaw convolve_power(const IncrementLaw& base, std::size_t k, double tol) {
    IncrementLaw acc;
    acc.v = {0.0};
    acc.p = {1.0};
    for (std::size_t i = 0; i < k; ++i) acc = convolve(acc, base, tol);
    return acc;
}

namespace {

// Builds the recombining partial-sum tree for iid increments.
void build_tree(QuantizedWiener& qw) {
    const std::size_t steps = qw.steps();
    const std::size_t mj = qw.step.size();
    const double tol = 1e-9;
    qw.xsupp.assign(steps + 1, {});
    qw.next.assign(steps, {});
    qw.node_prob.assign(steps + 1, {});
    qw.xsupp[0] = {0.0};
    qw.node_prob[0] = {1.0};
    for (std::size_t d = 0; d < steps; ++d) {
        const auto& cur = qw.xsupp[d];
        std::vector<double> cand;
        cand.reserve(cur.size() * mj);
        for (double x : cur)
            for (double inc : qw.step.v) cand.push_back(x + inc);
        std::sort(cand.begin(), cand.end());
        auto& nxt = qw.xsupp[d + 1];
        for (double val : cand) {
            if (nxt.empty() || val - nxt.back() >= tol) nxt.push_back(val);
        }
        auto& map = qw.next[d];
        map.assign(cur.size(), std::vector<std::uint32_t>(mj));
        qw.node_prob[d + 1].assign(nxt.size(), 0.0);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            for (std::size_t j = 0; j < mj; ++j) {
                double val = cur[i] + qw.step.v[j];
                auto it = std::lower_bound(nxt.begin(), nxt.end(), val);
                std::size_t idx = std::size_t(it - nxt.begin());
                // the merge keeps cluster heads, so val may sit just above its head
                if (idx == nxt.size() || (idx > 0 && val - nxt[idx - 1] < tol)) --idx;
                map[i][j] = std::uint32_t(idx);
                qw.node_prob[d + 1][idx] += qw.node_prob[d][i] * qw.step.p[j];
            }
        }
    }
}

}  // namespace

void QuantizedWiener::validate() const {
    if (std::abs(step.mean()) > 1e-12)
        throw std::runtime_error("QuantizedWiener: step mean not centered");
    double want = T / double(steps());
    if (std::abs(step.variance() - want) > 1e-9)
        throw std::runtime_error("QuantizedWiener: step variance mismatch");
    for (const auto& probs : node_prob) {
        double s = 0.0;
        for (double p : probs) s += p;
        if (std::abs(s - 1.0) > 1e-10)
            throw std::runtime_error("QuantizedWiener: node probabilities do not sum to 1");
    }
}

QuantizedWiener quantize_wiener(int level, int m, double T) {
    if (level < 0) throw std::invalid_argument("quantize_wiener: need level >= 0");
    if (!(T > 0.0)) throw std::invalid_argument("quantize_wiener: need T > 0");
    QuantizedWiener qw;
    qw.level = level;
    qw.m = m;
    qw.T = T;
    qw.step = gauss_hermite_law(m, T / double(qw.steps()));
    build_tree(qw);
    qw.validate();
    return qw;
}

WienerFamily quantize_wiener_family(int n_max, int m, double T) {
    if (n_max < 0) throw std::invalid_argument("quantize_wiener_family: need n_max >= 0");
    WienerFamily fam;
    fam.n_max = n_max;
    fam.m = m;
    fam.T = T;
    IncrementLaw fine = gauss_hermite_law(m, T / double(std::size_t(1) << n_max));
    fam.levels.resize(n_max + 1);
    for (int n = n_max; n >= 0; --n) {
        QuantizedWiener& qw = fam.levels[n];
        qw.level = n;
        qw.m = m;
        qw.T = T;
        qw.step = convolve_power(fine, std::size_t(1) << (n_max - n));
        build_tree(qw);
        qw.validate();
    }
    return fam;
}

}
