#include "mfcx/transport/cost.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfcx/rng.hpp"

namespace mfcx::transport {

double ScalarFn::operator()(double u) const {
    switch (kind) {
        case Kind::Zero:
            return 0.0;
        case Kind::Poly: {
            double acc = 0.0;
            for (std::size_t k = coef.size(); k-- > 0;) acc = acc * u + coef[k];
            return acc;
        }
        case Kind::PowAbs:
            return scale * std::pow(std::abs(u), power);
    }
    return 0.0;
}

double ScalarFn::deriv(double u) const {
    switch (kind) {
        case Kind::Zero:
            return 0.0;
        case Kind::Poly: {
            double acc = 0.0;
            for (std::size_t k = coef.size(); k-- > 1;) acc = acc * u + double(k) * coef[k];
            return acc;
        }
        case Kind::PowAbs: {
            if (u == 0.0) return 0.0;
            double s = u > 0.0 ? 1.0 : -1.0;
            return scale * power * std::pow(std::abs(u), power - 1.0) * s;
        }
    }
    return 0.0;
}

ScalarFn ScalarFn::zero() { return {}; }

ScalarFn ScalarFn::poly(std::vector<double> c) {
    ScalarFn fn;
    fn.kind = Kind::Poly;
    fn.coef = std::move(c);
    return fn;
}

ScalarFn ScalarFn::powabs(double power, double scale) {
    if (!(power > 0.0)) throw std::invalid_argument("ScalarFn::powabs: need power > 0");
    ScalarFn fn;
    fn.kind = Kind::PowAbs;
    fn.power = power;
    fn.scale = scale;
    return fn;
}

namespace {

double integral_of(const ScalarFn& h, const std::vector<double>& v,
                   const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * h(v[i]);
    return s;
}

double law_mean(const std::vector<double>& v, const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * v[i];
    return s;
}

}  // namespace

double LawFunctional::value(const std::vector<double>& v, const std::vector<double>& w) const {
    switch (kind) {
        case Kind::Zero:
            return 0.0;
        case Kind::Integral:
            return integral_of(h, v, w);
        case Kind::Compose:
            return outer(integral_of(h, v, w));
        case Kind::VarMoment: {
            double m1 = law_mean(v, w);
            double m2 = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) m2 += w[i] * v[i] * v[i];
            return var_weight * (m2 - m1 * m1) + integral_of(h, v, w);
        }
        case Kind::Custom:
            return custom(v, w);
    }
    return 0.0;
}

void LawFunctional::variation(const std::vector<double>& lawv, const std::vector<double>& laww,
                              const std::vector<double>& points,
                              std::vector<double>& out) const {
    out.resize(points.size());
    switch (kind) {
        case Kind::Zero:
            std::fill(out.begin(), out.end(), 0.0);
            return;
        case Kind::Integral:
            for (std::size_t i = 0; i < points.size(); ++i) out[i] = h(points[i]);
            return;
        case Kind::Compose: {
            double d = outer.deriv(integral_of(h, lawv, laww));
            for (std::size_t i = 0; i < points.size(); ++i) out[i] = d * h(points[i]);
            return;
        }
        case Kind::VarMoment: {
            double m1 = law_mean(lawv, laww);
            for (std::size_t i = 0; i < points.size(); ++i) {
                double u = points[i];
                out[i] = var_weight * (u * u - 2.0 * m1 * u) + h(u);
            }
            return;
        }
        case Kind::Custom:
            variation_fd(lawv, laww, points, out);
            return;
    }
}

void LawFunctional::variation_fd(const std::vector<double>& lawv,
                                 const std::vector<double>& laww,
                                 const std::vector<double>& points, std::vector<double>& out,
                                 double eps) const {
    out.resize(points.size());
    double base = value(lawv, laww);
    std::vector<double> v = lawv;
    std::vector<double> w = laww;
    v.push_back(0.0);
    w.push_back(0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        // blend toward the point mass: (1-eps) law + eps delta_u
        for (std::size_t k = 0; k < laww.size(); ++k) w[k] = (1.0 - eps) * laww[k];
        v.back() = points[i];
        w.back() = eps;
        out[i] = (value(v, w) - base) / eps;
    }
}

LawFunctional LawFunctional::zero() { return {}; }

LawFunctional LawFunctional::integral(ScalarFn h) {
    LawFunctional fn;
    fn.kind = Kind::Integral;
    fn.h = std::move(h);
    return fn;
}

LawFunctional LawFunctional::compose(ScalarFn outer, ScalarFn h) {
    LawFunctional fn;
    fn.kind = Kind::Compose;
    fn.outer = std::move(outer);
    fn.h = std::move(h);
    return fn;
}

LawFunctional LawFunctional::var_moment(double var_weight, ScalarFn h) {
    LawFunctional fn;
    fn.kind = Kind::VarMoment;
    fn.var_weight = var_weight;
    fn.h = std::move(h);
    return fn;
}

LawFunctional LawFunctional::custom_fn(
    std::function<double(const std::vector<double>&, const std::vector<double>&)> fn) {
    LawFunctional out;
    out.kind = Kind::Custom;
    out.custom = std::move(fn);
    return out;
}

namespace {

double point_mass_value(const LawFunctional& fn, double u) {
    return fn.value({u}, {1.0});
}

}  // namespace

void CostSpec::validate() const {
    double at_zero = point_mass_value(f, 0.0);
    if (!std::isfinite(at_zero))
        throw std::invalid_argument("CostSpec: rate cost infinite at the zero rate");
    if (!f.is_zero()) {
        // superlinear growth: max over signs of f(delta_M)/M must grow with M
        auto slope = [&](double mag) {
            double v = std::max(point_mass_value(f, mag), point_mass_value(f, -mag));
            return v / mag;
        };
        double lo = slope(4.0), hi = slope(128.0);
        if (!(hi > 1.5 * std::abs(lo)) || !std::isfinite(hi))
            throw std::invalid_argument(
                "CostSpec: rate cost must grow superlinearly (p > 1)");
    }
}

namespace {

// random law on a small support inside [-3, 3]
void random_law(Prng& rng, std::size_t npts, std::vector<double>& v, std::vector<double>& w) {
    v.resize(npts);
    w.resize(npts);
    double tot = 0.0;
    for (std::size_t i = 0; i < npts; ++i) {
        v[i] = -3.0 + 6.0 * rng.next_uniform();
        w[i] = 0.05 + rng.next_uniform();
        tot += w[i];
    }
    for (auto& x : w) x /= tot;
    // ascending values for the displacement probe's quantile pairing
    std::vector<std::size_t> idx(npts);
    for (std::size_t i = 0; i < npts; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> sv(npts), sw(npts);
    for (std::size_t i = 0; i < npts; ++i) {
        sv[i] = v[idx[i]];
        sw[i] = w[idx[i]];
    }
    v = sv;
    w = sw;
}

void probe_mixture(const LawFunctional& fn, Prng& rng, bool& ok, double& worst) {
    if (fn.is_zero()) return;
    std::vector<double> v1, w1, v2, w2, vm, wm;
    for (int rep = 0; rep < 24; ++rep) {
        std::size_t npts = 4 + std::size_t(rng.next_uniform() * 5.0);
        random_law(rng, npts, v1, w1);
        random_law(rng, npts, v2, w2);
        double f1 = fn.value(v1, w1), f2 = fn.value(v2, w2);
        for (double lam : {0.25, 0.5, 0.75}) {
            vm = v1;
            wm.assign(w1.size(), 0.0);
            for (std::size_t i = 0; i < w1.size(); ++i) wm[i] = lam * w1[i];
            vm.insert(vm.end(), v2.begin(), v2.end());
            for (double x : w2) wm.push_back((1.0 - lam) * x);
            double gap = fn.value(vm, wm) - (lam * f1 + (1.0 - lam) * f2);
            worst = std::max(worst, gap);
            if (gap > 1e-9 * std::max(1.0, std::abs(f1) + std::abs(f2))) ok = false;
        }
    }
}

}  // namespace

ProbeReport probe_cost(const CostSpec& cost, std::uint64_t seed) {
    ProbeReport rep;
    Prng rng(seed);

    probe_mixture(cost.f, rng, rep.f_mixture_convex, rep.worst_f_mixture);
    probe_mixture(cost.g, rng, rep.g_mixture_convex, rep.worst_g_mixture);

    std::vector<double> v1, w1, v2, w2, vm, out_a, out_f;
    if (!cost.f.is_zero()) {
        for (int repi = 0; repi < 24; ++repi) {
            std::size_t npts = 4 + std::size_t(rng.next_uniform() * 5.0);
            random_law(rng, npts, v1, w1);
            random_law(rng, npts, v2, w2);
            // displacement: interpolate quantile-paired atoms under shared weights
            double fa = cost.f.value(v1, w1), fb = cost.f.value(v2, w1);
            for (double lam : {0.25, 0.5, 0.75}) {
                vm.resize(npts);
                for (std::size_t i = 0; i < npts; ++i)
                    vm[i] = (1.0 - lam) * v1[i] + lam * v2[i];
                double gap = cost.f.value(vm, w1) - ((1.0 - lam) * fa + lam * fb);
                rep.worst_f_displacement = std::max(rep.worst_f_displacement, gap);
                if (gap > 1e-9 * std::max(1.0, std::abs(fa) + std::abs(fb)))
                    rep.f_displacement_convex = false;
            }
            // convex order: merging adjacent atoms to their barycenter contracts
            if (npts >= 2) {
                std::vector<double> cv, cw;
                for (std::size_t i = 0; i + 1 < npts; i += 2) {
                    double wsum = w1[i] + w1[i + 1];
                    cv.push_back((w1[i] * v1[i] + w1[i + 1] * v1[i + 1]) / wsum);
                    cw.push_back(wsum);
                }
                if (npts % 2 == 1) {
                    cv.push_back(v1[npts - 1]);
                    cw.push_back(w1[npts - 1]);
                }
                double gap = cost.f.value(cv, cw) - fa;
                rep.worst_f_convex_order = std::max(rep.worst_f_convex_order, gap);
                if (gap > 1e-9 * std::max(1.0, std::abs(fa))) rep.f_convex_order_increasing = false;
            }
            // analytic variation against the finite-difference fallback;
            // variations agree only up to an additive constant, so compare
            // increments relative to the first probe point
            if (cost.f.kind != LawFunctional::Kind::Custom) {
                cost.f.variation(v1, w1, v2, out_a);
                cost.f.variation_fd(v1, w1, v2, out_f);
                for (std::size_t i = 1; i < v2.size(); ++i)
                    rep.variation_consistency = std::max(
                        rep.variation_consistency,
                        std::abs((out_a[i] - out_a[0]) - (out_f[i] - out_f[0])));
            }
        }
        auto slope = [&](double mag) {
            return std::max(point_mass_value(cost.f, mag), point_mass_value(cost.f, -mag)) / mag;
        };
        rep.f_superlinear = slope(128.0) > 1.5 * std::abs(slope(4.0));
    }
    return rep;
}

}
