#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace mfcx::transport {

// Scalar building block for integrands and outer compositions.
struct ScalarFn {
    enum class Kind { Zero, Poly, PowAbs };
    Kind kind = Kind::Zero;
    std::vector<double> coef;  // Poly: sum_k coef[k] * u^k
    double power = 2.0;        // PowAbs: scale * |u|^power
    double scale = 1.0;

    double operator()(double u) const;
    double deriv(double u) const;
    bool is_zero() const { return kind == Kind::Zero; }

    static ScalarFn zero();
    static ScalarFn poly(std::vector<double> c);
    static ScalarFn powabs(double power, double scale = 1.0);
};

// Functional on one-dimensional laws given as parallel (values, weights).
// Built-in kinds carry analytic first variations; Custom falls back to a
// finite-difference variation with step 1e-6.
struct LawFunctional {
    enum class Kind { Zero, Integral, Compose, VarMoment, Custom };
    Kind kind = Kind::Zero;
    ScalarFn h;               // Integral / Compose integrand, VarMoment moment term
    ScalarFn outer;           // Compose: outer(integral of h)
    double var_weight = 0.0;  // VarMoment: var_weight * Var(law) + integral of h
    std::function<double(const std::vector<double>&, const std::vector<double>&)> custom;

    double value(const std::vector<double>& v, const std::vector<double>& w) const;

    // out[i] = dF/dlaw at points[i], holding the law fixed at (lawv, laww)
    void variation(const std::vector<double>& lawv, const std::vector<double>& laww,
                   const std::vector<double>& points, std::vector<double>& out) const;
    void variation_fd(const std::vector<double>& lawv, const std::vector<double>& laww,
                      const std::vector<double>& points, std::vector<double>& out,
                      double eps = 1e-6) const;

    // linear functionals make the transport objective itself linear, so the
    // DP vertex is already exact and deterministic policies lose nothing
    bool linear_in_law() const { return kind == Kind::Zero || kind == Kind::Integral; }
    bool is_zero() const { return kind == Kind::Zero; }

    static LawFunctional zero();
    static LawFunctional integral(ScalarFn h);
    static LawFunctional compose(ScalarFn outer, ScalarFn h);
    static LawFunctional var_moment(double var_weight, ScalarFn h);
    static LawFunctional custom_fn(
        std::function<double(const std::vector<double>&, const std::vector<double>&)> fn);
};

// f acts on each per-step law of control rates, g on the terminal state law.
struct CostSpec {
    LawFunctional f;
    LawFunctional g;

    // rejects rate costs with sublinear or linear growth (p <= 1) and
    // infinite cost at the zero rate; a vanishing f is allowed
    void validate() const;
};

struct ProbeReport {
    bool f_mixture_convex = true;
    bool g_mixture_convex = true;
    bool f_displacement_convex = true;
    bool f_convex_order_increasing = true;
    bool f_superlinear = true;
    double worst_f_mixture = 0.0;
    double worst_g_mixture = 0.0;
    double worst_f_displacement = 0.0;
    double worst_f_convex_order = 0.0;
    double variation_consistency = 0.0;  // max |analytic - finite difference| seen

    bool all_convex() const { return f_mixture_convex && g_mixture_convex; }
};

// Randomized checks of the declared structure: convexity under mixtures of
// laws, convexity along quantile-coupled displacements, monotonicity in
// convex order, superlinear growth. Violations are reported, not thrown.
ProbeReport probe_cost(const CostSpec& cost, std::uint64_t seed = 1234);

}
