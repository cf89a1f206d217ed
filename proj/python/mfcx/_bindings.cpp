#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "mfcx/io.hpp"
#include "mfcx/liquidation.hpp"
#include "mfcx/lq.hpp"
#include "mfcx/martingale.hpp"
#include "mfcx/pontryagin.hpp"
#include "mfcx/transport/lift.hpp"
#include "mfcx/transport/solver.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace mfcx;

namespace {

json py_to_json(const py::handle& obj) {
    if (obj.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(obj)) return obj.cast<bool>();
    if (py::isinstance<py::int_>(obj)) return obj.cast<long long>();
    if (py::isinstance<py::float_>(obj)) return obj.cast<double>();
    if (py::isinstance<py::str>(obj)) return obj.cast<std::string>();
    if (py::isinstance<py::dict>(obj)) {
        json out = json::object();
        for (auto item : obj.cast<py::dict>())
            out[item.first.cast<std::string>()] = py_to_json(item.second);
        return out;
    }
    if (py::isinstance<py::list>(obj) || py::isinstance<py::tuple>(obj)) {
        json out = json::array();
        for (auto item : obj.cast<py::sequence>()) out.push_back(py_to_json(item));
        return out;
    }
    throw py::type_error("unsupported config value type");
}

py::object json_to_py(const json& j) {
    switch (j.type()) {
        case json::value_t::null:
            return py::none();
        case json::value_t::boolean:
            return py::bool_(j.get<bool>());
        case json::value_t::number_integer:
            return py::int_(j.get<long long>());
        case json::value_t::number_unsigned:
            return py::int_(j.get<unsigned long long>());
        case json::value_t::number_float:
            return py::float_(j.get<double>());
        case json::value_t::string:
            return py::str(j.get<std::string>());
        case json::value_t::array: {
            py::list out;
            for (const auto& e : j) out.append(json_to_py(e));
            return out;
        }
        case json::value_t::object: {
            py::dict out;
            for (const auto& item : j.items()) out[py::str(item.key())] = json_to_py(item.value());
            return out;
        }
        default:
            return py::none();
    }
}

std::size_t steps_for(double T, double dt) {
    auto s = std::llround(T / dt);
    return std::size_t(s < 2 ? 2 : s);
}

std::shared_ptr<const transport::LevelProblem> build_problem(const TransportInstance& inst) {
    transport::QuantizedWiener qw;
    if (inst.family_n_max && *inst.family_n_max > inst.n) {
        auto fam = transport::quantize_wiener_family(*inst.family_n_max, inst.m, inst.T);
        qw = std::move(fam.levels[inst.n]);
    } else {
        qw = transport::quantize_wiener(inst.n, inst.m, inst.T);
    }
    return std::make_shared<const transport::LevelProblem>(
        transport::LevelProblem::build(qw, inst.lattice, inst.x0));
}

py::object py_liquidate(const py::dict& model, const py::dict& q0, std::size_t N, double dt,
                        std::uint64_t seed) {
    LiquidationParams p = liquidation_params_from_json(py_to_json(model), "/model");
    Q0Spec q = q0spec_from_json(py_to_json(q0), "/q0");
    LiquidationSolution sol(p, q);
    LiquidationSim sim = simulate_liquidation(p, q, sol.speed(), N, steps_for(p.T, dt), seed);
    attach_liquidation_adjoints(sim.ens, p);
    ResidualReport foc = necessary_residual(liquidation_model(p), sim.ens);

    const auto& X = sim.ens["X"];
    const auto& al = sim.ens["alpha"];
    json out{{"mean_cost", sim.mean_cost}, {"se_cost", sim.se_cost},
             {"foc_max_abs", foc.max_abs}, {"Eq0", sol.Eq0()}};
    json t = json::array(), Q = json::array(), a = json::array(), S = json::array();
    for (std::size_t i = 0; i < X.nodes; ++i) {
        t.push_back(sim.ens.grid().t(i));
        Q.push_back(X.mean(i, 0));
        a.push_back(al.mean(i));
        S.push_back(X.mean(i, 1));
    }
    out["t"] = std::move(t);
    out["Q"] = std::move(Q);
    out["alpha"] = std::move(a);
    out["S"] = std::move(S);
    return json_to_py(out);
}

py::object py_lq(const py::dict& model, std::size_t N, double dt, std::uint64_t seed) {
    LQParams p = lq_params_from_json(py_to_json(model), "/model");
    LQSolution sol = solve_lq(p);
    LQSim sim = simulate_lq(p, sol, N, steps_for(p.T, dt), seed);
    attach_lq_adjoints(sim.ens, sol);
    ResidualStats st = lq_stationarity_residual(sim.ens, p, sol);
    ResidualStats pw = lq_pointwise_residual(sim.ens, p, sol);

    json out{{"cost", sim.cost},
             {"se_cost", sim.se_cost},
             {"stationarity_max_abs", st.max_abs},
             {"pointwise_max_abs", pw.max_abs}};
    json t = json::array(), eb = json::array(), e = json::array(), ch = json::array();
    const std::size_t nodes = sol.eta_bar.nodes();
    for (std::size_t i = 0; i < nodes; ++i) {
        t.push_back(p.T * double(i) / double(nodes - 1));
        eb.push_back(sol.eta_bar.at(i));
        e.push_back(sol.eta.at(i));
        ch.push_back(sol.chi.at(i));
    }
    out["t"] = std::move(t);
    out["eta_bar"] = std::move(eb);
    out["eta"] = std::move(e);
    out["chi"] = std::move(ch);
    return json_to_py(out);
}

py::object py_martingale_check(double gamma, double T, double x0, double delta, std::size_t N,
                               double dt, std::uint64_t seed, std::size_t segments, double level) {
    ParticleEnsemble ens =
        simulate_terminal_cost_instance(gamma, T, x0, delta, N, steps_for(T, dt), seed);
    MartingaleOptions mo;
    mo.segments = segments;
    mo.level = level;
    mo.seed = seed + 1;
    MartingaleReport r = martingale_condition_check(terminal_cost_model(gamma), ens, mo);
    return json_to_py(json{{"stat", r.stat},
                           {"dof", r.dof},
                           {"p_value", r.p_value},
                           {"reject", r.reject},
                           {"terminal_residual", r.terminal_residual}});
}

py::object py_transport_ladder(const py::dict& instance) {
    TransportInstance inst = transport_instance_from_json(py_to_json(instance), "/instance");
    transport::LadderResult lr = transport::ladder(inst.cost, inst.n, inst.m, inst.T, inst.x0,
                                                   inst.lattice, inst.solver, inst.reference);
    return json_to_py(ladder_to_json(lr));
}

py::object py_solve(const py::dict& instance) {
    TransportInstance inst = transport_instance_from_json(py_to_json(instance), "/instance");
    auto prob = build_problem(inst);
    transport::SolveReport rep = transport::solve_Pn(inst.cost, prob, inst.solver);
    return json_to_py(json{{"value", rep.value},
                           {"gap", rep.gap},
                           {"iterations", rep.iterations},
                           {"converged", rep.converged}});
}

py::object py_lift(const py::dict& instance, std::size_t N, double dt, std::uint64_t seed) {
    TransportInstance inst = transport_instance_from_json(py_to_json(instance), "/instance");
    if (inst.n > 1) throw std::invalid_argument("lift supports levels 0 and 1");
    auto prob = build_problem(inst);
    transport::SolveReport rep = transport::solve_Pn(inst.cost, prob, inst.solver);
    const std::size_t blocks = prob->steps();
    std::size_t sub = steps_for(inst.T, dt) / blocks;
    if (sub < 2) sub = 2;
    transport::LiftResult lift = transport::lift_to_sde(rep.coupling, N, sub * blocks, seed);
    transport::LiftDiagnostics diag = transport::lift_diagnostics(rep.coupling, lift, inst.cost);
    return json_to_py(json{{"value", rep.value},
                           {"block_cost", diag.block_cost},
                           {"coupling_cost", diag.coupling_cost},
                           {"rate_w2_max", diag.rate_w2_max},
                           {"terminal_w2", diag.terminal_w2},
                           {"atom_weight_err", diag.atom_weight_err},
                           {"conditional_w2", diag.conditional_w2}});
}

py::object py_probe_cost(const py::dict& cost) {
    transport::CostSpec spec = cost_spec_from_json(py_to_json(cost), "/cost");
    transport::ProbeReport r = transport::probe_cost(spec);
    return json_to_py(json{{"f_mixture_convex", r.f_mixture_convex},
                           {"g_mixture_convex", r.g_mixture_convex},
                           {"f_displacement_convex", r.f_displacement_convex},
                           {"f_convex_order_increasing", r.f_convex_order_increasing},
                           {"f_superlinear", r.f_superlinear},
                           {"variation_consistency", r.variation_consistency}});
}

}  // namespace

PYBIND11_MODULE(_mfcx, m) {
    m.doc() = "mean-field control solvers and causal-transport ladder";

    py::register_exception<ConfigError>(m, "ConfigError");

    m.def("liquidate", &py_liquidate, py::arg("model"), py::arg("q0"), py::arg("N") = 10000,
          py::arg("dt") = 1e-3, py::arg("seed") = 42,
          "closed-form optimal execution, simulated; returns mean paths and residuals");
    m.def("lq", &py_lq, py::arg("model"), py::arg("N") = 10000, py::arg("dt") = 1e-3,
          py::arg("seed") = 42, "linear-quadratic solver; returns decoupling fields and residuals");
    m.def("martingale_check", &py_martingale_check, py::arg("gamma") = 1.0, py::arg("T") = 1.0,
          py::arg("x0") = 1.0, py::arg("delta") = 0.0, py::arg("N") = 10000, py::arg("dt") = 1e-3,
          py::arg("seed") = 42, py::arg("segments") = 8, py::arg("level") = 0.01,
          "chi-square martingale test on the reference terminal-cost instance");
    m.def("transport_ladder", &py_transport_ladder, py::arg("instance"),
          "solve the quantization ladder; returns rung values, margins and gaps");
    m.def("solve", &py_solve, py::arg("instance"), "solve one quantized level");
    m.def("lift", &py_lift, py::arg("instance"), py::arg("N") = 10000, py::arg("dt") = 1e-3,
          py::arg("seed") = 42, "realize a level-0/1 optimal coupling as SDE paths");
    m.def("probe_cost", &py_probe_cost, py::arg("cost"),
          "randomized structure checks of a cost specification");
}
