#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mfcx/io.hpp"
#include "mfcx/liquidation.hpp"
#include "mfcx/lq.hpp"
#include "mfcx/martingale.hpp"
#include "mfcx/parallel.hpp"
#include "mfcx/pontryagin.hpp"
#include "mfcx/transport/lift.hpp"
#include "mfcx/transport/solver.hpp"

using nlohmann::json;
using namespace mfcx;

namespace {

// keys allowed at the top level of each subcommand's config body
void reject_keys_outside(const json& body, const std::string& ptr,
                         const std::set<std::string>& allowed) {
    if (!body.is_object()) throw ConfigError(ptr.empty() ? "/" : ptr, "expected an object");
    for (const auto& item : body.items())
        if (allowed.count(item.key()) == 0)
            throw ConfigError(ptr + "/" + item.key(), "unknown key");
}

struct Common {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_flag;
    std::size_t threads = 0;
};

void add_common(CLI::App* sc, Common& c) {
    sc->add_option("--config", c.config_path, "JSON config file")->required();
    sc->add_option("--out", c.out_dir, "output directory")->required();
    sc->add_option("--seed", c.seed_flag, "override the config seed");
    sc->add_option("--threads", c.threads, "worker thread cap (0 = hardware); never affects results");
}

// numeric options shared by the simulation subcommands
struct NumOpts {
    std::size_t N = 10000;
    double dt = 1e-3;
    std::uint64_t seed = 42;
};

NumOpts num_opts(const json& body, const std::string& ptr) {
    NumOpts o;
    if (body.contains("N")) {
        if (!body.at("N").is_number_integer() || body.at("N").get<long>() <= 0)
            throw ConfigError(ptr + "/N", "expected a positive integer");
        o.N = body.at("N").get<std::size_t>();
    }
    if (body.contains("dt")) {
        if (!body.at("dt").is_number() || !(body.at("dt").get<double>() > 0.0))
            throw ConfigError(ptr + "/dt", "expected a positive number");
        o.dt = body.at("dt").get<double>();
    }
    if (body.contains("seed")) {
        if (!body.at("seed").is_number_integer() || body.at("seed").get<long long>() < 0)
            throw ConfigError(ptr + "/seed", "expected a nonnegative integer");
        o.seed = body.at("seed").get<std::uint64_t>();
    }
    return o;
}

std::size_t steps_for(double T, double dt) {
    auto s = std::llround(T / dt);
    return std::size_t(s < 2 ? 2 : s);
}

json residual_to_json(const ResidualReport& r) {
    return json{{"max_abs", r.max_abs},
                {"mean_abs", r.mean_abs},
                {"scale", r.scale},
                {"equality_form", r.equality_form},
                {"worst_time", r.worst_time},
                {"worst_particle", r.worst_particle},
                {"per_time_max", r.per_time_max},
                {"per_time_mean", r.per_time_mean}};
}

json residual_to_json(const ResidualStats& r) {
    return json{{"max_abs", r.max_abs},
                {"mean_abs", r.mean_abs},
                {"scale", r.scale},
                {"worst_time", r.worst_time},
                {"worst_particle", r.worst_particle},
                {"per_time_max", r.per_time_max},
                {"per_time_mean", r.per_time_mean}};
}

int run_liquidate(const json& body, const std::string& out) {
    reject_keys_outside(body, "", {"model", "q0", "N", "dt", "seed"});
    LiquidationParams p = body.contains("model") ? liquidation_params_from_json(body.at("model"))
                                                 : LiquidationParams{};
    Q0Spec q0 = body.contains("q0") ? q0spec_from_json(body.at("q0")) : Q0Spec::constant(1.0);
    NumOpts o = num_opts(body, "");

    LiquidationSolution sol(p, q0);
    LiquidationSim sim = simulate_liquidation(p, q0, sol.speed(), o.N, steps_for(p.T, o.dt), o.seed);
    attach_liquidation_adjoints(sim.ens, p);

    const auto& X = sim.ens["X"];
    const auto& al = sim.ens["alpha"];
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < X.nodes; ++t)
        rows.push_back({sim.ens.grid().t(t), X.mean(t, 0), al.mean(t), X.mean(t, 1)});
    write_csv(out + "/trajectory.csv", {"t", "Q", "alpha", "S"}, rows);

    ResidualReport foc = necessary_residual(liquidation_model(p), sim.ens);
    json rep{{"foc", residual_to_json(foc)},
             {"mean_cost", sim.mean_cost},
             {"se_cost", sim.se_cost},
             {"Eq0", sol.Eq0()}};
    write_json_file(out + "/residual.json", rep);
    return 0;
}

int run_lq(const json& body, const std::string& out, json& error) {
    reject_keys_outside(body, "", {"model", "N", "dt", "seed", "ode_steps"});
    LQParams p = body.contains("model") ? lq_params_from_json(body.at("model")) : LQParams{};
    NumOpts o = num_opts(body, "");
    std::size_t ode_steps = 10000;
    if (body.contains("ode_steps")) ode_steps = body.at("ode_steps").get<std::size_t>();

    LQSolution sol;
    try {
        sol = solve_lq(p, ode_steps);
    } catch (const RiccatiBlowup& e) {
        error = json{{"type", "riccati_blowup"},
                     {"message", e.what()},
                     {"crossing_time", e.crossing_time}};
        return 2;
    }

    std::vector<std::vector<double>> rows;
    const std::size_t nodes = sol.eta_bar.nodes();
    for (std::size_t i = 0; i < nodes; ++i) {
        double t = p.T * double(i) / double(nodes - 1);
        rows.push_back({t, sol.eta_bar.at(i), sol.eta.at(i), sol.chi.at(i)});
    }
    write_csv(out + "/fields.csv", {"t", "eta_bar", "eta", "chi"}, rows);

    LQSim sim = simulate_lq(p, sol, o.N, steps_for(p.T, o.dt), o.seed);
    attach_lq_adjoints(sim.ens, sol);
    ResidualStats st = lq_stationarity_residual(sim.ens, p, sol);
    ResidualStats pw = lq_pointwise_residual(sim.ens, p, sol);
    json rep{{"stationarity", residual_to_json(st)},
             {"pointwise", residual_to_json(pw)},
             {"cost", sim.cost},
             {"se_cost", sim.se_cost}};
    write_json_file(out + "/residual.json", rep);
    return 0;
}

int run_pontryagin(const json& body, const std::string& out) {
    reject_keys_outside(body, "", {"problem", "model", "q0", "N", "dt", "seed"});
    if (!body.contains("problem")) throw ConfigError("/problem", "missing required key");
    std::string which = body.at("problem").is_string() ? body.at("problem").get<std::string>() : "";
    NumOpts o = num_opts(body, "");

    json rep;
    if (which == "liquidation") {
        LiquidationParams p = body.contains("model")
                                  ? liquidation_params_from_json(body.at("model"))
                                  : LiquidationParams{};
        Q0Spec q0 = body.contains("q0") ? q0spec_from_json(body.at("q0")) : Q0Spec::constant(1.0);
        LiquidationSolution sol(p, q0);
        LiquidationSim sim =
            simulate_liquidation(p, q0, sol.speed(), o.N, steps_for(p.T, o.dt), o.seed);
        attach_liquidation_adjoints(sim.ens, p);
        rep["extended"] = residual_to_json(necessary_residual(liquidation_model(p), sim.ens));
    } else if (which == "lq") {
        LQParams p = body.contains("model") ? lq_params_from_json(body.at("model")) : LQParams{};
        LQSolution sol = solve_lq(p);
        LQSim sim = simulate_lq(p, sol, o.N, steps_for(p.T, o.dt), o.seed);
        attach_lq_adjoints(sim.ens, sol);
        rep["extended"] = residual_to_json(lq_stationarity_residual(sim.ens, p, sol));
        rep["pointwise"] = residual_to_json(lq_pointwise_residual(sim.ens, p, sol));
    } else {
        throw ConfigError("/problem", "expected liquidation | lq");
    }
    write_json_file(out + "/report.json", rep);
    return 0;
}

int run_martingale(const json& body, const std::string& out) {
    reject_keys_outside(body, "", {"gamma", "T", "x0", "delta", "N", "dt", "seed",
                                   "segments", "level"});
    NumOpts o = num_opts(body, "");
    double gamma = body.value("gamma", 1.0);
    double T = body.value("T", 1.0);
    double x0 = body.value("x0", 1.0);
    double delta = body.value("delta", 0.0);
    MartingaleOptions mo;
    mo.segments = body.value("segments", std::size_t(8));
    mo.level = body.value("level", 0.01);
    mo.seed = o.seed + 1;

    ParticleEnsemble ens =
        simulate_terminal_cost_instance(gamma, T, x0, delta, o.N, steps_for(T, o.dt), o.seed);
    MartingaleReport r = martingale_condition_check(terminal_cost_model(gamma), ens, mo);
    json rep{{"stat", r.stat},
             {"dof", r.dof},
             {"p_value", r.p_value},
             {"reject", r.reject},
             {"segment_stats", r.segment_stats},
             {"terminal_residual", r.terminal_residual},
             {"delta", delta}};
    write_json_file(out + "/report.json", rep);
    return 0;
}

int run_ladder(const json& body, const std::string& out, json& error) {
    // "seed" is accepted for interface uniformity; the ladder is deterministic
    reject_keys_outside(body, "", {"instance", "dump_couplings", "seed"});
    if (!body.contains("instance")) throw ConfigError("/instance", "missing required key");
    TransportInstance inst = transport_instance_from_json(body.at("instance"));
    if (inst.family_n_max)
        throw ConfigError("/instance/family_n_max", "ladder rungs already share one family");
    bool dump = body.value("dump_couplings", true);

    transport::LadderResult lr = transport::ladder(inst.cost, inst.n, inst.m, inst.T, inst.x0,
                                                   inst.lattice, inst.solver, inst.reference);
    write_ladder_csv(out + "/ladder.csv", lr);
    write_json_file(out + "/ladder.json", ladder_to_json(lr));
    if (dump)
        for (const auto& rung : lr.rungs)
            write_json_file(out + "/coupling_n" + std::to_string(rung.n) + ".json",
                            coupling_to_json(rung.report.coupling));
    if (!lr.all_converged) {
        json rungs = json::array();
        for (const auto& r : lr.rungs)
            rungs.push_back(json{{"n", r.n}, {"converged", r.report.converged},
                                 {"gap", r.report.gap}});
        error = json{{"type", "non_convergence"},
                     {"message", "duality gap above tolerance at some rung"},
                     {"rungs", std::move(rungs)}};
        return 2;
    }
    return 0;
}

int run_lift(const json& body, const std::string& out, json& error) {
    reject_keys_outside(body, "", {"instance", "N", "dt", "seed"});
    if (!body.contains("instance")) throw ConfigError("/instance", "missing required key");
    TransportInstance inst = transport_instance_from_json(body.at("instance"));
    if (inst.n > 1) throw ConfigError("/instance/n", "path realization supports levels 0 and 1");
    NumOpts o = num_opts(body, "");

    transport::QuantizedWiener qw;
    if (inst.family_n_max && *inst.family_n_max > inst.n) {
        auto fam = transport::quantize_wiener_family(*inst.family_n_max, inst.m, inst.T);
        qw = std::move(fam.levels[inst.n]);
    } else {
        qw = transport::quantize_wiener(inst.n, inst.m, inst.T);
    }
    auto prob = std::make_shared<const transport::LevelProblem>(
        transport::LevelProblem::build(qw, inst.lattice, inst.x0));
    transport::SolveReport rep = transport::solve_Pn(inst.cost, prob, inst.solver);
    if (!rep.converged) {
        error = json{{"type", "non_convergence"},
                     {"message", "duality gap above tolerance"},
                     {"gap", rep.gap}};
        return 2;
    }

    const std::size_t blocks = prob->steps();
    std::size_t sub = steps_for(inst.T, o.dt) / blocks;
    if (sub < 2) sub = 2;
    transport::LiftResult lift = transport::lift_to_sde(rep.coupling, o.N, sub * blocks, o.seed);
    transport::LiftDiagnostics diag = transport::lift_diagnostics(rep.coupling, lift, inst.cost);

    const auto& X = lift.ens["X"];
    const auto& W = lift.ens["W"];
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < X.nodes; ++t)
        rows.push_back({lift.ens.grid().t(t), X.mean(t), X.variance(t), W.mean(t)});
    write_csv(out + "/paths.csv", {"t", "X_mean", "X_var", "W_mean"}, rows);

    write_json_file(out + "/coupling.json", coupling_to_json(rep.coupling));
    json d{{"value", rep.value},
           {"gap", rep.gap},
           {"block_cost", diag.block_cost},
           {"coupling_cost", diag.coupling_cost},
           {"rate_w2_max", diag.rate_w2_max},
           {"terminal_w2", diag.terminal_w2},
           {"atom_weight_err", diag.atom_weight_err},
           {"conditional_w2", diag.conditional_w2},
           {"N", o.N}};
    write_json_file(out + "/diagnostics.json", d);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mfcx: mean-field control solvers and a causal-transport ladder"};
    app.require_subcommand(1);
    Common c;

    auto* liq = app.add_subcommand("liquidate",
                                   "closed-form optimal execution + particle verification");
    liq->footer("writes trajectory.csv (t,Q,alpha,S: ensemble means) and residual.json");
    auto* lq = app.add_subcommand("lq", "linear-quadratic mean-field solver");
    lq->footer("writes fields.csv (t,eta_bar,eta,chi) and residual.json");
    auto* pc = app.add_subcommand("pontryagin-check",
                                  "first-order optimality residual along a simulated optimum");
    pc->footer("writes report.json (extended and, for lq, pointwise residuals)");
    auto* mg = app.add_subcommand("martingale-check",
                                  "martingale test of the optimality condition");
    mg->footer("writes report.json (chi-square stat, p-value, terminal residual)");
    auto* tl = app.add_subcommand("transport-ladder",
                                  "monotone value ladder over quantization levels");
    tl->footer("writes ladder.csv (n,value,margin,gap_to_reference), ladder.json, "
               "coupling_n<k>.json kernel tables");
    auto* lf = app.add_subcommand("lift", "realize a level-0/1 coupling as SDE paths");
    lf->footer("writes paths.csv (t,X_mean,X_var,W_mean), coupling.json, diagnostics.json");
    for (CLI::App* sc : {liq, lq, pc, mg, tl, lf}) add_common(sc, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    mfcx::max_threads() = c.threads;

    // config errors exit 1 before anything is written; after the manifest
    // exists, failures exit 2 and leave it marked incomplete
    json body, config_err;
    std::string sub;
    NumOpts seed_probe;
    try {
        body = load_json_file(c.config_path);
        if (!body.is_object()) throw ConfigError("", "config root must be an object");
        sub = app.get_subcommands().front()->get_name();
        seed_probe = num_opts(body, "");
        if (c.seed_flag) {
            body["seed"] = *c.seed_flag;
            seed_probe.seed = *c.seed_flag;
        }
    } catch (const ConfigError& e) {
        json err{{"error", {{"type", "config"}, {"pointer", e.pointer}, {"message", e.what()}}}};
        std::cerr << err.dump(2) << "\n";
        return 1;
    }

    json manifest = make_manifest(sub, body, seed_probe.seed);
    json error;
    int rc = 0;
    try {
        write_manifest(c.out_dir, manifest);
        if (sub == "liquidate") rc = run_liquidate(body, c.out_dir);
        else if (sub == "lq") rc = run_lq(body, c.out_dir, error);
        else if (sub == "pontryagin-check") rc = run_pontryagin(body, c.out_dir);
        else if (sub == "martingale-check") rc = run_martingale(body, c.out_dir);
        else if (sub == "transport-ladder") rc = run_ladder(body, c.out_dir, error);
        else rc = run_lift(body, c.out_dir, error);
    } catch (const ConfigError& e) {
        json err{{"error", {{"type", "config"}, {"pointer", e.pointer}, {"message", e.what()}}}};
        std::cerr << err.dump(2) << "\n";
        return 1;
    } catch (const json::exception& e) {
        json err{{"error", {{"type", "config"}, {"message", e.what()}}}};
        std::cerr << err.dump(2) << "\n";
        return 1;
    } catch (const std::exception& e) {
        error = json{{"type", "runtime"}, {"message", e.what()}};
        rc = 2;
    }

    if (rc == 2) {
        write_json_file(c.out_dir + "/error.json", json{{"error", error}});
        std::cerr << json{{"error", error}}.dump(2) << "\n";
        return 2;
    }
    manifest["complete"] = true;
    write_manifest(c.out_dir, manifest);
    return 0;
}
