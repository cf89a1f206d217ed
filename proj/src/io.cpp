#include "mfcx/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

namespace mfcx {

using nlohmann::json;
using transport::ActionLattice;
using transport::CostSpec;
using transport::LawFunctional;
using transport::ScalarFn;

ConfigError::ConfigError(std::string pointer_, const std::string& what_)
    : std::runtime_error(pointer_ + ": " + what_), pointer(std::move(pointer_)) {}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("invalid JSON: ") + e.what());
    }
    return j;
}

namespace {

void expect_object(const json& j, const std::string& ptr) {
    if (!j.is_object()) throw ConfigError(ptr, "expected an object");
}

void reject_unknown(const json& j, const std::string& ptr, const std::set<std::string>& allowed) {
    for (const auto& item : j.items())
        if (allowed.count(item.key()) == 0) throw ConfigError(ptr + "/" + item.key(), "unknown key");
}

double get_num(const json& j, const std::string& ptr, const std::string& key, double def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number()) throw ConfigError(ptr + "/" + key, "expected a number");
    return v.get<double>();
}

double require_num(const json& j, const std::string& ptr, const std::string& key) {
    if (!j.contains(key)) throw ConfigError(ptr + "/" + key, "missing required key");
    return get_num(j, ptr, key, 0.0);
}

long get_int(const json& j, const std::string& ptr, const std::string& key, long def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(ptr + "/" + key, "expected an integer");
    return v.get<long>();
}

std::vector<double> get_num_array(const json& v, const std::string& ptr) {
    if (!v.is_array()) throw ConfigError(ptr, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError(ptr + "/" + std::to_string(i), "expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

}  // namespace

LiquidationParams liquidation_params_from_json(const json& j, const std::string& ptr) {
    expect_object(j, ptr);
    reject_unknown(j, ptr, {"k", "phi", "A", "lambda", "sigma", "T", "s0"});
    LiquidationParams p;
    p.k = get_num(j, ptr, "k", p.k);
    p.phi = get_num(j, ptr, "phi", p.phi);
    p.A = get_num(j, ptr, "A", p.A);
    p.lambda = get_num(j, ptr, "lambda", p.lambda);
    p.sigma = get_num(j, ptr, "sigma", p.sigma);
    p.T = get_num(j, ptr, "T", p.T);
    p.s0 = get_num(j, ptr, "s0", p.s0);
    try {
        p.validate();
    } catch (const std::exception& e) {
        throw ConfigError(ptr, e.what());
    }
    return p;
}

json to_json(const LiquidationParams& p) {
    return json{{"k", p.k},         {"phi", p.phi}, {"A", p.A}, {"lambda", p.lambda},
                {"sigma", p.sigma}, {"T", p.T},     {"s0", p.s0}};
}

Q0Spec q0spec_from_json(const json& j, const std::string& ptr) {
    expect_object(j, ptr);
    if (!j.contains("kind")) throw ConfigError(ptr + "/kind", "missing required key");
    const std::string kind = j.at("kind").is_string() ? j.at("kind").get<std::string>() : "";
    Q0Spec q;
    if (kind == "constant") {
        reject_unknown(j, ptr, {"kind", "value"});
        q = Q0Spec::constant(require_num(j, ptr, "value"));
    } else if (kind == "two_point") {
        reject_unknown(j, ptr, {"kind", "x1", "p1", "x2"});
        q = Q0Spec::two_point(require_num(j, ptr, "x1"), require_num(j, ptr, "p1"),
                              require_num(j, ptr, "x2"));
    } else if (kind == "gaussian") {
        reject_unknown(j, ptr, {"kind", "mu", "sd"});
        q = Q0Spec::gaussian(require_num(j, ptr, "mu"), require_num(j, ptr, "sd"));
    } else {
        throw ConfigError(ptr + "/kind", "expected constant | two_point | gaussian");
    }
    try {
        q.validate();
    } catch (const std::exception& e) {
        throw ConfigError(ptr, e.what());
    }
    return q;
}

json to_json(const Q0Spec& q) {
    switch (q.kind) {
        case Q0Spec::Kind::Constant:
            return json{{"kind", "constant"}, {"value", q.value}};
        case Q0Spec::Kind::TwoPoint:
            return json{{"kind", "two_point"}, {"x1", q.x1}, {"p1", q.p1}, {"x2", q.x2}};
        default:
            return json{{"kind", "gaussian"}, {"mu", q.mu}, {"sd", q.sd}};
    }
}

LQParams lq_params_from_json(const json& j, const std::string& ptr) {
    expect_object(j, ptr);
    reject_unknown(j, ptr, {"b1", "b2", "bbar1", "bbar2", "q", "qbar", "r", "rbar", "s", "sbar",
                            "gamma", "gammabar", "rho", "T", "x0"});
    LQParams p;
    p.b1 = get_num(j, ptr, "b1", p.b1);
    p.b2 = get_num(j, ptr, "b2", p.b2);
    p.bbar1 = get_num(j, ptr, "bbar1", p.bbar1);
    p.bbar2 = get_num(j, ptr, "bbar2", p.bbar2);
    p.q = get_num(j, ptr, "q", p.q);
    p.qbar = get_num(j, ptr, "qbar", p.qbar);
    p.r = get_num(j, ptr, "r", p.r);
    p.rbar = get_num(j, ptr, "rbar", p.rbar);
    p.s = get_num(j, ptr, "s", p.s);
    p.sbar = get_num(j, ptr, "sbar", p.sbar);
    p.gamma = get_num(j, ptr, "gamma", p.gamma);
    p.gammabar = get_num(j, ptr, "gammabar", p.gammabar);
    p.rho = get_num(j, ptr, "rho", p.rho);
    p.T = get_num(j, ptr, "T", p.T);
    p.x0 = get_num(j, ptr, "x0", p.x0);
    try {
        p.validate();
    } catch (const std::exception& e) {
        throw ConfigError(ptr, e.what());
    }
    return p;
}

json to_json(const LQParams& p) {
    return json{{"b1", p.b1},       {"b2", p.b2},     {"bbar1", p.bbar1},
                {"bbar2", p.bbar2}, {"q", p.q},       {"qbar", p.qbar},
                {"r", p.r},         {"rbar", p.rbar}, {"s", p.s},
                {"sbar", p.sbar},   {"gamma", p.gamma}, {"gammabar", p.gammabar},
                {"rho", p.rho},     {"T", p.T},       {"x0", p.x0}};
}

namespace {

ScalarFn scalar_from_coeffs(const json& v, const std::string& ptr) {
    std::vector<double> c = get_num_array(v, ptr);
    bool all_zero = true;
    for (double x : c)
        if (x != 0.0) all_zero = false;
    if (c.empty() || all_zero) return ScalarFn::zero();
    return ScalarFn::poly(std::move(c));
}

LawFunctional integral_or_zero(const json& j, const std::string& ptr, const std::string& key) {
    if (!j.contains(key)) return LawFunctional::zero();
    ScalarFn h = scalar_from_coeffs(j.at(key), ptr + "/" + key);
    if (h.is_zero()) return LawFunctional::zero();
    return LawFunctional::integral(std::move(h));
}

}  // namespace

CostSpec cost_spec_from_json(const json& j, const std::string& ptr) {
    expect_object(j, ptr);
    if (!j.contains("type")) throw ConfigError(ptr + "/type", "missing required key");
    const std::string type = j.at("type").is_string() ? j.at("type").get<std::string>() : "";
    CostSpec cost;
    if (type == "quadratic") {
        // mean square rate each block, mean square terminal state
        reject_unknown(j, ptr, {"type"});
        cost.f = LawFunctional::integral(ScalarFn::poly({0.0, 0.0, 1.0}));
        cost.g = LawFunctional::integral(ScalarFn::poly({0.0, 0.0, 1.0}));
    } else if (type == "integral") {
        reject_unknown(j, ptr, {"type", "f", "g"});
        cost.f = integral_or_zero(j, ptr, "f");
        cost.g = integral_or_zero(j, ptr, "g");
    } else if (type == "pow_abs") {
        reject_unknown(j, ptr, {"type", "p", "scale", "g"});
        double p = get_num(j, ptr, "p", 2.0);
        double scale = get_num(j, ptr, "scale", 1.0);
        cost.f = LawFunctional::integral(ScalarFn::powabs(p, scale));
        cost.g = integral_or_zero(j, ptr, "g");
    } else if (type == "terminal_variance") {
        reject_unknown(j, ptr, {"type", "weight", "f", "g"});
        double w = get_num(j, ptr, "weight", 1.0);
        ScalarFn h = j.contains("g") ? scalar_from_coeffs(j.at("g"), ptr + "/g") : ScalarFn::zero();
        cost.f = integral_or_zero(j, ptr, "f");
        cost.g = LawFunctional::var_moment(w, std::move(h));
    } else {
        throw ConfigError(ptr + "/type",
                          "expected quadratic | integral | pow_abs | terminal_variance");
    }
    try {
        cost.validate();
    } catch (const std::exception& e) {
        throw ConfigError(ptr, e.what());
    }
    return cost;
}

TransportInstance transport_instance_from_json(const json& j, const std::string& ptr) {
    expect_object(j, ptr);
    reject_unknown(j, ptr,
                   {"n", "m", "T", "x0", "lattice", "cost", "solver", "reference", "family_n_max"});
    TransportInstance inst;
    inst.n = int(get_int(j, ptr, "n", 0));
    inst.m = int(get_int(j, ptr, "m", 5));
    inst.T = get_num(j, ptr, "T", 1.0);
    inst.x0 = get_num(j, ptr, "x0", 0.0);
    if (inst.n < 0 || inst.n > 6) throw ConfigError(ptr + "/n", "level must be in [0, 6]");
    if (inst.m < 2 || inst.m > 15) throw ConfigError(ptr + "/m", "atoms per step must be in [2, 15]");
    if (!(inst.T > 0.0)) throw ConfigError(ptr + "/T", "horizon must be positive");
    if (j.contains("family_n_max")) {
        int top = int(get_int(j, ptr, "family_n_max", inst.n));
        if (top < inst.n || top > 6)
            throw ConfigError(ptr + "/family_n_max", "must be in [n, 6]");
        inst.family_n_max = top;
    }

    if (!j.contains("lattice")) throw ConfigError(ptr + "/lattice", "missing required key");
    const json& lat = j.at("lattice");
    try {
        if (lat.is_array()) {
            inst.lattice = ActionLattice::from_values(get_num_array(lat, ptr + "/lattice"));
        } else if (lat.is_object()) {
            reject_unknown(lat, ptr + "/lattice", {"min", "max", "count"});
            double lo = require_num(lat, ptr + "/lattice", "min");
            double hi = require_num(lat, ptr + "/lattice", "max");
            long count = get_int(lat, ptr + "/lattice", "count", 2);
            if (count < 2) throw ConfigError(ptr + "/lattice/count", "need at least 2 points");
            inst.lattice = ActionLattice::uniform(lo, hi, std::size_t(count));
        } else {
            throw ConfigError(ptr + "/lattice", "expected an array or {min, max, count}");
        }
        inst.lattice.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(ptr + "/lattice", e.what());
    }

    if (!j.contains("cost")) throw ConfigError(ptr + "/cost", "missing required key");
    inst.cost = cost_spec_from_json(j.at("cost"), ptr + "/cost");

    if (j.contains("solver")) {
        const json& s = j.at("solver");
        expect_object(s, ptr + "/solver");
        reject_unknown(s, ptr + "/solver", {"max_iters", "tol"});
        inst.solver.max_iters = std::size_t(get_int(s, ptr + "/solver", "max_iters",
                                                    long(inst.solver.max_iters)));
        double tol = get_num(s, ptr + "/solver", "tol", inst.solver.tol);
        if (!(tol > 0.0)) throw ConfigError(ptr + "/solver/tol", "tolerance must be positive");
        inst.solver.tol = tol;
    }

    if (j.contains("reference")) {
        inst.reference = require_num(j, ptr, "reference");
    } else if (j.at("cost").at("type").get<std::string>() == "quadratic") {
        // HJB value of the continuous quadratic problem: eta' = eta^2,
        // eta(T) = 1 gives eta(0) = 1/(1+T) and the log correction from
        // the Laplacian term
        inst.reference = inst.x0 * inst.x0 / (1.0 + inst.T) + std::log1p(inst.T);
    }
    return inst;
}

json to_json(const TransportInstance& inst, const json& cost_json) {
    json lat = json::array();
    for (double z : inst.lattice.z) lat.push_back(z);
    json out{{"n", inst.n},     {"m", inst.m},          {"T", inst.T},
             {"x0", inst.x0},   {"lattice", lat},       {"cost", cost_json},
             {"solver", json{{"max_iters", inst.solver.max_iters}, {"tol", inst.solver.tol}}}};
    if (inst.reference) out["reference"] = *inst.reference;
    return out;
}

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << format_double(row[i]);
        out << "\n";
    }
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_hash(const json& config) {
    // dump() orders object keys, so the hash is layout-independent
    std::uint64_t h = fnv1a(config.dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

json make_manifest(const std::string& subcommand, const json& config, std::uint64_t seed) {
    return json{{"tool", "mfcx"},
                {"version", "0.1.0"},
                {"format", 1},
                {"subcommand", subcommand},
                {"config_hash", config_hash(config)},
                {"seed", seed},
                {"complete", false}};
}

void write_manifest(const std::string& out_dir, const json& manifest) {
    std::filesystem::create_directories(out_dir);
    write_json_file(out_dir + "/manifest.json", manifest);
}

void write_ladder_csv(const std::string& path, const transport::LadderResult& lr) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : lr.rungs)
        rows.push_back({double(r.n), r.value, r.margin, r.gap_to_reference});
    write_csv(path, {"n", "value", "margin", "gap_to_reference"}, rows);
}

json ladder_to_json(const transport::LadderResult& lr) {
    json rungs = json::array();
    for (const auto& r : lr.rungs) {
        json e{{"n", r.n},
               {"value", r.value},
               {"iterations", r.report.iterations},
               {"gap", r.report.gap},
               {"converged", r.report.converged}};
        if (std::isfinite(r.margin)) e["margin"] = r.margin;
        if (std::isfinite(r.gap_to_reference)) e["gap_to_reference"] = r.gap_to_reference;
        rungs.push_back(std::move(e));
    }
    json out{{"rungs", std::move(rungs)}, {"all_converged", lr.all_converged}};
    if (lr.reference) out["reference"] = *lr.reference;
    return out;
}

json coupling_to_json(const transport::DiscreteCausalCoupling& c, std::size_t entry_cap) {
    const transport::LevelProblem& prob = *c.prob;
    const std::size_t steps = prob.steps();
    const std::size_t nz = prob.n_actions();

    json out{{"level", int(c.level())}, {"block_dt", prob.dt()}, {"x0", prob.x0}};
    json lat = json::array();
    for (double z : prob.lattice.z) lat.push_back(z);
    out["lattice"] = std::move(lat);

    if (c.tree) {
        json acts = json::array();
        for (const auto& row : c.tree->act) {
            json r = json::array();
            for (auto zi : row) r.push_back(zi);
            acts.push_back(std::move(r));
        }
        out["prefix_actions"] = std::move(acts);
        return out;
    }

    std::size_t entries = 0;
    for (std::size_t d = 0; d < steps; ++d)
        entries += prob.wiener.xsupp[d + 1].size() * prob.s_count(d) * nz;
    if (entries > entry_cap) {
        transport::PolicyMoments mom = transport::coupling_moments(c);
        json rates = json::array();
        for (std::size_t d = 0; d < steps; ++d) {
            json r = json::array();
            for (double p : mom.rate[d]) r.push_back(p);
            rates.push_back(std::move(r));
        }
        json tval = json::array(), tw = json::array();
        for (std::size_t s = 0; s < mom.terminal.size(); ++s) {
            if (mom.terminal[s] <= 0.0) continue;
            tval.push_back(prob.term_u[s]);
            tw.push_back(mom.terminal[s]);
        }
        out["truncated"] = true;
        out["rate_laws"] = std::move(rates);
        out["terminal_values"] = std::move(tval);
        out["terminal_weights"] = std::move(tw);
        return out;
    }

    json tables = json::array();
    for (std::size_t d = 0; d < steps; ++d) {
        const std::size_t nx = prob.wiener.xsupp[d + 1].size();
        const std::size_t ns = prob.s_count(d);
        json xs = json::array();
        for (double x : prob.wiener.xsupp[d + 1]) xs.push_back(x);
        json ss = json::array();
        for (double s : prob.ssupp[d]) ss.push_back(s);
        // kernel[x][s] = mixture probability of each action given the
        // revealed node and the running action sum
        json kern = json::array();
        for (std::size_t xi = 0; xi < nx; ++xi) {
            json per_s = json::array();
            for (std::size_t si = 0; si < ns; ++si) {
                std::vector<double> row(nz, 0.0);
                for (std::size_t p = 0; p < c.markov.size(); ++p)
                    row[c.markov[p].act[d][xi * ns + si]] += c.weight[p];
                json jr = json::array();
                for (double v : row) jr.push_back(v);
                per_s.push_back(std::move(jr));
            }
            kern.push_back(std::move(per_s));
        }
        tables.push_back(json{{"step", d},
                              {"x_nodes", std::move(xs)},
                              {"action_sums", std::move(ss)},
                              {"kernel", std::move(kern)}});
    }
    out["steps"] = std::move(tables);
    return out;
}

}  // namespace mfcx
