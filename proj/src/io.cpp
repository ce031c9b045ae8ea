#include "relunet/io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace relunet {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const char* block, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(block) + " block must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + block + " block");
    }
}

template <class T>
T get_as(const json& j, const char* key, const char* block) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid value for '") + key + "' in " + block + " block: " + e.what());
    }
}

std::string number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

json to_json(const Network& net) {
    json j;
    j["interval"] = {net.interval.left, net.interval.right};
    j["alpha"] = net.alpha;
    j["c"] = std::vector<double>(net.c.data(), net.c.data() + net.c.size());
    j["b"] = std::vector<double>(net.b.data(), net.b.data() + net.b.size());
    return j;
}

Network network_from_json(const json& j) {
    try {
        const auto iv = j.at("interval").get<std::vector<double>>();
        if (iv.size() != 2) throw ConfigError("network interval must be [left, right]");
        const auto c = j.at("c").get<std::vector<double>>();
        const auto b = j.value("b", std::vector<double>{});
        const double alpha = j.value("alpha", 0.0);
        if (c.size() != b.size() + 1) throw ConfigError("network needs len(c) = len(b) + 1");
        VectorXd cv = Eigen::Map<const VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
        VectorXd bv = Eigen::Map<const VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
        return Network(Interval(iv[0], iv[1]), alpha, cv, bv);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid network JSON: ") + e.what());
    }
}

json to_json(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(row);
    }
    return rows;
}

json to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const AssembledSystem& sys) {
    json j;
    j["F"] = sys.F_value;
    j["grad_c"] = to_json(sys.grad_c);
    j["grad_b"] = to_json(sys.grad_b);
    j["H11"] = to_json(sys.H11);
    j["H12"] = to_json(sys.H12);
    j["H22"] = to_json(sys.H22);
    j["g"] = to_json(sys.g);
    j["F_vec"] = to_json(sys.F_vec);
    j["mesh"] = {{"h", to_json(sys.mesh.h)},
                 {"h_min", sys.mesh.h_min},
                 {"h_tilde", to_json(sys.mesh.h_tilde)},
                 {"d", to_json(sys.mesh.d)}};
    j["quadrature_warning"] = sys.quadrature_warning;
    return j;
}

void write_trace_csv(std::ostream& out, const IterationTrace& trace) {
    out << "k,F,gnorm_c,gnorm_b,S1,S2,step_c,step_b,relH1err\n";
    for (const TraceRecord& r : trace) {
        out << r.k << ',' << number(r.F) << ',' << number(r.gnorm_c) << ',' << number(r.gnorm_b) << ',' << r.S1 << ','
            << r.S2 << ',' << number(r.step_c) << ',' << number(r.step_b) << ',' << number(r.rel_h1_error) << '\n';
    }
}

SolverConfig solver_config_from_json(const json& j) {
    SolverConfig cfg;
    if (j.is_null()) return cfg;
    reject_unknown(j, "solver",
                   {"scheme", "max_iters", "grad_tol", "tau1", "tau2", "tau3", "seed", "damping",
                    "gauss_newton_fallback", "frozen", "s1_patience", "guard_keep"});
    try {
        if (j.contains("scheme")) cfg.scheme = parse_scheme(get_as<std::string>(j, "scheme", "solver"));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (j.contains("max_iters")) cfg.max_iters = get_as<int>(j, "max_iters", "solver");
    if (j.contains("grad_tol")) cfg.grad_tol = get_as<double>(j, "grad_tol", "solver");
    if (j.contains("tau1")) cfg.tau1 = get_as<double>(j, "tau1", "solver");
    if (j.contains("tau2")) cfg.tau2 = get_as<double>(j, "tau2", "solver");
    if (j.contains("tau3")) cfg.tau3 = get_as<double>(j, "tau3", "solver");
    if (j.contains("seed")) cfg.seed = get_as<std::uint64_t>(j, "seed", "solver");
    if (j.contains("damping")) {
        try {
            cfg.damping = parse_damping(get_as<std::string>(j, "damping", "solver"));
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    if (j.contains("gauss_newton_fallback")) {
        cfg.gauss_newton_fallback = get_as<bool>(j, "gauss_newton_fallback", "solver");
    }
    if (j.contains("frozen")) {
        for (int i : get_as<std::vector<int>>(j, "frozen", "solver")) cfg.frozen.insert(i);
    }
    if (j.contains("s1_patience")) cfg.s1_patience = get_as<int>(j, "s1_patience", "solver");
    if (j.contains("guard_keep")) cfg.guard_keep = get_as<double>(j, "guard_keep", "solver");
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

QuadratureSpec quadrature_from_json(const json& j) {
    QuadratureSpec q;
    if (j.is_null()) return q;
    reject_unknown(j, "quadrature", {"base_order", "rel_tol", "max_depth"});
    if (j.contains("base_order")) q.base_order = get_as<int>(j, "base_order", "quadrature");
    if (j.contains("rel_tol")) q.rel_tol = get_as<double>(j, "rel_tol", "quadrature");
    if (j.contains("max_depth")) q.max_depth = get_as<int>(j, "max_depth", "quadrature");
    try {
        q.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return q;
}

RunConfig parse_run_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j, "top-level", {"problem", "solver", "quadrature", "init", "outputs"});
    RunConfig cfg;
    if (!j.contains("problem")) throw ConfigError("config is missing the 'problem' block");
    try {
        cfg.problem = problem_from_json(j.at("problem"));
    } catch (const ConfigError&) {
        throw;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid problem block: ") + e.what());
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid problem block: ") + e.what());
    }
    cfg.solver = solver_config_from_json(j.value("solver", json()));
    cfg.quadrature = quadrature_from_json(j.value("quadrature", json()));

    if (!j.contains("init")) throw ConfigError("config is missing the 'init' block");
    const json& init = j.at("init");
    const bool uniform = init.contains("uniform");
    const bool explicit_net = init.contains("c") || init.contains("network");
    if (uniform == explicit_net) throw ConfigError("init needs exactly one of {\"uniform\": n} or a network");
    if (uniform) {
        const int n = get_as<int>(init, "uniform", "init");
        if (n < 0) throw ConfigError("init.uniform must be >= 0");
        cfg.init = Network::uniform(cfg.problem.interval, cfg.problem.left_value, n);
    } else {
        cfg.init = network_from_json(init.contains("network") ? init.at("network") : init);
    }

    if (j.contains("outputs")) {
        const json& o = j.at("outputs");
        reject_unknown(o, "outputs", {"trace_csv", "final_json", "certify"});
        if (o.contains("trace_csv") && !o.at("trace_csv").is_null()) {
            cfg.outputs.trace_csv = get_as<std::string>(o, "trace_csv", "outputs");
        }
        if (o.contains("final_json") && !o.at("final_json").is_null()) {
            cfg.outputs.final_json = get_as<std::string>(o, "final_json", "outputs");
        }
        if (o.contains("certify")) cfg.outputs.certify = get_as<bool>(o, "certify", "outputs");
    }
    return cfg;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(load_json_file(path)); }

}  // namespace relunet
