#include "relunet/cli.hpp"

#include "relunet/analysis.hpp"
#include "relunet/assembly.hpp"
#include "relunet/io.hpp"
#include "relunet/solver.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace relunet {
namespace {

using nlohmann::json;

bool load(const std::string& path, const CliOverrides& o, RunConfig& cfg, std::ostream& err) {
    try {
        cfg = load_run_config(path);
        if (o.seed) cfg.solver.seed = *o.seed;
        if (o.iters) {
            if (*o.iters < 0) throw ConfigError("--iters must be >= 0");
            cfg.solver.max_iters = *o.iters;
        }
        if (o.scheme) cfg.solver.scheme = parse_scheme(*o.scheme);
        return true;
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return false;
    }
}

bool load_network(const std::string& path, Network& net, std::ostream& err) {
    try {
        net = canonicalize(network_from_json(load_json_file(path)));
        return true;
    } catch (const Error& e) {
        err << "network error: " << e.what() << '\n';
        return false;
    }
}

std::string fmt(const char* spec, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, x);
    return buf;
}

std::vector<double> coefficient_kinks(const Problem& p) {
    std::vector<double> k = p.r.kinks;
    if (p.is_dr()) {
        k.insert(k.end(), p.a.kinks.begin(), p.a.kinks.end());
        k.insert(k.end(), p.f.kinks.begin(), p.f.kinks.end());
    }
    if (p.target_u) k.insert(k.end(), p.target_u->kinks.begin(), p.target_u->kinks.end());
    return k;
}

json nullable(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json spd_json(const Certificate& c) {
    json j{{"verdict", c.verdict}, {"inconclusive", c.inconclusive}, {"min_eigenvalue", nullable(c.min_eigenvalue)}};
    if (!c.verdict && c.witness.size() > 0) j["witness"] = to_json(c.witness);
    return j;
}

struct CertifyOutcome {
    json report;
    bool spd_full = false;
    double sigma[3] = {NAN, NAN, NAN};  // nlgs, lgs, jb
};

// Throws ConditionError when some c_i = 0.
CertifyOutcome certify(const Problem& p, const Network& net, const QuadratureSpec& q) {
    const AssembledSystem sys = assemble(p, net, q);
    const Certificate cond = theorem_condition(p, net, sys, 0.5);
    const Certificate full = spd_check(sys.hessian());
    const Certificate h11 = spd_check(sys.H11);
    const Certificate h22 = spd_check(sys.H22);
    MatrixXd flipped = sys.hessian();
    const int nc = static_cast<int>(sys.H11.rows());
    flipped.topRightCorner(nc, sys.n()) *= -1.0;
    flipped.bottomLeftCorner(sys.n(), nc) *= -1.0;
    const Certificate jac = spd_check(flipped);

    CertifyOutcome out;
    out.spd_full = full.verdict;
    if (full.verdict) {
        out.sigma[0] = contraction_factor(sys, Scheme::NLGS);
        out.sigma[1] = contraction_factor(sys, Scheme::LGS);
        out.sigma[2] = contraction_factor(sys, Scheme::JB);
    }
    json margins = json::array();
    for (double m : cond.margins) margins.push_back(nullable(m));
    out.report = json{{"spd_full", spd_json(full)},
                      {"spd_blocks", {{"verdict", h11.verdict && h22.verdict}, {"H11", spd_json(h11)}, {"H22", spd_json(h22)}}},
                      {"condition_margins", margins},
                      {"condition_verdict", cond.verdict},
                      {"general_condition", {{"best_tau", cond.best_tau}, {"best_margin", nullable(cond.best_general_margin)}}},
                      {"sigma_nlgs", nullable(out.sigma[0])},
                      {"sigma_lgs", nullable(out.sigma[1])},
                      {"sigma_jb", nullable(out.sigma[2])},
                      {"jacobi_spd", jac.verdict}};
    if (!cond.verdict) out.report["condition_violating_index"] = cond.violating_index;
    return out;
}

int scheme_slot(Scheme s) { return s == Scheme::NLGS ? 0 : (s == Scheme::LGS ? 1 : 2); }

}  // namespace

int cmd_run(const std::string& config_path, const CliOverrides& o, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    if (!load(config_path, o, cfg, err)) return kExitConfig;
    const Network init = cfg.init;
    if (!o.quiet) {
        out << "# problem=" << cfg.problem.name << " n=" << init.n() << " scheme=" << to_string(cfg.solver.scheme)
            << " gamma=" << fmt("%.17g", cfg.problem.penalty(init.n())) << " seed=" << cfg.solver.seed
            << " damping=" << to_string(cfg.solver.damping) << '\n';
    }
    RunResult r;
    try {
        r = run(cfg.problem, init, cfg.solver, cfg.quadrature);
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    if (cfg.outputs.trace_csv) {
        std::ofstream f(*cfg.outputs.trace_csv, std::ios::binary);
        if (!f) {
            err << "cannot write " << *cfg.outputs.trace_csv << '\n';
            return kExitConfig;
        }
        write_trace_csv(f, r.trace);
    }
    if (cfg.outputs.final_json) {
        std::ofstream f(*cfg.outputs.final_json, std::ios::binary);
        if (!f) {
            err << "cannot write " << *cfg.outputs.final_json << '\n';
            return kExitConfig;
        }
        f << to_json(r.net).dump(2) << '\n';
    }

    std::string sigma;
    if (cfg.outputs.certify && !r.aborted) {
        try {
            const CertifyOutcome c = certify(cfg.problem, r.net, cfg.quadrature);
            const double s = c.sigma[scheme_slot(cfg.solver.scheme)];
            sigma = std::isfinite(s) ? fmt(" sigma=%.6g", s) : " sigma=n/a";
        } catch (const Error& e) {
            sigma = " sigma=n/a";
        }
    }
    if (!o.quiet) {
        const TraceRecord* last = r.trace.empty() ? nullptr : &r.trace.back();
        const int iters = r.trace.empty() ? 0 : static_cast<int>(r.trace.size()) - 1;
        out << "iters=" << iters << " F=" << fmt("%.10g", last ? last->F : NAN)
            << " relH1=" << fmt("%.6g", last ? last->rel_h1_error : NAN) << sigma << '\n';
    }
    if (r.aborted) {
        err << "solver aborted: " << r.abort_message << '\n';
        return kExitSolverAbort;
    }
    return kExitOk;
}

int cmd_check(const std::string& config_path, const CliOverrides& o, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    if (!load(config_path, o, cfg, err)) return kExitConfig;
    const Problem& p = cfg.problem;
    Network net;
    try {
        net = canonicalize(cfg.init);
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    const double tol = p.kink_tolerance();
    for (int i = 0; i < net.n(); ++i) {
        for (double k : coefficient_kinks(p)) {
            if (std::fabs(net.b[i] - k) <= tol) {
                err << "refusing check: breakpoint b_" << i + 1 << " = " << fmt("%.17g", net.b[i])
                    << " sits on a declared kink; finite differences are invalid there\n";
                return kExitPrecondition;
            }
        }
    }
    QuadratureSpec q = cfg.quadrature;
    q.rel_tol = std::min(q.rel_tol, 1e-12);
    DerivativeCheck d;
    try {
        d = finite_difference_check(p, net, q);
    } catch (const QuadratureError& e) {
        err << "quadrature failure near x = " << fmt("%.17g", e.location()) << ": " << e.what() << '\n';
        return kExitVerification;
    } catch (const Error& e) {
        err << "refusing check: " << e.what() << '\n';
        return kExitPrecondition;
    }
    const bool ok = d.within(1e-5, 1e-4);
    if (!o.quiet) {
        out << "grad_c " << fmt("%.3e", d.grad_c) << '\n';
        out << "H11    " << fmt("%.3e", d.H11) << '\n';
        if (net.n() > 0) {
            out << "grad_b " << fmt("%.3e", d.grad_b) << '\n';
            out << "H12    " << fmt("%.3e", d.H12) << '\n';
            out << "H21    " << fmt("%.3e", d.H21) << '\n';
            out << "H22    " << fmt("%.3e", d.H22) << '\n';
        }
        out << (ok ? "ok" : "FAILED") << '\n';
    }
    return ok ? kExitOk : kExitVerification;
}

int cmd_certify(const std::string& config_path, const std::string& network_path, const CliOverrides& o,
                std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    if (!load(config_path, o, cfg, err)) return kExitConfig;
    Network net;
    if (!load_network(network_path, net, err)) return kExitConfig;
    CertifyOutcome c;
    try {
        c = certify(cfg.problem, net, cfg.quadrature);
    } catch (const ConditionError& e) {
        err << e.what() << " (index " << e.index() << ")\n";
        return kExitInapplicable;
    } catch (const Error& e) {
        err << "certify failed: " << e.what() << '\n';
        return kExitVerification;
    }
    out << c.report.dump(2) << '\n';
    const double s = c.sigma[scheme_slot(cfg.solver.scheme)];
    return c.spd_full && std::isfinite(s) && s < 1.0 ? kExitOk : kExitVerification;
}

int cmd_error(const std::string& config_path, const std::string& network_path, const CliOverrides& o,
              std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    if (!load(config_path, o, cfg, err)) return kExitConfig;
    Network net;
    if (!load_network(network_path, net, err)) return kExitConfig;
    if (!cfg.problem.target_u) {
        err << "error norms need an exact solution in the problem block\n";
        return kExitPrecondition;
    }
    try {
        const ErrorNorms e = error_norms(cfg.problem, net, cfg.quadrature);
        out << json{{"l2", e.l2}, {"h1_semi", e.h1_semi}, {"rel_h1_semi", e.rel_h1_semi}}.dump(2) << '\n';
    } catch (const Error& e) {
        err << "error computation failed: " << e.what() << '\n';
        return kExitVerification;
    }
    return kExitOk;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Block Newton fitting of shallow ReLU networks in one dimension"};
    app.footer(
        "Exit codes: 0 ok, 1 config error, 2 solver abort, 3 precondition refused,\n"
        "            4 verification failed, 5 convergence condition inapplicable");
    app.require_subcommand(1);

    CliOverrides o;
    std::uint64_t seed = 0;
    int iters = 0;
    std::string scheme;
    std::string config, network;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "override solver seed");
        sub->add_option("--iters", iters, "override max_iters");
        sub->add_option("--scheme", scheme, "nlgs | lgs | jb");
        sub->add_flag("--quiet", o.quiet, "suppress non-error output");
        sub->add_option("config", config, "run config (JSON)")->required();
    };
    CLI::App* run_cmd = app.add_subcommand("run", "run the configured solve");
    common(run_cmd);
    CLI::App* check_cmd = app.add_subcommand("check", "finite-difference check at the initial network");
    common(check_cmd);
    CLI::App* cert_cmd = app.add_subcommand("certify", "convergence certificates for a network");
    common(cert_cmd);
    cert_cmd->add_option("network", network, "network JSON")->required();
    CLI::App* err_cmd = app.add_subcommand("error", "error norms of a network against the exact solution");
    common(err_cmd);
    err_cmd->add_option("network", network, "network JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }
    for (CLI::App* sub : {run_cmd, check_cmd, cert_cmd, err_cmd}) {
        if (sub->count("--seed")) o.seed = seed;
        if (sub->count("--iters")) o.iters = iters;
        if (sub->count("--scheme")) o.scheme = scheme;
    }
    if (run_cmd->parsed()) return cmd_run(config, o, out, err);
    if (check_cmd->parsed()) return cmd_check(config, o, out, err);
    if (cert_cmd->parsed()) return cmd_certify(config, network, o, out, err);
    return cmd_error(config, network, o, out, err);
}

}  // namespace relunet
