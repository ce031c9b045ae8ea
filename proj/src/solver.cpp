#include "relunet/solver.hpp"

#include "relunet/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace relunet {
namespace {

struct FactorFailure {
    bool failed = false;
    int pivot = -1;  // index into the factored matrix
};

// Pivot floor for treating a factorization as singular. The gamma rank-1 term
// can dominate max|M| by many orders, so the floor stays near roundoff.
double pivot_floor(const MatrixXd& M) {
    const double scale = std::max(M.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    return static_cast<double>(M.rows()) * std::numeric_limits<double>::epsilon() * scale;
}

// LDL^T accepted when every pivot is nonzero beyond roundoff; with
// `positive` set, pivots must also be positive.
FactorFailure ldlt_checked(const MatrixXd& M, Eigen::LDLT<MatrixXd>& ldlt, bool positive) {
    ldlt.compute(M);
    const double floor = pivot_floor(M);
    const VectorXd D = ldlt.vectorD();
    VectorXd order = VectorXd::LinSpaced(M.rows(), 0, static_cast<double>(M.rows() - 1));
    const VectorXd original = ldlt.transpositionsP() * order;
    for (int k = 0; k < D.size(); ++k) {
        const double d = positive ? D[k] : std::fabs(D[k]);
        if (!(d > floor)) return {true, static_cast<int>(original[k])};
    }
    return {};
}

std::vector<int> positions_of(const std::vector<int>& indices) {
    std::vector<int> pos;
    pos.reserve(indices.size());
    for (int i : indices) pos.push_back(i - 1);
    return pos;
}

Network with_params(const Network& net, const VectorXd& c, const VectorXd& b) {
    Network m = net;
    m.c = c;
    m.b = b;
    return m;
}

}  // namespace

Scheme parse_scheme(std::string_view s) {
    std::string t(s);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (t == "nlgs" || t == "nl-gs") return Scheme::NLGS;
    if (t == "lgs" || t == "l-gs") return Scheme::LGS;
    if (t == "jb" || t == "jacobi") return Scheme::JB;
    throw Error("unknown scheme '" + std::string(s) + "' (expected nlgs, lgs or jb)");
}

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::NLGS: return "nlgs";
        case Scheme::LGS: return "lgs";
        case Scheme::JB: return "jb";
    }
    return "?";
}

Damping parse_damping(std::string_view s) {
    if (s == "none") return Damping::None;
    if (s == "mesh_guard") return Damping::MeshGuard;
    if (s == "line_search") return Damping::LineSearch;
    throw Error("unknown damping '" + std::string(s) + "' (expected none, mesh_guard or line_search)");
}

std::string to_string(Damping d) {
    switch (d) {
        case Damping::None: return "none";
        case Damping::MeshGuard: return "mesh_guard";
        case Damping::LineSearch: return "line_search";
    }
    return "?";
}

std::string to_string(Reason r) {
    switch (r) {
        case Reason::Update: return "update";
        case Reason::SmallCoefficient: return "small_coefficient";
        case Reason::OutsideInterval: return "outside_interval";
        case Reason::NearOptimal: return "near_optimal";
        case Reason::KinkOfA: return "kink_of_a";
        case Reason::NegativeCurvature: return "negative_curvature";
        case Reason::Frozen: return "frozen";
    }
    return "?";
}

void SolverConfig::validate() const {
    if (max_iters < 0) throw Error("max_iters must be >= 0");
    if (!(grad_tol >= 0.0)) throw Error("grad_tol must be >= 0");
    if (!(tau1 >= 0.0 && tau1 < 1.0)) throw Error("tau1 must lie in [0,1)");
    if (!(tau2 >= 0.0 && tau2 < 1.0)) throw Error("tau2 must lie in [0,1)");
    if (!(tau3 > 0.0 && tau3 < 1.0)) throw Error("tau3 must lie in (0,1)");
    if (s1_patience < 1) throw Error("s1_patience must be >= 1");
    if (!(guard_keep >= 0.0 && guard_keep < 1.0)) throw Error("guard_keep must lie in [0,1)");
}

bool ReductionReport::updates(int index) const { return std::find(S.begin(), S.end(), index) != S.end(); }

ReductionReport full_update_set(int n) {
    ReductionReport r;
    for (int i = 1; i <= n; ++i) {
        r.S.push_back(i);
        r.evidence.push_back(Evidence{i, 0.0, true, 0.0, Reason::Update});
    }
    return r;
}

ReductionReport classify(const Problem& p, const Network& net, const AssembledSystem& sys, const SolverConfig& cfg) {
    const int n = net.n();
    ReductionReport rep;
    const double cmax = std::max(1.0, net.c.size() ? net.c.cwiseAbs().maxCoeff() : 0.0);
    for (int i = 1; i <= n; ++i) {
        Evidence ev;
        ev.index = i;
        const double ci = net.c[i];
        const double bi = net.b[i - 1];
        const double gi = sys.g.size() == n ? sys.g[i - 1] : 0.0;
        ev.abs_c = std::fabs(ci);
        ev.inside = net.interval.contains_open(bi);
        if (p.is_dr()) {
            ev.ratio = ev.inside ? std::fabs(gi) / p.a(bi) : std::numeric_limits<double>::quiet_NaN();
        } else {
            ev.ratio = gi / ci;
        }

        if (cfg.frozen.count(i)) {
            ev.reason = Reason::Frozen;
        } else if (!ev.inside) {
            ev.reason = Reason::OutsideInterval;
        } else if (ev.abs_c / cmax < cfg.tau1) {
            ev.reason = Reason::SmallCoefficient;
        } else if (p.is_dr()) {
            if (std::isnan(gi)) {
                ev.reason = Reason::KinkOfA;
            } else if (ev.ratio <= cfg.tau2) {
                ev.reason = Reason::NearOptimal;
            }
        } else if (gi * ci < 0.0 && std::fabs(ci) < cfg.tau3 * std::fabs(gi)) {
            ev.reason = Reason::NegativeCurvature;
        }

        switch (ev.reason) {
            case Reason::Update: rep.S.push_back(i); break;
            case Reason::SmallCoefficient:
            case Reason::OutsideInterval: rep.S1.push_back(i); break;
            case Reason::NearOptimal:
            case Reason::KinkOfA:
            case Reason::NegativeCurvature: rep.S2.push_back(i); break;
            case Reason::Frozen: break;
        }
        rep.evidence.push_back(ev);
    }
    return rep;
}

VectorXd solve_coefficient_system(const MatrixXd& H11, const VectorXd& rhs) {
    if (!H11.allFinite() || !rhs.allFinite()) throw SolverError("H11 system has non-finite entries", -1);
    Eigen::LLT<MatrixXd> llt(H11);
    if (llt.info() == Eigen::Success) {
        VectorXd x = llt.solve(rhs);
        if (x.allFinite()) return x;
    }
    // Closely spaced breakpoints make the ReLU Gram matrix numerically
    // singular. F is a convex quadratic in c, so any solution of the normal
    // equations is a minimizer; take the minimum-norm one.
    const VectorXd x = H11.completeOrthogonalDecomposition().solve(rhs);
    if (!x.allFinite()) throw SolverError("H11 solve produced non-finite coefficients", -1);
    return x;
}

VectorXd reduced_direction(const MatrixXd& H22, const MatrixXd& H22_gauss_newton, const VectorXd& grad_b,
                           const ReductionReport& report, const SolverConfig& cfg) {
    const int n = static_cast<int>(grad_b.size());
    VectorXd p = VectorXd::Zero(n);
    const std::vector<int> idx = positions_of(report.S);
    const int m = static_cast<int>(idx.size());
    if (m == 0) return p;

    VectorXd rhs(m);
    MatrixXd Hs(m, m), Gs(m, m);
    for (int a = 0; a < m; ++a) {
        rhs[a] = -grad_b[idx[a]];
        for (int b = 0; b < m; ++b) {
            Hs(a, b) = H22(idx[a], idx[b]);
            Gs(a, b) = H22_gauss_newton(idx[a], idx[b]);
        }
    }
    if (rhs.isZero(0.0)) return p;

    Eigen::LDLT<MatrixXd> ldlt;
    FactorFailure fail = ldlt_checked(Hs, ldlt, false);
    if (fail.failed && cfg.gauss_newton_fallback) fail = ldlt_checked(Gs, ldlt, true);
    if (fail.failed) {
        const int neuron = fail.pivot >= 0 ? idx[fail.pivot] + 1 : -1;
        throw SolverError("reduced H22 factorization failed at breakpoint index " + std::to_string(neuron), neuron);
    }
    const VectorXd x = ldlt.solve(rhs);
    for (int a = 0; a < m; ++a) p[idx[a]] = x[a];
    return p;
}

VectorXd reduced_direction(const AssembledSystem& sys, const ReductionReport& report, const SolverConfig& cfg) {
    return reduced_direction(sys.H22, sys.H22_gauss_newton, sys.grad_b, report, cfg);
}

BlockUpdate block_update(Scheme scheme, const SystemOracle& system, const SetSelector& select, const VectorXd& c,
                         const VectorXd& b, const SolverConfig& cfg, const AssembledSystem* at_current) {
    const AssembledSystem s0 = at_current ? *at_current : system(c, b);
    const VectorXd dc = solve_coefficient_system(s0.H11, -s0.grad_c);
    BlockUpdate u;
    u.c = c + dc;
    switch (scheme) {
        case Scheme::NLGS: {
            // b-block assembled at the updated c.
            const AssembledSystem s1 = system(u.c, b);
            u.report = select(u.c, b, s1);
            u.direction = reduced_direction(s1, u.report, cfg);
            break;
        }
        case Scheme::LGS: {
            u.report = select(c, b, s0);
            const VectorXd coupled = s0.grad_b + s0.H12.transpose() * dc;
            u.direction = reduced_direction(s0.H22, s0.H22_gauss_newton, coupled, u.report, cfg);
            break;
        }
        case Scheme::JB: {
            u.report = select(c, b, s0);
            u.direction = reduced_direction(s0, u.report, cfg);
            break;
        }
    }
    return u;
}

double mesh_guard(const Network& net, const VectorXd& direction, double keep) {
    const Interval iv = net.interval;
    double prev_x = iv.left, prev_p = 0.0;
    double lambda = 1.0;
    auto visit = [&](double x, double p) {
        const double gap = x - prev_x;
        const double floor = std::max(iv.h_floor(), keep * gap);
        const double closing = prev_p - p;
        if (closing > 0.0 && gap - closing < floor) lambda = std::min(lambda, std::max(0.0, (gap - floor) / closing));
        prev_x = x;
        prev_p = p;
    };
    for (int i = 0; i < net.n(); ++i) {
        if (iv.contains_open(net.b[i])) visit(net.b[i], direction[i]);
    }
    visit(iv.right, 0.0);
    return lambda;
}

double line_search(const Problem& p, const Network& net, const VectorXd& direction, const QuadratureSpec& q) {
    if (direction.isZero(0.0)) return 0.0;
    // Trial meshes can collapse two knots; a failed coefficient solve just
    // disqualifies that rung.
    auto reduced = [&](double lambda) {
        try {
            const Network trial = solve_linear_parameters(p, canonicalize(with_params(net, net.c, net.b + lambda * direction)), q);
            const double f = objective(p, trial, q);
            return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    double best = objective(p, net, q), lambda = 0.0;
    for (int rung = 0; rung < 14; ++rung) {
        const double t = std::ldexp(1.0, -rung);
        const double f = reduced(t);
        if (f < best) {
            best = f;
            lambda = t;
        }
    }
    return lambda;
}

Canonical redistribute_tracked(const Network& net, const std::vector<int>& S1, std::mt19937_64& rng) {
    const Interval iv = net.interval;
    VectorXd c = net.c, b = net.b;
    if (!S1.empty()) {
        std::vector<double> knots{iv.left};
        for (int i = 0; i < net.n(); ++i) {
            if (iv.contains_open(net.b[i])) knots.push_back(net.b[i]);
        }
        knots.push_back(iv.right);
        std::sort(knots.begin(), knots.end());
        std::uniform_int_distribution<std::size_t> pick(1, knots.size() - 1);
        for (int l : S1) {
            const std::size_t m = pick(rng);
            b[l - 1] = 0.5 * (knots[m - 1] + knots[m]);
            c[l] = 0.0;
        }
    }
    return canonicalize_tracked(std::move(c), std::move(b), iv, iv.h_floor(), net.alpha);
}

Network redistribute(const Network& net, const std::vector<int>& S1, std::mt19937_64& rng) {
    return redistribute_tracked(net, S1, rng).net;
}

SolverState::SolverState(std::uint64_t seed, int n) : rng(seed), s1_streak(n, 0), ids(n) {
    for (int i = 0; i < n; ++i) ids[i] = i;
}

StepResult step(Scheme scheme, const Problem& p, const Network& net, const QuadratureSpec& q, const SolverConfig& cfg,
                SolverState& state, const AssembledSystem* at_current) {
    const int n = net.n();
    if (static_cast<int>(state.s1_streak.size()) != n) state = SolverState(cfg.seed, n);

    const SystemOracle system = [&](const VectorXd& c, const VectorXd& b) {
        return assemble(p, with_params(net, c, b), q);
    };
    const SetSelector select = [&](const VectorXd& c, const VectorXd& b, const AssembledSystem& sys) {
        return classify(p, with_params(net, c, b), sys, cfg);
    };
    const BlockUpdate u = block_update(scheme, system, select, net.c, net.b, cfg, at_current);

    StepResult res;
    res.report = u.report;
    switch (cfg.damping) {
        case Damping::None: res.damping = 1.0; break;
        case Damping::MeshGuard: res.damping = mesh_guard(net, u.direction, cfg.guard_keep); break;
        case Damping::LineSearch: res.damping = line_search(p, with_params(net, u.c, net.b), u.direction, q); break;
    }
    const VectorXd db = res.damping * u.direction;
    res.step_c = (u.c - net.c).norm();
    res.step_b = db.norm();
    const Network moved = with_params(net, u.c, net.b + db);

    std::vector<int> move;
    for (const Evidence& ev : u.report.evidence) {
        const int pos = ev.index - 1;
        const bool in_s1 = ev.reason == Reason::SmallCoefficient || ev.reason == Reason::OutsideInterval;
        state.s1_streak[pos] = in_s1 ? state.s1_streak[pos] + 1 : 0;
        if (ev.reason == Reason::OutsideInterval ||
            (ev.reason == Reason::SmallCoefficient && state.s1_streak[pos] >= cfg.s1_patience)) {
            move.push_back(ev.index);
            state.s1_streak[pos] = 0;
        }
    }
    res.redistributed = move;

    Canonical can = redistribute_tracked(moved, move, state.rng);
    std::vector<int> streak(n), ids(n);
    for (int k = 0; k < n; ++k) {
        streak[k] = state.s1_streak[can.source[k]];
        ids[k] = state.ids[can.source[k]];
    }
    state.s1_streak = std::move(streak);
    state.ids = std::move(ids);
    res.net = std::move(can.net);
    return res;
}

StepResult step_nlgs(const Problem& p, const Network& net, const QuadratureSpec& q, const SolverConfig& cfg) {
    SolverState state(cfg.seed, net.n());
    return step(Scheme::NLGS, p, net, q, cfg, state);
}

StepResult step_lgs(const Problem& p, const Network& net, const QuadratureSpec& q, const SolverConfig& cfg) {
    SolverState state(cfg.seed, net.n());
    return step(Scheme::LGS, p, net, q, cfg, state);
}

StepResult step_jacobi(const Problem& p, const Network& net, const QuadratureSpec& q, const SolverConfig& cfg) {
    SolverState state(cfg.seed, net.n());
    return step(Scheme::JB, p, net, q, cfg, state);
}

Network solve_linear_parameters(const Problem& p, const Network& net, const QuadratureSpec& q) {
    const AssembledSystem s = assemble(p, net, q);
    Network out = net;
    out.c = net.c + solve_coefficient_system(s.H11, -s.grad_c);
    return out;
}

RunResult run(const Problem& p, const Network& init, const SolverConfig& cfg, const QuadratureSpec& q) {
    cfg.validate();
    q.validate();
    RunResult result;
    Network net = canonicalize(init);
    const int n = net.n();
    result.gamma = p.penalty(n);
    SolverState state(cfg.seed, n);
    const bool exact = p.target_u.has_value();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    try {
        result.initial_rel_h1_error = exact ? error_norms(p, solve_linear_parameters(p, net, q), q).rel_h1_semi : nan;
    } catch (const Error& e) {
        result.aborted = true;
        result.abort_message = e.what();
        result.net = net;
        return result;
    }

    for (int k = 0;; ++k) {
        try {
            SolverConfig local = cfg;
            local.frozen.clear();
            for (int pos = 0; pos < n; ++pos) {
                if (cfg.frozen.count(state.ids[pos] + 1)) local.frozen.insert(pos + 1);
            }
            const AssembledSystem sys = assemble(p, net, q);
            const ReductionReport rep = classify(p, net, sys, local);

            TraceRecord rec;
            rec.k = k;
            rec.F = sys.F_value;
            rec.gnorm_c = sys.grad_c.norm();
            double gb = 0.0;
            for (int i : rep.S) gb += sys.grad_b[i - 1] * sys.grad_b[i - 1];
            rec.gnorm_b = std::sqrt(gb);
            rec.S1 = static_cast<int>(rep.S1.size());
            rec.S2 = static_cast<int>(rep.S2.size());
            rec.rel_h1_error = exact ? error_norms(p, net, q).rel_h1_semi : nan;

            if (rec.gnorm_c + rec.gnorm_b <= cfg.grad_tol) {
                result.converged = true;
                result.trace.push_back(rec);
                break;
            }
            if (k >= cfg.max_iters) {
                result.trace.push_back(rec);
                break;
            }
            const StepResult st = step(cfg.scheme, p, net, q, local, state, &sys);
            rec.step_c = st.step_c;
            rec.step_b = st.step_b;
            rec.redistributed = st.redistributed;
            result.trace.push_back(rec);
            net = st.net;
        } catch (const Error& e) {
            result.aborted = true;
            result.abort_message = e.what();
            break;
        }
    }
    result.net = net;
    return result;
}

}  // namespace relunet
