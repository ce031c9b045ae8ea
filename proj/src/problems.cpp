#include "relunet/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace relunet {
namespace {

constexpr int kSampleCount = 10000;

double sech(double t) { return 1.0 / std::cosh(t); }

std::vector<double> read_points(const nlohmann::json& j, const char* key) {
    std::vector<double> pts;
    if (j.contains(key)) pts = j.at(key).get<std::vector<double>>();
    std::sort(pts.begin(), pts.end());
    return pts;
}

std::vector<double> kinks_for(const nlohmann::json& params, const char* coefficient) {
    if (!params.contains("kinks")) return {};
    return read_points(params.at("kinks"), coefficient);
}

CoefficientFunction coefficient_from(const nlohmann::json& params, const char* key, const char* deriv_key,
                                     const std::string& fallback) {
    std::string src = fallback;
    if (params.contains(key)) src = params.at(key).get<std::string>();
    if (src.empty()) throw Error(std::string("missing expression for '") + key + "'");
    std::optional<Expression> deriv;
    if (deriv_key != nullptr && params.contains(deriv_key) && !params.at(deriv_key).is_null()) {
        deriv = parse_expression(params.at(deriv_key).get<std::string>());
    }
    auto cf = CoefficientFunction::from_expression(parse_expression(src), deriv, kinks_for(params, key));
    return cf;
}

Interval interval_from(const nlohmann::json& params, Interval fallback) {
    if (!params.contains("interval")) return fallback;
    const auto v = params.at("interval").get<std::vector<double>>();
    if (v.size() != 2) throw Error("interval must be [left, right]");
    return Interval(v[0], v[1]);
}

double sampled_min(const CoefficientFunction& fn, Interval iv) {
    double m = std::numeric_limits<double>::infinity();
    for (int k = 0; k < kSampleCount; ++k) {
        const double x = iv.left + iv.length() * k / (kSampleCount - 1);
        m = std::min(m, fn(x));
    }
    return m;
}

double require_number(const nlohmann::json& params, const char* key) {
    if (!params.contains(key) || !params.at(key).is_number()) {
        throw Error(std::string("missing or invalid numeric parameter '") + key + "'");
    }
    return params.at(key).get<double>();
}

void apply_common(Problem& p, const nlohmann::json& params) {
    if (params.contains("gamma") && !params.at("gamma").is_null()) {
        p.gamma = params.at("gamma").get<double>();
    }
    if (params.contains("mu")) p.mu = params.at("mu").get<double>();
    if (params.contains("r0")) p.r0 = params.at("r0").get<double>();
    if (params.contains("resolution_points")) {
        auto extra = read_points(params, "resolution_points");
        p.resolution_points.insert(p.resolution_points.end(), extra.begin(), extra.end());
        std::sort(p.resolution_points.begin(), p.resolution_points.end());
    }
}

Problem sp_reaction_diffusion(const nlohmann::json& params) {
    const double nu = require_number(params, "nu");
    if (!(nu > 0.0)) throw Error("sp_reaction_diffusion requires nu > 0");
    const double eps = std::sqrt(nu);
    const double shift = std::tanh(0.75 / eps);

    Problem p;
    p.name = "sp_reaction_diffusion";
    p.kind = ProblemKind::DiffusionReaction;
    p.interval = Interval(-1.0, 1.0);
    p.a = CoefficientFunction::constant(nu);
    p.r = CoefficientFunction::constant(1.0);

    p.f.value = [eps, shift](double x) {
        const double s = (x * x - 0.25) / eps;
        const double sh = sech(s);
        return -2.0 * (eps - 4.0 * x * x * std::tanh(s)) * sh * sh + std::tanh(s) - shift;
    };
    p.f.description = "sp_reaction_diffusion source";

    CoefficientFunction u;
    u.value = [eps, shift](double x) { return std::tanh((x * x - 0.25) / eps) - shift; };
    u.description = "tanh((x^2-1/4)/eps) - tanh(3/(4 eps))";
    CoefficientFunction du;
    du.value = [eps](double x) {
        const double sh = sech((x * x - 0.25) / eps);
        return 2.0 * x / eps * sh * sh;
    };
    p.target_u = u;
    p.target_du = du;
    p.left_value = 0.0;
    p.right_value = 0.0;
    p.mu = nu;
    p.r0 = 1.0;
    p.resolution_points = {-0.5, 0.5};
    apply_common(p, params);
    return p;
}

Problem ls_xalpha(const nlohmann::json& params) {
    const double ae = require_number(params, "alpha_exp");
    if (!(ae > 0.0 && ae < 1.0)) throw Error("ls_xalpha requires alpha_exp in (0,1)");
    Problem p;
    p.name = "ls_xalpha";
    p.kind = ProblemKind::LeastSquares;
    p.interval = Interval(0.0, 1.0);
    p.r = CoefficientFunction::constant(1.0);
    CoefficientFunction u;
    u.value = [ae](double x) { return x <= 0.0 ? 0.0 : std::pow(x, ae); };
    u.kinks = {0.0};
    u.description = "x^alpha";
    CoefficientFunction du;
    du.value = [ae](double x) { return x <= 0.0 ? 0.0 : ae * std::pow(x, ae - 1.0); };
    p.target_u = u;
    p.target_du = du;
    p.left_value = 0.0;
    p.r0 = 1.0;
    apply_common(p, params);
    return p;
}

Problem from_expressions(ProblemKind kind, const nlohmann::json& params) {
    Problem p;
    p.kind = kind;
    p.interval = interval_from(params, Interval(0.0, 1.0));
    p.r = coefficient_from(params, "r", "dr", kind == ProblemKind::LeastSquares ? "1" : "");

    const bool has_u = params.contains("u") && !params.at("u").is_null();
    if (has_u) {
        p.target_u = coefficient_from(params, "u", nullptr, "");
        if (params.contains("du") && !params.at("du").is_null()) {
            p.target_du = coefficient_from(params, "du", nullptr, "");
        }
    }

    if (kind == ProblemKind::DiffusionReaction) {
        p.name = "dr_expr";
        p.a = coefficient_from(params, "a", "da", "");
        p.f = coefficient_from(params, "f", nullptr, "");
        const double lv_default = has_u ? (*p.target_u)(p.interval.left) : 0.0;
        const double rv_default = has_u ? (*p.target_u)(p.interval.right) : 0.0;
        p.left_value = params.value("left_value", lv_default);
        p.right_value = params.value("right_value", rv_default);
        p.mu = sampled_min(p.a, p.interval);
        p.r0 = std::max(0.0, sampled_min(p.r, p.interval));
    } else {
        p.name = "ls_expr";
        if (!has_u) throw Error("ls_expr requires a target expression 'u'");
        p.left_value = params.value("left_value", (*p.target_u)(p.interval.left));
        p.r0 = sampled_min(p.r, p.interval);
    }
    apply_common(p, params);
    return p;
}

}  // namespace

std::optional<double> CoefficientFunction::derivative_at(double x, double tol) const {
    for (double k : kinks) {
        if (std::fabs(x - k) <= tol) return std::nullopt;
    }
    if (!derivative) return std::nullopt;
    return derivative(x);
}

CoefficientFunction CoefficientFunction::constant(double v) {
    CoefficientFunction cf;
    cf.value = [v](double) { return v; };
    cf.derivative = [](double) { return 0.0; };
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    cf.description = buf;
    return cf;
}

CoefficientFunction CoefficientFunction::from_expression(const Expression& e, std::optional<Expression> deriv,
                                                         std::vector<double> kinks) {
    CoefficientFunction cf;
    cf.value = [e](double x) { return e(x); };
    cf.description = e.to_string();
    if (deriv) {
        cf.derivative = [d = *deriv](double x) { return d(x); };
    } else if (e.is_constant()) {
        cf.derivative = [](double) { return 0.0; };
    } else {
        cf.derivative = [e](double x) {
            const double h = 1e-6 * std::max(1.0, std::fabs(x));
            return (e(x + h) - e(x - h)) / (2.0 * h);
        };
    }
    std::sort(kinks.begin(), kinks.end());
    cf.kinks = std::move(kinks);
    return cf;
}

double Problem::penalty(int n) const {
    if (!is_dr()) return 0.0;
    return gamma.value_or(1e4 * (1.0 + n));
}

std::vector<double> Problem::panel_points() const {
    std::vector<double> pts = resolution_points;
    auto add = [&](const CoefficientFunction& cf) { pts.insert(pts.end(), cf.kinks.begin(), cf.kinks.end()); };
    add(r);
    if (is_dr()) {
        add(a);
        add(f);
    }
    if (target_u) add(*target_u);
    std::sort(pts.begin(), pts.end());
    return pts;
}

void Problem::validate() const {
    const double slack = 1e-12;
    if (is_dr()) {
        if (!a.value || !r.value || !f.value) throw Error("diffusion-reaction problem requires a, r and f");
        if (!(mu > 0.0)) throw Error("diffusion-reaction problem requires mu > 0");
        if (r0 < 0.0) throw Error("reaction lower bound r0 must be >= 0");
        if (sampled_min(a, interval) < mu * (1.0 - slack)) throw Error("a(x) >= mu violated on sampling grid");
        if (sampled_min(r, interval) < r0 - slack * std::max(1.0, std::fabs(r0))) {
            throw Error("r(x) >= r0 violated on sampling grid");
        }
        if (gamma && *gamma < 0.0) throw Error("gamma must be >= 0");
    } else {
        if (!r.value || !target_u) throw Error("least-squares problem requires r and a target u");
        if (!(r0 > 0.0)) throw Error("least-squares problem requires r0 > 0");
        if (sampled_min(r, interval) < r0 * (1.0 - slack)) throw Error("r(x) >= r0 violated on sampling grid");
    }
}

Problem catalog(std::string_view name, const nlohmann::json& params) {
    if (!params.is_object() && !params.is_null()) throw Error("catalog params must be an object");
    const nlohmann::json& pj = params.is_null() ? nlohmann::json::object() : params;
    Problem p;
    if (name == "sp_reaction_diffusion") {
        p = sp_reaction_diffusion(pj);
    } else if (name == "ls_xalpha") {
        p = ls_xalpha(pj);
    } else if (name == "ls_expr") {
        p = from_expressions(ProblemKind::LeastSquares, pj);
    } else if (name == "dr_expr") {
        p = from_expressions(ProblemKind::DiffusionReaction, pj);
    } else {
        throw Error("unknown catalog problem '" + std::string(name) + "'");
    }
    p.validate();
    return p;
}

Problem problem_from_json(const nlohmann::json& j) {
    if (j.contains("catalog")) {
        const auto& cat = j.at("catalog");
        nlohmann::json params = cat.value("params", nlohmann::json::object());
        if (j.contains("gamma") && !params.contains("gamma")) params["gamma"] = j.at("gamma");
        return catalog(cat.at("name").get<std::string>(), params);
    }
    const std::string kind = j.value("kind", "");
    if (kind == "dr") return catalog("dr_expr", j);
    if (kind == "ls") return catalog("ls_expr", j);
    throw Error("problem kind must be \"dr\" or \"ls\"");
}

double residual_check(const Problem& p, int grid_size) {
    if (!p.is_dr()) throw Error("residual_check applies to diffusion-reaction problems");
    if (!p.target_u) throw Error("residual_check requires an exact solution");
    if (grid_size < 2) throw Error("residual_check needs grid_size >= 2");
    const auto& u = *p.target_u;
    const double h = p.interval.length() / grid_size;
    double worst = 0.0;
    for (int k = 1; k < grid_size; ++k) {
        const double x = p.interval.left + k * h;
        const double flux_r = p.a(x + 0.5 * h) * (u(x + h) - u(x)) / h;
        const double flux_l = p.a(x - 0.5 * h) * (u(x) - u(x - h)) / h;
        const double res = -(flux_r - flux_l) / h + p.r(x) * u(x) - p.f(x);
        worst = std::max(worst, std::fabs(res));
    }
    return worst;
}

}  // namespace relunet
