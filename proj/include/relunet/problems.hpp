#pragma once

#include "relunet/expression.hpp"
#include "relunet/model.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace relunet {

/// A scalar coefficient on the interval with declared non-smooth points.
struct CoefficientFunction {
    std::function<double(double)> value;
    std::function<double(double)> derivative;  // empty when not supplied
    std::vector<double> kinks;                 // sorted
    std::string description;

    double operator()(double x) const { return value(x); }

    /// Derivative at x, or nullopt at a declared kink (within `tol`) or when no
    /// derivative is available.
    std::optional<double> derivative_at(double x, double tol) const;

    static CoefficientFunction constant(double v);

    /// Derivative policy: explicit `deriv` if given; 0 for constant expressions;
    /// otherwise a central difference of the expression.
    static CoefficientFunction from_expression(const Expression& e, std::optional<Expression> deriv = std::nullopt,
                                               std::vector<double> kinks = {});
};

enum class ProblemKind { LeastSquares, DiffusionReaction };

/// Variational problem J(v). LS: 1/2 int r (v - u)^2. DR: 1/2 int a v'^2 + r v^2
/// - int f v + gamma/2 (v(right) - beta)^2, with v(left) = alpha imposed by the
/// network offset.
struct Problem {
    ProblemKind kind = ProblemKind::LeastSquares;
    Interval interval;
    CoefficientFunction a;  // DR only
    CoefficientFunction r;
    CoefficientFunction f;  // DR only
    std::optional<CoefficientFunction> target_u;
    std::optional<CoefficientFunction> target_du;
    double left_value = 0.0;
    double right_value = 0.0;
    std::optional<double> gamma;  // DR penalty; defaults to 1e4*(1+n)
    double mu = 0.0;
    double r0 = 0.0;
    /// Points of rapid variation (layers) that quadrature panels must contain.
    std::vector<double> resolution_points;
    std::string name;

    bool is_dr() const { return kind == ProblemKind::DiffusionReaction; }

    /// Boundary penalty for a network with n breakpoints (0 for LS).
    double penalty(int n) const;

    /// Tolerance for deciding that a point sits on a declared kink.
    double kink_tolerance() const { return 1e-9 * interval.length(); }

    /// All declared kinks of the coefficients plus the resolution points.
    std::vector<double> panel_points() const;

    /// Samples the coefficients on 10^4 points and checks the lower bounds.
    void validate() const;
};

Problem catalog(std::string_view name, const nlohmann::json& params);

/// Builds a problem from the config block: either {"catalog": {...}} or the
/// expression keys kind/interval/a/r/f/u/...
Problem problem_from_json(const nlohmann::json& j);

/// max |-(a u')' + r u - f| over an interior grid, using central differences of
/// the exact solution.
double residual_check(const Problem& p, int grid_size);

}  // namespace relunet
