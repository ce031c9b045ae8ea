#pragma once

#include "relunet/model.hpp"

#include <functional>
#include <span>
#include <vector>

namespace relunet {

class QuadratureError : public Error {
public:
    QuadratureError(const std::string& what, double location) : Error(what), location_(location) {}
    double location() const { return location_; }

private:
    double location_;
};

struct QuadratureSpec {
    int base_order = 5;     // Gauss-Legendre nodes per panel
    double rel_tol = 1e-10;  // panel acceptance tolerance
    int max_depth = 30;     // bisection cap per panel

    void validate() const;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

const GaussLegendreRule& gauss_legendre(int order);

struct QuadratureResult {
    double value = 0.0;
    bool depth_exhausted = false;
    double exhausted_at = 0.0;  // midpoint of the first panel accepted unconverged
    long evaluations = 0;
};

/// Per-panel adaptive Gauss-Legendre. A panel is accepted when the rule on the
/// panel and the sum over its two halves agree to rel_tol relative to the
/// panel value, or to roundoff (100 eps) in the panel's share of the integral
/// of |fn|; otherwise
/// both halves are refined, up to max_depth. Refinement also stops once a call
/// has spent 2e6 integrand evaluations; both cases set depth_exhausted. Panel
/// sums use pairwise reduction.
/// Throws QuadratureError on a non-finite integrand value.
QuadratureResult integrate(const std::function<double(double)>& fn, std::span<const double> panels,
                           const QuadratureSpec& spec = {});

/// Vector-valued integrand: fn(panel, x, out) fills `components` values at x,
/// where `panel` indexes the initial panel containing x.
using PanelIntegrand = std::function<void(std::size_t panel, double x, std::span<double> out)>;

/// Vector-valued variant of integrate(); a panel is accepted only when every
/// component passes. Returns the per-panel integrals, panel-major.
struct PanelIntegrals {
    std::vector<double> values;
    int components = 0;
    bool depth_exhausted = false;
    double exhausted_at = 0.0;
    long evaluations = 0;

    double at(std::size_t panel, int component) const { return values[panel * components + component]; }
};

PanelIntegrals integrate_panels(const PanelIntegrand& fn, int components,
                                std::span<const double> panels, const QuadratureSpec& spec = {});

/// Sorted union of the interval endpoints, the breakpoints inside the closed
/// interval and the extra points, deduplicated at h_floor/2.
std::vector<double> merged_panels(const Network& net, std::span<const double> extra_kinks);

/// Pairwise (tree) summation, bit-reproducible for a given ordering.
double pairwise_sum(std::span<const double> v);

}  // namespace relunet
