#include "relunet/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace relunet {
namespace {

GaussLegendreRule compute_rule(int order) {
    GaussLegendreRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    for (int i = 0; i < (order + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= order; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        // Recompute the derivative at the converged node.
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= order; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = order * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[order - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
    return rule;
}

constexpr long kEvaluationBudget = 2'000'000;
constexpr double kRoundoff = 100.0 * std::numeric_limits<double>::epsilon();

class PanelIntegrator {
public:
    PanelIntegrator(const PanelIntegrand& fn, int components,
                    const QuadratureSpec& spec, double total_length)
        : fn_(fn), m_(components), spec_(spec), rule_(gauss_legendre(spec.base_order)),
          total_length_(total_length), scratch_(components), scale_(components, 0.0) {}

    /// Rule estimate on [a, b]; accumulates |f| into `abs_out` when non-null.
    void estimate(double a, double b, std::span<double> out, std::span<double> abs_out = {}) {
        std::fill(out.begin(), out.end(), 0.0);
        if (!abs_out.empty()) std::fill(abs_out.begin(), abs_out.end(), 0.0);
        const double mid = 0.5 * (a + b);
        const double half = 0.5 * (b - a);
        for (std::size_t q = 0; q < rule_.nodes.size(); ++q) {
            const double x = mid + half * rule_.nodes[q];
            fn_(panel_, x, scratch_);
            ++evaluations_;
            const double w = half * rule_.weights[q];
            for (int c = 0; c < m_; ++c) {
                if (!std::isfinite(scratch_[c])) throw QuadratureError("non-finite integrand value", x);
                out[c] += w * scratch_[c];
                if (!abs_out.empty()) abs_out[c] += w * std::fabs(scratch_[c]);
            }
        }
    }

    void add_scale(std::span<const double> abs_est) {
        for (int c = 0; c < m_; ++c) scale_[c] += abs_est[c];
    }

    void refine(double a, double b, std::span<const double> coarse, int depth, std::span<double> out) {
        const double mid = 0.5 * (a + b);
        std::vector<double> left(m_), right(m_);
        estimate(a, mid, left);
        estimate(mid, b, right);
        bool accept = true;
        const double share = (b - a) / total_length_;
        for (int c = 0; c < m_ && accept; ++c) {
            const double fine = left[c] + right[c];
            const double err = std::fabs(fine - coarse[c]);
            // The floor is roundoff in the panel's share of the integral of |f|.
            // Anything larger lets a panel accept halves whose nodes straddle
            // a narrow layer without seeing it.
            const double floor = kRoundoff * scale_[c] * share;
            const double tol = std::max(spec_.rel_tol * (std::fabs(fine) + 1e-300), floor);
            accept = err <= tol;
        }
        // Roundoff in the integrand can defeat the relative test on every
        // subpanel; the evaluation budget keeps that from going exponential.
        const bool budget_spent = evaluations_ >= kEvaluationBudget;
        if (accept || depth + 1 >= spec_.max_depth || budget_spent) {
            if (!accept && !exhausted_) {
                exhausted_ = true;
                exhausted_at_ = mid;
            }
            for (int c = 0; c < m_; ++c) out[c] = left[c] + right[c];
            return;
        }
        std::vector<double> lo(m_), hi(m_);
        refine(a, mid, left, depth + 1, lo);
        refine(mid, b, right, depth + 1, hi);
        for (int c = 0; c < m_; ++c) out[c] = lo[c] + hi[c];
    }

    void set_panel(std::size_t k) { panel_ = k; }
    long evaluations() const { return evaluations_; }
    bool exhausted() const { return exhausted_; }
    double exhausted_at() const { return exhausted_at_; }

private:
    const PanelIntegrand& fn_;
    std::size_t panel_ = 0;
    int m_;
    QuadratureSpec spec_;
    const GaussLegendreRule& rule_;
    double total_length_;
    std::vector<double> scratch_;
    std::vector<double> scale_;
    long evaluations_ = 0;
    bool exhausted_ = false;
    double exhausted_at_ = 0.0;
};

}  // namespace

void QuadratureSpec::validate() const {
    if (base_order < 2) throw Error("quadrature base_order must be >= 2");
    if (!(rel_tol > 0.0)) throw Error("quadrature rel_tol must be > 0");
    if (max_depth < 1) throw Error("quadrature max_depth must be >= 1");
}

const GaussLegendreRule& gauss_legendre(int order) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<GaussLegendreRule>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[order];
    if (!slot) slot = std::make_unique<GaussLegendreRule>(compute_rule(order));
    return *slot;
}

double pairwise_sum(std::span<const double> v) {
    if (v.empty()) return 0.0;
    if (v.size() == 1) return v[0];
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

PanelIntegrals integrate_panels(const PanelIntegrand& fn, int components,
                                std::span<const double> panels, const QuadratureSpec& spec) {
    spec.validate();
    PanelIntegrals result;
    result.components = components;
    if (panels.size() < 2) return result;
    const std::size_t count = panels.size() - 1;
    const double total = panels.back() - panels.front();
    if (!(total > 0.0)) throw Error("integration panels must span a positive length");

    PanelIntegrator integrator(fn, components, spec, total);
    std::vector<double> coarse(count * components), abs_est(components);
    for (std::size_t k = 0; k < count; ++k) {
        std::span<double> slot(coarse.data() + k * components, components);
        integrator.set_panel(k);
        integrator.estimate(panels[k], panels[k + 1], slot, abs_est);
        integrator.add_scale(abs_est);
    }
    result.values.assign(count * components, 0.0);
    for (std::size_t k = 0; k < count; ++k) {
        std::span<const double> c0(coarse.data() + k * components, components);
        std::span<double> out(result.values.data() + k * components, components);
        if (panels[k + 1] <= panels[k]) continue;
        integrator.set_panel(k);
        integrator.refine(panels[k], panels[k + 1], c0, 0, out);
    }
    result.depth_exhausted = integrator.exhausted();
    result.exhausted_at = integrator.exhausted_at();
    result.evaluations = integrator.evaluations();
    return result;
}

QuadratureResult integrate(const std::function<double(double)>& fn, std::span<const double> panels,
                           const QuadratureSpec& spec) {
    const PanelIntegrand wrapped = [&fn](std::size_t, double x, std::span<double> out) {
        out[0] = fn(x);
    };
    const PanelIntegrals p = integrate_panels(wrapped, 1, panels, spec);
    QuadratureResult r;
    r.value = pairwise_sum(p.values);
    r.depth_exhausted = p.depth_exhausted;
    r.exhausted_at = p.exhausted_at;
    r.evaluations = p.evaluations;
    return r;
}

std::vector<double> merged_panels(const Network& net, std::span<const double> extra_kinks) {
    const Interval iv = net.interval;
    std::vector<double> pts;
    pts.reserve(net.b.size() + extra_kinks.size() + 2);
    pts.push_back(iv.left);
    pts.push_back(iv.right);
    for (int i = 0; i < net.n(); ++i) {
        if (iv.contains_closed(net.b[i])) pts.push_back(net.b[i]);
    }
    for (double k : extra_kinks) {
        if (iv.contains_closed(k)) pts.push_back(k);
    }
    std::sort(pts.begin(), pts.end());
    const double tol = 0.5 * iv.h_floor();
    std::vector<double> out;
    out.reserve(pts.size());
    for (double p : pts) {
        if (out.empty() || p - out.back() > tol) out.push_back(p);
    }
    // Keep the right endpoint exact even if a point within tol preceded it.
    if (out.back() != iv.right) {
        if (out.size() > 1 && iv.right - out[out.size() - 2] <= tol) out.pop_back();
        out.back() = iv.right;
    }
    return out;
}

}  // namespace relunet
