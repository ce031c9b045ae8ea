#include "relunet/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace relunet {
namespace {

// Per-panel view of the network: which neurons are active, their offsets
// o_i = p_k - b_i, and the local linear form u_n = A_k + B_k * (x - p_k).
struct Layout {
    std::vector<double> panels;
    int n = 0;
    std::size_t K = 0;
    std::vector<char> active;   // (n+1) x K, neuron-major
    std::vector<double> offset;  // (n+1) x K
    std::vector<double> A, B;

    bool act(int i, std::size_t k) const { return active[i * K + k] != 0; }
    double off(int i, std::size_t k) const { return offset[i * K + k]; }
};

double knot_or_left(const Network& net, int i) { return i == 0 ? net.interval.left : net.b[i - 1]; }

Layout make_layout(const Network& net, std::span<const double> extra) {
    Layout L;
    L.panels = merged_panels(net, extra);
    L.n = net.n();
    L.K = L.panels.size() - 1;
    L.active.assign((L.n + 1) * L.K, 0);
    L.offset.assign((L.n + 1) * L.K, 0.0);
    L.A.assign(L.K, net.alpha);
    L.B.assign(L.K, 0.0);
    for (std::size_t k = 0; k < L.K; ++k) {
        const double pk = L.panels[k];
        const double mid = 0.5 * (L.panels[k] + L.panels[k + 1]);
        for (int i = 0; i <= L.n; ++i) {
            const bool on = i == 0 || net.b[i - 1] < mid;
            if (!on) continue;
            const double o = pk - knot_or_left(net, i);
            L.active[i * L.K + k] = 1;
            L.offset[i * L.K + k] = o;
            L.A[k] += net.c[i] * o;
            L.B[k] += net.c[i];
        }
    }
    return L;
}

// ss, sh, hh from the weight moments W0, W1, W2 on every panel.
void blocks_from_moments(const Layout& L, const PanelIntegrals& P, int c0, WeightedBlocks& wb) {
    const int n = L.n;
    wb.ss = MatrixXd::Zero(n + 1, n + 1);
    wb.sh = MatrixXd::Zero(n + 1, n);
    wb.hh = MatrixXd::Zero(n + 1, n + 1);
    for (std::size_t k = 0; k < L.K; ++k) {
        const double W0 = P.at(k, c0), W1 = P.at(k, c0 + 1), W2 = P.at(k, c0 + 2);
        for (int i = 0; i <= n; ++i) {
            if (!L.act(i, k)) continue;
            const double oi = L.off(i, k);
            for (int j = 0; j <= n; ++j) {
                if (!L.act(j, k)) continue;
                const double oj = L.off(j, k);
                wb.ss(i, j) += W2 + (oi + oj) * W1 + oi * oj * W0;
                wb.hh(i, j) += W0;
                if (j >= 1) wb.sh(i, j - 1) += W1 + oi * W0;
            }
        }
    }
}

MatrixXd delta_block(const Network& net, const CoefficientFunction& w) {
    const int n = net.n();
    MatrixXd D = MatrixXd::Zero(n + 1, n);
    for (int j = 0; j < n; ++j) {
        const double bj = net.b[j];
        if (!net.interval.contains_closed(bj)) continue;
        const double wj = w(bj);
        for (int i = 0; i <= n; ++i) D(i, j) = wj * heaviside(bj - knot_or_left(net, i));
    }
    return D;
}

double max_abs(const MatrixXd& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

// Pointwise g with NaN where a' does not exist.
VectorXd g_values(const Problem& p, const Network& net) {
    const int n = net.n();
    VectorXd g = VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
        const double bj = net.b[j];
        if (!net.interval.contains_closed(bj)) continue;
        const double un = evaluate(net, bj);
        if (p.is_dr()) {
            const auto da = p.a.derivative_at(bj, p.kink_tolerance());
            if (!da) {
                g[j] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            g[j] = p.r(bj) * un - p.f(bj) - *da * derivative(net, bj);
        } else {
            g[j] = p.r(bj) * (un - (*p.target_u)(bj));
        }
    }
    return g;
}

// Component layout of the shared integrand.
enum : int { kR0, kR1, kR2, kQ0, kQ1, kE, kA0, kLS = 6, kDR = 7 };

AssembledSystem assemble_impl(const Problem& p, const Network& net, const QuadratureSpec& q) {
    if (net.c.size() != net.n() + 1) throw Error("network needs n+1 coefficients for n breakpoints");
    const int n = net.n();
    const std::vector<double> extra = p.panel_points();
    const Layout L = make_layout(net, extra);
    const bool dr = p.is_dr();

    const PanelIntegrand fn = [&](std::size_t k, double x, std::span<double> out) {
        const double t = x - L.panels[k];
        const double un = L.A[k] + L.B[k] * t;
        const double r = p.r(x);
        out[kR0] = r;
        out[kR1] = r * t;
        out[kR2] = r * t * t;
        double qv = 0.0;
        if (dr) {
            const double fx = p.f(x);
            qv = r * un - fx;
            out[kE] = 0.5 * r * un * un - fx * un;
            out[kA0] = p.a(x);
        } else {
            const double res = un - (*p.target_u)(x);
            qv = r * res;
            out[kE] = 0.5 * r * res * res;
        }
        out[kQ0] = qv;
        out[kQ1] = qv * t;
    };
    const PanelIntegrals P = integrate_panels(fn, dr ? kDR : kLS, L.panels, q);

    AssembledSystem s;
    s.quadrature_warning = P.depth_exhausted;
    s.mesh = mesh_quantities(net);

    WeightedBlocks rb;
    blocks_from_moments(L, P, kR0, rb);

    const double gamma = p.penalty(n);
    const double R = net.interval.right;
    const double uR = evaluate(net, R);
    const double pen = uR - p.right_value;
    VectorXd dbar = VectorXd::Zero(n + 1);
    VectorXd hR = VectorXd::Zero(n);
    if (dr) {
        for (int i = 0; i <= n; ++i) dbar[i] = relu(R - knot_or_left(net, i));
        for (int j = 0; j < n; ++j) hR[j] = heaviside(R - net.b[j]);
    }

    // Objective.
    std::vector<double> per_panel(L.K);
    for (std::size_t k = 0; k < L.K; ++k) {
        per_panel[k] = P.at(k, kE);
        if (dr) per_panel[k] += 0.5 * L.B[k] * L.B[k] * P.at(k, kA0);
    }
    s.F_value = pairwise_sum(per_panel);
    if (dr) s.F_value += 0.5 * gamma * pen * pen;

    // grad_c and F_j.
    s.grad_c = VectorXd::Zero(n + 1);
    s.F_vec = VectorXd::Zero(n);
    for (std::size_t k = 0; k < L.K; ++k) {
        const double Q0 = P.at(k, kQ0), Q1 = P.at(k, kQ1);
        const double aB = dr ? L.B[k] * P.at(k, kA0) : 0.0;
        for (int i = 0; i <= n; ++i) {
            if (!L.act(i, k)) continue;
            s.grad_c[i] += aB + Q1 + L.off(i, k) * Q0;
            if (i >= 1) s.F_vec[i - 1] -= Q0;
        }
    }
    if (dr) {
        s.grad_c += gamma * pen * dbar;
        for (int j = 0; j < n; ++j) {
            const double bj = net.b[j];
            if (net.interval.contains_closed(bj)) s.F_vec[j] -= p.a(bj) * derivative(net, bj);
            s.F_vec[j] -= gamma * hR[j] * pen;
        }
    }
    const VectorXd chat = net.c.tail(n);
    s.grad_b = chat.cwiseProduct(s.F_vec);

    s.g = g_values(p, net);

    // Hessian blocks.
    MatrixXd Rm = MatrixXd::Zero(n + 1, n);
    for (int j = 0; j < n; ++j) Rm(j + 1, j) = s.F_vec[j];
    const MatrixXd hh_r = rb.hh.bottomRightCorner(n, n);
    s.H22_gauss_newton = chat.asDiagonal() * hh_r * chat.asDiagonal();
    if (dr) {
        MatrixXd hh_a = MatrixXd::Zero(n + 1, n + 1);
        for (std::size_t k = 0; k < L.K; ++k) {
            const double W0 = P.at(k, kA0);
            for (int i = 0; i <= n; ++i) {
                if (!L.act(i, k)) continue;
                for (int j = 0; j <= n; ++j) {
                    if (L.act(j, k)) hh_a(i, j) += W0;
                }
            }
        }
        const MatrixXd delta_a = delta_block(net, p.a);
        const VectorXd ch = chat.cwiseProduct(hR);
        s.H11 = hh_a + rb.ss + gamma * dbar * dbar.transpose();
        s.H12 = Rm - (delta_a + rb.sh) * chat.asDiagonal() - gamma * dbar * ch.transpose();
        s.H22 = MatrixXd(chat.cwiseProduct(s.g).asDiagonal()) + s.H22_gauss_newton + gamma * ch * ch.transpose();
    } else {
        s.H11 = rb.ss;
        s.H12 = Rm - rb.sh * chat.asDiagonal();
        s.H22 = MatrixXd(chat.cwiseProduct(s.g).asDiagonal()) + s.H22_gauss_newton;
    }
    return s;
}

double rel_block_error(const MatrixXd& fd, const MatrixXd& exact) {
    if (exact.size() == 0) return 0.0;
    return max_abs(fd - exact) / std::max(max_abs(exact), 1e-12);
}

}  // namespace

MatrixXd AssembledSystem::hessian() const {
    const int m = static_cast<int>(H11.rows());
    const int k = n();
    MatrixXd H(m + k, m + k);
    H.topLeftCorner(m, m) = H11;
    H.topRightCorner(m, k) = H12;
    H.bottomLeftCorner(k, m) = H12.transpose();
    H.bottomRightCorner(k, k) = H22;
    return H;
}

VectorXd AssembledSystem::gradient() const {
    VectorXd v(grad_c.size() + grad_b.size());
    v << grad_c, grad_b;
    return v;
}

WeightedBlocks weighted_blocks(const Network& net, const CoefficientFunction& w, std::span<const double> extra_points,
                               const QuadratureSpec& q) {
    const Layout L = make_layout(net, extra_points);
    const PanelIntegrand fn = [&](std::size_t k, double x, std::span<double> out) {
        const double t = x - L.panels[k];
        const double wx = w(x);
        out[0] = wx;
        out[1] = wx * t;
        out[2] = wx * t * t;
    };
    const PanelIntegrals P = integrate_panels(fn, 3, L.panels, q);
    WeightedBlocks wb;
    blocks_from_moments(L, P, 0, wb);
    wb.delta = delta_block(net, w);
    return wb;
}

double objective(const Problem& p, const Network& net, const QuadratureSpec& q) {
    return assemble_impl(p, net, q).F_value;
}

VectorXd grad_c(const Problem& p, const Network& net, const QuadratureSpec& q) {
    return assemble_impl(p, net, q).grad_c;
}

VectorXd compute_g(const Problem& p, const Network& net) {
    VectorXd g = g_values(p, net);
    for (int j = 0; j < g.size(); ++j) {
        if (std::isnan(g[j])) {
            throw Error("a'(b) does not exist at breakpoint index " + std::to_string(j + 1));
        }
    }
    return g;
}

VectorXd compute_F_vec(const Problem& p, const Network& net, const QuadratureSpec& q) {
    return assemble_impl(p, net, q).F_vec;
}

MatrixXd assemble_H11(const Problem& p, const Network& net, const QuadratureSpec& q) {
    return assemble_impl(p, net, q).H11;
}

MatrixXd assemble_H12(const Problem& p, const Network& net, const QuadratureSpec& q) {
    return assemble_impl(p, net, q).H12;
}

MatrixXd assemble_H22(const Problem& p, const Network& net, const QuadratureSpec& q) {
    compute_g(p, net);
    return assemble_impl(p, net, q).H22;
}

AssembledSystem assemble(const Problem& p, const Network& net, const QuadratureSpec& q) {
    return assemble_impl(p, net, q);
}

DerivativeCheck finite_difference_check(const Problem& p, const Network& net, const QuadratureSpec& q,
                                        double grad_step, double hess_step) {
    compute_g(p, net);
    const int n = net.n();
    const double len = net.interval.length();
    const AssembledSystem s0 = assemble_impl(p, net, q);

    auto shifted = [&](bool in_c, int idx, double h) {
        Network m = net;
        if (in_c) {
            m.c[idx] += h;
        } else {
            m.b[idx] += h;
        }
        return m;
    };
    auto step_for = [&](bool in_c, int idx, double base) {
        return in_c ? base * std::max(1.0, std::fabs(net.c[idx])) : base * len;
    };

    VectorXd fd_gc(n + 1), fd_gb(n);
    MatrixXd fd_H11(n + 1, n + 1), fd_H12(n + 1, n), fd_H21(n, n + 1), fd_H22(n, n);
    for (int i = 0; i <= n; ++i) {
        const double h = step_for(true, i, grad_step);
        fd_gc[i] = (objective(p, shifted(true, i, h), q) - objective(p, shifted(true, i, -h), q)) / (2 * h);
        const double hh = step_for(true, i, hess_step);
        const AssembledSystem sp = assemble_impl(p, shifted(true, i, hh), q);
        const AssembledSystem sm = assemble_impl(p, shifted(true, i, -hh), q);
        fd_H11.col(i) = (sp.grad_c - sm.grad_c) / (2 * hh);
        fd_H21.col(i) = (sp.grad_b - sm.grad_b) / (2 * hh);
    }
    for (int j = 0; j < n; ++j) {
        const double h = step_for(false, j, grad_step);
        fd_gb[j] = (objective(p, shifted(false, j, h), q) - objective(p, shifted(false, j, -h), q)) / (2 * h);
        const double hh = step_for(false, j, hess_step);
        const AssembledSystem sp = assemble_impl(p, shifted(false, j, hh), q);
        const AssembledSystem sm = assemble_impl(p, shifted(false, j, -hh), q);
        fd_H12.col(j) = (sp.grad_c - sm.grad_c) / (2 * hh);
        fd_H22.col(j) = (sp.grad_b - sm.grad_b) / (2 * hh);
    }

    DerivativeCheck d;
    d.grad_c = rel_block_error(fd_gc, s0.grad_c);
    d.grad_b = rel_block_error(fd_gb, s0.grad_b);
    d.H11 = rel_block_error(fd_H11, s0.H11);
    d.H12 = rel_block_error(fd_H12, s0.H12);
    d.H21 = rel_block_error(fd_H21.transpose(), s0.H12);
    d.H22 = rel_block_error(fd_H22, s0.H22);
    return d;
}

}  // namespace relunet
