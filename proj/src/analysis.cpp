#include "relunet/analysis.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace relunet {
namespace {

double sq(double x) { return x * x; }

MatrixXd preconditioner(const MatrixXd& A, int nc, Scheme scheme) {
    MatrixXd B = A;
    const int nb = static_cast<int>(A.rows()) - nc;
    B.topRightCorner(nc, nb).setZero();
    if (scheme == Scheme::JB) B.bottomLeftCorner(nb, nc).setZero();
    return B;
}

// sqrt of the largest lambda in J^T A J v = lambda A v.
double energy_norm(const MatrixXd& J, const MatrixXd& A) {
    if (A.rows() == 0) return 0.0;
    MatrixXd G = J.transpose() * A * J;
    G = 0.5 * (G + G.transpose());
    const MatrixXd As = 0.5 * (A + A.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(G, As, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw Error("generalized eigensolve failed");
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

}  // namespace

Certificate spd_check(const MatrixXd& M) {
    if (M.rows() != M.cols()) throw Error("spd_check: matrix is not square");
    Certificate cert;
    cert.kind = CertificateKind::SPDFull;
    if (M.rows() == 0) {
        cert.verdict = true;
        return cert;
    }
    const double scale = std::max(M.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw Error("spd_check: matrix is not symmetric");
    }
    const MatrixXd S = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    if (es.info() != Eigen::Success) throw Error("spd_check: eigensolve failed");
    const VectorXd& ev = es.eigenvalues();
    const double norm2 = ev.cwiseAbs().maxCoeff();
    const double band = 1e-12 * norm2;
    cert.min_eigenvalue = ev[0];
    cert.verdict = ev[0] > band;
    cert.inconclusive = std::fabs(ev[0]) <= band;
    if (!cert.verdict) cert.witness = es.eigenvectors().col(0);
    return cert;
}

Certificate theorem_condition(const Problem& p, const Network& net, const AssembledSystem& sys, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw Error("theorem_condition: tau must lie in (0,1)");
    const int n = net.n();
    for (int i = 1; i <= n; ++i) {
        if (net.c[i] == 0.0) {
            throw ConditionError("condition inapplicable: c_" + std::to_string(i) + " = 0", i);
        }
    }
    const MeshQuantities mesh = mesh_quantities(net);
    const bool dr = p.is_dr();
    const double r0 = p.r0, mu = p.mu;

    auto general = [&](double t, std::vector<double>* out) {
        const double K = r0 * std::pow(mesh.h_min, 3) / 96.0 + (dr ? mu * (1.0 - t) * mesh.h_min / 4.0 : 0.0);
        double worst = std::numeric_limits<double>::infinity();
        for (int i = 1; i <= n; ++i) {
            const double ci = net.c[i];
            const double inv_h = 1.0 / mesh.h[i - 1] + 1.0 / mesh.h[i];
            double T = sys.g[i - 1] / ci + r0 * mesh.h_tilde[i - 1] / 24.0;
            if (dr) T -= sq(p.a(net.b[i - 1])) / (2.0 * t * mu) * inv_h;
            const double m = sq(ci) * K * T - sq(sys.F_vec[i - 1]);
            if (out) out->push_back(m);
            worst = std::min(worst, std::isnan(m) ? -std::numeric_limits<double>::infinity() : m);
        }
        return worst;
    };

    Certificate cert;
    cert.kind = CertificateKind::ThmCondition;
    cert.verdict = true;
    for (int i = 1; i <= n; ++i) {
        const double inv_h = 1.0 / mesh.h[i - 1] + 1.0 / mesh.h[i];
        const double rhs = dr ? sq(p.a(net.b[i - 1])) / (2.0 * mu) * inv_h : 0.0;
        const double m = sys.g[i - 1] / net.c[i] + r0 * mesh.h_tilde[i - 1] / 24.0 - rhs;
        cert.margins.push_back(m);
        if (!(m > 0.0) && cert.verdict) {
            cert.verdict = false;
            cert.violating_index = i;
        }
    }
    cert.general_verdict = general(tau, &cert.general_margins) > 0.0;
    cert.best_general_margin = -std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 9; ++k) {
        const double t = 0.1 * k;
        const double w = general(t, nullptr);
        if (w > cert.best_general_margin) {
            cert.best_general_margin = w;
            cert.best_tau = t;
        }
    }
    return cert;
}

MatrixXd fixed_point_jacobian(const MatrixXd& A, int nc, Scheme scheme) {
    if (A.rows() != A.cols() || nc < 0 || nc > A.rows()) throw Error("fixed_point_jacobian: bad block sizes");
    const MatrixXd B = preconditioner(A, nc, scheme);
    Eigen::FullPivLU<MatrixXd> lu(B);
    if (!lu.isInvertible()) throw Error("fixed_point_jacobian: block preconditioner is singular");
    return MatrixXd::Identity(A.rows(), A.cols()) - lu.solve(A);
}

MatrixXd fixed_point_jacobian(const AssembledSystem& sys, Scheme scheme) {
    return fixed_point_jacobian(sys.hessian(), static_cast<int>(sys.H11.rows()), scheme);
}

double contraction_factor(const MatrixXd& A, int nc, Scheme scheme) {
    const Certificate c = spd_check(A);
    if (!c.verdict) {
        throw Error("contraction_factor: Hessian is not SPD (min eigenvalue " + std::to_string(c.min_eigenvalue) + ")");
    }
    return energy_norm(fixed_point_jacobian(A, nc, scheme), A);
}

double contraction_factor(const AssembledSystem& sys, Scheme scheme) {
    return contraction_factor(sys.hessian(), static_cast<int>(sys.H11.rows()), scheme);
}

NormEquivalence pds_norm_equivalence_test(const MatrixXd& A, const MatrixXd& M) {
    Eigen::FullPivLU<MatrixXd> lu(M);
    if (!lu.isInvertible()) throw Error("pds_norm_equivalence_test: M is singular");
    NormEquivalence r;
    const Certificate c = spd_check(M + M.transpose() - A);
    r.spd = c.verdict;
    r.min_eigenvalue = c.min_eigenvalue;
    const MatrixXd J = MatrixXd::Identity(A.rows(), A.cols()) - lu.solve(A);
    r.norm = energy_norm(J, A);
    return r;
}

WeightedForms weighted_forms(const Network& net, const CoefficientFunction& w, const QuadratureSpec& q) {
    const int n = net.n();
    const WeightedBlocks wb = weighted_blocks(net, w, {}, q);
    WeightedForms f;
    f.sigma.resize(2 * n + 1, 2 * n + 1);
    f.sigma << wb.ss, -wb.sh, -wb.sh.transpose(), wb.hh.bottomRightCorner(n, n);
    f.lambda.resize(2 * n + 1, 2 * n + 1);
    f.lambda << wb.hh, -wb.delta, -wb.delta.transpose(), MatrixXd::Zero(n, n);
    return f;
}

FormSlack quadratic_form_bounds(double w0, const Network& net, int samples, double tau, std::uint64_t seed) {
    if (!(tau > 0.0 && tau <= 1.0)) throw Error("quadratic_form_bounds: tau must lie in (0,1]");
    const int n = net.n();
    const WeightedForms f = weighted_forms(net, CoefficientFunction::constant(w0));
    const MeshQuantities mesh = mesh_quantities(net);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    FormSlack slack{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    VectorXd v(2 * n + 1);
    for (int s = 0; s < samples; ++s) {
        for (int k = 0; k < v.size(); ++k) v[k] = normal(rng);
        const VectorXd alpha = v.head(n + 1), beta = v.tail(n);
        double tilde = 0.0, pen = 0.0;
        for (int i = 0; i < n; ++i) {
            tilde += mesh.h_tilde[i] * sq(beta[i]);
            pen += sq(w0) * (1.0 / mesh.h[i] + 1.0 / mesh.h[i + 1]) * sq(beta[i]);
        }
        const double bs = w0 * std::pow(mesh.h_min, 3) / 96.0 * alpha.squaredNorm() + w0 / 24.0 * tilde;
        const double bl = w0 * (1.0 - tau) * mesh.h_min / 4.0 * alpha.squaredNorm() - pen / (2.0 * tau * w0);
        slack.sigma = std::min(slack.sigma, v.dot(f.sigma * v) - bs);
        slack.lambda = std::min(slack.lambda, v.dot(f.lambda * v) - bl);
    }
    return slack;
}

ErrorNorms error_norms(const Problem& p, const Network& net, const QuadratureSpec& q) {
    if (!p.target_u) throw Error("error_norms requires an exact solution");
    const CoefficientFunction& u = *p.target_u;
    const std::optional<CoefficientFunction>& du = p.target_du;
    auto uprime = [&](double x) {
        if (du) return (*du)(x);
        const double h = 1e-7;
        return (u(x + h) - u(x - h)) / (2.0 * h);
    };
    const std::vector<double> panels = merged_panels(net, p.panel_points());
    std::vector<double> slope(panels.size() - 1);
    for (std::size_t k = 0; k + 1 < panels.size(); ++k) slope[k] = derivative(net, 0.5 * (panels[k] + panels[k + 1]));

    const PanelIntegrand fn = [&](std::size_t k, double x, std::span<double> out) {
        const double dux = uprime(x);
        out[0] = sq(u(x) - evaluate(net, x));
        out[1] = sq(dux - slope[k]);
        out[2] = sq(dux);
    };
    // A difference quotient carries ~1e-9 relative roundoff, which a tighter
    // panel test would chase down to the evaluation budget.
    QuadratureSpec qe = q;
    if (!du) qe.rel_tol = std::max(q.rel_tol, 1e-6);
    const PanelIntegrals P = integrate_panels(fn, 3, panels, qe);
    double s[3] = {0.0, 0.0, 0.0};
    std::vector<double> col(panels.size() - 1);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t k = 0; k < col.size(); ++k) col[k] = P.at(k, c);
        s[c] = pairwise_sum(col);
    }
    ErrorNorms e;
    e.l2 = std::sqrt(s[0]);
    e.h1_semi = std::sqrt(s[1]);
    const double unorm = std::sqrt(s[2]);
    e.rel_h1_semi = unorm > 0.0 ? e.h1_semi / unorm : (e.h1_semi == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    return e;
}

}  // namespace relunet
