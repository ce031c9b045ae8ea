#pragma once

#include "relunet/model.hpp"
#include "relunet/problems.hpp"
#include "relunet/quadrature.hpp"

#include <functional>
#include <span>
#include <vector>

namespace relunet {

/// Objective, block gradients and Hessian blocks at one parameter point.
///
/// Index conventions: rows of H11/H12 and grad_c run over c_0..c_n; columns of
/// H12, rows/cols of H22, grad_b, g and F_vec run over b_1..b_n (0-based).
/// g entries are NaN where a'(b_i) does not exist (diffusion kink).
struct AssembledSystem {
    double F_value = 0.0;
    VectorXd grad_c;
    VectorXd grad_b;
    MatrixXd H11;
    MatrixXd H12;
    MatrixXd H22;
    MatrixXd H22_gauss_newton;  // D(c) (int r H H^T) D(c)
    VectorXd g;
    VectorXd F_vec;
    MeshQuantities mesh;
    bool quadrature_warning = false;

    int n() const { return static_cast<int>(grad_b.size()); }

    /// [[H11, H12], [H12^T, H22]].
    MatrixXd hessian() const;
    VectorXd gradient() const;
};

/// Integrals of a weight w against the ReLU basis, built panel by panel.
///   ss(i,j) = int w sigma_i sigma_j            (n+1)x(n+1)
///   sh(i,j) = int w sigma_i H_j,  j = 1..n      (n+1)x n
///   hh(i,j) = int w H_i H_j                    (n+1)x(n+1)
///   delta(i,j) = int w H_i delta_j = w(b_j) H(b_j - b_i)   (n+1)x n
struct WeightedBlocks {
    MatrixXd ss;
    MatrixXd sh;
    MatrixXd hh;
    MatrixXd delta;
};

WeightedBlocks weighted_blocks(const Network& net, const CoefficientFunction& w, std::span<const double> extra_points,
                               const QuadratureSpec& q);

double objective(const Problem& p, const Network& net, const QuadratureSpec& q = {});
VectorXd grad_c(const Problem& p, const Network& net, const QuadratureSpec& q = {});

/// Pointwise g_i. Throws naming the index when a'(b_i) does not exist.
VectorXd compute_g(const Problem& p, const Network& net);
VectorXd compute_F_vec(const Problem& p, const Network& net, const QuadratureSpec& q = {});

MatrixXd assemble_H11(const Problem& p, const Network& net, const QuadratureSpec& q = {});
MatrixXd assemble_H12(const Problem& p, const Network& net, const QuadratureSpec& q = {});
MatrixXd assemble_H22(const Problem& p, const Network& net, const QuadratureSpec& q = {});

AssembledSystem assemble(const Problem& p, const Network& net, const QuadratureSpec& q = {});

/// Finite-difference comparison of the assembled derivatives against the
/// objective (gradients) and the analytic gradients (Hessian blocks).
struct DerivativeCheck {
    double grad_c = 0.0;
    double grad_b = 0.0;
    double H11 = 0.0;
    double H12 = 0.0;
    double H21 = 0.0;  // transpose of FD of grad_b in c
    double H22 = 0.0;

    bool within(double grad_tol, double hess_tol) const {
        return grad_c <= grad_tol && grad_b <= grad_tol && H11 <= hess_tol && H12 <= hess_tol && H21 <= hess_tol &&
               H22 <= hess_tol;
    }
};

/// max |fd - exact| / max(max |exact|, 1e-12), block by block.
DerivativeCheck finite_difference_check(const Problem& p, const Network& net, const QuadratureSpec& q,
                                        double grad_step = 1e-6, double hess_step = 1e-5);

}  // namespace relunet
