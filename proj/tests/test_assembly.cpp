#include "support.hpp"

#include "relunet/solver.hpp"

#include <gtest/gtest.h>

using namespace relunet;
using nlohmann::json;
using testing_support::dr_problem;
using testing_support::ls_problem;
using testing_support::make_net;
using testing_support::random_smooth_net;

namespace {

const Network kTwoPiece = make_net({0, 1}, 0.0, {1.0, -2.0}, {0.5});

Problem smooth_ls(Interval iv = {0, 1}) { return ls_problem("sin(3*x) + x^2", "1 + 0.5*x^2", iv); }

Problem smooth_dr(Interval iv = {0, 1}) {
    return dr_problem("1 + 0.5*sin(x)", "1 + x^2", "cos(2*x)", iv,
                      json{{"gamma", 10.0}, {"left_value", 0.3}, {"right_value", -0.2}, {"da", "0.5*cos(x)"}});
}

double max_abs(const MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double rel_err(const MatrixXd& fd, const MatrixXd& exact) {
    return max_abs(fd - exact) / std::max(max_abs(exact), 1e-12);
}

// Central differences written here, independent of the library's checker.
struct FdBlocks {
    VectorXd gc, gb;
    MatrixXd H11, H12, H21, H22;
};

FdBlocks fd_blocks(const Problem& p, const Network& net, double gstep, double hstep) {
    const int n = net.n();
    const QuadratureSpec q;
    FdBlocks out{VectorXd(n + 1), VectorXd(n), MatrixXd(n + 1, n + 1), MatrixXd(n + 1, n), MatrixXd(n, n + 1),
                 MatrixXd(n, n)};
    for (int k = 0; k < 2 * n + 1; ++k) {
        const bool is_c = k <= n;
        const int idx = is_c ? k : k - n - 1;
        auto moved = [&](double h) {
            Network m = net;
            (is_c ? m.c[idx] : m.b[idx]) += h;
            return m;
        };
        const double g = (objective(p, moved(gstep), q) - objective(p, moved(-gstep), q)) / (2 * gstep);
        const AssembledSystem sp = assemble(p, moved(hstep), q), sm = assemble(p, moved(-hstep), q);
        if (is_c) {
            out.gc[idx] = g;
            out.H11.col(idx) = (sp.grad_c - sm.grad_c) / (2 * hstep);
            out.H21.col(idx) = (sp.grad_b - sm.grad_b) / (2 * hstep);
        } else {
            out.gb[idx] = g;
            out.H12.col(idx) = (sp.grad_c - sm.grad_c) / (2 * hstep);
            out.H22.col(idx) = (sp.grad_b - sm.grad_b) / (2 * hstep);
        }
    }
    return out;
}

}  // namespace

TEST(Objective, LeastSquaresOfLinear) {
    EXPECT_NEAR(objective(ls_problem("0"), make_net({0, 1}, 0, {1}, {})), 1.0 / 6.0, 1e-15);
}

TEST(Objective, DirichletEnergyOfHat) {
    const Problem p = dr_problem("1", "0", "0", {0, 1}, json{{"gamma", 0.0}});
    EXPECT_NEAR(objective(p, kTwoPiece), 0.5, 1e-15);
}

TEST(Objective, ExactRepresentation) {
    EXPECT_NEAR(objective(ls_problem("x"), make_net({0, 1}, 0, {1}, {})), 0.0, 1e-16);
}

TEST(GradC, Examples) {
    EXPECT_NEAR(grad_c(ls_problem("x"), make_net({0, 1}, 0, {1}, {}))[0], 0.0, 1e-16);
    EXPECT_NEAR(grad_c(ls_problem("0"), make_net({0, 1}, 0, {1}, {}))[0], 1.0 / 3.0, 1e-15);
}

TEST(ComputeG, LeastSquares) {
    EXPECT_DOUBLE_EQ(compute_g(ls_problem("0"), kTwoPiece)[0], 0.5);
}

TEST(ComputeG, ConstantDiffusion) {
    EXPECT_DOUBLE_EQ(compute_g(dr_problem("1", "1", "0", {0, 1}, json{{"gamma", 0.0}}), kTwoPiece)[0], 0.5);
}

TEST(ComputeG, MidpointSlopeTerm) {
    // a' = 1 everywhere; the offset keeps a above a positive lower bound.
    const Problem p = dr_problem("x + 1", "0", "0", {0, 1}, json{{"gamma", 0.0}, {"da", "1"}});
    EXPECT_DOUBLE_EQ(compute_g(p, make_net({0, 1}, 0, {2.0, -2.0}, {0.5}))[0], -1.0);
}

TEST(ComputeG, KinkNamesIndex) {
    const Problem p = dr_problem("1 + abs(x - 0.7)", "1", "0", {0, 1}, json{{"kinks", {{"a", {0.7}}}}});
    try {
        compute_g(p, make_net({0, 1}, 0, {1, 1, 1}, {0.3, 0.7}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find('2'), std::string::npos) << e.what();
    }
}

TEST(FVec, Examples) {
    const Network fit = make_net({0, 1}, 0, {1, -2, 0.5}, {0.5, 0.75});
    const Problem rep = ls_problem("x - 2*(x - 0.5 + abs(x - 0.5))/2 + 0.5*(x - 0.75 + abs(x - 0.75))/2", "1", {0, 1},
                                   json{{"kinks", {{"u", {0.5, 0.75}}}}});
    const VectorXd F = compute_F_vec(rep, fit);
    EXPECT_NEAR(F[0], 0.0, 1e-14);
    EXPECT_NEAR(F[1], 0.0, 1e-14);
    EXPECT_NEAR(compute_F_vec(ls_problem("0"), kTwoPiece)[0], -1.0 / 8.0, 1e-15);
}

TEST(H11, LeastSquaresOneBreakpoint) {
    const MatrixXd H = assemble_H11(ls_problem("0"), kTwoPiece);
    EXPECT_NEAR(H(0, 0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(H(0, 1), 5.0 / 48.0, 1e-15);
    EXPECT_NEAR(H(1, 0), 5.0 / 48.0, 1e-15);
    EXPECT_NEAR(H(1, 1), 1.0 / 24.0, 1e-15);
}

TEST(H11, DiffusionOverlapLengths) {
    const MatrixXd H = assemble_H11(dr_problem("1", "0", "0", {0, 1}, json{{"gamma", 0.0}}), kTwoPiece);
    EXPECT_NEAR(H(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(H(0, 1), 0.5, 1e-15);
    EXPECT_NEAR(H(1, 0), 0.5, 1e-15);
    EXPECT_NEAR(H(1, 1), 0.5, 1e-15);
}

TEST(H22, Examples) {
    EXPECT_NEAR(assemble_H22(ls_problem("0"), kTwoPiece)(0, 0), 1.0, 1e-14);
    EXPECT_NEAR(assemble_H22(dr_problem("1", "1", "0", {0, 1}, json{{"gamma", 0.0}}), kTwoPiece)(0, 0), 1.0, 1e-14);
}

TEST(H12, DeltaBlockHeavisideConvention) {
    const Network net = make_net({0, 1}, 0, {1, 1, 1}, {0.3, 0.7});
    const WeightedBlocks w = weighted_blocks(net, CoefficientFunction::constant(1.0), {}, {});
    EXPECT_EQ(w.delta(1, 0), 0.5);
    EXPECT_EQ(w.delta(0, 1), 1.0);
    EXPECT_EQ(w.delta(2, 0), 0.0);
    EXPECT_EQ(w.delta(2, 1), 0.5);
    EXPECT_EQ(w.delta(1, 1), 1.0);
}

TEST(H12, LeastSquaresEntry) {
    EXPECT_NEAR(assemble_H12(ls_problem("0"), kTwoPiece)(1, 0), 1.0 / 8.0, 1e-15);
}

TEST(Assemble, DegenerateNoBreakpoints) {
    const AssembledSystem s = assemble(smooth_ls(), make_net({0, 1}, 0, {0.7}, {}));
    EXPECT_EQ(s.H11.rows(), 1);
    EXPECT_EQ(s.H11.cols(), 1);
    EXPECT_EQ(s.H12.size(), 0);
    EXPECT_EQ(s.H22.size(), 0);
    EXPECT_EQ(s.g.size(), 0);
    EXPECT_EQ(s.F_vec.size(), 0);
    EXPECT_EQ(s.grad_b.size(), 0);
    EXPECT_EQ(s.hessian().rows(), 1);
}

TEST(Assemble, FVecVanishesAtConvergedCriticalPoint) {
    const Problem p = testing_support::exp_target();
    const Network star = testing_support::exp_critical_point();
    ASSERT_GT(star.c.tail(star.n()).cwiseAbs().minCoeff(), 1e-3);
    const AssembledSystem s = assemble(p, star);
    ASSERT_LE(s.gradient().norm(), 1e-12);
    EXPECT_LE(s.F_vec.cwiseAbs().maxCoeff(), 1e-8 * star.c.norm());
}

TEST(Assemble, BlocksAgreeWithStandaloneAssembly) {
    std::mt19937_64 rng(5);
    const Problem p = smooth_dr();
    const Network net = random_smooth_net(rng, p.interval, 4, p.left_value);
    const AssembledSystem s = assemble(p, net);
    EXPECT_NEAR(s.F_value, objective(p, net), 1e-14);
    EXPECT_LE(max_abs(s.H11 - assemble_H11(p, net)), 1e-13 * max_abs(s.H11));
    EXPECT_LE(max_abs(s.H12 - assemble_H12(p, net)), 1e-13 * max_abs(s.H12));
    EXPECT_LE(max_abs(s.H22 - assemble_H22(p, net)), 1e-13 * max_abs(s.H22));
    EXPECT_LE(max_abs(s.grad_c - grad_c(p, net)), 1e-13 * max_abs(s.grad_c));
    EXPECT_LE(max_abs(s.F_vec - compute_F_vec(p, net)), 1e-13 * max_abs(s.F_vec));
}

TEST(AssemblyProperties, DerivativesMatchFiniteDifferences) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const bool dr = trial % 2 == 1;
        const Interval iv = trial % 3 == 0 ? Interval(-1, 1) : Interval(0, 1);
        const Problem p = dr ? smooth_dr(iv) : smooth_ls(iv);
        const Network net = random_smooth_net(rng, iv, 1 + trial % 6, p.left_value);
        const AssembledSystem s = assemble(p, net);
        const FdBlocks fd = fd_blocks(p, net, 1e-6 * iv.length(), 1e-5 * iv.length());
        SCOPED_TRACE(testing::Message() << "trial " << trial << (dr ? " DR" : " LS") << " n=" << net.n());
        EXPECT_LE(rel_err(fd.gc, s.grad_c), 1e-5);
        EXPECT_LE(rel_err(fd.gb, s.grad_b), 1e-5);
        EXPECT_LE(rel_err(fd.H11, s.H11), 1e-4);
        EXPECT_LE(rel_err(fd.H12, s.H12), 1e-4);
        EXPECT_LE(rel_err(fd.H21.transpose(), s.H12), 1e-4);
        EXPECT_LE(rel_err(fd.H22, s.H22), 1e-4);
        EXPECT_TRUE(finite_difference_check(p, net, {}).within(1e-5, 1e-4));
    }
}

TEST(AssemblyProperties, FullHessianMatchesSecondDifferences) {
    std::mt19937_64 rng(91);
    const Problem p = smooth_ls();
    const Network net = random_smooth_net(rng, p.interval, 3, p.left_value);
    const MatrixXd H = assemble(p, net).hessian();
    const int m = 2 * net.n() + 1;
    auto shifted = [&](int i, double hi, int j, double hj) {
        Network t = net;
        auto at = [&](int k) -> double& { return k <= net.n() ? t.c[k] : t.b[k - net.n() - 1]; };
        at(i) += hi;
        at(j) += hj;
        return objective(p, t);
    };
    const double h = 1e-4;
    MatrixXd fd(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            fd(i, j) = (shifted(i, h, j, h) - shifted(i, h, j, -h) - shifted(i, -h, j, h) + shifted(i, -h, j, -h)) /
                       (4 * h * h);
        }
    }
    const MatrixXd sym = 0.5 * (fd + fd.transpose());
    EXPECT_LE(rel_err(sym, H), 1e-4);
    EXPECT_LE(max_abs(H - H.transpose()), 1e-12 * max_abs(H));
}

TEST(AssemblyProperties, GradientIdentityExact) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Problem p = trial % 2 ? smooth_dr() : smooth_ls();
        const Network net = random_smooth_net(rng, p.interval, 1 + trial % 6, p.left_value);
        const AssembledSystem s = assemble(p, net);
        for (int j = 0; j < net.n(); ++j) EXPECT_EQ(s.grad_b[j], net.c[j + 1] * s.F_vec[j]);
    }
}

TEST(AssemblyProperties, TailIntegralStructure) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const Network net = random_smooth_net(rng, {0, 1}, 2 + trial % 5);
        const auto w = CoefficientFunction::from_expression(parse_expression("1 + x^2 + 0.3*sin(5*x)"));
        const WeightedBlocks blk = weighted_blocks(net, w, {}, {});
        for (int i = 0; i <= net.n(); ++i) {
            for (int j = 0; j <= net.n(); ++j) {
                const int k = std::max(i, j);
                EXPECT_EQ(blk.hh(i, j), blk.hh(k, k));
            }
        }
    }
}

TEST(AssemblyProperties, HessianBlocksSymmetric) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        const Problem p = trial % 2 ? smooth_dr() : smooth_ls();
        const AssembledSystem s = assemble(p, random_smooth_net(rng, p.interval, 5, p.left_value));
        EXPECT_LE(max_abs(s.H11 - s.H11.transpose()), 1e-13 * max_abs(s.H11));
        EXPECT_LE(max_abs(s.H22 - s.H22.transpose()), 1e-13 * max_abs(s.H22));
    }
}
