#pragma once

#include "relunet/assembly.hpp"
#include "relunet/model.hpp"
#include "relunet/problems.hpp"
#include "relunet/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

using relunet::Interval;
using relunet::Network;
using relunet::Problem;
using relunet::VectorXd;

inline Network make_net(Interval iv, double alpha, std::vector<double> c, std::vector<double> b) {
    VectorXd cv = Eigen::Map<VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    VectorXd bv = Eigen::Map<VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    return Network(iv, alpha, cv, bv);
}

inline Problem ls_problem(const std::string& u, const std::string& r = "1", Interval iv = {0.0, 1.0},
                          nlohmann::json extra = nlohmann::json::object()) {
    nlohmann::json j = extra;
    j["u"] = u;
    j["r"] = r;
    j["interval"] = {iv.left, iv.right};
    return relunet::catalog("ls_expr", j);
}

inline Problem dr_problem(const std::string& a, const std::string& r, const std::string& f, Interval iv = {0.0, 1.0},
                          nlohmann::json extra = nlohmann::json::object()) {
    nlohmann::json j = extra;
    j["a"] = a;
    j["r"] = r;
    j["f"] = f;
    j["interval"] = {iv.left, iv.right};
    return relunet::catalog("dr_expr", j);
}

/// Random network away from the nonsmooth strata: every |c_i| >= 0.1 and
/// every gap >= 0.05 of the interval.
inline Network random_smooth_net(std::mt19937_64& rng, Interval iv, int n, double alpha = 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double len = iv.length();
    for (;;) {
        std::vector<double> b(n);
        for (double& x : b) x = iv.left + len * (0.05 + 0.9 * unit(rng));
        std::sort(b.begin(), b.end());
        double gap = n ? std::min(b.front() - iv.left, iv.right - b.back()) : len;
        for (int i = 1; i < n; ++i) gap = std::min(gap, b[i] - b[i - 1]);
        if (gap < 0.05 * len) continue;
        std::vector<double> c(n + 1);
        for (double& x : c) {
            x = 0.1 + 1.9 * unit(rng);
            if (unit(rng) < 0.5) x = -x;
        }
        return make_net(iv, alpha, c, b);
    }
}

/// Reference critical point: a short solver run to get near the basin, then
/// plain Newton on the full Hessian until the gradient stalls below tol.
inline Network newton_polish(const Problem& p, const Network& start, double tol = 1e-13, int max_steps = 20) {
    Network net = start;
    const int n = net.n();
    for (int k = 0; k < max_steps; ++k) {
        const relunet::AssembledSystem s = relunet::assemble(p, net);
        const VectorXd g = s.gradient();
        if (g.norm() <= tol) break;
        const VectorXd d = s.hessian().ldlt().solve(-g);
        net.c += d.head(n + 1);
        net.b += d.tail(n);
    }
    return net;
}

inline VectorXd theta_of(const Network& net) {
    VectorXd t(net.c.size() + net.b.size());
    t << net.c, net.b;
    return t;
}

inline Network with_theta(const Network& net, const VectorXd& theta) {
    Network out = net;
    out.c = theta.head(net.c.size());
    out.b = theta.tail(net.b.size());
    return out;
}

/// One undamped block step as a map on theta.
inline VectorXd block_map(relunet::Scheme scheme, const Problem& p, const Network& net, const VectorXd& theta) {
    relunet::SolverConfig cfg;
    cfg.damping = relunet::Damping::None;
    relunet::SolverState state(cfg.seed, net.n());
    return theta_of(relunet::step(scheme, p, with_theta(net, theta), {}, cfg, state).net);
}

/// Smooth convex target fitted with four breakpoints: distinct knots and an
/// SPD Hessian at the optimum.
inline Problem exp_target() { return ls_problem("exp(x)"); }

inline Network exp_critical_point() {
    const Problem p = exp_target();
    relunet::SolverConfig cfg;
    cfg.max_iters = 30;
    const Network near = relunet::run(p, Network::uniform(p.interval, p.left_value, 4), cfg).net;
    return newton_polish(p, near);
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("relunet_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace testing_support
