#include "relunet/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace relunet {

Interval::Interval(double l, double r) : left(l), right(r) {
    if (!(std::isfinite(l) && std::isfinite(r)) || !(l < r)) {
        throw Error("interval requires finite left < right");
    }
}

Network::Network(Interval iv, double offset, VectorXd coeffs, VectorXd breaks)
    : interval(iv), alpha(offset), c(std::move(coeffs)), b(std::move(breaks)) {
    if (c.size() != b.size() + 1) {
        throw Error("network needs n+1 coefficients for n breakpoints (got " + std::to_string(c.size()) +
                    " and " + std::to_string(b.size()) + ")");
    }
}

double Network::knot(int i) const {
    if (i == 0) return interval.left;
    if (i == n() + 1) return interval.right;
    return b[i - 1];
}

bool Network::is_canonical() const {
    if (!std::isfinite(alpha) || !c.allFinite() || !b.allFinite()) return false;
    const double floor = interval.h_floor();
    for (int i = 0; i <= n(); ++i) {
        if (knot(i + 1) - knot(i) < floor) return false;
    }
    return true;
}

Network Network::uniform(Interval iv, double offset, int n) {
    if (n < 0) throw Error("uniform network needs n >= 0");
    VectorXd b(n);
    const double step = iv.length() / (n + 1);
    for (int i = 0; i < n; ++i) b[i] = iv.left + (i + 1) * step;
    return Network(iv, offset, VectorXd::Zero(n + 1), std::move(b));
}

double evaluate(const Network& net, double x) {
    double v = net.alpha + net.c[0] * relu(x - net.interval.left);
    for (int i = 0; i < net.n(); ++i) v += net.c[i + 1] * relu(x - net.b[i]);
    return v;
}

double derivative(const Network& net, double x) {
    double s = net.c[0] * heaviside(x - net.interval.left);
    for (int i = 0; i < net.n(); ++i) s += net.c[i + 1] * heaviside(x - net.b[i]);
    return s;
}

double slope_right(const Network& net, double x) {
    double s = net.c[0];
    for (int i = 0; i < net.n(); ++i) {
        if (net.b[i] <= x) s += net.c[i + 1];
    }
    return s;
}

MeshQuantities mesh_quantities(const Network& net) {
    const int n = net.n();
    MeshQuantities m;
    m.h.resize(n + 1);
    for (int i = 0; i <= n; ++i) m.h[i] = net.knot(i + 1) - net.knot(i);
    m.h_min = m.h.minCoeff();
    m.h_tilde.resize(n);
    m.d.resize(n);
    for (int i = 0; i < n; ++i) {
        m.h_tilde[i] = std::min(m.h[i], m.h[i + 1]);
        m.d[i] = net.interval.right - net.b[i];
    }
    return m;
}

Canonical canonicalize_tracked(VectorXd c, VectorXd b, Interval iv, double h_floor, double alpha) {
    if (c.size() != b.size() + 1) throw Error("canonicalize: c must have length n+1");
    if (!c.allFinite() || !b.allFinite() || !std::isfinite(alpha)) {
        throw Error("canonicalize: non-finite parameter value");
    }
    const int n = static_cast<int>(b.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return b[i] < b[j]; });

    VectorXd cs(n + 1), bs(n);
    cs[0] = c[0];
    for (int k = 0; k < n; ++k) {
        bs[k] = b[order[k]];
        cs[k + 1] = c[order[k] + 1];
    }
    for (int k = 1; k < n; ++k) {
        if (bs[k] < bs[k - 1] + h_floor) bs[k] = bs[k - 1] + h_floor;
    }
    return Canonical{Network(iv, alpha, std::move(cs), std::move(bs)), std::move(order)};
}

Network canonicalize(VectorXd c, VectorXd b, Interval iv, double h_floor, double alpha) {
    return canonicalize_tracked(std::move(c), std::move(b), iv, h_floor, alpha).net;
}

Network canonicalize(const Network& net) {
    return canonicalize(net.c, net.b, net.interval, net.interval.h_floor(), net.alpha);
}

}  // namespace relunet
