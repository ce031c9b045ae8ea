#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace relunet {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Heaviside step with the midpoint convention H(0) = 1/2.
inline double heaviside(double t) {
    if (t > 0.0) return 1.0;
    if (t < 0.0) return 0.0;
    return 0.5;
}

inline double relu(double t) { return t > 0.0 ? t : 0.0; }

struct Interval {
    double left = 0.0;
    double right = 1.0;

    Interval() = default;
    Interval(double l, double r);

    double length() const { return right - left; }
    bool contains_open(double x) const { return x > left && x < right; }
    bool contains_closed(double x) const { return x >= left && x <= right; }

    /// Smallest admissible breakpoint gap: 1e-12 of the interval length.
    double h_floor() const { return 1e-12 * length(); }
};

/// Shallow ReLU network on an interval,
///
///   u(x) = alpha + sum_{i=0..n} c_i * max(0, x - b_i),   b_0 = interval.left.
///
/// `c` holds n+1 linear coefficients and `b` the n interior breakpoints.
/// The offset `alpha` is a fixed constant, not a trainable parameter.
struct Network {
    Interval interval;
    double alpha = 0.0;
    VectorXd c;  // c_0 .. c_n
    VectorXd b;  // b_1 .. b_n (stored 0-based)

    Network() : c(VectorXd::Zero(1)), b(VectorXd::Zero(0)) {}
    Network(Interval iv, double offset, VectorXd coeffs, VectorXd breaks);

    int n() const { return static_cast<int>(b.size()); }

    /// Breakpoint with the implicit endpoints: knot(0) = left, knot(n+1) = right.
    double knot(int i) const;

    /// Sorted, finite, and every gap (including to the endpoints) at least h_floor.
    bool is_canonical() const;

    /// Uniformly spaced breakpoints b_i = left + i*len/(n+1) with c = 0.
    static Network uniform(Interval iv, double offset, int n);
};

double evaluate(const Network& net, double x);

/// Sum of c_i * H(x - b_i) with H(0) = 1/2. At x = b_i this is the mean of the
/// two one-sided slopes.
double derivative(const Network& net, double x);

/// Slope of the linear piece containing x from the right, i.e. the sum of c_i
/// over breakpoints b_i <= x.
double slope_right(const Network& net, double x);

struct MeshQuantities {
    VectorXd h;        // h_i = b_{i+1} - b_i, i = 0..n
    double h_min = 0;  // min h_i
    VectorXd h_tilde;  // min(h_{i-1}, h_i), i = 1..n
    VectorXd d;        // right - b_i, i = 1..n
};

MeshQuantities mesh_quantities(const Network& net);

/// Result of canonicalize: the network and, for each new position, the index
/// of the breakpoint it came from.
struct Canonical {
    Network net;
    std::vector<int> source;
};

/// Sorts breakpoints (carrying c_1..c_n along), then nudges any breakpoint that
/// sits closer than h_floor to its predecessor to predecessor + h_floor.
/// Breakpoints outside the open interval are kept. Throws on non-finite input.
Canonical canonicalize_tracked(VectorXd c, VectorXd b, Interval iv, double h_floor, double alpha = 0.0);

Network canonicalize(VectorXd c, VectorXd b, Interval iv, double h_floor, double alpha = 0.0);
Network canonicalize(const Network& net);

}  // namespace relunet
