#pragma once

#include "relunet/assembly.hpp"
#include "relunet/model.hpp"
#include "relunet/problems.hpp"
#include "relunet/quadrature.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace relunet {

enum class Scheme { NLGS, LGS, JB };
enum class Damping { None, MeshGuard, LineSearch };

Scheme parse_scheme(std::string_view s);  // "nlgs" | "lgs" | "jb", case-insensitive
std::string to_string(Scheme s);
Damping parse_damping(std::string_view s);  // "none" | "mesh_guard" | "line_search"
std::string to_string(Damping d);

/// Linear-solve failure; `pivot` is the index (in the solved block) of the
/// offending pivot, or -1.
class SolverError : public Error {
public:
    SolverError(const std::string& what, int pivot) : Error(what), pivot_(pivot) {}
    int pivot() const { return pivot_; }

private:
    int pivot_;
};

/// Neuron indices are 1-based throughout (neuron i owns c_i and b_i; c_0 sits
/// on the left endpoint and is never classified).
struct SolverConfig {
    Scheme scheme = Scheme::NLGS;
    int max_iters = 100;
    double grad_tol = 1e-10;
    double tau1 = 1e-6;  // applied to |c_i| / max(1, max_j |c_j|)
    double tau2 = 1e-8;
    double tau3 = 0.1;
    std::uint64_t seed = 0;
    Damping damping = Damping::MeshGuard;
    bool gauss_newton_fallback = true;
    std::set<int> frozen;
    int s1_patience = 3;  // consecutive S1 memberships before a small-c neuron moves
    double guard_keep = 0.5;  // mesh_guard: fraction of each gap that must survive a step

    void validate() const;
};

enum class Reason { Update, SmallCoefficient, OutsideInterval, NearOptimal, KinkOfA, NegativeCurvature, Frozen };
std::string to_string(Reason r);

struct Evidence {
    int index = 0;
    double abs_c = 0.0;
    bool inside = true;
    double ratio = 0.0;  // DR: |g_i|/a(b_i); LS: g_i/c_i
    Reason reason = Reason::Update;
};

struct ReductionReport {
    std::vector<int> S1, S2, S;
    std::vector<Evidence> evidence;

    bool updates(int index) const;
};

/// Every index in S (no reduction); used with injected objectives.
ReductionReport full_update_set(int n);

ReductionReport classify(const Problem& p, const Network& net, const AssembledSystem& sys, const SolverConfig& cfg);

/// Solves (H22)_S p_S = -(grad_b)_S and scatters zeros off S. Falls back to the
/// Gauss-Newton block when the factorization is singular or indefinite.
VectorXd reduced_direction(const MatrixXd& H22, const MatrixXd& H22_gauss_newton, const VectorXd& grad_b,
                           const ReductionReport& report, const SolverConfig& cfg);
VectorXd reduced_direction(const AssembledSystem& sys, const ReductionReport& report, const SolverConfig& cfg);

/// Solves H11 x = rhs: Cholesky, then LDL^T when Cholesky fails.
VectorXd solve_coefficient_system(const MatrixXd& H11, const VectorXd& rhs);

/// Block iteration on raw parameter vectors. `system` returns gradients and
/// Hessian blocks at (c, b); `select` picks the update set.
using SystemOracle = std::function<AssembledSystem(const VectorXd& c, const VectorXd& b)>;
using SetSelector = std::function<ReductionReport(const VectorXd& c, const VectorXd& b, const AssembledSystem& sys)>;

struct BlockUpdate {
    VectorXd c;          // updated linear parameters
    VectorXd direction;  // b-direction, zero off S
    ReductionReport report;
};

BlockUpdate block_update(Scheme scheme, const SystemOracle& system, const SetSelector& select, const VectorXd& c,
                         const VectorXd& b, const SolverConfig& cfg, const AssembledSystem* at_current = nullptr);

/// Largest lambda in (0,1] keeping [left, b + lambda p, right] ordered with
/// every gap at least max(h_floor, keep * old gap). Breakpoints outside the
/// open interval are ignored.
double mesh_guard(const Network& net, const VectorXd& direction, double keep = 0.0);

/// Step length from the ladder 1, 1/2, ..., 2^-13 with the lowest reduced
/// objective min_c F(c, b + lambda p); the coefficients are re-solved at every
/// rung. Returns 0 when no rung beats F(c, b). Knots may cross (they are
/// re-sorted), so nothing here guards the ordering.
double line_search(const Problem& p, const Network& net, const VectorXd& direction, const QuadratureSpec& q = {});

/// Moves each S1 member to the midpoint of a uniformly drawn adjacent pair of
/// the current knots (endpoints included) and zeroes its coefficient.
Canonical redistribute_tracked(const Network& net, const std::vector<int>& S1, std::mt19937_64& rng);
Network redistribute(const Network& net, const std::vector<int>& S1, std::mt19937_64& rng);

/// Per-run mutable bookkeeping: RNG stream, consecutive S1 counts and neuron
/// identities (original 0-based indices) by current position.
struct SolverState {
    std::mt19937_64 rng;
    std::vector<int> s1_streak;
    std::vector<int> ids;

    SolverState(std::uint64_t seed, int n);
};

struct StepResult {
    Network net;
    ReductionReport report;
    double step_c = 0.0;
    double step_b = 0.0;
    double damping = 1.0;
    std::vector<int> redistributed;  // 1-based positions before the move
};

StepResult step(Scheme scheme, const Problem& p, const Network& net, const QuadratureSpec& q, const SolverConfig& cfg,
                SolverState& state, const AssembledSystem* at_current = nullptr);

StepResult step_nlgs(const Problem& p, const Network& net, const QuadratureSpec& q, const SolverConfig& cfg);
StepResult step_lgs(const Problem& p, const Network& net, const QuadratureSpec& q, const SolverConfig& cfg);
StepResult step_jacobi(const Problem& p, const Network& net, const QuadratureSpec& q, const SolverConfig& cfg);

/// Optimal c for fixed b (one Newton step; F is quadratic in c).
Network solve_linear_parameters(const Problem& p, const Network& net, const QuadratureSpec& q = {});

struct TraceRecord {
    int k = 0;
    double F = 0.0;
    double gnorm_c = 0.0;
    double gnorm_b = 0.0;
    int S1 = 0;
    int S2 = 0;
    double step_c = 0.0;
    double step_b = 0.0;
    double rel_h1_error = 0.0;  // NaN without an exact solution
    std::vector<int> redistributed;
};

using IterationTrace = std::vector<TraceRecord>;

struct RunResult {
    Network net;
    IterationTrace trace;
    bool converged = false;
    bool aborted = false;
    std::string abort_message;
    double initial_rel_h1_error = 0.0;  // after the first c-solve; NaN without exact solution
    double gamma = 0.0;
};

/// Outer iteration. Frozen indices in cfg refer to the initial numbering and
/// are tracked through re-sorting. Step failures end the run with
/// aborted = true and the trace so far.
RunResult run(const Problem& p, const Network& init, const SolverConfig& cfg, const QuadratureSpec& q = {});

}  // namespace relunet
