#pragma once

#include "relunet/assembly.hpp"
#include "relunet/model.hpp"
#include "relunet/problems.hpp"
#include "relunet/quadrature.hpp"
#include "relunet/solver.hpp"

#include <cstdint>
#include <vector>

namespace relunet {

/// A sufficient condition that cannot be evaluated (some c_i = 0).
class ConditionError : public Error {
public:
    ConditionError(const std::string& what, int index) : Error(what), index_(index) {}
    int index() const { return index_; }

private:
    int index_;
};

enum class CertificateKind { SPDFull, SPDBlocks, ThmCondition, Contraction, JacobiSPD };

/// verdict=false always comes with a re-checkable witness: an eigenvector for
/// SPD checks, the first failing index for the condition checks.
struct Certificate {
    CertificateKind kind = CertificateKind::SPDFull;
    bool verdict = false;
    bool inconclusive = false;  // smallest eigenvalue inside the dead-band
    double min_eigenvalue = 0.0;
    VectorXd witness;
    std::vector<double> margins;          // critical-point condition, per index 1..n
    std::vector<double> general_margins;  // general condition at the supplied tau
    bool general_verdict = false;
    double best_tau = 0.0;               // tau on {0.1,...,0.9} maximising the worst general margin
    double best_general_margin = 0.0;
    int violating_index = 0;             // 1-based; 0 when none
    double sigma = 0.0;
};

/// SPD test with dead-band 1e-12*||M||_2 on the smallest eigenvalue.
/// Throws when M is not symmetric to 1e-10 relative.
Certificate spd_check(const MatrixXd& M);

/// Per-index margins of the sufficient SPD conditions. Throws naming the
/// index when some c_i = 0.
Certificate theorem_condition(const Problem& p, const Network& net, const AssembledSystem& sys, double tau);

/// I - B^{-1} A with B the lower block-triangular part of A (Gauss-Seidel
/// schemes) or its block diagonal (Jacobi); nc is the size of the first block.
MatrixXd fixed_point_jacobian(const MatrixXd& A, int nc, Scheme scheme);
MatrixXd fixed_point_jacobian(const AssembledSystem& sys, Scheme scheme);

/// ||J||_A from the generalized eigenproblem J^T A J v = lambda A v.
/// Throws when A is not SPD.
double contraction_factor(const MatrixXd& A, int nc, Scheme scheme);
double contraction_factor(const AssembledSystem& sys, Scheme scheme);

struct NormEquivalence {
    bool spd = false;       // M + M^T - A is SPD
    double norm = 0.0;      // ||I - M^{-1} A||_A
    double min_eigenvalue = 0.0;  // of M + M^T - A
};

NormEquivalence pds_norm_equivalence_test(const MatrixXd& A, const MatrixXd& M);

/// The two matrices of the quadratic-form lemma for a weight w.
struct WeightedForms {
    MatrixXd sigma;   // [[ss, -sh], [-sh^T, hh_n]]
    MatrixXd lambda;  // [[hh, -delta], [-delta^T, 0]]
};

WeightedForms weighted_forms(const Network& net, const CoefficientFunction& w, const QuadratureSpec& q = {});

struct FormSlack {
    double sigma = 0.0;
    double lambda = 0.0;
};

/// Minimum over random (alpha, beta) of quadratic form minus its lower bound,
/// for the constant weight w0.
FormSlack quadratic_form_bounds(double w0, const Network& net, int samples, double tau, std::uint64_t seed = 1);

struct ErrorNorms {
    double l2 = 0.0;
    double h1_semi = 0.0;
    double rel_h1_semi = 0.0;
};

/// Without a supplied derivative u' is a central difference (step 1e-7) and the
/// panel tolerance is relaxed to at least 1e-6.
ErrorNorms error_norms(const Problem& p, const Network& net, const QuadratureSpec& q = {});

}  // namespace relunet
