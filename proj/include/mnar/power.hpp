#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "mnar/augmentation.hpp"
#include "mnar/model.hpp"
#include "mnar/quadrature.hpp"

namespace mnar {

// Quadrature representation of the augmented-data law: a mixture of the
// recovered and observed components inside C_A, weighted by Pr(M_A = 1) and
// Pr(M_A = 0). Each node carries its w/z features and the augmented mechanism.
struct AugmentedLaw {
    Link link = Link::Logit;
    Eigen::MatrixXd w;        // nodes x q
    Eigen::MatrixXd z;        // nodes x s
    Eigen::VectorXd weight;   // sums to one
    Eigen::VectorXd prob;     // Pr(M_A = 1 | x, y) at each node
    Eigen::VectorXd eta_alt;  // w' lambda_A + z' psi
    Eigen::VectorXd lambda_a;
    Eigen::VectorXd psi;
    double c1 = 1.0;
    double c2 = 1.0;
    double cstar = 1.0;
    double prob_missing = 0.0;
    double prob_recovered = 0.0;
    double prob_observed = 0.0;

    std::size_t q() const { return static_cast<std::size_t>(w.cols()); }
    std::size_t s() const { return static_cast<std::size_t>(z.cols()); }
    /// E[n_A] / n = c1 Pr(M=1) + c2 Pr(M_O).
    double augmented_fraction() const { return c1 * prob_missing + c2 * prob_observed; }
};

// Builds the law for a design. Non-logit links require c* = 1 (c2 chosen by
// required_c2); otherwise the augmented mechanism leaves the GLM family.
AugmentedLaw build_augmented_law(const ModelSpec& model, const RecoveryDesign& design, double prob_missing,
                                 const QuadratureOptions& opts = {});
AugmentedLaw build_augmented_law(const ModelSpec& model, const RecoveryDesign& design,
                                 const QuadratureOptions& opts = {});

struct NullLimit {
    Eigen::VectorXd lambda0_star;
    double kl_value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    double gradient_norm = 0.0;
};

struct NullLimitOptions {
    double gradient_tolerance = 1e-9;
    std::size_t max_iterations = 200;
};

/// KL projection of the augmented alternative onto the MAR sub-model.
NullLimit solve_null_limit(const AugmentedLaw& law, const NullLimitOptions& opts = {});
NullLimit solve_lambda0(const ModelSpec& model, const RecoveryDesign& design, const QuadratureOptions& opts = {});

struct NcpBreakdown {
    double delta = 0.0;          // E Delta, scaled by E[n_A]
    double tr_a = 0.0;           // trace of A
    std::size_t q = 0;
    std::size_t s = 0;
    double gamma_raw = 0.0;      // q + Delta - tr(A) before clamping
    double gamma = 0.0;          // clamped at zero
    double expected_n_a = 0.0;
    double cstar = 1.0;
    NullLimit null_limit;
};

NcpBreakdown noncentrality(const AugmentedLaw& law, std::size_t n, const NullLimitOptions& opts = {});
NcpBreakdown noncentrality(const ModelSpec& model, const RecoveryDesign& design, std::size_t n,
                           const QuadratureOptions& opts = {});

/// Poisson mixture of central chi-square cdfs; tail weight below 1e-12 dropped.
double noncentral_chi2_cdf(double x, double df, double ncp);

/// Power of the size-alpha LRT when the statistic is noncentral chi-square(s, gamma).
double approx_power(double gamma, std::size_t s, double alpha);

struct FisherInfo {
    Eigen::MatrixXd matrix;        // I(alpha), scaled by E[n_A]
    double target_variance = 0.0;  // I^{-1} entry of the y coefficient, by Cramer's rule
    double expected_n_a = 0.0;
};

FisherInfo asymptotic_variance(const AugmentedLaw& law, std::size_t n);
FisherInfo asymptotic_variance(const ModelSpec& model, const RecoveryDesign& design, std::size_t n,
                               const QuadratureOptions& opts = {});

}  // namespace mnar
