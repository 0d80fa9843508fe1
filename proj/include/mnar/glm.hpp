#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mnar/augmentation.hpp"
#include "mnar/link.hpp"
#include "mnar/model.hpp"

namespace mnar {

enum class FitStatus { Converged, Separation, IterationLimit };

struct FitOptions {
    double score_tolerance = 1e-8;
    double loglik_tolerance = 1e-12;  // relative change
    std::size_t max_iterations = 100;
    double separation_bound = 1e3;    // |coefficient| beyond this flags separation
};

struct GlmFit {
    Eigen::VectorXd estimates;   // lambda_A then psi (psi omitted for the null fit)
    double loglik = 0.0;
    bool converged = false;
    FitStatus status = FitStatus::IterationLimit;
    std::size_t iterations = 0;
    Eigen::MatrixXd covariance;  // inverse observed information
    Eigen::VectorXd score;       // gradient at the estimates
};

// Bernoulli log-likelihood of outcomes given a design matrix and coefficients.
double bernoulli_loglik(Link link, const Eigen::MatrixXd& design, std::span<const std::uint8_t> outcomes,
                        const Eigen::VectorXd& beta);

/// Maximum likelihood by IRLS (Fisher scoring) with step-halving. Starts from
/// `start` when given, else from the intercept-only MLE.
GlmFit fit_binary(Link link, const Eigen::MatrixXd& design, std::span<const std::uint8_t> outcomes,
                  const FitOptions& opts = {}, const Eigen::VectorXd* start = nullptr);

/// Design matrix of (w, z) features (z dropped unless include_z) for every row.
Eigen::MatrixXd feature_matrix(const AugmentedSample& sample, const MechanismShape& shape, bool include_z);

/// Fits Pr(M_A = 1 | x, y) = g^{-1}(w' lambda_A + z' psi) to an augmented sample.
GlmFit fit(const AugmentedSample& sample, const MechanismShape& shape, bool include_z, const FitOptions& opts = {});

struct LrtResult {
    double statistic = 0.0;
    std::size_t df = 0;
    double p_value = 1.0;
    double alpha = 0.05;
    bool reject = false;
    GlmFit full;
    GlmFit null;
};

/// Likelihood-ratio test of H0: psi = 0. Throws FitFailure when a fit fails.
LrtResult lrt_mnar(const AugmentedSample& sample, const MechanismShape& shape, double alpha,
                   const FitOptions& opts = {});

/// Regularized lower incomplete gamma P(df/2, x/2).
double central_chi2_cdf(double x, double df);
/// Inverse of central_chi2_cdf by bracketed root finding.
double central_chi2_quantile(double prob, double df);

}  // namespace mnar
