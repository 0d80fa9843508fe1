#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mnar/augmentation.hpp"
#include "mnar/design.hpp"
#include "mnar/glm.hpp"
#include "mnar/model.hpp"

namespace mnar {

// How the recovered rows are chosen.
//   Region: random recovery inside a region, observed rows kept at rate c2.
//   TopK / BottomK: the n* missing rows with the largest / smallest first
//   covariate, pooled with every observed row.
enum class SchemeKind { Region, TopK, BottomK };

std::string to_string(SchemeKind kind);

struct PlannedRecovery {
    SchemeKind kind = SchemeKind::Region;
    Region region = Region::unbounded(1);
    double c2 = 1.0;
};

/// One plotted curve: a recovery plan for every c1 of the grid.
struct CurveSpec {
    std::string label;
    std::vector<double> c1_grid;
    std::vector<PlannedRecovery> plans;  // plans[k] is used at c1_grid[k]
};

struct SimulationSettings {
    std::size_t n = 1000;
    std::size_t replications = 10000;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    FitOptions fit;
    AssemblyOptions assembly;
};

struct CurvePoint {
    double c1 = 0.0;
    std::size_t replications = 0;
    std::size_t kept = 0;
    std::size_t rejections = 0;
    std::size_t discarded = 0;
    std::size_t enlarged = 0;        // replications whose region had to grow to reach n*
    double rate = 0.0;               // rejections / kept
    double se = 0.0;                 // sqrt(rate (1 - rate) / kept)
    std::vector<double> mse_psi;     // per psi coordinate, over kept replications
    std::vector<double> mean_estimates;  // lambda_A then psi
};

struct CurveResult {
    std::string label;
    std::vector<CurvePoint> points;
};

/// Draws one dataset (with withheld outcomes of its missing rows) from a seed.
using DataGenerator = std::function<GeneratedData(std::uint64_t seed)>;

DataGenerator model_generator(const ModelSpec& model, std::size_t n);

// Runs every curve on shared datasets: replication r draws its data with seed
// base + r, then assembles and tests once per (curve, c1). `mechanism` fixes
// the fitted shape and the true psi used for the MSE.
std::vector<CurveResult> run_curves(const DataGenerator& generate, const MechanismSpec& mechanism,
                                    const std::vector<CurveSpec>& curves, const SimulationSettings& settings);

/// Recovered rows chosen by rank of the first covariate (TopK / BottomK).
AugmentedSample assemble_ranked(const Dataset& data, const std::vector<double>& outcomes, double c1, bool largest);

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

/// c2 for a random design over R^p: 1 for logit, c1 otherwise.
double random_design_c2(Link link, double c1, LinkMode mode = LinkMode::Auto);

CurveSpec random_curve(const ModelSpec& model, const std::vector<double>& c1_grid, LinkMode mode = LinkMode::Auto,
                       const std::string& label = "random");
CurveSpec ranked_curve(const ModelSpec& model, const std::vector<double>& c1_grid, bool largest);

/// Curve of optimized designs; `design_model` may differ from the truth (robustness).
CurveSpec optimal_curve(const ModelSpec& design_model, const std::vector<double>& c1_grid, Criterion criterion,
                        LinkMode mode, const DesignSearchOptions& search, const std::string& label = "optimal",
                        std::vector<DesignSearchResult>* designs = nullptr);

/// Scheme 1 (random), 2 (top) and 3 (bottom) under a MAR model.
std::vector<CurveResult> run_type_one(const ModelSpec& model, const std::vector<double>& c1_grid,
                                      const std::vector<SchemeKind>& schemes, const SimulationSettings& settings);

struct PowerStudy {
    Criterion criterion = Criterion::Variance;
    LinkMode link_mode = LinkMode::Auto;
    bool include_optimal = true;
    bool include_random = true;
    DesignSearchOptions search;
};

std::vector<CurveResult> run_power_mse(const ModelSpec& model, const std::vector<double>& c1_grid,
                                       const PowerStudy& study, const SimulationSettings& settings,
                                       std::vector<DesignSearchResult>* designs = nullptr);

/// A single misspecified design input: parameter is one of beta0, beta<j>,
/// lambda<k>, psi<k> (0-based), sigma.
struct Perturbation {
    std::string label;
    std::string parameter;
    double value = 0.0;
};

ModelSpec apply_perturbation(const ModelSpec& model, const Perturbation& perturbation);

/// Optimal designs found under each perturbed model, evaluated on the truth.
/// The first two curves are the true optimal design and the random design.
std::vector<CurveResult> run_robustness(const ModelSpec& truth, const std::vector<Perturbation>& perturbations,
                                        const std::vector<double>& c1_grid, const PowerStudy& study,
                                        const SimulationSettings& settings);

// ---------------------------------------------------------------------------
// Real-data bootstrap
// ---------------------------------------------------------------------------

struct CompleteCases {
    std::vector<std::string> covariate_names;
    std::string outcome_name;
    Eigen::MatrixXd x;  // rows x p
    Eigen::VectorXd y;
    std::size_t rows_read = 0;

    std::size_t size() const { return static_cast<std::size_t>(y.size()); }
    std::size_t dimension() const { return static_cast<std::size_t>(x.cols()); }
};

struct OlsFit {
    double intercept = 0.0;
    std::vector<double> slopes;
    double sigma = 0.0;

    RegressionSpec regression() const { return {intercept, slopes, sigma}; }
};

OlsFit fit_ols(const CompleteCases& cases);

/// Resamples complete cases with replacement and injects missingness by `mechanism`.
DataGenerator bootstrap_generator(const CompleteCases& cases, const MechanismSpec& mechanism, std::size_t n);

/// Mechanism (alpha0, alpha1, alpha2) of the two bootstrap scenarios on one covariate.
MechanismSpec real_data_mechanism(char scenario);

struct BootstrapStudy {
    MechanismSpec mechanism;
    CovariateDistribution covariates;  // used for design only
    std::vector<double> c1_grid;
    PowerStudy power;
    double expected_missing_fraction = 0.45;
    double preflight_tolerance = 0.03;
};

struct BootstrapReport {
    OlsFit ols;
    double model_missing_fraction = 0.0;     // quadrature Pr(M=1) under the design model
    double injected_missing_fraction = 0.0;  // mean over replications of the realized fraction
    std::vector<std::string> warnings;
    std::vector<DesignSearchResult> designs;
    std::vector<CurveResult> curves;
};

BootstrapReport run_bootstrap_real(const CompleteCases& cases, const BootstrapStudy& study,
                                   const SimulationSettings& settings);

}  // namespace mnar
