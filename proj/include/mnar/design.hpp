#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mnar/augmentation.hpp"
#include "mnar/model.hpp"
#include "mnar/power.hpp"
#include "mnar/quadrature.hpp"

namespace mnar {

enum class Criterion { Noncentrality, Variance };

// How c2 is chosen for a candidate region.
//   AllObserved: c2 = 1 (valid for the logit link through the intercept shift).
//   MatchedSubsample: c2 = c1 Pr(M=1) / Pr(M=1, X in C_A), so that c* = 1.
//   Auto: AllObserved for logit, MatchedSubsample otherwise.
enum class LinkMode { Auto, AllObserved, MatchedSubsample };

std::string to_string(Criterion c);
std::string to_string(LinkMode m);
Criterion parse_criterion(const std::string& text);
LinkMode parse_link_mode(const std::string& text);

LinkMode resolve_link_mode(LinkMode mode, Link link);

// ---------------------------------------------------------------------------
// Nelder-Mead
// ---------------------------------------------------------------------------

struct NelderMeadOptions {
    double f_tolerance = 1e-9;    // relative spread of simplex values
    double x_tolerance = 1e-7;    // simplex diameter
    std::size_t max_evaluations = 1500;
    std::size_t restarts = 2;     // fresh simplex at the incumbent after convergence
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Minimizes f from x0 with initial simplex offsets `step` per coordinate.
/// Non-finite values are treated as +infinity.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             const std::vector<double>& step, const NelderMeadOptions& opts = {});

/// Point `index` of the Halton sequence in `dims` dimensions, shifted modulo 1
/// by `shift` (Cranley-Patterson rotation).
std::vector<double> halton_point(std::size_t index, std::size_t dims, const std::vector<double>& shift);

// ---------------------------------------------------------------------------
// Region search
// ---------------------------------------------------------------------------

struct DesignSearchOptions {
    std::size_t n = 1000;          // sample size used to scale the criterion
    double alpha = 0.05;
    std::size_t starts = 20;       // one interquartile box plus quasi-random starts
    std::uint64_t seed = 20240601;
    std::size_t jobs = 1;
    double penalty_weight = 1e6;
    double min_observed_mass = 1e-6;
    NelderMeadOptions nelder_mead;
    QuadratureOptions quadrature;         // final scoring of candidates
    QuadratureOptions search_quadrature;  // inside the simplex search
    DesignSearchOptions() {
        search_quadrature.hermite_y = 24;
        search_quadrature.panel_width = 4.0;
    }
};

/// Everything needed to score one region.
struct CriterionEvaluation {
    double c2 = 1.0;
    double prob_recovered = 0.0;
    double prob_observed = 0.0;
    double slack = 0.0;            // Pr(M_R) - c1 Pr(M=1)
    double gamma = 0.0;            // noncentrality (NCP criterion)
    double target_variance = 0.0;  // Variance criterion
    double power = 0.0;            // approximate power from gamma
    double objective = 0.0;        // minimized value: -gamma or log(target_variance)
};

/// Scores `region` for c1; c2 is set by the link mode. Throws ConditionViolation
/// when the region fails the recovery-mass condition.
CriterionEvaluation evaluate_region(const ModelSpec& model, double c1, const Region& region, Criterion criterion,
                                    LinkMode mode, const DesignSearchOptions& opts = {});
CriterionEvaluation evaluate_region(const ModelSpec& model, double c1, double prob_missing, const Region& region,
                                    Criterion criterion, LinkMode mode, const DesignSearchOptions& opts);

struct DesignSearchResult {
    Region region = Region::unbounded(1);
    double c1 = 1.0;
    double c2 = 1.0;
    Criterion criterion = Criterion::Noncentrality;
    LinkMode link_mode = LinkMode::Auto;
    double criterion_value = 0.0;  // gamma for NCP, target variance for Variance
    double gamma = 0.0;
    double power = 0.0;
    double prob_missing = 0.0;
    double prob_recovered = 0.0;
    double prob_observed = 0.0;
    double constraint_slack = 0.0;
    std::size_t starts_tried = 0;
    std::size_t evaluations = 0;
    bool random_design_selected = false;

    RecoveryDesign design() const { return {c1, c2, region}; }
};

DesignSearchResult optimize_region(const ModelSpec& model, double c1, Criterion criterion, LinkMode mode = LinkMode::Auto,
                                   const DesignSearchOptions& opts = {});

struct RandomComparison {
    double gamma_opt = 0.0;
    double gamma_random = 0.0;
    double power_opt = 0.0;
    double power_random = 0.0;
    double criterion_opt = 0.0;     // in the result's criterion units
    double criterion_random = 0.0;
};

RandomComparison compare_to_random(const ModelSpec& model, double c1, const DesignSearchResult& result,
                                   const DesignSearchOptions& opts = {});

}  // namespace mnar
