#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mnar/link.hpp"

namespace mnar {

// ---------------------------------------------------------------------------
// Regression relation Y | X = x ~ N(intercept + slopes' x, sigma^2)
// ---------------------------------------------------------------------------

struct RegressionSpec {
    double intercept = 0.0;
    std::vector<double> slopes;
    double sigma = 1.0;

    std::size_t dimension() const { return slopes.size(); }
    double mean(std::span<const double> x) const;
    void validate() const;
};

// ---------------------------------------------------------------------------
// Covariate marginals. Dimensions are independent.
// ---------------------------------------------------------------------------

struct NormalMarginal {
    double mean = 0.0;
    double sd = 1.0;
};

/// Density (2/scale) phi((x-location)/scale) Phi(shape (x-location)/scale).
struct SkewNormalMarginal {
    double location = 0.0;
    double scale = 1.0;
    double shape = 0.0;
};

/// Observed covariate values. Sampling resamples the values with replacement;
/// integration uses a Gaussian kernel density estimate of them.
class EmpiricalMarginal {
public:
    explicit EmpiricalMarginal(std::vector<double> sample);

    const std::vector<double>& sample() const { return sample_; }
    double bandwidth() const { return bandwidth_; }
    double mean() const { return mean_; }
    double sd() const { return sd_; }
    double density(double x) const;
    double lower() const { return grid_lo_; }
    double upper() const { return grid_hi_; }

private:
    std::vector<double> sample_;
    double bandwidth_ = 0.0;
    double mean_ = 0.0;
    double sd_ = 0.0;
    double grid_lo_ = 0.0;
    double grid_hi_ = 0.0;
    double grid_step_ = 0.0;
    std::vector<double> grid_density_;
};

using Marginal = std::variant<NormalMarginal, SkewNormalMarginal, EmpiricalMarginal>;

double marginal_density(const Marginal& m, double x);
double marginal_quantile(const Marginal& m, double prob);
double marginal_mean(const Marginal& m);
double marginal_sd(const Marginal& m);
double sample_marginal(const Marginal& m, std::mt19937_64& rng);
void validate_marginal(const Marginal& m);

struct CovariateDistribution {
    std::vector<Marginal> marginals;

    std::size_t dimension() const { return marginals.size(); }
    double density(std::span<const double> x) const;
    void sample(std::mt19937_64& rng, std::span<double> out) const;
};

// ---------------------------------------------------------------------------
// Missing mechanism g(Pr(M=1 | x, y)) = w' lambda + z' psi
// ---------------------------------------------------------------------------

/// A w feature: the constant 1 or a covariate x_j (0-based index).
struct CovariateTerm {
    std::optional<std::size_t> covariate;

    static CovariateTerm intercept() { return {}; }
    static CovariateTerm linear(std::size_t j) { return {j}; }
    bool operator==(const CovariateTerm&) const = default;
};

/// A z feature: y itself or an interaction x_j * y.
struct OutcomeTerm {
    std::optional<std::size_t> covariate;

    static OutcomeTerm outcome() { return {}; }
    static OutcomeTerm interaction(std::size_t j) { return {j}; }
    bool operator==(const OutcomeTerm&) const = default;
};

std::string to_string(const CovariateTerm& term);
std::string to_string(const OutcomeTerm& term);
CovariateTerm parse_covariate_term(const std::string& text);
OutcomeTerm parse_outcome_term(const std::string& text);

/// Feature layout and link, without coefficient values.
struct MechanismShape {
    Link link = Link::Logit;
    std::vector<CovariateTerm> w_terms;
    std::vector<OutcomeTerm> z_terms;

    std::size_t q() const { return w_terms.size(); }
    std::size_t s() const { return z_terms.size(); }
    void validate(std::size_t p) const;

    /// w = (1, x_1, ..., x_p), z = (y).
    static MechanismShape scenario_one(Link link, std::size_t p);
    /// w = (1, x_1), z = (x_1 y, y).
    static MechanismShape scenario_two(Link link);
};

// Writes w (length q) and z (length s). Throws SpecificationError when a term
// references a covariate outside x.
void eval_features(const MechanismShape& shape, std::span<const double> x, double y,
                   std::span<double> w, std::span<double> z);

struct MechanismSpec {
    MechanismShape shape;
    std::vector<double> lambda;
    std::vector<double> psi;

    Link link() const { return shape.link; }
    std::size_t q() const { return shape.q(); }
    std::size_t s() const { return shape.s(); }
    bool is_mar() const;
    void validate(std::size_t p) const;
};

struct Features {
    std::vector<double> w;
    std::vector<double> z;
};

Features eval_features(const MechanismSpec& spec, std::span<const double> x, double y);
double linear_predictor(const MechanismSpec& spec, std::span<const double> x, double y);
/// Pr(M = 1 | X = x, Y = y).
double mechanism_prob(const MechanismSpec& spec, std::span<const double> x, double y);

struct ModelSpec {
    RegressionSpec regression;
    CovariateDistribution covariates;
    MechanismSpec mechanism;

    std::size_t dimension() const { return regression.dimension(); }
    void validate() const;
};

// ---------------------------------------------------------------------------
// Regions C_A: per-dimension unions of closed intervals
// ---------------------------------------------------------------------------

struct Interval {
    double lower;
    double upper;

    bool contains(double v) const { return v >= lower && v <= upper; }
    bool finite() const;
    bool operator==(const Interval&) const = default;
};

class Region {
public:
    /// Intervals per dimension; each list is sorted and disjoint.
    explicit Region(std::vector<std::vector<Interval>> dims);

    static Region unbounded(std::size_t p);
    static Region box(const std::vector<Interval>& per_dimension);

    std::size_t dimension() const { return dims_.size(); }
    std::span<const Interval> intervals(std::size_t j) const { return dims_[j]; }
    bool is_unbounded(std::size_t j) const;
    bool is_unbounded() const;
    bool contains(std::span<const double> x) const;

    // One uniform enlargement step: every finite endpoint moves outward by
    // `fraction` of its interval's half-width. Half-infinite intervals use
    // `fallback_scale[j]` in place of the half-width. Overlaps are merged.
    Region enlarged(double fraction, std::span<const double> fallback_scale) const;

    bool operator==(const Region&) const = default;

private:
    std::vector<std::vector<Interval>> dims_;
};

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

class Dataset {
public:
    explicit Dataset(std::size_t p) : p_(p) {}

    void reserve(std::size_t n);
    void add_row(std::span<const double> x, std::optional<double> y);

    std::size_t size() const { return ys_.size(); }
    std::size_t dimension() const { return p_; }
    std::size_t missing_count() const { return missing_; }
    std::size_t observed_count() const { return size() - missing_; }

    std::span<const double> x(std::size_t i) const { return {xs_.data() + i * p_, p_}; }
    const std::optional<double>& y(std::size_t i) const { return ys_[i]; }
    bool missing(std::size_t i) const { return !ys_[i].has_value(); }

private:
    std::size_t p_;
    std::size_t missing_ = 0;
    std::vector<double> xs_;
    std::vector<std::optional<double>> ys_;
};

/// A generated dataset together with the withheld outcomes of its missing rows.
struct GeneratedData {
    Dataset data;
    std::vector<double> outcomes;
};

GeneratedData generate_with_outcomes(const ModelSpec& model, std::size_t n, std::uint64_t seed);
Dataset generate_dataset(const ModelSpec& model, std::size_t n, std::uint64_t seed);

}  // namespace mnar
