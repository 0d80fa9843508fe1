#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <sstream>
#include <vector>

#include "mnar/error.hpp"
#include "mnar/model.hpp"

namespace mnar {

struct QuadratureOptions {
    std::size_t hermite_x = 40;       // Gauss-Hermite nodes for an unrestricted normal dimension
    std::size_t hermite_y = 40;       // Gauss-Hermite nodes for Y | X
    std::size_t legendre_order = 10;  // nodes per Gauss-Legendre panel
    double panel_width = 2.0;         // panel width in units of the marginal's scale
    double normal_truncation = 8.0;   // normal dimensions integrate over mean +- 8 sd
    double skew_truncation = 10.0;    // skew-normal over location +- 10 scale
};

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Probabilists' Gauss-Hermite rule: integrates against N(0,1), weights sum to 1.
const QuadratureRule& gauss_hermite(std::size_t order);
/// Gauss-Legendre rule on [-1, 1].
const QuadratureRule& gauss_legendre(std::size_t order);

struct WeightedNode {
    double x;
    double weight;  // includes the marginal density
};

// Nodes integrating against one marginal restricted to a union of intervals.
std::vector<WeightedNode> marginal_rule(const Marginal& marginal, std::span<const Interval> intervals,
                                        const QuadratureOptions& opts);

// Product grid over {x in region} x R for (X, Y). Weights approximate the
// joint law f_X(x) f_{Y|X}(y|x) dx dy; they sum to Pr(X in region).
class QuadratureGrid {
public:
    QuadratureGrid(const ModelSpec& model, const Region& region, const QuadratureOptions& opts = {});

    std::size_t size() const { return ys_.size(); }
    std::size_t dimension() const { return p_; }
    std::span<const double> x(std::size_t i) const { return {xs_.data() + i * p_, p_}; }
    double y(std::size_t i) const { return ys_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }
    double mass() const;

    template <class F>
    double expect(F&& f) const {
        double total = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            const double v = f(x(i), ys_[i]);
            if (!std::isfinite(v)) throw NumericalError(describe_failure(i));
            total += v * weights_[i];
        }
        return total;
    }

private:
    std::string describe_failure(std::size_t i) const;

    std::size_t p_;
    std::vector<double> xs_;
    std::vector<double> ys_;
    std::vector<double> weights_;
};

using Integrand = std::function<double(std::span<const double>, double)>;

/// E[f(X, Y) 1{X in region}].
double expect(const Integrand& f, const Region& region, const ModelSpec& model, const QuadratureOptions& opts = {});

/// Pr(M = 1).
double prob_missing(const ModelSpec& model, const QuadratureOptions& opts = {});
/// Pr(M = 0, X in region).
double prob_MO(const ModelSpec& model, const Region& region, const QuadratureOptions& opts = {});
/// Pr(M = 1, X in region).
double prob_MR(const ModelSpec& model, const Region& region, const QuadratureOptions& opts = {});

struct RegionMasses {
    double recovered;  // Pr(M = 1, X in region)
    double observed;   // Pr(M = 0, X in region)
};

RegionMasses region_masses(const ModelSpec& model, const Region& region, const QuadratureOptions& opts = {});

// Joint densities of (X_R, Y_R) and (X_O, Y_O): the law of (X, Y) conditional
// on M = 1 (resp. M = 0) and X in the region.
class ComponentDensities {
public:
    ComponentDensities(const ModelSpec& model, const Region& region, const QuadratureOptions& opts = {});

    double recovered(std::span<const double> x, double y) const;
    double observed(std::span<const double> x, double y) const;
    const RegionMasses& masses() const { return masses_; }

private:
    double base_density(std::span<const double> x, double y) const;

    ModelSpec model_;
    Region region_;
    RegionMasses masses_;
};

double joint_density_R(const ModelSpec& model, const Region& region, std::span<const double> x, double y,
                       const QuadratureOptions& opts = {});
double joint_density_O(const ModelSpec& model, const Region& region, std::span<const double> x, double y,
                       const QuadratureOptions& opts = {});

}  // namespace mnar
