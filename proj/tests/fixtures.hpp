#pragma once

#include <cmath>
#include <vector>

#include "mnar/model.hpp"

namespace fixtures {

inline mnar::ModelSpec single_covariate(double psi = -0.15) {
    mnar::ModelSpec m;
    m.regression = {2.0, {-2.0}, 2.0};
    m.covariates.marginals = {mnar::NormalMarginal{0.0, 4.0}};
    m.mechanism.shape = mnar::MechanismShape::scenario_one(mnar::Link::Logit, 1);
    m.mechanism.lambda = {-2.0, 0.4};
    m.mechanism.psi = {psi};
    return m;
}

inline mnar::ModelSpec two_covariates() {
    mnar::ModelSpec m;
    m.regression = {2.0, {-2.0, 2.0}, 2.0};
    m.covariates.marginals = {mnar::NormalMarginal{0.0, 4.0}, mnar::NormalMarginal{2.0, 2.0}};
    m.mechanism.shape = mnar::MechanismShape::scenario_one(mnar::Link::Logit, 2);
    m.mechanism.lambda = {-2.0, 0.4, 0.2};
    m.mechanism.psi = {-0.15};
    return m;
}

// Scenario 2 examples; z = (x1 y, y).
inline mnar::ModelSpec scenario_two_model(std::vector<double> lambda, std::vector<double> psi) {
    mnar::ModelSpec m;
    m.regression = {2.0, {-0.5}, 2.0};
    m.covariates.marginals = {mnar::NormalMarginal{1.0, 2.0}};
    m.mechanism.shape = mnar::MechanismShape::scenario_two(mnar::Link::Logit);
    m.mechanism.lambda = std::move(lambda);
    m.mechanism.psi = std::move(psi);
    return m;
}

inline mnar::ModelSpec interaction_model() { return scenario_two_model({-1.0, -0.5}, {0.05, 0.1}); }
inline mnar::ModelSpec weak_interaction() { return scenario_two_model({-2.0, 0.5}, {0.03, 0.04}); }

inline mnar::ModelSpec probit_model() {
    mnar::ModelSpec m = single_covariate();
    m.mechanism.shape.link = mnar::Link::Probit;
    m.mechanism.lambda = {-1.14, 0.23};
    m.mechanism.psi = {-0.09};
    return m;
}

inline double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }
inline double std_normal_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

}  // namespace fixtures
