#pragma once

#include <string_view>

namespace mnar {

enum class Link { Logit, Probit, CLogLog };

std::string_view to_string(Link link);
Link parse_link(std::string_view name);

/// g^{-1}(eta); strictly increasing map onto (0,1).
double inverse_link(Link link, double eta);

/// g(mu) for mu in (0,1).
double link_function(Link link, double mu);

// Everything a Bernoulli GLM needs at one linear predictor value. `ratio` is
// the score multiplier h'(eta) / (mu (1 - mu)); for the logit link it is 1.
struct LinkValues {
    double mu;
    double one_minus_mu;
    double dmu;
    double log_mu;
    double log_one_minus_mu;
    double ratio;
    double dratio;
};

LinkValues link_values(Link link, double eta);

}  // namespace mnar
