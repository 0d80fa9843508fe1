#include "mnar/link.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "mnar/error.hpp"

namespace mnar {

namespace {

constexpr double kProbitClamp = 37.0;
constexpr double kCLogLogClamp = 40.0;

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// log Phi(x), accurate in the far left tail.
double log_normal_cdf(double x) {
    if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
    const double x2 = x * x;
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
           std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

LinkValues logit_values(double eta) {
    LinkValues v{};
    const double e = std::exp(-std::abs(eta));
    const double l = std::log1p(e);
    const double inv = 1.0 / (1.0 + e);
    if (eta >= 0.0) {
        v.log_mu = -l;
        v.log_one_minus_mu = -eta - l;
        v.mu = inv;
        v.one_minus_mu = e * inv;
    } else {
        v.log_mu = eta - l;
        v.log_one_minus_mu = -l;
        v.mu = e * inv;
        v.one_minus_mu = inv;
    }
    v.dmu = v.mu * v.one_minus_mu;
    v.ratio = 1.0;
    v.dratio = 0.0;
    return v;
}

LinkValues probit_values(double eta) {
    LinkValues v{};
    v.mu = 0.5 * std::erfc(-eta / std::numbers::sqrt2);
    v.one_minus_mu = 0.5 * std::erfc(eta / std::numbers::sqrt2);
    v.dmu = normal_pdf(eta);
    v.log_mu = log_normal_cdf(eta);
    v.log_one_minus_mu = log_normal_cdf(-eta);
    // Score multiplier evaluated at a clamped predictor so that Mills-ratio
    // growth in the tails stays finite.
    const double e = std::clamp(eta, -kProbitClamp, kProbitClamp);
    const double mu = 0.5 * std::erfc(-e / std::numbers::sqrt2);
    const double smu = 0.5 * std::erfc(e / std::numbers::sqrt2);
    v.ratio = normal_pdf(e) / (mu * smu);
    v.dratio = v.ratio * (-e - v.ratio * (smu - mu));
    return v;
}

LinkValues cloglog_values(double eta) {
    LinkValues v{};
    const double e = std::min(eta, kCLogLogClamp);
    const double t = std::exp(e);
    const double d = -std::expm1(-t);  // mu
    v.mu = d;
    v.one_minus_mu = std::exp(-t);
    v.dmu = t * v.one_minus_mu;
    v.log_mu = std::log(d);
    v.log_one_minus_mu = -t;
    v.ratio = t / d;
    // d - t e^{-t} cancels for small t; use its series there.
    const double numer = t < 1e-4 ? t * t * (0.5 - t / 3.0 + t * t / 8.0) : d - t * std::exp(-t);
    v.dratio = t * numer / (d * d);
    return v;
}

}  // namespace

std::string_view to_string(Link link) {
    switch (link) {
        case Link::Logit: return "logit";
        case Link::Probit: return "probit";
        case Link::CLogLog: return "cloglog";
    }
    return "logit";
}

Link parse_link(std::string_view name) {
    if (name == "logit") return Link::Logit;
    if (name == "probit") return Link::Probit;
    if (name == "cloglog") return Link::CLogLog;
    throw SpecificationError("unknown link function '" + std::string(name) + "'");
}

double inverse_link(Link link, double eta) {
    switch (link) {
        case Link::Logit: return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
        case Link::Probit: return 0.5 * std::erfc(-eta / std::numbers::sqrt2);
        case Link::CLogLog: return -std::expm1(-std::exp(eta));
    }
    return 0.0;
}

double link_function(Link link, double mu) {
    if (!(mu > 0.0 && mu < 1.0)) throw SpecificationError("link argument must lie in (0,1)");
    switch (link) {
        case Link::Logit: return std::log(mu / (1.0 - mu));
        case Link::Probit: return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * mu);
        case Link::CLogLog: return std::log(-std::log1p(-mu));
    }
    return 0.0;
}

LinkValues link_values(Link link, double eta) {
    switch (link) {
        case Link::Logit: return logit_values(eta);
        case Link::Probit: return probit_values(eta);
        case Link::CLogLog: return cloglog_values(eta);
    }
    return logit_values(eta);
}

}  // namespace mnar
