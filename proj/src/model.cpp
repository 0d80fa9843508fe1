#include "mnar/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/skew_normal.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "mnar/error.hpp"

namespace mnar {

namespace {

constexpr std::size_t kKdeGridPoints = 4097;

double std_normal_quantile(double prob) {
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * prob);
}

double normal_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

// ---------------------------------------------------------------------------

double RegressionSpec::mean(std::span<const double> x) const {
    double m = intercept;
    for (std::size_t j = 0; j < slopes.size(); ++j) m += slopes[j] * x[j];
    return m;
}

void RegressionSpec::validate() const {
    if (slopes.empty()) throw SpecificationError("regression needs at least one covariate");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw SpecificationError("regression sigma must be positive");
    if (!std::isfinite(intercept)) throw SpecificationError("regression intercept must be finite");
    for (double b : slopes)
        if (!std::isfinite(b)) throw SpecificationError("regression slopes must be finite");
}

// ---------------------------------------------------------------------------

EmpiricalMarginal::EmpiricalMarginal(std::vector<double> sample) : sample_(std::move(sample)) {
    if (sample_.empty()) throw SpecificationError("empirical covariate sample is empty");
    for (double v : sample_)
        if (!std::isfinite(v)) throw SpecificationError("empirical covariate sample has non-finite values");
    std::sort(sample_.begin(), sample_.end());

    const double n = static_cast<double>(sample_.size());
    mean_ = std::accumulate(sample_.begin(), sample_.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : sample_) ss += (v - mean_) * (v - mean_);
    sd_ = sample_.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;

    // Silverman's rule of thumb.
    auto q = [&](double prob) {
        const double pos = prob * (n - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, sample_.size() - 1);
        return sample_[lo] + (pos - static_cast<double>(lo)) * (sample_[hi] - sample_[lo]);
    };
    const double iqr = q(0.75) - q(0.25);
    double spread = sd_;
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    bandwidth_ = 0.9 * spread * std::pow(n, -0.2);
    if (!(bandwidth_ > 0.0)) bandwidth_ = 1e-3 * std::max(1.0, std::abs(mean_));

    const double pad = 3.0 * std::max(sd_, bandwidth_);
    grid_lo_ = sample_.front() - pad;
    grid_hi_ = sample_.back() + pad;
    grid_step_ = (grid_hi_ - grid_lo_) / static_cast<double>(kKdeGridPoints - 1);
    grid_density_.assign(kKdeGridPoints, 0.0);

    // Kernel contributions beyond 8 bandwidths are dropped.
    const double reach = 8.0 * bandwidth_;
    const double norm = 1.0 / (n * bandwidth_ * std::sqrt(2.0 * std::numbers::pi));
    for (double v : sample_) {
        const auto first = static_cast<std::size_t>(std::max(0.0, std::floor((v - reach - grid_lo_) / grid_step_)));
        const auto last = std::min(kKdeGridPoints - 1,
                                   static_cast<std::size_t>(std::ceil((v + reach - grid_lo_) / grid_step_)));
        for (std::size_t k = first; k <= last; ++k) {
            const double u = (grid_lo_ + static_cast<double>(k) * grid_step_ - v) / bandwidth_;
            grid_density_[k] += norm * std::exp(-0.5 * u * u);
        }
    }
}

double EmpiricalMarginal::density(double x) const {
    if (!(x >= grid_lo_ && x <= grid_hi_)) return 0.0;
    const double pos = (x - grid_lo_) / grid_step_;
    const auto k = std::min(static_cast<std::size_t>(pos), kKdeGridPoints - 2);
    const double t = pos - static_cast<double>(k);
    return (1.0 - t) * grid_density_[k] + t * grid_density_[k + 1];
}

double marginal_density(const Marginal& m, double x) {
    return std::visit(Overloaded{
                          [x](const NormalMarginal& d) { return normal_pdf(x, d.mean, d.sd); },
                          [x](const SkewNormalMarginal& d) {
                              return boost::math::pdf(
                                  boost::math::skew_normal_distribution<double>(d.location, d.scale, d.shape), x);
                          },
                          [x](const EmpiricalMarginal& d) { return d.density(x); },
                      },
                      m);
}

double marginal_quantile(const Marginal& m, double prob) {
    if (!(prob > 0.0 && prob < 1.0)) throw SpecificationError("quantile level must lie in (0,1)");
    return std::visit(Overloaded{
                          [prob](const NormalMarginal& d) { return d.mean + d.sd * std_normal_quantile(prob); },
                          [prob](const SkewNormalMarginal& d) {
                              return boost::math::quantile(
                                  boost::math::skew_normal_distribution<double>(d.location, d.scale, d.shape), prob);
                          },
                          [prob](const EmpiricalMarginal& d) {
                              const auto& s = d.sample();
                              const double pos = prob * static_cast<double>(s.size() - 1);
                              const auto lo = static_cast<std::size_t>(std::floor(pos));
                              const auto hi = std::min(lo + 1, s.size() - 1);
                              return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
                          },
                      },
                      m);
}

double marginal_mean(const Marginal& m) {
    return std::visit(Overloaded{
                          [](const NormalMarginal& d) { return d.mean; },
                          [](const SkewNormalMarginal& d) {
                              return boost::math::mean(
                                  boost::math::skew_normal_distribution<double>(d.location, d.scale, d.shape));
                          },
                          [](const EmpiricalMarginal& d) { return d.mean(); },
                      },
                      m);
}

double marginal_sd(const Marginal& m) {
    return std::visit(Overloaded{
                          [](const NormalMarginal& d) { return d.sd; },
                          [](const SkewNormalMarginal& d) {
                              return boost::math::standard_deviation(
                                  boost::math::skew_normal_distribution<double>(d.location, d.scale, d.shape));
                          },
                          [](const EmpiricalMarginal& d) { return d.sd(); },
                      },
                      m);
}

double sample_marginal(const Marginal& m, std::mt19937_64& rng) {
    return std::visit(Overloaded{
                          [&rng](const NormalMarginal& d) {
                              return std::normal_distribution<double>(d.mean, d.sd)(rng);
                          },
                          [&rng](const SkewNormalMarginal& d) {
                              // Azzalini's representation via two standard normals.
                              std::normal_distribution<double> z;
                              const double delta = d.shape / std::sqrt(1.0 + d.shape * d.shape);
                              const double u0 = z(rng);
                              const double v = z(rng);
                              const double u1 = delta * u0 + std::sqrt(1.0 - delta * delta) * v;
                              return d.location + d.scale * (u0 >= 0.0 ? u1 : -u1);
                          },
                          [&rng](const EmpiricalMarginal& d) {
                              const auto& s = d.sample();
                              std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
                              return s[pick(rng)];
                          },
                      },
                      m);
}

void validate_marginal(const Marginal& m) {
    std::visit(Overloaded{
                   [](const NormalMarginal& d) {
                       if (!(d.sd > 0.0) || !std::isfinite(d.mean))
                           throw SpecificationError("normal covariate needs finite mean and sd > 0");
                   },
                   [](const SkewNormalMarginal& d) {
                       if (!(d.scale > 0.0) || !std::isfinite(d.location) || !std::isfinite(d.shape))
                           throw SpecificationError("skew-normal covariate needs finite location/shape and scale > 0");
                   },
                   [](const EmpiricalMarginal&) {},
               },
               m);
}

double CovariateDistribution::density(std::span<const double> x) const {
    double f = 1.0;
    for (std::size_t j = 0; j < marginals.size(); ++j) f *= marginal_density(marginals[j], x[j]);
    return f;
}

void CovariateDistribution::sample(std::mt19937_64& rng, std::span<double> out) const {
    for (std::size_t j = 0; j < marginals.size(); ++j) out[j] = sample_marginal(marginals[j], rng);
}

// ---------------------------------------------------------------------------

std::string to_string(const CovariateTerm& term) {
    return term.covariate ? "x" + std::to_string(*term.covariate + 1) : "1";
}

std::string to_string(const OutcomeTerm& term) {
    return term.covariate ? "x" + std::to_string(*term.covariate + 1) + "*y" : "y";
}

namespace {

std::size_t parse_covariate_index(const std::string& text, const std::string& full) {
    if (text.size() < 2 || text[0] != 'x') throw SpecificationError("cannot parse term '" + full + "'");
    std::size_t pos = 0;
    unsigned long idx = 0;
    try {
        idx = std::stoul(text.substr(1), &pos);
    } catch (const std::exception&) {
        throw SpecificationError("cannot parse term '" + full + "'");
    }
    if (pos != text.size() - 1 || idx == 0) throw SpecificationError("cannot parse term '" + full + "'");
    return idx - 1;
}

std::string strip_spaces(const std::string& text) {
    std::string out;
    for (char c : text)
        if (c != ' ') out.push_back(c);
    return out;
}

}  // namespace

CovariateTerm parse_covariate_term(const std::string& raw) {
    const std::string text = strip_spaces(raw);
    if (text == "1") return CovariateTerm::intercept();
    return CovariateTerm::linear(parse_covariate_index(text, raw));
}

OutcomeTerm parse_outcome_term(const std::string& raw) {
    const std::string text = strip_spaces(raw);
    if (text == "y") return OutcomeTerm::outcome();
    const auto star = text.find('*');
    if (star == std::string::npos) throw SpecificationError("outcome term '" + raw + "' must involve y");
    const std::string a = text.substr(0, star);
    const std::string b = text.substr(star + 1);
    if (b == "y") return OutcomeTerm::interaction(parse_covariate_index(a, raw));
    if (a == "y") return OutcomeTerm::interaction(parse_covariate_index(b, raw));
    throw SpecificationError("outcome term '" + raw + "' must involve y");
}

void MechanismShape::validate(std::size_t p) const {
    if (w_terms.empty() || w_terms.front().covariate.has_value())
        throw SpecificationError("the first w term must be the intercept");
    for (std::size_t k = 1; k < w_terms.size(); ++k) {
        if (!w_terms[k].covariate) throw SpecificationError("only the first w term may be the intercept");
        if (*w_terms[k].covariate >= p)
            throw SpecificationError("w term " + to_string(w_terms[k]) + " references a missing covariate");
    }
    if (z_terms.empty()) throw SpecificationError("the mechanism needs at least one z term");
    for (const auto& t : z_terms)
        if (t.covariate && *t.covariate >= p)
            throw SpecificationError("z term " + to_string(t) + " references a missing covariate");
}

MechanismShape MechanismShape::scenario_one(Link link, std::size_t p) {
    MechanismShape shape;
    shape.link = link;
    shape.w_terms.push_back(CovariateTerm::intercept());
    for (std::size_t j = 0; j < p; ++j) shape.w_terms.push_back(CovariateTerm::linear(j));
    shape.z_terms.push_back(OutcomeTerm::outcome());
    return shape;
}

MechanismShape MechanismShape::scenario_two(Link link) {
    MechanismShape shape;
    shape.link = link;
    shape.w_terms = {CovariateTerm::intercept(), CovariateTerm::linear(0)};
    shape.z_terms = {OutcomeTerm::interaction(0), OutcomeTerm::outcome()};
    return shape;
}

void eval_features(const MechanismShape& shape, std::span<const double> x, double y, std::span<double> w,
                   std::span<double> z) {
    for (std::size_t k = 0; k < shape.w_terms.size(); ++k) {
        const auto& c = shape.w_terms[k].covariate;
        if (!c) {
            w[k] = 1.0;
        } else {
            if (*c >= x.size()) throw SpecificationError("w term references covariate beyond p");
            w[k] = x[*c];
        }
    }
    for (std::size_t k = 0; k < shape.z_terms.size(); ++k) {
        const auto& c = shape.z_terms[k].covariate;
        if (!c) {
            z[k] = y;
        } else {
            if (*c >= x.size()) throw SpecificationError("z term references covariate beyond p");
            z[k] = x[*c] * y;
        }
    }
}

bool MechanismSpec::is_mar() const {
    return std::all_of(psi.begin(), psi.end(), [](double v) { return v == 0.0; });
}

void MechanismSpec::validate(std::size_t p) const {
    shape.validate(p);
    if (lambda.size() != shape.q()) throw SpecificationError("lambda length must equal the number of w terms");
    if (psi.size() != shape.s()) throw SpecificationError("psi length must equal the number of z terms");
    for (double v : lambda)
        if (!std::isfinite(v)) throw SpecificationError("lambda must be finite");
    for (double v : psi)
        if (!std::isfinite(v)) throw SpecificationError("psi must be finite");
}

Features eval_features(const MechanismSpec& spec, std::span<const double> x, double y) {
    Features f{std::vector<double>(spec.q()), std::vector<double>(spec.s())};
    eval_features(spec.shape, x, y, f.w, f.z);
    return f;
}

double linear_predictor(const MechanismSpec& spec, std::span<const double> x, double y) {
    double eta = 0.0;
    for (std::size_t k = 0; k < spec.shape.w_terms.size(); ++k) {
        const auto& c = spec.shape.w_terms[k].covariate;
        if (c && *c >= x.size()) throw SpecificationError("w term references covariate beyond p");
        eta += spec.lambda[k] * (c ? x[*c] : 1.0);
    }
    for (std::size_t k = 0; k < spec.shape.z_terms.size(); ++k) {
        const auto& c = spec.shape.z_terms[k].covariate;
        if (c && *c >= x.size()) throw SpecificationError("z term references covariate beyond p");
        eta += spec.psi[k] * (c ? x[*c] * y : y);
    }
    return eta;
}

double mechanism_prob(const MechanismSpec& spec, std::span<const double> x, double y) {
    return inverse_link(spec.link(), linear_predictor(spec, x, y));
}

void ModelSpec::validate() const {
    regression.validate();
    const std::size_t p = regression.dimension();
    if (covariates.dimension() != p)
        throw SpecificationError("covariate distribution dimension does not match the regression");
    for (const auto& m : covariates.marginals) validate_marginal(m);
    mechanism.validate(p);
}

// ---------------------------------------------------------------------------

bool Interval::finite() const { return std::isfinite(lower) && std::isfinite(upper); }

Region::Region(std::vector<std::vector<Interval>> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw SpecificationError("region needs at least one dimension");
    for (const auto& list : dims_) {
        if (list.empty()) throw SpecificationError("region dimension has no intervals");
        for (std::size_t k = 0; k < list.size(); ++k) {
            if (!(list[k].lower < list[k].upper)) throw SpecificationError("region interval needs lower < upper");
            if (k > 0 && !(list[k - 1].upper < list[k].lower))
                throw SpecificationError("region intervals must be sorted and disjoint");
        }
    }
}

Region Region::unbounded(std::size_t p) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return Region(std::vector<std::vector<Interval>>(p, {Interval{-inf, inf}}));
}

Region Region::box(const std::vector<Interval>& per_dimension) {
    std::vector<std::vector<Interval>> dims;
    dims.reserve(per_dimension.size());
    for (const auto& iv : per_dimension) dims.push_back({iv});
    return Region(std::move(dims));
}

bool Region::is_unbounded(std::size_t j) const {
    return dims_[j].size() == 1 && std::isinf(dims_[j][0].lower) && std::isinf(dims_[j][0].upper);
}

bool Region::is_unbounded() const {
    for (std::size_t j = 0; j < dims_.size(); ++j)
        if (!is_unbounded(j)) return false;
    return true;
}

bool Region::contains(std::span<const double> x) const {
    for (std::size_t j = 0; j < dims_.size(); ++j) {
        bool inside = false;
        for (const auto& iv : dims_[j]) {
            if (iv.contains(x[j])) {
                inside = true;
                break;
            }
        }
        if (!inside) return false;
    }
    return true;
}

Region Region::enlarged(double fraction, std::span<const double> fallback_scale) const {
    std::vector<std::vector<Interval>> out;
    out.reserve(dims_.size());
    for (std::size_t j = 0; j < dims_.size(); ++j) {
        std::vector<Interval> grown;
        for (const auto& iv : dims_[j]) {
            const double half = iv.finite() ? 0.5 * (iv.upper - iv.lower) : fallback_scale[j];
            const double step = fraction * half;
            Interval g{iv.lower - step, iv.upper + step};
            if (!grown.empty() && g.lower <= grown.back().upper) {
                grown.back().upper = std::max(grown.back().upper, g.upper);
            } else {
                grown.push_back(g);
            }
        }
        out.push_back(std::move(grown));
    }
    return Region(std::move(out));
}

// ---------------------------------------------------------------------------

void Dataset::reserve(std::size_t n) {
    xs_.reserve(n * p_);
    ys_.reserve(n);
}

void Dataset::add_row(std::span<const double> x, std::optional<double> y) {
    if (x.size() != p_) throw SpecificationError("row dimension does not match dataset dimension");
    xs_.insert(xs_.end(), x.begin(), x.end());
    if (!y) ++missing_;
    ys_.push_back(y);
}

GeneratedData generate_with_outcomes(const ModelSpec& model, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw SpecificationError("dataset size must be at least 1");
    const std::size_t p = model.dimension();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, model.regression.sigma);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    GeneratedData out{Dataset(p), {}};
    out.data.reserve(n);
    out.outcomes.reserve(n);
    std::vector<double> x(p);
    for (std::size_t i = 0; i < n; ++i) {
        model.covariates.sample(rng, x);
        const double y = model.regression.mean(x) + noise(rng);
        const bool missing = unif(rng) < mechanism_prob(model.mechanism, x, y);
        out.data.add_row(x, missing ? std::nullopt : std::optional<double>(y));
        out.outcomes.push_back(y);
    }
    return out;
}

Dataset generate_dataset(const ModelSpec& model, std::size_t n, std::uint64_t seed) {
    return generate_with_outcomes(model, n, seed).data;
}

}  // namespace mnar
