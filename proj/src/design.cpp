#include "mnar/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mnar/error.hpp"
#include "mnar/parallel.hpp"

namespace mnar {

std::string to_string(Criterion c) { return c == Criterion::Noncentrality ? "ncp" : "variance"; }

std::string to_string(LinkMode m) {
    switch (m) {
        case LinkMode::Auto: return "auto";
        case LinkMode::AllObserved: return "all-observed";
        case LinkMode::MatchedSubsample: return "matched-subsample";
    }
    return "auto";
}

Criterion parse_criterion(const std::string& text) {
    if (text == "ncp" || text == "noncentrality") return Criterion::Noncentrality;
    if (text == "variance") return Criterion::Variance;
    throw ConfigError("unknown criterion '" + text + "' (expected ncp or variance)");
}

LinkMode parse_link_mode(const std::string& text) {
    if (text == "auto") return LinkMode::Auto;
    if (text == "all-observed") return LinkMode::AllObserved;
    if (text == "matched-subsample") return LinkMode::MatchedSubsample;
    throw ConfigError("unknown link mode '" + text + "'");
}

LinkMode resolve_link_mode(LinkMode mode, Link link) {
    if (mode != LinkMode::Auto) return mode;
    return link == Link::Logit ? LinkMode::AllObserved : LinkMode::MatchedSubsample;
}

// ---------------------------------------------------------------------------

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             const std::vector<double>& step, const NelderMeadOptions& opts) {
    const std::size_t d = x0.size();
    if (step.size() != d) throw SpecificationError("Nelder-Mead step has the wrong length");
    constexpr double inf = std::numeric_limits<double>::infinity();
    NelderMeadResult out;
    auto eval = [&](const std::vector<double>& x) {
        ++out.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : inf;
    };

    std::vector<double> best = std::move(x0);
    double best_value = eval(best);
    for (std::size_t round = 0; round <= opts.restarts; ++round) {
        std::vector<std::vector<double>> simplex(d + 1, best);
        std::vector<double> values(d + 1, best_value);
        for (std::size_t k = 0; k < d; ++k) {
            simplex[k + 1][k] += step[k];
            values[k + 1] = eval(simplex[k + 1]);
        }
        std::vector<std::size_t> order(d + 1);
        bool converged = false;
        while (out.evaluations < opts.max_evaluations) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
            const std::size_t lo = order.front();
            const std::size_t hi = order.back();
            const std::size_t second = order[d - 1];

            double diameter = 0.0;
            for (std::size_t k = 0; k <= d; ++k)
                for (std::size_t c = 0; c < d; ++c) diameter = std::max(diameter, std::abs(simplex[k][c] - simplex[lo][c]));
            const double spread = values[hi] - values[lo];
            if ((std::isfinite(values[hi]) && spread <= opts.f_tolerance * (1.0 + std::abs(values[lo]))) ||
                diameter <= opts.x_tolerance) {
                converged = true;
                break;
            }

            std::vector<double> centroid(d, 0.0);
            for (std::size_t k = 0; k <= d; ++k)
                if (k != hi)
                    for (std::size_t c = 0; c < d; ++c) centroid[c] += simplex[k][c] / static_cast<double>(d);
            auto along = [&](double t) {
                std::vector<double> x(d);
                for (std::size_t c = 0; c < d; ++c) x[c] = centroid[c] + t * (simplex[hi][c] - centroid[c]);
                return x;
            };

            std::vector<double> xr = along(-1.0);
            const double fr = eval(xr);
            if (fr < values[lo]) {
                std::vector<double> xe = along(-2.0);
                const double fe = eval(xe);
                if (fe < fr) {
                    simplex[hi] = std::move(xe);
                    values[hi] = fe;
                } else {
                    simplex[hi] = std::move(xr);
                    values[hi] = fr;
                }
                continue;
            }
            if (fr < values[second]) {
                simplex[hi] = std::move(xr);
                values[hi] = fr;
                continue;
            }
            const bool outside = fr < values[hi];
            std::vector<double> xc = along(outside ? -0.5 : 0.5);
            const double fc = eval(xc);
            if (fc < (outside ? fr : values[hi])) {
                simplex[hi] = std::move(xc);
                values[hi] = fc;
                continue;
            }
            for (std::size_t k = 0; k <= d; ++k) {
                if (k == lo) continue;
                for (std::size_t c = 0; c < d; ++c) simplex[k][c] = simplex[lo][c] + 0.5 * (simplex[k][c] - simplex[lo][c]);
                values[k] = eval(simplex[k]);
            }
        }
        const auto it = std::min_element(values.begin(), values.end());
        const auto idx = static_cast<std::size_t>(it - values.begin());
        const bool improved = values[idx] < best_value - opts.f_tolerance * (1.0 + std::abs(best_value));
        if (values[idx] < best_value) {
            best = simplex[idx];
            best_value = values[idx];
        }
        out.converged = converged;
        if (!improved && round > 0) break;
        if (out.evaluations >= opts.max_evaluations) break;
    }
    out.x = std::move(best);
    out.value = best_value;
    return out;
}

std::vector<double> halton_point(std::size_t index, std::size_t dims, const std::vector<double>& shift) {
    static constexpr unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    if (dims > std::size(primes)) throw SpecificationError("Halton sequence supports at most 12 dimensions");
    std::vector<double> u(dims);
    for (std::size_t k = 0; k < dims; ++k) {
        double f = 1.0;
        double r = 0.0;
        for (std::size_t i = index + 1; i > 0; i /= primes[k]) {
            f /= primes[k];
            r += f * static_cast<double>(i % primes[k]);
        }
        const double s = k < shift.size() ? shift[k] : 0.0;
        u[k] = r + s - std::floor(r + s);
    }
    return u;
}

// ---------------------------------------------------------------------------

namespace {

double choose_c2(LinkMode mode, double c1, double prob_missing, double prob_recovered) {
    if (mode == LinkMode::AllObserved) return 1.0;
    return required_c2(c1, prob_missing, prob_recovered);
}

// Criterion at a feasible region. `both` also fills the criterion not being optimized.
CriterionEvaluation score(const ModelSpec& model, double c1, double pm, const Region& region, Criterion criterion,
                          LinkMode mode, const DesignSearchOptions& opts, bool both) {
    const RegionMasses masses = region_masses(model, region, opts.quadrature);
    CriterionEvaluation e;
    e.prob_recovered = masses.recovered;
    e.prob_observed = masses.observed;
    e.slack = masses.recovered - c1 * pm;
    if (!(masses.observed > opts.min_observed_mass))
        throw DegenerateDesign("region has Pr(M=0, X in C_A) <= " + std::to_string(opts.min_observed_mass));
    if (e.slack < 0.0)
        throw ConditionViolation("region violates Pr(M=1, X in C_A) >= c1 Pr(M=1)", c1 * pm);
    e.c2 = choose_c2(mode, c1, pm, masses.recovered);
    const AugmentedLaw law = build_augmented_law(model, {c1, e.c2, region}, pm, opts.quadrature);
    if (criterion == Criterion::Noncentrality || both) {
        e.gamma = noncentrality(law, opts.n).gamma;
        e.power = approx_power(e.gamma, law.s(), opts.alpha);
    }
    if (criterion == Criterion::Variance || (both && law.s() == 1)) e.target_variance = asymptotic_variance(law, opts.n).target_variance;
    e.objective = criterion == Criterion::Noncentrality ? -e.gamma : std::log(e.target_variance);
    return e;
}

struct Box {
    std::vector<double> center;
    std::vector<double> half_width;

    Region region() const {
        std::vector<Interval> iv(center.size());
        for (std::size_t j = 0; j < center.size(); ++j) iv[j] = {center[j] - half_width[j], center[j] + half_width[j]};
        return Region::box(iv);
    }
    Box scaled(double factor) const {
        Box b = *this;
        for (double& h : b.half_width) h *= factor;
        return b;
    }
};

Box decode(const std::vector<double>& theta) {
    const std::size_t p = theta.size() / 2;
    Box b;
    b.center.resize(p);
    b.half_width.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
        b.center[j] = theta[2 * j];
        b.half_width[j] = std::exp(std::clamp(theta[2 * j + 1], -30.0, 30.0));
    }
    return b;
}

// Smallest uniform enlargement of the half-widths that satisfies the recovery-mass
// condition, found by bisection on the scale factor.
std::optional<Box> repair(const ModelSpec& model, double target, const Box& box, const QuadratureOptions& q) {
    auto slack = [&](double factor) { return region_masses(model, box.scaled(factor).region(), q).recovered - target; };
    if (slack(1.0) >= 0.0) return box;
    double lo = 1.0;
    double hi = 2.0;
    while (slack(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) return std::nullopt;
    }
    for (int i = 0; i < 60 && hi - lo > 1e-12 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (slack(mid) >= 0.0 ? hi : lo) = mid;
    }
    return box.scaled(hi);
}

struct Candidate {
    std::optional<Region> region;
    CriterionEvaluation eval;
    std::size_t evaluations = 0;
    bool valid = false;
};

}  // namespace

CriterionEvaluation evaluate_region(const ModelSpec& model, double c1, double prob_missing_value, const Region& region,
                                    Criterion criterion, LinkMode mode, const DesignSearchOptions& opts) {
    if (!(c1 > 0.0 && c1 <= 1.0)) throw SpecificationError("c1 must lie in (0, 1]");
    if (criterion == Criterion::Variance && model.mechanism.s() != 1)
        throw SpecificationError("variance criterion needs a single outcome term (s = 1)");
    return score(model, c1, prob_missing_value, region, criterion, resolve_link_mode(mode, model.mechanism.link()), opts,
                 true);
}

CriterionEvaluation evaluate_region(const ModelSpec& model, double c1, const Region& region, Criterion criterion,
                                    LinkMode mode, const DesignSearchOptions& opts) {
    return evaluate_region(model, c1, prob_missing(model, opts.quadrature), region, criterion, mode, opts);
}

DesignSearchResult optimize_region(const ModelSpec& model, double c1, Criterion criterion, LinkMode mode,
                                   const DesignSearchOptions& opts) {
    model.validate();
    if (!(c1 > 0.0 && c1 <= 1.0)) throw SpecificationError("c1 must lie in (0, 1]");
    if (criterion == Criterion::Variance && model.mechanism.s() != 1)
        throw SpecificationError("variance criterion needs a single outcome term (s = 1)");
    if (opts.starts == 0) throw SpecificationError("design search needs at least one start");
    const LinkMode resolved = resolve_link_mode(mode, model.mechanism.link());
    if (resolved == LinkMode::AllObserved && model.mechanism.link() != Link::Logit)
        throw SpecificationError("c2 = 1 with a non-logit link leaves the augmented mechanism outside the model");

    const std::size_t p = model.dimension();
    const double pm = prob_missing(model, opts.quadrature);
    const double target = c1 * pm;

    // The random design (C_A = R^p) is always feasible and serves as the baseline.
    const Region everywhere = Region::unbounded(p);
    std::optional<CriterionEvaluation> baseline;
    try {
        baseline = score(model, c1, pm, everywhere, criterion, resolved, opts, true);
    } catch (const NumericalError&) {
    }
    const double infeasible_level = baseline ? baseline->objective + 1.0 : 1e3;

    DesignSearchOptions coarse = opts;
    coarse.quadrature = opts.search_quadrature;
    auto objective = [&](const std::vector<double>& theta) -> double {
        const Region region = decode(theta).region();
        try {
            const RegionMasses masses = region_masses(model, region, coarse.quadrature);
            if (!(masses.observed > opts.min_observed_mass)) return std::numeric_limits<double>::infinity();
            const double violation = std::max(0.0, target - masses.recovered);
            const double penalty = opts.penalty_weight * violation * violation;
            if (violation > 0.0) {
                if (resolved == LinkMode::MatchedSubsample) return infeasible_level + penalty;
                const AugmentedLaw law = build_augmented_law(model, {c1, 1.0, region}, pm, coarse.quadrature);
                const double value = criterion == Criterion::Noncentrality
                                         ? -noncentrality(law, opts.n).gamma
                                         : std::log(asymptotic_variance(law, opts.n).target_variance);
                return value + penalty;
            }
            return score(model, c1, pm, region, criterion, resolved, coarse, false).objective;
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        } catch (const ConditionViolation&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    // Start points: the interquartile box, then Halton points over centers in the
    // 5-95% quantile range and half-widths between 0.1 and 3 standard deviations.
    std::vector<double> lo_center(p), hi_center(p), lo_log(p), hi_log(p), sds(p);
    std::vector<double> iqr_theta(2 * p);
    for (std::size_t j = 0; j < p; ++j) {
        const Marginal& m = model.covariates.marginals[j];
        sds[j] = marginal_sd(m);
        lo_center[j] = marginal_quantile(m, 0.05);
        hi_center[j] = marginal_quantile(m, 0.95);
        lo_log[j] = std::log(0.1 * sds[j]);
        hi_log[j] = std::log(3.0 * sds[j]);
        const double q1 = marginal_quantile(m, 0.25);
        const double q3 = marginal_quantile(m, 0.75);
        iqr_theta[2 * j] = 0.5 * (q1 + q3);
        iqr_theta[2 * j + 1] = std::log(0.5 * (q3 - q1));
    }
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> shift(2 * p);
    for (double& s : shift) s = unif(rng);
    std::vector<std::vector<double>> starts{iqr_theta};
    for (std::size_t k = 1; k < opts.starts; ++k) {
        const std::vector<double> u = halton_point(k - 1, 2 * p, shift);
        std::vector<double> theta(2 * p);
        for (std::size_t j = 0; j < p; ++j) {
            theta[2 * j] = lo_center[j] + u[2 * j] * (hi_center[j] - lo_center[j]);
            theta[2 * j + 1] = lo_log[j] + u[2 * j + 1] * (hi_log[j] - lo_log[j]);
        }
        starts.push_back(std::move(theta));
    }
    std::vector<double> step(2 * p);
    for (std::size_t j = 0; j < p; ++j) {
        step[2 * j] = 0.5 * sds[j];
        step[2 * j + 1] = 0.5;
    }

    std::vector<Candidate> candidates(starts.size());
    parallel_for(starts.size(), opts.jobs, [&](std::size_t k) {
        const NelderMeadResult nm = nelder_mead(objective, starts[k], step, opts.nelder_mead);
        Candidate& c = candidates[k];
        c.evaluations = nm.evaluations;
        if (!std::isfinite(nm.value)) return;
        const std::optional<Box> fixed = repair(model, target, decode(nm.x), opts.quadrature);
        if (!fixed) return;
        try {
            c.region = fixed->region();
            c.eval = score(model, c1, pm, *c.region, criterion, resolved, opts, true);
            c.valid = true;
        } catch (const NumericalError&) {
        } catch (const ConditionViolation&) {
        }
    });

    DesignSearchResult out;
    out.c1 = c1;
    out.criterion = criterion;
    out.link_mode = resolved;
    out.prob_missing = pm;
    out.starts_tried = starts.size();
    out.region = everywhere;
    std::optional<CriterionEvaluation> chosen = baseline;
    out.random_design_selected = baseline.has_value();
    double worst_slack = -std::numeric_limits<double>::infinity();
    for (const Candidate& c : candidates) {
        out.evaluations += c.evaluations;
        if (!c.valid) continue;
        worst_slack = std::max(worst_slack, c.eval.slack);
        if (!chosen || c.eval.objective < chosen->objective) {
            chosen = c.eval;
            out.region = *c.region;
            out.random_design_selected = false;
        }
    }
    if (!chosen || !(chosen->slack >= -1e-8) || !(chosen->prob_observed > opts.min_observed_mass))
        throw InfeasibleDesign("no feasible recovery region found", pm, worst_slack);
    const CriterionEvaluation& best = *chosen;

    out.c2 = best.c2;
    out.gamma = best.gamma;
    out.power = best.power;
    out.criterion_value = criterion == Criterion::Noncentrality ? best.gamma : best.target_variance;
    out.prob_recovered = best.prob_recovered;
    out.prob_observed = best.prob_observed;
    out.constraint_slack = best.slack;
    return out;
}

RandomComparison compare_to_random(const ModelSpec& model, double c1, const DesignSearchResult& result,
                                   const DesignSearchOptions& opts) {
    const double pm = prob_missing(model, opts.quadrature);
    const CriterionEvaluation opt = evaluate_region(model, c1, pm, result.region, result.criterion, result.link_mode, opts);
    const CriterionEvaluation rnd =
        evaluate_region(model, c1, pm, Region::unbounded(model.dimension()), result.criterion, result.link_mode, opts);
    RandomComparison out;
    out.gamma_opt = opt.gamma;
    out.gamma_random = rnd.gamma;
    out.power_opt = opt.power;
    out.power_random = rnd.power;
    const bool ncp = result.criterion == Criterion::Noncentrality;
    out.criterion_opt = ncp ? opt.gamma : opt.target_variance;
    out.criterion_random = ncp ? rnd.gamma : rnd.target_variance;
    return out;
}

}  // namespace mnar
