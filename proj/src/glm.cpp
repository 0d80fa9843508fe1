#include "mnar/glm.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "mnar/error.hpp"

namespace mnar {

namespace {

struct Evaluation {
    double loglik;
    Eigen::VectorXd score;
    Eigen::MatrixXd fisher;    // expected information
    Eigen::MatrixXd observed;  // observed information
};

Evaluation evaluate(Link link, const Eigen::MatrixXd& x, std::span<const std::uint8_t> m, const Eigen::VectorXd& beta,
                    bool with_observed) {
    const Eigen::VectorXd eta = x * beta;
    const auto n = x.rows();
    Eigen::VectorXd score_w(n);
    Eigen::VectorXd fisher_w(n);
    Eigen::VectorXd observed_w(with_observed ? n : 0);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const LinkValues v = link_values(link, eta(i));
        const double mi = m[static_cast<std::size_t>(i)];
        ll += mi > 0 ? v.log_mu : v.log_one_minus_mu;
        const double resid = mi - v.mu;
        score_w(i) = resid * v.ratio;
        fisher_w(i) = v.dmu * v.ratio;
        if (with_observed) observed_w(i) = v.dmu * v.ratio - resid * v.dratio;
    }
    Evaluation e;
    e.loglik = ll;
    e.score = x.transpose() * score_w;
    e.fisher = x.transpose() * fisher_w.asDiagonal() * x;
    if (with_observed) e.observed = x.transpose() * observed_w.asDiagonal() * x;
    return e;
}

}  // namespace

double bernoulli_loglik(Link link, const Eigen::MatrixXd& design, std::span<const std::uint8_t> outcomes,
                        const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = design * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const LinkValues v = link_values(link, eta(i));
        ll += outcomes[static_cast<std::size_t>(i)] ? v.log_mu : v.log_one_minus_mu;
    }
    return ll;
}

GlmFit fit_binary(Link link, const Eigen::MatrixXd& design, std::span<const std::uint8_t> outcomes,
                  const FitOptions& opts, const Eigen::VectorXd* start) {
    if (static_cast<std::size_t>(design.rows()) != outcomes.size())
        throw SpecificationError("design matrix and outcome vector lengths differ");
    const auto ones = static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), std::uint8_t{1}));
    if (ones == 0 || ones == outcomes.size()) throw DegenerateSample("binary outcomes are all 0 or all 1");

    GlmFit out;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(design.cols());
    if (start) {
        if (start->size() != design.cols()) throw SpecificationError("starting value has the wrong length");
        beta = *start;
    } else if (design.cols() > 0 && (design.col(0).array() == 1.0).all()) {
        beta(0) = link_function(link, static_cast<double>(ones) / static_cast<double>(outcomes.size()));
    }

    Evaluation cur = evaluate(link, design, outcomes, beta, false);
    for (std::size_t iter = 1; iter <= opts.max_iterations; ++iter) {
        out.iterations = iter;
        if (cur.score.cwiseAbs().maxCoeff() < opts.score_tolerance) {
            out.status = FitStatus::Converged;
            break;
        }
        const Eigen::VectorXd step = cur.fisher.ldlt().solve(cur.score);
        double scale = 1.0;
        Eigen::VectorXd next = beta + step;
        Evaluation cand = evaluate(link, design, outcomes, next, false);
        for (int halving = 0; halving < 40 && !(cand.loglik >= cur.loglik - 1e-12 * std::abs(cur.loglik)); ++halving) {
            scale *= 0.5;
            next = beta + scale * step;
            cand = evaluate(link, design, outcomes, next, false);
        }
        const double previous = cur.loglik;
        beta = next;
        cur = std::move(cand);
        if (beta.cwiseAbs().maxCoeff() > opts.separation_bound || !beta.allFinite()) {
            out.status = FitStatus::Separation;
            break;
        }
        if (std::abs(cur.loglik - previous) <= opts.loglik_tolerance * std::abs(previous)) {
            out.status = FitStatus::Converged;
            break;
        }
    }

    if (out.status == FitStatus::Converged && cur.loglik > -1e-6) out.status = FitStatus::Separation;

    const Evaluation fin = evaluate(link, design, outcomes, beta, true);
    out.estimates = beta;
    out.loglik = fin.loglik;
    out.score = fin.score;
    out.converged = out.status == FitStatus::Converged;
    out.covariance = fin.observed.ldlt().solve(Eigen::MatrixXd::Identity(design.cols(), design.cols()));
    return out;
}

Eigen::MatrixXd feature_matrix(const AugmentedSample& sample, const MechanismShape& shape, bool include_z) {
    const std::size_t q = shape.q();
    const std::size_t s = shape.s();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(sample.size()), static_cast<Eigen::Index>(include_z ? q + s : q));
    std::vector<double> w(q);
    std::vector<double> z(s);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        eval_features(shape, sample.x(i), sample.ys[i], w, z);
        const auto r = static_cast<Eigen::Index>(i);
        for (std::size_t k = 0; k < q; ++k) x(r, static_cast<Eigen::Index>(k)) = w[k];
        if (include_z)
            for (std::size_t k = 0; k < s; ++k) x(r, static_cast<Eigen::Index>(q + k)) = z[k];
    }
    return x;
}

GlmFit fit(const AugmentedSample& sample, const MechanismShape& shape, bool include_z, const FitOptions& opts) {
    return fit_binary(shape.link, feature_matrix(sample, shape, include_z), sample.m_a, opts);
}

LrtResult lrt_mnar(const AugmentedSample& sample, const MechanismShape& shape, double alpha, const FitOptions& opts) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw SpecificationError("significance level must lie in (0,1)");
    const Eigen::MatrixXd full_design = feature_matrix(sample, shape, true);
    const Eigen::MatrixXd null_design = full_design.leftCols(static_cast<Eigen::Index>(shape.q()));

    LrtResult r;
    r.alpha = alpha;
    r.df = shape.s();
    r.null = fit_binary(shape.link, null_design, sample.m_a, opts);
    if (!r.null.converged) throw FitFailure("null (MAR) fit did not converge");
    Eigen::VectorXd start = Eigen::VectorXd::Zero(full_design.cols());
    start.head(null_design.cols()) = r.null.estimates;
    r.full = fit_binary(shape.link, full_design, sample.m_a, opts, &start);
    if (!r.full.converged) throw FitFailure("alternative (MNAR) fit did not converge");

    r.statistic = std::max(0.0, 2.0 * (r.full.loglik - r.null.loglik));
    r.p_value = r.statistic > 0.0 ? boost::math::gamma_q(0.5 * static_cast<double>(r.df), 0.5 * r.statistic) : 1.0;
    r.reject = r.p_value < alpha;
    return r;
}

double central_chi2_cdf(double x, double df) {
    if (!(df > 0.0)) throw SpecificationError("chi-square degrees of freedom must be positive");
    if (std::isnan(x)) throw NumericalError("chi-square cdf evaluated at NaN");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return boost::math::gamma_p(0.5 * df, 0.5 * x);
}

double central_chi2_quantile(double prob, double df) {
    if (!(prob > 0.0 && prob < 1.0)) throw SpecificationError("chi-square quantile level must lie in (0,1)");
    if (!(df > 0.0)) throw SpecificationError("chi-square degrees of freedom must be positive");
    double hi = std::max(1.0, df);
    while (central_chi2_cdf(hi, df) < prob) hi *= 2.0;
    auto f = [&](double v) { return central_chi2_cdf(v, df) - prob; };
    std::uintmax_t max_iter = 200;
    const auto bracket =
        boost::math::tools::toms748_solve(f, 0.0, hi, -prob, f(hi), boost::math::tools::eps_tolerance<double>(50), max_iter);
    return 0.5 * (bracket.first + bracket.second);
}

}  // namespace mnar
