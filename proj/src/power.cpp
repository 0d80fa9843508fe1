#include "mnar/power.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mnar/error.hpp"
#include "mnar/glm.hpp"

namespace mnar {

AugmentedLaw build_augmented_law(const ModelSpec& model, const RecoveryDesign& design, double prob_missing_value,
                                 const QuadratureOptions& opts) {
    design.validate_fractions();
    if (design.region.dimension() != model.dimension())
        throw SpecificationError("design region dimension does not match the model");
    const MechanismSpec& mech = model.mechanism;
    const QuadratureGrid grid(model, design.region, opts);

    const std::size_t nodes = grid.size();
    std::vector<double> pi(nodes);
    std::vector<double> eta(nodes);
    double pmr = 0.0;
    double pmo = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
        eta[i] = linear_predictor(mech, grid.x(i), grid.y(i));
        const LinkValues v = link_values(mech.link(), eta[i]);
        pi[i] = v.mu;
        pmr += grid.weight(i) * v.mu;
        pmo += grid.weight(i) * v.one_minus_mu;
    }
    if (!(pmo > 0.0)) throw DegenerateDesign("region has Pr(M=0, X in C_A) = 0");
    if (!(pmr > 0.0)) throw DegenerateDesign("region has Pr(M=1, X in C_A) = 0");

    AugmentedLaw law;
    law.link = mech.link();
    law.c1 = design.c1;
    law.c2 = design.c2;
    law.prob_missing = prob_missing_value;
    law.prob_recovered = pmr;
    law.prob_observed = pmo;
    law.cstar = c_star(design.c1, design.c2, prob_missing_value, pmr);
    if (law.link != Link::Logit && std::abs(law.cstar - 1.0) > 1e-6) {
        throw ConditionViolation("link " + std::string(to_string(law.link)) + " requires c* = 1 (c2 = c1 Pr(M=1) / Pr(M=1, X in C_A)); got c* = " +
                                     std::to_string(law.cstar),
                                 design.c1 * prob_missing_value);
    }
    const double log_cstar = law.link == Link::Logit ? std::log(law.cstar) : 0.0;

    const std::size_t q = mech.q();
    const std::size_t s = mech.s();
    law.w.resize(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(q));
    law.z.resize(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(s));
    law.weight.resize(static_cast<Eigen::Index>(nodes));
    law.prob.resize(static_cast<Eigen::Index>(nodes));
    law.eta_alt.resize(static_cast<Eigen::Index>(nodes));

    std::vector<double> w(q);
    std::vector<double> z(s);
    double total = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        eval_features(mech.shape, grid.x(i), grid.y(i), w, z);
        for (std::size_t k = 0; k < q; ++k) law.w(r, static_cast<Eigen::Index>(k)) = w[k];
        for (std::size_t k = 0; k < s; ++k) law.z(r, static_cast<Eigen::Index>(k)) = z[k];
        const double mixture = law.cstar * pi[i] + (1.0 - pi[i]);
        law.weight(r) = grid.weight(i) * mixture;
        total += law.weight(r);
        law.eta_alt(r) = eta[i] + log_cstar;
        law.prob(r) = link_values(law.link, law.eta_alt(r)).mu;
    }
    law.weight /= total;

    law.lambda_a = Eigen::Map<const Eigen::VectorXd>(mech.lambda.data(), static_cast<Eigen::Index>(q));
    law.lambda_a(0) += log_cstar;
    law.psi = Eigen::Map<const Eigen::VectorXd>(mech.psi.data(), static_cast<Eigen::Index>(s));
    return law;
}

AugmentedLaw build_augmented_law(const ModelSpec& model, const RecoveryDesign& design, const QuadratureOptions& opts) {
    return build_augmented_law(model, design, prob_missing(model, opts), opts);
}

namespace {

double entropy_term(double p) {
    double h = 0.0;
    if (p > 0.0) h += p * std::log(p);
    if (p < 1.0) h += (1.0 - p) * std::log1p(-p);
    return h;
}

struct NullEvaluation {
    double kl;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;  // exact second derivative
    Eigen::MatrixXd fisher;   // expected-information form, always PSD
};

NullEvaluation evaluate_null(const AugmentedLaw& law, const Eigen::VectorXd& lambda0, double entropy, bool derivatives) {
    const Eigen::VectorXd eta = law.w * lambda0;
    const auto nodes = eta.size();
    Eigen::VectorXd gw(derivatives ? nodes : 0);
    Eigen::VectorXd hw(derivatives ? nodes : 0);
    Eigen::VectorXd fw(derivatives ? nodes : 0);
    double cross = 0.0;
    for (Eigen::Index i = 0; i < nodes; ++i) {
        const LinkValues v = link_values(law.link, eta(i));
        const double p = law.prob(i);
        const double wt = law.weight(i);
        cross += wt * (p * v.log_mu + (1.0 - p) * v.log_one_minus_mu);
        if (derivatives) {
            const double resid = p - v.mu;
            gw(i) = -wt * resid * v.ratio;
            fw(i) = wt * v.dmu * v.ratio;
            hw(i) = fw(i) - wt * resid * v.dratio;
        }
    }
    NullEvaluation e;
    e.kl = entropy - cross;
    if (derivatives) {
        e.gradient = law.w.transpose() * gw;
        e.hessian = law.w.transpose() * hw.asDiagonal() * law.w;
        e.fisher = law.w.transpose() * fw.asDiagonal() * law.w;
    }
    return e;
}

}  // namespace

NullLimit solve_null_limit(const AugmentedLaw& law, const NullLimitOptions& opts) {
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < law.prob.size(); ++i) entropy += law.weight(i) * entropy_term(law.prob(i));

    // The alternative's lambda_A is a good start: exact when psi = 0.
    Eigen::VectorXd lambda = law.lambda_a;
    NullEvaluation cur = evaluate_null(law, lambda, entropy, true);
    NullLimit out;
    for (std::size_t iter = 0;; ++iter) {
        out.iterations = iter;
        out.gradient_norm = cur.gradient.cwiseAbs().maxCoeff();
        if (out.gradient_norm < opts.gradient_tolerance) {
            out.converged = true;
            break;
        }
        if (iter == opts.max_iterations) break;

        Eigen::VectorXd step;
        const Eigen::LLT<Eigen::MatrixXd> exact(cur.hessian);
        if (exact.info() == Eigen::Success) {
            step = -exact.solve(cur.gradient);
        } else {
            const Eigen::LDLT<Eigen::MatrixXd> fisher(cur.fisher);
            if (fisher.info() != Eigen::Success) throw DegenerateDesign("MAR information matrix is singular");
            step = -fisher.solve(cur.gradient);
        }
        if (!step.allFinite()) throw DegenerateDesign("MAR information matrix is singular");

        double scale = 1.0;
        Eigen::VectorXd next = lambda + step;
        double next_kl = evaluate_null(law, next, entropy, false).kl;
        const double slack = 1e-14 * (1.0 + std::abs(cur.kl));
        for (int halving = 0; halving < 50 && !(next_kl <= cur.kl + slack); ++halving) {
            scale *= 0.5;
            next = lambda + scale * step;
            next_kl = evaluate_null(law, next, entropy, false).kl;
        }
        lambda = next;
        cur = evaluate_null(law, lambda, entropy, true);
    }
    out.lambda0_star = lambda;
    out.kl_value = std::max(0.0, cur.kl);
    if (!out.converged) {
        std::string where;
        for (Eigen::Index k = 0; k < lambda.size(); ++k) where += (k ? ", " : "") + std::to_string(lambda(k));
        throw NumericalError("KL projection did not converge after " + std::to_string(opts.max_iterations) +
                             " iterations; last iterate (" + where + "), gradient " + std::to_string(out.gradient_norm));
    }
    return out;
}

NullLimit solve_lambda0(const ModelSpec& model, const RecoveryDesign& design, const QuadratureOptions& opts) {
    return solve_null_limit(build_augmented_law(model, design, opts));
}

NcpBreakdown noncentrality(const AugmentedLaw& law, std::size_t n, const NullLimitOptions& opts) {
    if (n == 0) throw SpecificationError("sample size must be positive");
    NcpBreakdown out;
    out.q = law.q();
    out.s = law.s();
    out.cstar = law.cstar;
    out.expected_n_a = static_cast<double>(n) * law.augmented_fraction();
    out.null_limit = solve_null_limit(law, opts);
    out.delta = out.expected_n_a * 2.0 * out.null_limit.kl_value;

    // A = H*^{-1} B with H* the expected negative Hessian of the MAR
    // log-likelihood at lambda0* and B the variance of its score.
    const Eigen::VectorXd eta = law.w * out.null_limit.lambda0_star;
    const auto nodes = eta.size();
    Eigen::VectorXd hw(nodes);
    Eigen::VectorXd bw(nodes);
    for (Eigen::Index i = 0; i < nodes; ++i) {
        const LinkValues v = link_values(law.link, eta(i));
        const double p = law.prob(i);
        const double wt = law.weight(i);
        hw(i) = wt * (v.dmu * v.ratio - (p - v.mu) * v.dratio);
        bw(i) = wt * p * (1.0 - p) * v.ratio * v.ratio;
    }
    const Eigen::MatrixXd h = law.w.transpose() * hw.asDiagonal() * law.w;
    const Eigen::MatrixXd b = law.w.transpose() * bw.asDiagonal() * law.w;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(h);
    if (!lu.isInvertible()) throw DegenerateDesign("expected MAR Hessian is singular");
    out.tr_a = lu.solve(b).trace();

    out.gamma_raw = static_cast<double>(out.q) + out.delta - out.tr_a;
    out.gamma = std::max(0.0, out.gamma_raw);
    return out;
}

NcpBreakdown noncentrality(const ModelSpec& model, const RecoveryDesign& design, std::size_t n,
                           const QuadratureOptions& opts) {
    return noncentrality(build_augmented_law(model, design, opts), n);
}

double noncentral_chi2_cdf(double x, double df, double ncp) {
    if (!(df > 0.0)) throw SpecificationError("chi-square degrees of freedom must be positive");
    if (!(ncp >= 0.0) || !std::isfinite(ncp)) throw SpecificationError("noncentrality must be finite and non-negative");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (ncp == 0.0) return central_chi2_cdf(x, df);

    const double mu = 0.5 * ncp;
    const auto mode = static_cast<std::size_t>(std::floor(mu));
    const double pmf_mode = std::exp(static_cast<double>(mode) * std::log(mu) - mu - std::lgamma(static_cast<double>(mode) + 1.0));

    double sum = 0.0;
    double mass = 0.0;
    double pmf = pmf_mode;
    for (std::size_t j = mode;; --j) {
        sum += pmf * central_chi2_cdf(x, df + 2.0 * static_cast<double>(j));
        mass += pmf;
        if (j == 0 || pmf < 1e-300) break;
        pmf *= static_cast<double>(j) / mu;
        if (pmf < 1e-17 * mass) break;
    }
    pmf = pmf_mode;
    for (std::size_t j = mode + 1; mass < 1.0 - 1e-12; ++j) {
        pmf *= mu / static_cast<double>(j);
        if (pmf <= 0.0) break;
        sum += pmf * central_chi2_cdf(x, df + 2.0 * static_cast<double>(j));
        mass += pmf;
    }
    return std::clamp(sum, 0.0, 1.0);
}

double approx_power(double gamma, std::size_t s, double alpha) {
    if (s == 0) throw SpecificationError("test must have at least one degree of freedom");
    if (!(alpha > 0.0 && alpha < 1.0)) throw SpecificationError("significance level must lie in (0,1)");
    const double df = static_cast<double>(s);
    const double critical = central_chi2_quantile(1.0 - alpha, df);
    return 1.0 - noncentral_chi2_cdf(critical, df, std::max(0.0, gamma));
}

FisherInfo asymptotic_variance(const AugmentedLaw& law, std::size_t n) {
    if (law.s() != 1) throw SpecificationError("variance criterion needs a single outcome term (s = 1)");
    if (n == 0) throw SpecificationError("sample size must be positive");
    const auto q = static_cast<Eigen::Index>(law.q());
    const auto nodes = law.eta_alt.size();
    Eigen::MatrixXd v(nodes, q + 1);
    v.leftCols(q) = law.w;
    v.col(q) = law.z.col(0);
    Eigen::VectorXd iw(nodes);
    for (Eigen::Index i = 0; i < nodes; ++i) {
        const LinkValues lv = link_values(law.link, law.eta_alt(i));
        iw(i) = law.weight(i) * lv.dmu * lv.ratio;
    }
    FisherInfo out;
    out.expected_n_a = static_cast<double>(n) * law.augmented_fraction();
    out.matrix = out.expected_n_a * (v.transpose() * iw.asDiagonal() * v);
    const double full = out.matrix.determinant();
    const double minor = out.matrix.topLeftCorner(q, q).determinant();
    if (!(full > 0.0) || !std::isfinite(full)) throw DegenerateDesign("information matrix is singular");
    out.target_variance = minor / full;
    return out;
}

FisherInfo asymptotic_variance(const ModelSpec& model, const RecoveryDesign& design, std::size_t n,
                               const QuadratureOptions& opts) {
    return asymptotic_variance(build_augmented_law(model, design, opts), n);
}

}  // namespace mnar
