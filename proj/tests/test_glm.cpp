#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "mnar/error.hpp"
#include "mnar/glm.hpp"

using namespace mnar;
using oracles::oracle_loglik;
using oracles::oracle_mle;

namespace {

struct Fixture {
    Eigen::MatrixXd x;
    std::vector<std::uint8_t> m;
};

Fixture make_fixture(Link link, std::uint64_t seed, std::size_t rows = 50) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Fixture f;
    f.x.resize(static_cast<Eigen::Index>(rows), 3);
    const Eigen::Vector3d truth(-0.3, 0.8, -0.5);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        f.x(r, 0) = 1.0;
        f.x(r, 1) = nd(rng);
        f.x(r, 2) = 2.0 * nd(rng) + 1.0;
        const double eta = f.x.row(r).dot(truth);
        f.m.push_back(u(rng) < inverse_link(link, eta) ? 1 : 0);
    }
    return f;
}

}  // namespace

TEST_SUITE("glm_fit") {
    TEST_CASE("IRLS matches an independent Newton optimizer on 50-row fixtures") {
        for (Link link : {Link::Logit, Link::Probit, Link::CLogLog}) {
            for (std::uint64_t seed : {1u, 2u, 3u}) {
                const Fixture f = make_fixture(link, seed);
                const GlmFit fit = fit_binary(link, f.x, f.m);
                REQUIRE(fit.converged);
                const Eigen::VectorXd oracle = oracle_mle(link, f.x, f.m);
                CHECK((fit.estimates - oracle).cwiseAbs().maxCoeff() < 1e-6);
                CHECK(fit.loglik == doctest::Approx(oracle_loglik(link, f.x, f.m, oracle)).epsilon(1e-10));
                CHECK(bernoulli_loglik(link, f.x, f.m, fit.estimates) ==
                      doctest::Approx(oracle_loglik(link, f.x, f.m, fit.estimates)).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("warm start reaches the same optimum") {
        const Fixture f = make_fixture(Link::Logit, 8, 200);
        const GlmFit cold = fit_binary(Link::Logit, f.x, f.m);
        const Eigen::VectorXd start = Eigen::VectorXd::Constant(3, 0.2);
        const GlmFit warm = fit_binary(Link::Logit, f.x, f.m, {}, &start);
        CHECK((cold.estimates - warm.estimates).cwiseAbs().maxCoeff() < 1e-8);
    }

    TEST_CASE("separation is flagged") {
        Eigen::MatrixXd x(20, 2);
        std::vector<std::uint8_t> m;
        for (int i = 0; i < 20; ++i) {
            x(i, 0) = 1.0;
            x(i, 1) = i - 9.5;
            m.push_back(i >= 10 ? 1 : 0);
        }
        const GlmFit fit = fit_binary(Link::Logit, x, m);
        CHECK_FALSE(fit.converged);
        CHECK(fit.status == FitStatus::Separation);
    }

    TEST_CASE("single-class outcomes are rejected") {
        Eigen::MatrixXd x = Eigen::MatrixXd::Ones(10, 1);
        std::vector<std::uint8_t> m(10, 1);
        CHECK_THROWS_AS(fit_binary(Link::Logit, x, m), DegenerateSample);
    }

    TEST_CASE("central chi-square") {
        CHECK(central_chi2_cdf(3.841458820694124, 1) == doctest::Approx(0.95).epsilon(1e-12));
        CHECK(central_chi2_cdf(5.991464547107979, 2) == doctest::Approx(0.95).epsilon(1e-12));
        CHECK(central_chi2_cdf(2.0, 2) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
        for (double df : {1.0, 2.0, 5.0}) {
            for (double p : {0.05, 0.5, 0.95, 0.999}) {
                CHECK(central_chi2_cdf(central_chi2_quantile(p, df), df) == doctest::Approx(p).epsilon(1e-10));
            }
        }
    }

    TEST_CASE("likelihood-ratio test on an augmented sample") {
        const ModelSpec model = fixtures::single_covariate();
        const GeneratedData g = generate_with_outcomes(model, 1000, 5);
        const auto oracle = [&](std::size_t i) -> std::optional<double> { return g.outcomes[i]; };
        const AugmentedSample s = assemble_augmented(g.data, {0.5, 1.0, Region::unbounded(1)}, oracle, 1);
        const LrtResult r = lrt_mnar(s, model.mechanism.shape, 0.05);
        CHECK(r.df == 1);
        CHECK(r.statistic >= 0.0);
        CHECK(r.statistic == doctest::Approx(2.0 * (r.full.loglik - r.null.loglik)));
        CHECK(r.p_value == doctest::Approx(1.0 - central_chi2_cdf(r.statistic, 1)));
        CHECK(r.reject == (r.p_value < 0.05));
        CHECK(r.full.estimates.size() == 3);
        CHECK(r.null.estimates.size() == 2);

        const Eigen::MatrixXd x = feature_matrix(s, model.mechanism.shape, true);
        CHECK(x.cols() == 3);
        CHECK(x(0, 0) == 1.0);
        CHECK(x(0, 2) == s.ys[0]);
    }
}
