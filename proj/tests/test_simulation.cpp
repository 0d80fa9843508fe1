#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"

#include "mnar/error.hpp"
#include "mnar/simulation.hpp"

using namespace mnar;

namespace {

SimulationSettings small(std::size_t reps, std::uint64_t seed = 1, std::size_t jobs = 1) {
    SimulationSettings s;
    s.replications = reps;
    s.seed = seed;
    s.jobs = jobs;
    return s;
}

}  // namespace

TEST_SUITE("sim_harness") {
    TEST_CASE("one replication gives a rate of 0 or 1") {
        const auto curves = run_type_one(fixtures::single_covariate(0.0), {0.5}, {SchemeKind::Region}, small(1));
        REQUIRE(curves.size() == 1);
        const CurvePoint& p = curves[0].points[0];
        CHECK((p.rate == 0.0 || p.rate == 1.0));
        CHECK(p.kept + p.discarded == 1);
    }

    TEST_CASE("counts add up and the standard error follows the rate") {
        const auto curves = run_type_one(fixtures::single_covariate(0.0), {0.2, 0.8},
                                         {SchemeKind::Region, SchemeKind::TopK, SchemeKind::BottomK}, small(60));
        CHECK(curves.size() == 3);
        CHECK(curves[0].label == "scheme1");
        CHECK(curves[2].label == "scheme3");
        for (const auto& c : curves) {
            for (const auto& p : c.points) {
                CHECK(p.kept + p.discarded == p.replications);
                CHECK(p.replications == 60);
                CHECK(p.rejections <= p.kept);
                CHECK(p.rate == doctest::Approx(static_cast<double>(p.rejections) / p.kept));
                CHECK(p.se == doctest::Approx(std::sqrt(p.rate * (1 - p.rate) / p.kept)));
                CHECK(p.mse_psi.size() == 1);
                CHECK(p.mean_estimates.size() == 3);
            }
        }
    }

    TEST_CASE("results do not depend on the number of workers") {
        const ModelSpec m = fixtures::single_covariate();
        const std::vector<CurveSpec> curves = {random_curve(m, {0.3, 0.7})};
        const auto one = run_curves(model_generator(m, 1000), m.mechanism, curves, small(40, 9, 1));
        const auto three = run_curves(model_generator(m, 1000), m.mechanism, curves, small(40, 9, 3));
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(one[0].points[k].rejections == three[0].points[k].rejections);
            CHECK(one[0].points[k].mse_psi == three[0].points[k].mse_psi);
            CHECK(one[0].points[k].mean_estimates == three[0].points[k].mean_estimates);
        }
    }

    TEST_CASE("MNAR models are refused by the Type I study") {
        CHECK_THROWS_AS(run_type_one(fixtures::single_covariate(), {0.5}, {SchemeKind::Region}, small(2)), ConfigError);
    }

    TEST_CASE("ranked recovery takes the extreme missing rows") {
        const ModelSpec m = fixtures::single_covariate();
        const GeneratedData g = generate_with_outcomes(m, 500, 3);
        std::vector<double> missing_x;
        for (std::size_t i = 0; i < g.data.size(); ++i)
            if (g.data.missing(i)) missing_x.push_back(g.data.x(i)[0]);
        std::sort(missing_x.begin(), missing_x.end());
        const std::size_t n_star = static_cast<std::size_t>(std::ceil(0.3 * missing_x.size() - 1e-9));

        for (bool largest : {true, false}) {
            const AugmentedSample s = assemble_ranked(g.data, g.outcomes, 0.3, largest);
            CHECK(s.recovered == n_star);
            CHECK(s.size() == n_star + g.data.observed_count());
            std::vector<double> got;
            for (std::size_t i = 0; i < s.size(); ++i)
                if (s.m_a[i]) got.push_back(s.x(i)[0]);
            std::sort(got.begin(), got.end());
            const std::vector<double> expected =
                largest ? std::vector<double>(missing_x.end() - static_cast<std::ptrdiff_t>(n_star), missing_x.end())
                        : std::vector<double>(missing_x.begin(), missing_x.begin() + static_cast<std::ptrdiff_t>(n_star));
            CHECK(got == expected);
        }
    }

    TEST_CASE("random design c2 follows the link") {
        CHECK(random_design_c2(Link::Logit, 0.3) == 1.0);
        CHECK(random_design_c2(Link::Probit, 0.3) == 0.3);
        CHECK(random_design_c2(Link::Probit, 0.3, LinkMode::AllObserved) == 1.0);
    }

    TEST_CASE("perturbations") {
        const ModelSpec m = fixtures::single_covariate();
        CHECK(apply_perturbation(m, {"", "lambda1", -0.4}).mechanism.lambda[1] == -0.4);
        CHECK(apply_perturbation(m, {"", "psi0", 0.15}).mechanism.psi[0] == 0.15);
        CHECK(apply_perturbation(m, {"", "beta0", 1.0}).regression.intercept == 1.0);
        CHECK(apply_perturbation(m, {"", "beta1", 3.0}).regression.slopes[0] == 3.0);
        CHECK(apply_perturbation(m, {"", "sigma", 3.0}).regression.sigma == 3.0);
        CHECK_THROWS_AS(apply_perturbation(m, {"", "lambda7", 1.0}), ConfigError);
        CHECK_THROWS_AS(apply_perturbation(m, {"", "gamma", 1.0}), ConfigError);
    }

    TEST_CASE("least squares on complete cases") {
        CompleteCases cases;
        cases.x.resize(200, 1);
        cases.y.resize(200);
        std::mt19937_64 rng(1);
        std::normal_distribution<double> nd(0.0, 1.0);
        for (int i = 0; i < 200; ++i) {
            cases.x(i, 0) = nd(rng);
            cases.y(i) = 3.0 + 1.5 * cases.x(i, 0) + 0.5 * nd(rng);
        }
        const OlsFit f = fit_ols(cases);
        CHECK(f.intercept == doctest::Approx(3.0).epsilon(0.05));
        CHECK(f.slopes[0] == doctest::Approx(1.5).epsilon(0.05));
        CHECK(f.sigma == doctest::Approx(0.5).epsilon(0.15));

        CompleteCases few;
        few.x = cases.x.topRows(50);
        few.y = cases.y.head(50);
        BootstrapStudy study;
        study.mechanism = real_data_mechanism('A');
        study.covariates.marginals = {NormalMarginal{0.0, 1.0}};
        study.c1_grid = {0.5};
        CHECK_THROWS_AS(run_bootstrap_real(few, study, small(2)), ConfigError);
    }

    TEST_CASE("bootstrap rows come from the complete cases") {
        CompleteCases cases;
        cases.x.resize(150, 1);
        cases.y.resize(150);
        for (int i = 0; i < 150; ++i) {
            cases.x(i, 0) = 10.0 + 0.01 * i;
            cases.y(i) = 100.0 + i;
        }
        const GeneratedData g = bootstrap_generator(cases, real_data_mechanism('A'), 150)(4);
        CHECK(g.data.size() == 150);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double x = g.data.x(i)[0];
            const long row = std::lround((x - 10.0) * 100.0);
            CHECK(g.outcomes[i] == doctest::Approx(100.0 + row));
        }
    }

    TEST_CASE("a MAR power study matches the Type I study") {
        const ModelSpec mar = fixtures::single_covariate(0.0);
        PowerStudy study;
        study.include_optimal = false;
        const auto power = run_power_mse(mar, {0.4}, study, small(80, 21));
        const auto type_one = run_type_one(mar, {0.4}, {SchemeKind::Region}, small(80, 21));
        CHECK(power[0].points[0].rejections == type_one[0].points[0].rejections);
    }
}
