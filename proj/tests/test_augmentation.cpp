#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "mnar/augmentation.hpp"
#include "mnar/error.hpp"
#include "mnar/quadrature.hpp"

using namespace mnar;

namespace {

RecoveryOracle oracle_for(const GeneratedData& g) {
    return [&g](std::size_t i) -> std::optional<double> { return g.outcomes[i]; };
}

}  // namespace

TEST_SUITE("augmentation") {
    TEST_CASE("closed forms") {
        CHECK(prob_MA1(0.3, 1.0, 0.25, 0.75) == doctest::Approx(0.075 / 0.825));
        CHECK(c_star(0.3, 1.0, 0.25, 0.25) == doctest::Approx(0.3));
        CHECK(c_star(0.2, 0.5, 0.3, 0.12) == doctest::Approx(1.0));
        CHECK(required_c2(0.2, 0.3, 0.12) == doctest::Approx(0.5));
        CHECK_THROWS_AS(required_c2(0.5, 0.3, 0.12), ConditionViolation);
    }

    TEST_CASE("full recovery of everything leaves the mechanism unchanged") {
        const ModelSpec m = fixtures::single_covariate();
        const RecoveryDesign d{1.0, 1.0, Region::unbounded(1)};
        CHECK(c_star(m, d) == doctest::Approx(1.0).epsilon(1e-12));
        const auto lambda_a = augmented_lambda(m.mechanism, c_star(m, d));
        CHECK(lambda_a[0] == doctest::Approx(-2.0).epsilon(1e-12));
        CHECK(lambda_a[1] == 0.4);
    }

    TEST_CASE("odds form equals the logit intercept shift") {
        const ModelSpec m = fixtures::single_covariate();
        const Region region = Region::box({{-6.0, 3.0}});
        for (double c1 : {0.1, 0.3}) {
            const RecoveryDesign d{c1, 1.0, region};
            const double cs = c_star(m, d);
            MechanismSpec shifted = m.mechanism;
            shifted.lambda = augmented_lambda(m.mechanism, cs);
            for (double x0 : {-5.0, 0.0, 2.5}) {
                for (double y : {-4.0, 1.0, 9.0}) {
                    const double x[] = {x0};
                    CHECK(std::abs(augmented_mechanism_prob(m.mechanism, region, cs, x, y) -
                                   mechanism_prob(shifted, x, y)) < 1e-12);
                }
            }
            const double x_out[] = {4.0};
            CHECK(augmented_mechanism_prob(m.mechanism, region, cs, x_out, 0.0) == 0.0);
        }
    }

    TEST_CASE("design checks") {
        const ModelSpec m = fixtures::single_covariate();
        const DesignCheck ok = check_design(m, {0.3, 1.0, Region::unbounded(1)});
        CHECK(ok.meets_inequality);
        CHECK(ok.slack() == doctest::Approx(0.7 * ok.prob_missing));
        CHECK_THROWS_AS(validate_design(m, {0.3, 1.0, Region::box({{-20.0, -10.0}})}), ConditionViolation);
        CHECK_THROWS_AS(validate_design(m, {0.0, 1.0, Region::unbounded(1)}), SpecificationError);
        CHECK_THROWS_AS(validate_design(m, {0.3, 1.5, Region::unbounded(1)}), SpecificationError);
    }

    TEST_CASE("assembly picks n* missing rows inside the region and every observed row") {
        const ModelSpec m = fixtures::single_covariate();
        const GeneratedData g = generate_with_outcomes(m, 1000, 9);
        const Region region = Region::box({{-12.0, 3.0}});
        const AugmentedSample s = assemble_augmented(g.data, {0.3, 1.0, region}, oracle_for(g), 17);
        const std::size_t target = static_cast<std::size_t>(std::ceil(0.3 * g.data.missing_count() - 1e-9));
        CHECK(s.recovered == target);
        std::size_t observed_in = 0;
        for (std::size_t i = 0; i < g.data.size(); ++i)
            if (!g.data.missing(i) && region.contains(g.data.x(i))) ++observed_in;
        CHECK(s.size() == target + observed_in);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const std::size_t row = s.source[i];
            CHECK(g.data.missing(row) == (s.m_a[i] == 1));
            CHECK(s.region->contains(s.x(i)));
            CHECK(s.ys[i] == g.outcomes[row]);
        }
        const AugmentedSample again = assemble_augmented(g.data, {0.3, 1.0, region}, oracle_for(g), 17);
        CHECK(again.source == s.source);
    }

    TEST_CASE("observed rows are kept with probability c2") {
        const ModelSpec m = fixtures::single_covariate();
        const GeneratedData g = generate_with_outcomes(m, 2000, 4);
        const double c2 = 0.4;
        const std::size_t n_obs = g.data.observed_count();
        double total = 0;
        const int reps = 200;
        for (int r = 0; r < reps; ++r) {
            const AugmentedSample s = assemble_augmented(g.data, {0.2, c2, Region::unbounded(1)}, oracle_for(g), r);
            total += static_cast<double>(s.size() - s.recovered);
        }
        const double mean = total / reps;
        const double sd = std::sqrt(n_obs * c2 * (1 - c2) / reps);
        CHECK(std::abs(mean - n_obs * c2) < 4 * sd);

        AssemblyOptions exact;
        exact.exact_observed_count = true;
        const AugmentedSample s = assemble_augmented(g.data, {0.2, c2, Region::unbounded(1)}, oracle_for(g), 1, exact);
        CHECK(s.size() - s.recovered == static_cast<std::size_t>(std::ceil(c2 * n_obs - 1e-9)));
    }

    TEST_CASE("a region with too few missing rows grows until n* is reached") {
        const ModelSpec m = fixtures::single_covariate();
        const GeneratedData g = generate_with_outcomes(m, 1000, 2);
        const AugmentedSample s = assemble_augmented(g.data, {0.5, 1.0, Region::box({{8.0, 9.0}})}, oracle_for(g), 3);
        CHECK(s.enlarged);
        CHECK(s.recovered == static_cast<std::size_t>(std::ceil(0.5 * g.data.missing_count() - 1e-9)));
    }

    TEST_CASE("Pr(M_A=1) matches assembled samples") {
        const ModelSpec m = fixtures::single_covariate();
        const RecoveryDesign d{0.3, 1.0, Region::box({{-12.0, 2.9}})};
        const double expected = prob_MA1(m, d);
        double recovered = 0, total = 0;
        for (std::uint64_t r = 0; r < 100; ++r) {
            const GeneratedData g = generate_with_outcomes(m, 1000, 1000 + r);
            const AugmentedSample s = assemble_augmented(g.data, d, oracle_for(g), r);
            recovered += static_cast<double>(s.recovered);
            total += static_cast<double>(s.size());
        }
        const double frac = recovered / total;
        const double se = std::sqrt(expected * (1 - expected) / total);
        CHECK(std::abs(frac - expected) < 4 * se + 0.003);
    }

    TEST_CASE("csv output") {
        AugmentedSample s;
        s.p = 1;
        const double x[] = {1.5};
        s.add(x, 2.0, true, 0);
        std::ostringstream os;
        write_csv(os, s);
        CHECK(os.str() == "x1,y,mA\n1.5,2,1\n");
    }
}
