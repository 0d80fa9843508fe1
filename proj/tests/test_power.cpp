#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"

#include "mnar/error.hpp"
#include "mnar/glm.hpp"
#include "mnar/power.hpp"

using namespace mnar;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// P(chi2_1(ncp) <= x) = P(|Z + sqrt(ncp)| <= sqrt(x)).
double ncx2_cdf_df1(double x, double ncp) {
    const double r = std::sqrt(x);
    const double a = std::sqrt(ncp);
    return fixtures::std_normal_cdf(r - a) - fixtures::std_normal_cdf(-r - a);
}

// df = 3: (Z + sqrt(ncp))^2 plus an independent chi2_2, integrated over Z.
double ncx2_cdf_df3(double x, double ncp) {
    const double a = std::sqrt(ncp);
    const double lo = -a - std::sqrt(x);
    const double hi = -a + std::sqrt(x);
    const int steps = 200000;
    const double h = (hi - lo) / steps;
    double sum = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double z = lo + i * h;
        const double rest = x - (z + a) * (z + a);
        const double f = std::exp(-0.5 * z * z) / std::sqrt(2 * M_PI) * (1.0 - std::exp(-0.5 * std::max(rest, 0.0)));
        sum += (i == 0 || i == steps) ? 0.5 * f : f;
    }
    return sum * h;
}

}  // namespace

TEST_SUITE("power_engine") {
    TEST_CASE("noncentral chi-square against closed forms") {
        for (double ncp : {0.5, 3.0, 10.0, 40.0}) {
            for (double x : {0.5, 3.84, 12.0, 60.0}) {
                CHECK(noncentral_chi2_cdf(x, 1, ncp) == doctest::Approx(ncx2_cdf_df1(x, ncp)).epsilon(1e-10));
                CHECK(std::abs(noncentral_chi2_cdf(x, 3, ncp) - ncx2_cdf_df3(x, ncp)) < 1e-8);
            }
        }
        CHECK(noncentral_chi2_cdf(3.0, 2, 0.0) == doctest::Approx(central_chi2_cdf(3.0, 2)));
        CHECK(approx_power(0.0, 1, 0.05) == doctest::Approx(0.05).epsilon(1e-10));
        CHECK_THROWS_AS(noncentral_chi2_cdf(1.0, 1, -1.0), SpecificationError);
    }

    TEST_CASE("MAR models have zero noncentrality") {
        const ModelSpec m = fixtures::single_covariate(0.0);
        for (double c1 : {0.2, 0.6, 1.0}) {
            const RecoveryDesign d{c1, 1.0, Region::unbounded(1)};
            const NcpBreakdown b = noncentrality(m, d, 1000);
            CHECK(std::abs(b.gamma_raw) < 1e-6);
            CHECK(b.tr_a == doctest::Approx(2.0).epsilon(1e-8));
            const AugmentedLaw law = build_augmented_law(m, d);
            const NullLimit nl = solve_null_limit(law);
            CHECK((nl.lambda0_star - law.lambda_a).cwiseAbs().maxCoeff() < 1e-8);
        }
        const ModelSpec three = fixtures::scenario_two_model({-2.0, 0.4}, {0.0, 0.0});
        const NcpBreakdown b3 = noncentrality(three, {0.4, 1.0, Region::box({{-1.0, 3.0}})}, 1000);
        CHECK(std::abs(b3.gamma_raw) < 1e-6);
    }

    TEST_CASE("augmented law bookkeeping") {
        const ModelSpec m = fixtures::single_covariate();
        const RecoveryDesign d{0.3, 1.0, Region::box({{-12.0, 2.9}})};
        const AugmentedLaw law = build_augmented_law(m, d);
        CHECK(law.weight.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(law.cstar == doctest::Approx(c_star(m, d)).epsilon(1e-12));
        CHECK(law.lambda_a(0) == doctest::Approx(-2.0 + std::log(law.cstar)).epsilon(1e-12));
        const double mean_prob = law.weight.dot(law.prob);
        CHECK(mean_prob == doctest::Approx(prob_MA1(m, d)).epsilon(1e-9));

        ModelSpec probit = fixtures::probit_model();
        CHECK_THROWS_AS(build_augmented_law(probit, {0.3, 1.0, Region::unbounded(1)}), ConditionViolation);
        const double c2 = required_c2(probit, 0.3, Region::unbounded(1));
        CHECK(c2 == doctest::Approx(0.3));
        CHECK_NOTHROW(build_augmented_law(probit, {0.3, c2, Region::unbounded(1)}));
    }

    TEST_CASE("random design power for the single-covariate model") {
        const ModelSpec m = fixtures::single_covariate();
        // Reference Monte Carlo powers of the random design.
        const std::vector<std::pair<double, double>> reference = {{0.1, 0.243}, {1.0, 0.830}};
        for (const auto& [c1, power] : reference) {
            const NcpBreakdown b = noncentrality(m, {c1, 1.0, Region::unbounded(1)}, 1000);
            CHECK(std::abs(approx_power(b.gamma, 1, 0.05) - power) < 0.02);
        }
        const NcpBreakdown b = noncentrality(m, {0.3, 1.0, Region::unbounded(1)}, 1000);
        CHECK(std::abs(approx_power(b.gamma, 1, 0.05) - 0.45) < 0.05);
        CHECK(b.expected_n_a == doctest::Approx(1000 * (0.3 * prob_missing(m) + prob_MO(m, Region::unbounded(1)))));
    }

    TEST_CASE("noncentrality scales linearly in n") {
        const ModelSpec m = fixtures::single_covariate();
        const RecoveryDesign d{0.4, 1.0, Region::box({{-10.0, 3.5}})};
        const NcpBreakdown a = noncentrality(m, d, 1000);
        const NcpBreakdown b = noncentrality(m, d, 2000);
        CHECK(b.gamma_raw - b.q + b.tr_a == doctest::Approx(2.0 * (a.gamma_raw - a.q + a.tr_a)).epsilon(1e-10));
    }

    TEST_CASE("Cramer's rule equals the explicit inverse") {
        const ModelSpec m = fixtures::single_covariate();
        for (double c1 : {0.1, 0.5}) {
            const FisherInfo info = asymptotic_variance(m, {c1, 1.0, Region::box({{-11.0, 4.0}})}, 1000);
            const Eigen::MatrixXd inv = info.matrix.inverse();
            CHECK(info.target_variance == doctest::Approx(inv(2, 2)).epsilon(1e-8));
        }
        const FisherInfo two = asymptotic_variance(fixtures::two_covariates(), {0.3, 1.0, Region::unbounded(2)}, 1000);
        CHECK(two.target_variance == doctest::Approx(two.matrix.inverse()(3, 3)).epsilon(1e-8));
        CHECK_THROWS_AS(asymptotic_variance(fixtures::interaction_model(), {0.3, 1.0, Region::unbounded(1)}, 1000),
                        SpecificationError);
    }

    TEST_CASE("target variance falls as c1 grows") {
        const ModelSpec m = fixtures::single_covariate();
        const Region region = Region::box({{-kInf, 6.0}});
        double previous = kInf;
        for (double c1 = 0.1; c1 < 0.95; c1 += 0.1) {
            const double v = asymptotic_variance(m, {c1, 1.0, region}, 1000).target_variance;
            CHECK(v < previous);
            previous = v;
        }
    }

    TEST_CASE("variance and noncentrality rank regions alike") {
        const ModelSpec m = fixtures::single_covariate();
        std::vector<Region> regions;
        for (int i = 0; i < 50; ++i) {
            const double lo = -14.0 + 0.2 * i;
            const double hi = lo + 4.0 + 0.25 * i;
            regions.push_back(Region::box({{lo, hi}}));
        }
        for (double c1 = 0.1; c1 < 0.95; c1 += 0.1) {
            int best_gamma = -1, best_var = -1;
            double g_max = -kInf, v_min = kInf;
            for (int i = 0; i < 50; ++i) {
                const RecoveryDesign d{c1, 1.0, regions[static_cast<std::size_t>(i)]};
                if (!check_design(m, d).meets_inequality) continue;
                const double g = noncentrality(m, d, 1000).gamma;
                const double v = asymptotic_variance(m, d, 1000).target_variance;
                if (g > g_max) g_max = g, best_gamma = i;
                if (v < v_min) v_min = v, best_var = i;
            }
            if (best_gamma < 0) continue;
            CHECK(best_gamma == best_var);
        }
    }

    TEST_CASE("target variance agrees with the spread of Monte Carlo estimates") {
        const ModelSpec m = fixtures::single_covariate();
        const RecoveryDesign d{0.3, 1.0, Region::unbounded(1)};
        const double target = asymptotic_variance(m, d, 1000).target_variance;
        double sum = 0, sum2 = 0;
        int kept = 0;
        for (std::uint64_t r = 0; r < 10000; ++r) {
            const GeneratedData g = generate_with_outcomes(m, 1000, 500000 + r);
            const auto oracle = [&](std::size_t i) -> std::optional<double> { return g.outcomes[i]; };
            const AugmentedSample s = assemble_augmented(g.data, d, oracle, r);
            const GlmFit f = fit(s, m.mechanism.shape, true);
            if (!f.converged) continue;
            const double psi = f.estimates(2);
            sum += psi;
            sum2 += psi * psi;
            ++kept;
        }
        const double mean = sum / kept;
        const double var = sum2 / kept - mean * mean;
        CHECK(var == doctest::Approx(target).epsilon(0.10));
    }
}
