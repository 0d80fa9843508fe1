#include "mnar/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "mnar/error.hpp"

namespace mnar {

void RecoveryDesign::validate_fractions() const {
    if (!(c1 > 0.0 && c1 <= 1.0)) throw SpecificationError("c1 must lie in (0, 1]");
    if (!(c2 > 0.0 && c2 <= 1.0)) throw SpecificationError("c2 must lie in (0, 1]");
}

double DesignCheck::slack() const { return prob_recovered - target; }

DesignCheck check_design(const ModelSpec& model, const RecoveryDesign& design, const QuadratureOptions& opts) {
    design.validate_fractions();
    const RegionMasses masses = region_masses(model, design.region, opts);
    DesignCheck check{};
    check.prob_missing = prob_missing(model, opts);
    check.prob_recovered = masses.recovered;
    check.prob_observed = masses.observed;
    const double target = design.c1 * check.prob_missing;
    check.target = target;
    check.meets_inequality = masses.recovered >= target - 1e-12;
    check.meets_equality = std::abs(masses.recovered - target) <= 1e-9;
    return check;
}

DesignCheck validate_design(const ModelSpec& model, const RecoveryDesign& design, const QuadratureOptions& opts) {
    const DesignCheck check = check_design(model, design, opts);
    if (!(check.prob_observed > 0.0)) throw DegenerateDesign("region has Pr(M=0, X in C_A) = 0");
    if (!check.meets_inequality) {
        throw ConditionViolation("region violates Pr(M=1, X in C_A) >= c1 Pr(M=1): has " +
                                     std::to_string(check.prob_recovered) + ", needs " +
                                     std::to_string(design.c1 * check.prob_missing),
                                 design.c1 * check.prob_missing);
    }
    return check;
}

double prob_MA1(double c1, double c2, double prob_missing, double prob_observed) {
    const double num = c1 * prob_missing;
    const double den = num + c2 * prob_observed;
    if (!(den > 0.0)) throw DegenerateDesign("Pr(M_A = 1) has a zero denominator");
    return num / den;
}

double prob_MA1(const ModelSpec& model, const RecoveryDesign& design, const QuadratureOptions& opts) {
    const DesignCheck check = check_design(model, design, opts);
    return prob_MA1(design.c1, design.c2, check.prob_missing, check.prob_observed);
}

double c_star(double c1, double c2, double prob_missing, double prob_recovered) {
    if (!(prob_recovered > 0.0)) throw DegenerateDesign("c* undefined: Pr(M=1, X in C_A) = 0");
    return c1 * prob_missing / (c2 * prob_recovered);
}

double c_star(const ModelSpec& model, const RecoveryDesign& design, const QuadratureOptions& opts) {
    const DesignCheck check = check_design(model, design, opts);
    return c_star(design.c1, design.c2, check.prob_missing, check.prob_recovered);
}

double required_c2(double c1, double prob_missing, double prob_recovered) {
    if (!(prob_recovered > 0.0)) throw DegenerateDesign("c2 undefined: Pr(M=1, X in C_A) = 0");
    const double c2 = c1 * prob_missing / prob_recovered;
    if (c2 > 1.0 + 1e-12) {
        throw ConditionViolation("region too small for c1 = " + std::to_string(c1) + ": Pr(M=1, X in C_A) must be at least " +
                                     std::to_string(c1 * prob_missing),
                                 c1 * prob_missing);
    }
    return std::min(c2, 1.0);
}

double required_c2(const ModelSpec& model, double c1, const Region& region, const QuadratureOptions& opts) {
    if (!(c1 > 0.0 && c1 <= 1.0)) throw SpecificationError("c1 must lie in (0, 1]");
    return required_c2(c1, prob_missing(model, opts), prob_MR(model, region, opts));
}

double augmented_mechanism_prob(const MechanismSpec& mech, const Region& region, double cstar,
                                std::span<const double> x, double y) {
    if (!region.contains(x)) return 0.0;
    if (cstar == 1.0) return mechanism_prob(mech, x, y);
    const LinkValues v = link_values(mech.link(), linear_predictor(mech, x, y));
    return cstar * v.mu / (cstar * v.mu + v.one_minus_mu);
}

double augmented_mechanism_prob(const ModelSpec& model, const RecoveryDesign& design, std::span<const double> x,
                                double y, const QuadratureOptions& opts) {
    return augmented_mechanism_prob(model.mechanism, design.region, c_star(model, design, opts), x, y);
}

std::vector<double> augmented_lambda(const MechanismSpec& mech, double cstar) {
    if (!(cstar > 0.0)) throw DegenerateDesign("c* must be positive");
    std::vector<double> lambda = mech.lambda;
    lambda.at(0) += std::log(cstar);
    return lambda;
}

// ---------------------------------------------------------------------------

void AugmentedSample::add(std::span<const double> x, double y, bool recovered_row, std::size_t source_row) {
    xs.insert(xs.end(), x.begin(), x.end());
    ys.push_back(y);
    m_a.push_back(recovered_row ? 1 : 0);
    source.push_back(source_row);
    if (recovered_row) ++recovered;
}

namespace {

std::vector<double> dimension_spread(const Dataset& data) {
    const std::size_t p = data.dimension();
    std::vector<double> spread(p, 1.0);
    if (data.size() < 2) return spread;
    for (std::size_t j = 0; j < p; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) mean += data.x(i)[j];
        mean /= static_cast<double>(data.size());
        double ss = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) ss += (data.x(i)[j] - mean) * (data.x(i)[j] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(data.size() - 1));
        if (sd > 0.0) spread[j] = sd;
    }
    return spread;
}

}  // namespace

AugmentedSample assemble_augmented(const Dataset& data, const RecoveryDesign& design, const RecoveryOracle& oracle,
                                   std::uint64_t seed, const AssemblyOptions& opts) {
    design.validate_fractions();
    if (design.region.dimension() != data.dimension())
        throw SpecificationError("design region dimension does not match the data");
    const std::size_t n_miss = data.missing_count();
    if (n_miss == 0) throw SpecificationError("dataset has no missing outcomes to recover");

    const auto target = static_cast<std::size_t>(std::ceil(design.c1 * static_cast<double>(n_miss) - 1e-9));
    std::mt19937_64 rng(seed);

    Region region = design.region;
    bool enlarged = false;
    std::vector<std::size_t> candidates;
    std::vector<double> spread;
    for (;;) {
        candidates.clear();
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data.missing(i) && region.contains(data.x(i))) candidates.push_back(i);
        if (candidates.size() >= target) break;
        if (spread.empty()) spread = dimension_spread(data);
        region = region.enlarged(opts.enlargement_step, spread);
        enlarged = true;
    }

    // Uniform draw of n* rows without replacement (partial Fisher-Yates).
    for (std::size_t k = 0; k < target; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, candidates.size() - 1);
        std::swap(candidates[k], candidates[pick(rng)]);
    }
    std::vector<std::size_t> chosen(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(target));
    std::sort(chosen.begin(), chosen.end());

    std::vector<std::size_t> observed_in;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!data.missing(i) && region.contains(data.x(i))) observed_in.push_back(i);

    std::vector<std::size_t> kept;
    if (design.c2 >= 1.0) {
        kept = observed_in;
    } else if (opts.exact_observed_count) {
        const auto count = static_cast<std::size_t>(std::ceil(design.c2 * static_cast<double>(observed_in.size()) - 1e-9));
        std::sample(observed_in.begin(), observed_in.end(), std::back_inserter(kept), count, rng);
    } else {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (std::size_t i : observed_in)
            if (unif(rng) < design.c2) kept.push_back(i);
    }

    AugmentedSample out;
    out.p = data.dimension();
    out.enlarged = enlarged;
    out.region = region;
    const std::size_t total = kept.size() + chosen.size();
    out.xs.reserve(total * out.p);
    out.ys.reserve(total);
    out.m_a.reserve(total);
    out.source.reserve(total);
    for (std::size_t i : kept) out.add(data.x(i), *data.y(i), false, i);
    for (std::size_t i : chosen) {
        const std::optional<double> y = oracle(i);
        if (!y || !std::isfinite(*y)) throw Error("recovery oracle failed for row " + std::to_string(i));
        out.add(data.x(i), *y, true, i);
    }
    return out;
}

void write_csv(std::ostream& os, const AugmentedSample& sample) {
    for (std::size_t j = 0; j < sample.p; ++j) os << 'x' << (j + 1) << ',';
    os << "y,mA\n";
    os.precision(17);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        for (double v : sample.x(i)) os << v << ',';
        os << sample.ys[i] << ',' << static_cast<int>(sample.m_a[i]) << '\n';
    }
}

}  // namespace mnar
