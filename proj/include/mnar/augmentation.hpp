#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mnar/model.hpp"
#include "mnar/quadrature.hpp"

namespace mnar {

/// Random recovery within `region` of a fraction c1 of the missing outcomes,
/// pooled with a fraction c2 of the observed rows inside the region.
struct RecoveryDesign {
    double c1 = 1.0;
    double c2 = 1.0;
    Region region;

    void validate_fractions() const;
};

/// Population quantities that decide whether a design is admissible.
struct DesignCheck {
    double prob_missing;   // Pr(M = 1)
    double prob_recovered; // Pr(M = 1, X in C_A)
    double prob_observed;  // Pr(M = 0, X in C_A)
    double target;         // c1 Pr(M = 1)
    bool meets_inequality; // Pr(M_R) >= c1 Pr(M = 1)
    bool meets_equality;   // Pr(M_R) == c1 Pr(M = 1) up to 1e-9
    double slack() const;  // Pr(M_R) - c1 Pr(M = 1)
};

DesignCheck check_design(const ModelSpec& model, const RecoveryDesign& design, const QuadratureOptions& opts = {});

/// Throws DegenerateDesign / ConditionViolation for inadmissible designs.
DesignCheck validate_design(const ModelSpec& model, const RecoveryDesign& design, const QuadratureOptions& opts = {});

/// Pr(M_A = 1) = c1 Pr(M=1) / (c1 Pr(M=1) + c2 Pr(M_O)).
double prob_MA1(double c1, double c2, double prob_missing, double prob_observed);
double prob_MA1(const ModelSpec& model, const RecoveryDesign& design, const QuadratureOptions& opts = {});

/// c* = c1 Pr(M=1) / (c2 Pr(M=1, X in C_A)).
double c_star(double c1, double c2, double prob_missing, double prob_recovered);
double c_star(const ModelSpec& model, const RecoveryDesign& design, const QuadratureOptions& opts = {});

/// c2 = c1 Pr(M=1) / Pr(M=1, X in C_A); throws ConditionViolation if above 1.
double required_c2(double c1, double prob_missing, double prob_recovered);
double required_c2(const ModelSpec& model, double c1, const Region& region, const QuadratureOptions& opts = {});

/// Mechanism of the augmented data at a known c*; zero outside the region.
double augmented_mechanism_prob(const MechanismSpec& mech, const Region& region, double cstar,
                                std::span<const double> x, double y);
double augmented_mechanism_prob(const ModelSpec& model, const RecoveryDesign& design, std::span<const double> x,
                                double y, const QuadratureOptions& opts = {});

/// lambda_A = lambda + (log c*, 0, ..., 0): the logit-link augmented intercept shift.
std::vector<double> augmented_lambda(const MechanismSpec& mech, double cstar);

// ---------------------------------------------------------------------------

struct AugmentedSample {
    std::size_t p = 0;
    std::vector<double> xs;          // row-major, size() * p
    std::vector<double> ys;
    std::vector<std::uint8_t> m_a;   // 1 = recovered, 0 = observed
    std::vector<std::size_t> source; // row index in the original dataset
    std::size_t recovered = 0;       // n*
    bool enlarged = false;           // region grown to reach n*
    std::optional<Region> region;    // region actually used (after enlargement)

    std::size_t size() const { return ys.size(); }
    std::span<const double> x(std::size_t i) const { return {xs.data() + i * p, p}; }
    void add(std::span<const double> x, double y, bool recovered_row, std::size_t source_row);
};

/// Supplies the true outcome of a followed-up row, or nullopt on failure.
using RecoveryOracle = std::function<std::optional<double>(std::size_t)>;

struct AssemblyOptions {
    bool exact_observed_count = false;  // take ceil(c2 * count) observed rows instead of Bernoulli(c2)
    double enlargement_step = 0.05;     // fraction of an interval's half-width per step
};

AugmentedSample assemble_augmented(const Dataset& data, const RecoveryDesign& design, const RecoveryOracle& oracle,
                                   std::uint64_t seed, const AssemblyOptions& opts = {});

/// Writes the sample as CSV with header x1..xp,y,mA.
void write_csv(std::ostream& os, const AugmentedSample& sample);

}  // namespace mnar
