#pragma once

#include <stdexcept>
#include <string>

namespace mnar {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes: configuration-type errors exit 1, numerical failures exit 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model, mechanism, region or design specification.
class SpecificationError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent configuration document / command line input.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input file that could not be parsed; carries the 1-based line number.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& what, std::size_t line)
        : ConfigError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Non-finite values, non-convergence and other numerical breakdowns.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Recovery design whose region carries no mass where mass is required.
class DegenerateDesign : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Region that fails Pr(M=1, X in C_A) >= c1 Pr(M=1).
class ConditionViolation : public SpecificationError {
public:
    ConditionViolation(const std::string& what, double required_mass)
        : SpecificationError(what), required_mass_(required_mass) {}
    /// Smallest Pr(M=1, X in C_A) that would satisfy the condition.
    double required_mass() const noexcept { return required_mass_; }

private:
    double required_mass_;
};

/// Binary sample with a single outcome class.
class DegenerateSample : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A GLM fit that did not converge (separation, iteration cap).
class FitFailure : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// No feasible region found by the design search.
class InfeasibleDesign : public NumericalError {
public:
    InfeasibleDesign(const std::string& what, double prob_missing, double best_slack)
        : NumericalError(what), prob_missing_(prob_missing), best_slack_(best_slack) {}
    double prob_missing() const noexcept { return prob_missing_; }
    double best_slack() const noexcept { return best_slack_; }

private:
    double prob_missing_;
    double best_slack_;
};

}  // namespace mnar
