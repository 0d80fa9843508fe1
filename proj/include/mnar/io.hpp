#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mnar/design.hpp"
#include "mnar/model.hpp"
#include "mnar/simulation.hpp"

namespace mnar {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Model documents (see docs/config_schema.md)
// ---------------------------------------------------------------------------

Json to_json(const ModelSpec& model);
Json to_json(const Marginal& marginal);
Json to_json(const Region& region);  // null for infinite bounds

/// Parses a model document. `empirical_fill` supplies values for covariates
/// declared as {"type": "empirical", "from_csv": true}.
ModelSpec model_from_json(const Json& doc, const std::vector<std::vector<double>>* empirical_fill = nullptr);
Marginal marginal_from_json(const Json& doc, const std::string& where,
                            const std::vector<double>* empirical_fill = nullptr);
MechanismSpec mechanism_from_json(const Json& doc, Link link, std::size_t p);
Region region_from_json(const Json& doc, std::size_t p);

Json to_json(const DesignSearchResult& result);
Json to_json(const CurveResult& curve);

// ---------------------------------------------------------------------------
// Experiment documents
// ---------------------------------------------------------------------------

struct RealDataConfig {
    std::string csv;
    std::vector<std::string> covariates;
    std::string outcome;
    std::string scenario = "A";
    double expected_missing_fraction = 0.45;
    Json covariate_docs;  // marginals used for design; empirical ones may read the CSV
};

struct ExperimentConfig {
    Json raw;  // document with command-line overrides applied
    std::optional<ModelSpec> model;
    std::vector<double> c1_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<std::string> schemes;
    SimulationSettings simulation;
    PowerStudy study;
    std::optional<Region> region;
    std::vector<Perturbation> perturbations;
    std::optional<RealDataConfig> real_data;
};

/// Validates and parses a configuration. A run manifest is accepted too: its
/// embedded "config" member is used.
ExperimentConfig experiment_from_json(const Json& doc);
Json read_json_file(const std::string& path);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Reads a header row and numeric fields; empty fields are missing. Rows with
/// any selected field missing are skipped. Throws ParseError with the line number.
CompleteCases read_complete_cases(std::istream& in, const std::vector<std::string>& covariates,
                                  const std::string& outcome);
CompleteCases read_complete_cases_file(const std::string& path, const std::vector<std::string>& covariates,
                                       const std::string& outcome);

/// Columns c1,design,rate,se,mse_psi_1..s,discarded,kept,enlarged,mean_1..(q+s).
void write_curves_csv(std::ostream& os, const std::vector<CurveResult>& curves);

std::string format_number(double v);

}  // namespace mnar
