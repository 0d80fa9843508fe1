#include "mnar/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "CLI11.hpp"

#include "mnar/error.hpp"
#include "mnar/io.hpp"
#include "mnar/power.hpp"
#include "mnar/quadrature.hpp"

namespace mnar {

namespace {

namespace fs = std::filesystem;

struct Options {
    std::string command;
    std::string config;
    std::string out = "results";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    std::optional<std::size_t> jobs;
    std::optional<double> c1;
    std::optional<std::string> scenario;
    std::optional<std::string> csv;
    std::vector<std::string> covariates;
    std::optional<std::string> outcome;
};

class Runner {
public:
    Runner(const Options& opts, std::ostream& out) : opts_(opts), out_(out) {}

    void run() {
        Json doc = load();
        apply_overrides(doc);
        cfg_ = experiment_from_json(doc);
        fs::create_directories(opts_.out);

        const std::string& c = opts_.command;
        if (c == "design")
            design();
        else if (c == "criterion-eval")
            criterion_eval();
        else if (c == "power-curve")
            power_curve();
        else if (c == "type-one")
            type_one();
        else if (c == "robustness")
            robustness();
        else
            real_data();
        write_manifest();
    }

private:
    Json load() {
        if (opts_.config.empty()) {
            if (opts_.command != "real-data") throw ConfigError(opts_.command + " needs --config");
            return Json{{"real_data", {{"covariates", {"x"}},
                                       {"outcome", "y"},
                                       {"covariate_model", Json::array({{{"type", "empirical"}, {"from_csv", true}}})}}}};
        }
        Json doc = read_json_file(opts_.config);
        if (doc.is_object() && doc.contains("manifest_version")) {
            if (!doc.contains("config")) throw ConfigError("manifest has no 'config' member");
            doc = Json(doc["config"]);
        }
        // Relative CSV paths are taken relative to the config file.
        if (doc.is_object() && doc.contains("real_data") && doc["real_data"].is_object() &&
            doc["real_data"].contains("csv") && doc["real_data"]["csv"].is_string()) {
            const fs::path csv = doc["real_data"]["csv"].get<std::string>();
            if (csv.is_relative())
                doc["real_data"]["csv"] = (fs::path(opts_.config).parent_path() / csv).lexically_normal().string();
        }
        return doc;
    }

    void apply_overrides(Json& doc) const {
        if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
        auto& exp = doc["experiment"];
        if (exp.is_null()) exp = Json::object();
        if (!exp.is_object()) throw ConfigError("experiment must be a JSON object");
        if (opts_.seed) exp["seed"] = *opts_.seed;
        if (opts_.reps) exp["replications"] = *opts_.reps;
        if (opts_.jobs) exp["jobs"] = *opts_.jobs;
        if (opts_.c1) exp["c1_grid"] = Json::array({*opts_.c1});
        if (opts_.scenario || opts_.csv || !opts_.covariates.empty() || opts_.outcome) {
            auto& rd = doc["real_data"];
            if (rd.is_null()) rd = Json::object();
            if (!rd.is_object()) throw ConfigError("real_data must be a JSON object");
            if (opts_.scenario) rd["scenario"] = *opts_.scenario;
            if (opts_.csv) rd["csv"] = fs::absolute(*opts_.csv).lexically_normal().string();
            if (!opts_.covariates.empty()) rd["covariates"] = opts_.covariates;
            if (opts_.outcome) rd["outcome"] = *opts_.outcome;
        }
    }

    const ModelSpec& model() const {
        if (!cfg_.model) throw ConfigError(opts_.command + " needs a 'model' section");
        return *cfg_.model;
    }

    fs::path output(const std::string& name) {
        outputs_.push_back(name);
        return fs::path(opts_.out) / name;
    }

    void write_json(const std::string& name, const Json& j) {
        std::ofstream os(output(name));
        os << j.dump(2) << '\n';
        if (!os) throw ConfigError("cannot write '" + name + "'");
    }

    void write_curves(const std::string& name, const std::vector<CurveResult>& curves) {
        std::ofstream os(output(name));
        write_curves_csv(os, curves);
        if (!os) throw ConfigError("cannot write '" + name + "'");
        write_curves_csv(out_, curves);
    }

    void design() {
        const ModelSpec& m = model();
        Json list = Json::array();
        for (double c1 : cfg_.c1_grid) {
            const DesignSearchResult r =
                optimize_region(m, c1, cfg_.study.criterion, cfg_.study.link_mode, cfg_.study.search);
            const RandomComparison cmp = compare_to_random(m, c1, r, cfg_.study.search);
            Json j = to_json(r);
            j["random"] = {{"gamma", cmp.gamma_random},
                           {"approx_power", cmp.power_random},
                           {"value", cmp.criterion_random}};
            list.push_back(std::move(j));
        }
        const Json result = {{"designs", list}};
        write_json("design.json", result);
        out_ << result.dump(2) << '\n';
    }

    void criterion_eval() {
        const ModelSpec& m = model();
        const Region region = cfg_.region.value_or(Region::unbounded(m.dimension()));
        const double pm = prob_missing(m, cfg_.study.search.quadrature);
        Json list = Json::array();
        for (double c1 : cfg_.c1_grid) {
            const CriterionEvaluation e =
                evaluate_region(m, c1, pm, region, Criterion::Noncentrality, cfg_.study.link_mode, cfg_.study.search);
            Json j = {{"c1", c1},
                      {"c2", e.c2},
                      {"bounds", to_json(region)},
                      {"prob_missing", pm},
                      {"prob_recovered", e.prob_recovered},
                      {"prob_observed", e.prob_observed},
                      {"slack", e.slack},
                      {"gamma", e.gamma},
                      {"approx_power", e.power}};
            if (m.mechanism.s() == 1) {
                const CriterionEvaluation v =
                    evaluate_region(m, c1, pm, region, Criterion::Variance, cfg_.study.link_mode, cfg_.study.search);
                j["target_variance"] = v.target_variance;
            }
            list.push_back(std::move(j));
        }
        const Json result = {{"evaluations", list}};
        write_json("criterion_eval.json", result);
        out_ << result.dump(2) << '\n';
    }

    void power_curve() {
        std::vector<DesignSearchResult> designs;
        const auto curves = run_power_mse(model(), cfg_.c1_grid, cfg_.study, cfg_.simulation, &designs);
        write_curves("power_curve.csv", curves);
        write_designs(designs);
    }

    void write_designs(const std::vector<DesignSearchResult>& designs) {
        Json list = Json::array();
        for (const auto& d : designs) list.push_back(to_json(d));
        write_json("designs.json", {{"designs", list}});
    }

    void type_one() {
        std::vector<SchemeKind> schemes;
        const std::vector<std::string> names =
            cfg_.schemes.empty() ? std::vector<std::string>{"scheme1", "scheme2", "scheme3"} : cfg_.schemes;
        for (const auto& s : names) {
            if (s == "scheme1" || s == "random")
                schemes.push_back(SchemeKind::Region);
            else if (s == "scheme2" || s == "top")
                schemes.push_back(SchemeKind::TopK);
            else if (s == "scheme3" || s == "bottom")
                schemes.push_back(SchemeKind::BottomK);
            else
                throw ConfigError("unknown scheme '" + s + "' (use scheme1, scheme2 or scheme3)");
        }
        write_curves("type_one.csv", run_type_one(model(), cfg_.c1_grid, schemes, cfg_.simulation));
    }

    void robustness() {
        if (cfg_.perturbations.empty()) throw ConfigError("robustness needs a non-empty 'robustness' list");
        write_curves("robustness.csv",
                     run_robustness(model(), cfg_.perturbations, cfg_.c1_grid, cfg_.study, cfg_.simulation));
    }

    void real_data() {
        if (!cfg_.real_data) throw ConfigError("real-data needs a 'real_data' section");
        const RealDataConfig& rd = *cfg_.real_data;
        if (rd.csv.empty()) throw ConfigError("real-data needs a CSV (--csv or real_data.csv)");
        if (rd.scenario != "A" && rd.scenario != "B") throw ConfigError("real_data.scenario must be A or B");
        const CompleteCases cases = read_complete_cases_file(rd.csv, rd.covariates, rd.outcome);

        BootstrapStudy study;
        study.mechanism = real_data_mechanism(rd.scenario[0]);
        for (std::size_t j = 0; j < rd.covariates.size(); ++j) {
            const Eigen::VectorXd col = cases.x.col(static_cast<Eigen::Index>(j));
            const std::vector<double> fill(col.data(), col.data() + col.size());
            study.covariates.marginals.push_back(
                marginal_from_json(rd.covariate_docs[j], "real_data.covariate_model[" + std::to_string(j) + "]", &fill));
        }
        study.c1_grid = cfg_.c1_grid;
        study.power = cfg_.study;
        study.power.search.n = cases.size();
        study.expected_missing_fraction = rd.expected_missing_fraction;

        const BootstrapReport report = run_bootstrap_real(cases, study, cfg_.simulation);
        write_curves("real_data.csv", report.curves);
        Json designs = Json::array();
        for (const auto& d : report.designs) designs.push_back(to_json(d));
        write_json("real_data.json", {{"rows_read", cases.rows_read},
                                      {"complete_cases", cases.size()},
                                      {"ols", {{"beta0", report.ols.intercept},
                                               {"beta", report.ols.slopes},
                                               {"sigma_y", report.ols.sigma}}},
                                      {"model_missing_fraction", report.model_missing_fraction},
                                      {"injected_missing_fraction", report.injected_missing_fraction},
                                      {"warnings", report.warnings},
                                      {"designs", designs}});
        for (const auto& w : report.warnings) out_ << "warning: " << w << '\n';
    }

    void write_manifest() {
        const Json manifest = {{"manifest_version", 1},
                               {"command", opts_.command},
                               {"config", cfg_.raw},
                               {"seeds", {{"simulation", cfg_.simulation.seed}, {"design", cfg_.study.search.seed}}},
                               {"outputs", outputs_}};
        std::ofstream os(fs::path(opts_.out) / "manifest.json");
        os << manifest.dump(2) << '\n';
        if (!os) throw ConfigError("cannot write manifest.json");
    }

    const Options& opts_;
    std::ostream& out_;
    ExperimentConfig cfg_;
    std::vector<std::string> outputs_;
};

const std::vector<std::pair<std::string, std::string>> kCommands = {
    {"design", "optimize the recovery region for each c1"},
    {"criterion-eval", "evaluate the criteria at a given region"},
    {"power-curve", "simulate power and MSE for optimal and random designs"},
    {"type-one", "simulate Type I error rates of the recovery schemes"},
    {"robustness", "simulate designs built from misspecified models"},
    {"real-data", "bootstrap study on complete cases read from a CSV"},
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Recovery sampling designs for testing missing-not-at-random data", "mnar-recovery"};
    app.require_subcommand(1, 1);
    Options opts;

    for (const auto& [name, help] : kCommands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opts.config, "JSON configuration or run manifest");
        sub->add_option("--out", opts.out, "output directory")->capture_default_str();
        sub->add_option("--seed", opts.seed, "base seed for the simulation");
        sub->add_option("--reps", opts.reps, "number of replications");
        sub->add_option("--jobs", opts.jobs, "worker threads (0 = all cores)");
        sub->add_option("--c1", opts.c1, "single recovery proportion in (0, 1]");
        if (name == "real-data") {
            sub->add_option("--scenario", opts.scenario, "missingness scenario A or B");
            sub->add_option("--csv", opts.csv, "CSV of observations");
            sub->add_option("--covariate", opts.covariates, "covariate column name (repeatable)");
            sub->add_option("--outcome", opts.outcome, "outcome column name");
        }
        sub->callback([&opts, name = name] { opts.command = name; });
    }

    if (!args.empty() && !args[0].empty() && args[0][0] != '-' &&
        std::none_of(kCommands.begin(), kCommands.end(), [&](const auto& c) { return c.first == args[0]; })) {
        err << "error: unknown command '" << args[0] << "'\n\n" << app.help();
        return 1;
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        Runner(opts, out).run();
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        err << "configuration error: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace mnar
