#include "mnar/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "mnar/error.hpp"

namespace mnar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_object(const Json& doc, const std::string& where) {
    if (!doc.is_object()) throw ConfigError(where + " must be a JSON object");
}

void check_keys(const Json& doc, const std::set<std::string>& allowed, const std::string& where) {
    check_object(doc, where);
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

const Json& required(const Json& doc, const std::string& key, const std::string& where) {
    const auto it = doc.find(key);
    if (it == doc.end()) throw ConfigError(where + " is missing '" + key + "'");
    return *it;
}

double as_number(const Json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + " must be a number");
    return v.get<double>();
}

double number_or(const Json& doc, const std::string& key, double fallback, const std::string& where) {
    const auto it = doc.find(key);
    return it == doc.end() || it->is_null() ? fallback : as_number(*it, where + "." + key);
}

std::size_t count_or(const Json& doc, const std::string& key, std::size_t fallback, const std::string& where) {
    const auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) return fallback;
    if (!it->is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
    return it->get<std::size_t>();
}

std::string string_or(const Json& doc, const std::string& key, const std::string& fallback, const std::string& where) {
    const auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) return fallback;
    if (!it->is_string()) throw ConfigError(where + "." + key + " must be a string");
    return it->get<std::string>();
}

std::vector<double> number_list(const Json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + " must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::string> string_list(const Json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw ConfigError(where + " must be an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

Json bound_to_json(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

template <class F>
auto rethrow_as_config(F&& f, const std::string& where) -> decltype(f()) {
    try {
        return f();
    } catch (const SpecificationError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

}  // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// ---------------------------------------------------------------------------

Json to_json(const Marginal& marginal) {
    return std::visit(
        [](const auto& m) -> Json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, NormalMarginal>) {
                return {{"type", "normal"}, {"mean", m.mean}, {"sd", m.sd}};
            } else if constexpr (std::is_same_v<T, SkewNormalMarginal>) {
                return {{"type", "skew_normal"}, {"location", m.location}, {"scale", m.scale}, {"shape", m.shape}};
            } else {
                return {{"type", "empirical"}, {"values", m.sample()}};
            }
        },
        marginal);
}

Json to_json(const ModelSpec& model) {
    Json cov = Json::array();
    for (const auto& m : model.covariates.marginals) cov.push_back(to_json(m));
    Json w = Json::array();
    for (const auto& t : model.mechanism.shape.w_terms) w.push_back(to_string(t));
    Json z = Json::array();
    for (const auto& t : model.mechanism.shape.z_terms) z.push_back(to_string(t));
    return {{"regression",
             {{"beta0", model.regression.intercept}, {"beta", model.regression.slopes}, {"sigma_y", model.regression.sigma}}},
            {"covariates", cov},
            {"link", std::string(to_string(model.mechanism.link()))},
            {"mechanism", {{"w", w}, {"z", z}, {"lambda", model.mechanism.lambda}, {"psi", model.mechanism.psi}}}};
}

Json to_json(const Region& region) {
    Json dims = Json::array();
    for (std::size_t j = 0; j < region.dimension(); ++j) {
        Json list = Json::array();
        for (const Interval& iv : region.intervals(j)) list.push_back({bound_to_json(iv.lower), bound_to_json(iv.upper)});
        dims.push_back(list.size() == 1 ? list[0] : list);
    }
    return dims;
}

Marginal marginal_from_json(const Json& doc, const std::string& where, const std::vector<double>* empirical_fill) {
    check_object(doc, where);
    const std::string type = string_or(doc, "type", "", where);
    Marginal m;
    if (type == "normal") {
        check_keys(doc, {"type", "mean", "sd"}, where);
        m = NormalMarginal{number_or(doc, "mean", 0.0, where), as_number(required(doc, "sd", where), where + ".sd")};
    } else if (type == "skew_normal") {
        check_keys(doc, {"type", "location", "scale", "shape"}, where);
        m = SkewNormalMarginal{as_number(required(doc, "location", where), where + ".location"),
                               as_number(required(doc, "scale", where), where + ".scale"),
                               as_number(required(doc, "shape", where), where + ".shape")};
    } else if (type == "empirical") {
        check_keys(doc, {"type", "values", "from_csv"}, where);
        const auto from_csv = doc.find("from_csv");
        if (from_csv != doc.end() && from_csv->is_boolean() && from_csv->get<bool>()) {
            if (!empirical_fill) throw ConfigError(where + " reads its values from a CSV, but none is available here");
            m = rethrow_as_config([&] { return EmpiricalMarginal(*empirical_fill); }, where);
        } else {
            m = rethrow_as_config([&] { return EmpiricalMarginal(number_list(required(doc, "values", where), where + ".values")); },
                                  where);
        }
    } else {
        throw ConfigError(where + ".type must be normal, skew_normal or empirical");
    }
    rethrow_as_config([&] { validate_marginal(m); return 0; }, where);
    return m;
}

MechanismSpec mechanism_from_json(const Json& doc, Link link, std::size_t p) {
    const std::string where = "mechanism";
    check_keys(doc, {"scenario", "w", "z", "lambda", "psi"}, where);
    MechanismSpec mech;
    const auto scenario = doc.find("scenario");
    if (scenario != doc.end()) {
        if (doc.contains("w") || doc.contains("z")) throw ConfigError("mechanism gives both a scenario and explicit terms");
        const double s = as_number(*scenario, "mechanism.scenario");
        if (s == 1.0)
            mech.shape = MechanismShape::scenario_one(link, p);
        else if (s == 2.0)
            mech.shape = MechanismShape::scenario_two(link);
        else
            throw ConfigError("mechanism.scenario must be 1 or 2");
    } else {
        mech.shape.link = link;
        rethrow_as_config(
            [&] {
                for (const auto& t : string_list(required(doc, "w", where), "mechanism.w"))
                    mech.shape.w_terms.push_back(parse_covariate_term(t));
                for (const auto& t : string_list(required(doc, "z", where), "mechanism.z"))
                    mech.shape.z_terms.push_back(parse_outcome_term(t));
                return 0;
            },
            where);
    }
    mech.lambda = number_list(required(doc, "lambda", where), "mechanism.lambda");
    const auto psi = doc.find("psi");
    mech.psi = psi == doc.end() ? std::vector<double>(mech.shape.s(), 0.0) : number_list(*psi, "mechanism.psi");
    rethrow_as_config([&] { mech.validate(p); return 0; }, where);
    return mech;
}

ModelSpec model_from_json(const Json& doc, const std::vector<std::vector<double>>* empirical_fill) {
    check_keys(doc, {"regression", "covariates", "link", "mechanism"}, "model");
    const Json& reg = required(doc, "regression", "model");
    check_keys(reg, {"beta0", "beta", "sigma_y"}, "model.regression");
    ModelSpec model;
    model.regression.intercept = as_number(required(reg, "beta0", "model.regression"), "model.regression.beta0");
    model.regression.slopes = number_list(required(reg, "beta", "model.regression"), "model.regression.beta");
    model.regression.sigma = as_number(required(reg, "sigma_y", "model.regression"), "model.regression.sigma_y");

    const Json& cov = required(doc, "covariates", "model");
    if (!cov.is_array()) throw ConfigError("model.covariates must be an array");
    for (std::size_t j = 0; j < cov.size(); ++j) {
        const std::vector<double>* fill = empirical_fill && j < empirical_fill->size() ? &(*empirical_fill)[j] : nullptr;
        model.covariates.marginals.push_back(marginal_from_json(cov[j], "model.covariates[" + std::to_string(j) + "]", fill));
    }
    if (model.covariates.dimension() != model.regression.dimension())
        throw ConfigError("model.covariates has " + std::to_string(model.covariates.dimension()) +
                          " entries but model.regression.beta has " + std::to_string(model.regression.dimension()));

    const Link link = rethrow_as_config([&] { return parse_link(string_or(doc, "link", "logit", "model")); }, "model.link");
    model.mechanism = mechanism_from_json(required(doc, "mechanism", "model"), link, model.dimension());
    rethrow_as_config([&] { model.validate(); return 0; }, "model");
    return model;
}

Region region_from_json(const Json& doc, std::size_t p) {
    if (doc.is_null()) return Region::unbounded(p);
    if (!doc.is_array() || doc.size() != p) throw ConfigError("region must list one interval per covariate");
    auto bound = [](const Json& v, double fallback, const std::string& where) {
        return v.is_null() ? fallback : as_number(v, where);
    };
    auto interval = [&](const Json& v, const std::string& where) {
        if (!v.is_array() || v.size() != 2) throw ConfigError(where + " must be [lower, upper]");
        return Interval{bound(v[0], -kInf, where), bound(v[1], kInf, where)};
    };
    std::vector<std::vector<Interval>> dims;
    for (std::size_t j = 0; j < p; ++j) {
        const std::string where = "region[" + std::to_string(j) + "]";
        const Json& d = doc[j];
        std::vector<Interval> list;
        if (d.is_array() && !d.empty() && d[0].is_array()) {
            for (std::size_t k = 0; k < d.size(); ++k) list.push_back(interval(d[k], where + "[" + std::to_string(k) + "]"));
        } else {
            list.push_back(interval(d, where));
        }
        dims.push_back(std::move(list));
    }
    return rethrow_as_config([&] { return Region(std::move(dims)); }, "region");
}

Json to_json(const DesignSearchResult& r) {
    return {{"bounds", to_json(r.region)},
            {"c1", r.c1},
            {"c2", r.c2},
            {"criterion", to_string(r.criterion)},
            {"link_mode", to_string(r.link_mode)},
            {"value", r.criterion_value},
            {"gamma", r.gamma},
            {"approx_power", r.power},
            {"slack", r.constraint_slack},
            {"prob_missing", r.prob_missing},
            {"prob_recovered", r.prob_recovered},
            {"prob_observed", r.prob_observed},
            {"starts_tried", r.starts_tried},
            {"evaluations", r.evaluations},
            {"random_design_selected", r.random_design_selected}};
}

Json to_json(const CurveResult& curve) {
    Json points = Json::array();
    for (const CurvePoint& p : curve.points) {
        points.push_back({{"c1", p.c1},
                          {"rate", p.rate},
                          {"se", p.se},
                          {"mse_psi", p.mse_psi},
                          {"mean_estimates", p.mean_estimates},
                          {"replications", p.replications},
                          {"kept", p.kept},
                          {"discarded", p.discarded},
                          {"enlarged", p.enlarged}});
    }
    return {{"design", curve.label}, {"points", points}};
}

// ---------------------------------------------------------------------------

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

ExperimentConfig experiment_from_json(const Json& input) {
    check_object(input, "configuration");
    const Json doc = input.contains("manifest_version") ? required(input, "config", "manifest") : input;
    check_keys(doc, {"model", "experiment", "design", "robustness", "real_data"}, "configuration");

    ExperimentConfig cfg;
    cfg.raw = doc;

    const Json empty = Json::object();
    const Json& exp = doc.contains("experiment") ? doc["experiment"] : empty;
    check_keys(exp, {"c1_grid", "replications", "n", "alpha", "seed", "jobs", "schemes", "criterion", "link_mode"},
               "experiment");
    if (exp.contains("c1_grid")) cfg.c1_grid = number_list(exp["c1_grid"], "experiment.c1_grid");
    for (double c1 : cfg.c1_grid)
        if (!(c1 > 0.0 && c1 <= 1.0)) throw ConfigError("experiment.c1_grid values must lie in (0, 1]");
    cfg.simulation.replications = count_or(exp, "replications", cfg.simulation.replications, "experiment");
    if (cfg.simulation.replications == 0) throw ConfigError("experiment.replications must be at least 1");
    cfg.simulation.n = count_or(exp, "n", cfg.simulation.n, "experiment");
    if (cfg.simulation.n == 0) throw ConfigError("experiment.n must be at least 1");
    cfg.simulation.alpha = number_or(exp, "alpha", cfg.simulation.alpha, "experiment");
    if (!(cfg.simulation.alpha > 0.0 && cfg.simulation.alpha < 1.0))
        throw ConfigError("experiment.alpha must lie in (0, 1)");
    cfg.simulation.seed = count_or(exp, "seed", cfg.simulation.seed, "experiment");
    cfg.simulation.jobs = count_or(exp, "jobs", cfg.simulation.jobs, "experiment");
    if (exp.contains("schemes")) cfg.schemes = string_list(exp["schemes"], "experiment.schemes");
    cfg.study.criterion = parse_criterion(string_or(exp, "criterion", "variance", "experiment"));
    cfg.study.link_mode = parse_link_mode(string_or(exp, "link_mode", "auto", "experiment"));

    const Json& des = doc.contains("design") ? doc["design"] : empty;
    check_keys(des, {"starts", "seed", "n", "region"}, "design");
    cfg.study.search.starts = count_or(des, "starts", cfg.study.search.starts, "design");
    if (cfg.study.search.starts == 0) throw ConfigError("design.starts must be at least 1");
    cfg.study.search.seed = count_or(des, "seed", cfg.study.search.seed, "design");
    cfg.study.search.n = count_or(des, "n", cfg.simulation.n, "design");
    cfg.study.search.alpha = cfg.simulation.alpha;
    cfg.study.search.jobs = cfg.simulation.jobs;

    if (doc.contains("real_data")) {
        const Json& rd = doc["real_data"];
        check_keys(rd, {"csv", "covariates", "outcome", "scenario", "expected_missing_fraction", "covariate_model"},
                   "real_data");
        RealDataConfig r;
        r.csv = string_or(rd, "csv", "", "real_data");
        r.covariates = string_list(required(rd, "covariates", "real_data"), "real_data.covariates");
        if (r.covariates.empty()) throw ConfigError("real_data.covariates must name at least one column");
        r.outcome = string_or(rd, "outcome", "", "real_data");
        if (r.outcome.empty()) throw ConfigError("real_data.outcome must name the outcome column");
        r.scenario = string_or(rd, "scenario", "A", "real_data");
        r.expected_missing_fraction = number_or(rd, "expected_missing_fraction", 0.45, "real_data");
        r.covariate_docs = required(rd, "covariate_model", "real_data");
        if (!r.covariate_docs.is_array() || r.covariate_docs.size() != r.covariates.size())
            throw ConfigError("real_data.covariate_model needs one marginal per covariate column");
        cfg.real_data = std::move(r);
    }

    if (doc.contains("model")) cfg.model = model_from_json(doc["model"]);

    if (doc.contains("design") && des.contains("region")) {
        if (!cfg.model) throw ConfigError("design.region needs a model");
        cfg.region = region_from_json(des["region"], cfg.model->dimension());
    }

    if (doc.contains("robustness")) {
        const Json& rob = doc["robustness"];
        if (!rob.is_array()) throw ConfigError("robustness must be an array of perturbations");
        for (std::size_t i = 0; i < rob.size(); ++i) {
            const std::string where = "robustness[" + std::to_string(i) + "]";
            check_keys(rob[i], {"label", "parameter", "value"}, where);
            Perturbation p;
            p.label = string_or(rob[i], "label", "", where);
            p.parameter = string_or(rob[i], "parameter", "", where);
            p.value = as_number(required(rob[i], "value", where), where + ".value");
            if (cfg.model) apply_perturbation(*cfg.model, p);
            cfg.perturbations.push_back(std::move(p));
        }
    }
    return cfg;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", line_no);
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_field(const std::string& raw, std::size_t line_no, const std::string& column) {
    const std::string s = trim(raw);
    if (s.empty() || s == "NA" || s == "nan" || s == "NaN") return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw ParseError("column '" + column + "' has non-numeric value '" + s + "'", line_no);
    return v;
}

}  // namespace

CompleteCases read_complete_cases(std::istream& in, const std::vector<std::string>& covariates,
                                  const std::string& outcome) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_csv_line(line, line_no);
            break;
        }
    }
    if (header.empty()) throw ParseError("CSV has no header row", std::max<std::size_t>(line_no, 1));
    for (auto& h : header) h = trim(h);

    auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ConfigError("CSV schema error: no column named '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    std::vector<std::size_t> cols;
    for (const auto& c : covariates) cols.push_back(column(c));
    const std::size_t ycol = column(outcome);

    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line, line_no);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()),
                             line_no);
        ++rows;
        std::vector<double> x;
        bool complete = true;
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const auto v = parse_field(fields[cols[j]], line_no, covariates[j]);
            if (!v) complete = false;
            x.push_back(v.value_or(0.0));
        }
        const auto y = parse_field(fields[ycol], line_no, outcome);
        if (!y) complete = false;
        if (!complete) continue;
        xs.push_back(std::move(x));
        ys.push_back(*y);
    }

    CompleteCases out;
    out.covariate_names = covariates;
    out.outcome_name = outcome;
    out.rows_read = rows;
    out.x.resize(static_cast<Eigen::Index>(ys.size()), static_cast<Eigen::Index>(covariates.size()));
    out.y.resize(static_cast<Eigen::Index>(ys.size()));
    for (std::size_t i = 0; i < ys.size(); ++i) {
        for (std::size_t j = 0; j < covariates.size(); ++j)
            out.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i][j];
        out.y(static_cast<Eigen::Index>(i)) = ys[i];
    }
    return out;
}

CompleteCases read_complete_cases_file(const std::string& path, const std::vector<std::string>& covariates,
                                       const std::string& outcome) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CSV '" + path + "'");
    return read_complete_cases(in, covariates, outcome);
}

void write_curves_csv(std::ostream& os, const std::vector<CurveResult>& curves) {
    std::size_t s = 0;
    std::size_t width = 0;
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            s = std::max(s, p.mse_psi.size());
            width = std::max(width, p.mean_estimates.size());
        }
    os << "c1,design,rate,se";
    for (std::size_t j = 1; j <= s; ++j) os << ",mse_psi_" << j;
    os << ",discarded,kept,enlarged";
    for (std::size_t j = 1; j <= width; ++j) os << ",mean_" << j;
    os << '\n';
    for (const auto& c : curves) {
        for (const auto& p : c.points) {
            os << format_number(p.c1) << ',' << c.label << ',' << format_number(p.rate) << ',' << format_number(p.se);
            for (std::size_t j = 0; j < s; ++j) os << ',' << (j < p.mse_psi.size() ? format_number(p.mse_psi[j]) : "");
            os << ',' << p.discarded << ',' << p.kept << ',' << p.enlarged;
            for (std::size_t j = 0; j < width; ++j)
                os << ',' << (j < p.mean_estimates.size() ? format_number(p.mean_estimates[j]) : "");
            os << '\n';
        }
    }
}

}  // namespace mnar
