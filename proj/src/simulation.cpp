#include "mnar/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mnar/error.hpp"
#include "mnar/parallel.hpp"
#include "mnar/quadrature.hpp"

namespace mnar {

std::string to_string(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::Region: return "region";
        case SchemeKind::TopK: return "top";
        case SchemeKind::BottomK: return "bottom";
    }
    return "region";
}

DataGenerator model_generator(const ModelSpec& model, std::size_t n) {
    model.validate();
    return [model, n](std::uint64_t seed) { return generate_with_outcomes(model, n, seed); };
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct Outcome {
    bool kept = false;
    bool reject = false;
    bool enlarged = false;
    std::vector<double> estimates;
};

}  // namespace

AugmentedSample assemble_ranked(const Dataset& data, const std::vector<double>& outcomes, double c1, bool largest) {
    if (!(c1 > 0.0 && c1 <= 1.0)) throw SpecificationError("c1 must lie in (0, 1]");
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data.missing(i)) missing.push_back(i);
    if (missing.empty()) throw SpecificationError("dataset has no missing outcomes to recover");
    const auto target = static_cast<std::size_t>(std::ceil(c1 * static_cast<double>(missing.size()) - 1e-9));
    std::stable_sort(missing.begin(), missing.end(), [&](std::size_t a, std::size_t b) {
        return largest ? data.x(a)[0] > data.x(b)[0] : data.x(a)[0] < data.x(b)[0];
    });
    std::vector<std::size_t> chosen(missing.begin(), missing.begin() + static_cast<std::ptrdiff_t>(target));
    std::sort(chosen.begin(), chosen.end());

    AugmentedSample out;
    out.p = data.dimension();
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!data.missing(i)) out.add(data.x(i), *data.y(i), false, i);
    for (std::size_t i : chosen) out.add(data.x(i), outcomes[i], true, i);
    return out;
}

std::vector<CurveResult> run_curves(const DataGenerator& generate, const MechanismSpec& mechanism,
                                    const std::vector<CurveSpec>& curves, const SimulationSettings& settings) {
    if (settings.replications == 0) throw SpecificationError("replications must be at least 1");
    struct Cell {
        std::size_t curve;
        std::size_t point;
    };
    std::vector<Cell> cells;
    for (std::size_t c = 0; c < curves.size(); ++c) {
        if (curves[c].plans.size() != curves[c].c1_grid.size())
            throw SpecificationError("curve '" + curves[c].label + "' needs one plan per c1");
        for (std::size_t k = 0; k < curves[c].c1_grid.size(); ++k) {
            const double c1 = curves[c].c1_grid[k];
            if (!(c1 > 0.0 && c1 <= 1.0)) throw SpecificationError("c1 values must lie in (0, 1]");
            cells.push_back({c, k});
        }
    }
    const std::size_t reps = settings.replications;
    const std::size_t width = mechanism.q() + mechanism.s();
    std::vector<Outcome> results(reps * cells.size());

    parallel_for(reps, settings.jobs, [&](std::size_t r) {
        const std::uint64_t data_seed = settings.seed + r;
        const GeneratedData gen = generate(data_seed);
        const std::vector<double>& outcomes = gen.outcomes;
        const RecoveryOracle oracle = [&outcomes](std::size_t i) -> std::optional<double> { return outcomes[i]; };
        for (std::size_t k = 0; k < cells.size(); ++k) {
            const CurveSpec& curve = curves[cells[k].curve];
            const double c1 = curve.c1_grid[cells[k].point];
            const PlannedRecovery& plan = curve.plans[cells[k].point];
            Outcome& out = results[r * cells.size() + k];
            if (gen.data.missing_count() == 0) continue;
            try {
                AugmentedSample sample;
                if (plan.kind == SchemeKind::Region) {
                    sample = assemble_augmented(gen.data, {c1, plan.c2, plan.region}, oracle,
                                                splitmix64(data_seed ^ splitmix64(k + 1)), settings.assembly);
                } else {
                    sample = assemble_ranked(gen.data, outcomes, c1, plan.kind == SchemeKind::TopK);
                }
                out.enlarged = sample.enlarged;
                const LrtResult test = lrt_mnar(sample, mechanism.shape, settings.alpha, settings.fit);
                out.kept = true;
                out.reject = test.reject;
                out.estimates.assign(test.full.estimates.data(), test.full.estimates.data() + width);
            } catch (const NumericalError&) {
                out.kept = false;
            }
        }
    });

    std::vector<CurveResult> table(curves.size());
    for (std::size_t c = 0; c < curves.size(); ++c) {
        table[c].label = curves[c].label;
        table[c].points.resize(curves[c].c1_grid.size());
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
        CurvePoint& pt = table[cells[k].curve].points[cells[k].point];
        pt.c1 = curves[cells[k].curve].c1_grid[cells[k].point];
        pt.replications = reps;
        pt.mean_estimates.assign(width, 0.0);
        pt.mse_psi.assign(mechanism.s(), 0.0);
        for (std::size_t r = 0; r < reps; ++r) {
            const Outcome& o = results[r * cells.size() + k];
            if (o.enlarged) ++pt.enlarged;
            if (!o.kept) {
                ++pt.discarded;
                continue;
            }
            ++pt.kept;
            if (o.reject) ++pt.rejections;
            for (std::size_t j = 0; j < width; ++j) pt.mean_estimates[j] += o.estimates[j];
            for (std::size_t j = 0; j < mechanism.s(); ++j) {
                const double err = o.estimates[mechanism.q() + j] - mechanism.psi[j];
                pt.mse_psi[j] += err * err;
            }
        }
        if (pt.kept > 0) {
            const auto kept = static_cast<double>(pt.kept);
            for (double& v : pt.mean_estimates) v /= kept;
            for (double& v : pt.mse_psi) v /= kept;
            pt.rate = static_cast<double>(pt.rejections) / kept;
            pt.se = std::sqrt(pt.rate * (1.0 - pt.rate) / kept);
        }
    }
    return table;
}

// ---------------------------------------------------------------------------

double random_design_c2(Link link, double c1, LinkMode mode) {
    return resolve_link_mode(mode, link) == LinkMode::AllObserved ? 1.0 : c1;
}

CurveSpec random_curve(const ModelSpec& model, const std::vector<double>& c1_grid, LinkMode mode,
                       const std::string& label) {
    CurveSpec curve{label, c1_grid, {}};
    for (double c1 : c1_grid)
        curve.plans.push_back({SchemeKind::Region, Region::unbounded(model.dimension()),
                               random_design_c2(model.mechanism.link(), c1, mode)});
    return curve;
}

CurveSpec ranked_curve(const ModelSpec& model, const std::vector<double>& c1_grid, bool largest) {
    CurveSpec curve{largest ? "top" : "bottom", c1_grid, {}};
    for (std::size_t k = 0; k < c1_grid.size(); ++k)
        curve.plans.push_back({largest ? SchemeKind::TopK : SchemeKind::BottomK, Region::unbounded(model.dimension()), 1.0});
    return curve;
}

CurveSpec optimal_curve(const ModelSpec& design_model, const std::vector<double>& c1_grid, Criterion criterion,
                        LinkMode mode, const DesignSearchOptions& search, const std::string& label,
                        std::vector<DesignSearchResult>* designs) {
    CurveSpec curve{label, c1_grid, {}};
    for (double c1 : c1_grid) {
        const DesignSearchResult d = optimize_region(design_model, c1, criterion, mode, search);
        curve.plans.push_back({SchemeKind::Region, d.region, d.c2});
        if (designs) designs->push_back(d);
    }
    return curve;
}

std::vector<CurveResult> run_type_one(const ModelSpec& model, const std::vector<double>& c1_grid,
                                      const std::vector<SchemeKind>& schemes, const SimulationSettings& settings) {
    model.validate();
    if (!model.mechanism.is_mar())
        throw ConfigError("type-one study needs a MAR mechanism (all psi = 0)");
    std::vector<CurveSpec> curves;
    for (SchemeKind kind : schemes) {
        if (kind == SchemeKind::Region)
            curves.push_back(random_curve(model, c1_grid, LinkMode::Auto, "scheme1"));
        else
            curves.push_back(ranked_curve(model, c1_grid, kind == SchemeKind::TopK));
    }
    for (auto& c : curves) {
        if (c.label == "top") c.label = "scheme2";
        if (c.label == "bottom") c.label = "scheme3";
    }
    return run_curves(model_generator(model, settings.n), model.mechanism, curves, settings);
}

std::vector<CurveResult> run_power_mse(const ModelSpec& model, const std::vector<double>& c1_grid,
                                       const PowerStudy& study, const SimulationSettings& settings,
                                       std::vector<DesignSearchResult>* designs) {
    model.validate();
    std::vector<CurveSpec> curves;
    if (study.include_optimal)
        curves.push_back(optimal_curve(model, c1_grid, study.criterion, study.link_mode, study.search, "optimal", designs));
    if (study.include_random) curves.push_back(random_curve(model, c1_grid, study.link_mode));
    return run_curves(model_generator(model, settings.n), model.mechanism, curves, settings);
}

ModelSpec apply_perturbation(const ModelSpec& model, const Perturbation& perturbation) {
    ModelSpec out = model;
    const std::string& name = perturbation.parameter;
    auto index_after = [&](std::size_t prefix) -> std::size_t {
        const std::string digits = name.substr(prefix);
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
            throw ConfigError("unknown perturbation parameter '" + name + "'");
        return static_cast<std::size_t>(std::stoul(digits));
    };
    auto set = [&](std::vector<double>& v, std::size_t k) {
        if (k >= v.size()) throw ConfigError("perturbation parameter '" + name + "' is out of range");
        v[k] = perturbation.value;
    };
    if (name == "sigma") {
        out.regression.sigma = perturbation.value;
    } else if (name == "beta0") {
        out.regression.intercept = perturbation.value;
    } else if (name.rfind("beta", 0) == 0) {
        const std::size_t k = index_after(4);
        if (k == 0) throw ConfigError("perturbation parameter '" + name + "' is out of range");
        set(out.regression.slopes, k - 1);
    } else if (name.rfind("lambda", 0) == 0) {
        set(out.mechanism.lambda, index_after(6));
    } else if (name.rfind("psi", 0) == 0) {
        set(out.mechanism.psi, index_after(3));
    } else {
        throw ConfigError("unknown perturbation parameter '" + name + "'");
    }
    out.validate();
    return out;
}

std::vector<CurveResult> run_robustness(const ModelSpec& truth, const std::vector<Perturbation>& perturbations,
                                        const std::vector<double>& c1_grid, const PowerStudy& study,
                                        const SimulationSettings& settings) {
    truth.validate();
    std::vector<CurveSpec> curves;
    curves.push_back(optimal_curve(truth, c1_grid, study.criterion, study.link_mode, study.search, "true optimal"));
    curves.push_back(random_curve(truth, c1_grid, study.link_mode));
    for (const Perturbation& p : perturbations) {
        const ModelSpec assumed = apply_perturbation(truth, p);
        curves.push_back(optimal_curve(assumed, c1_grid, study.criterion, study.link_mode, study.search,
                                       p.label.empty() ? p.parameter + "=" + std::to_string(p.value) : p.label));
    }
    return run_curves(model_generator(truth, settings.n), truth.mechanism, curves, settings);
}

// ---------------------------------------------------------------------------

OlsFit fit_ols(const CompleteCases& cases) {
    const auto n = static_cast<Eigen::Index>(cases.size());
    const auto p = static_cast<Eigen::Index>(cases.dimension());
    if (n <= p + 1) throw DegenerateSample("too few complete cases for least squares");
    Eigen::MatrixXd design(n, p + 1);
    design.col(0).setOnes();
    design.rightCols(p) = cases.x;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < p + 1) throw DegenerateSample("covariate columns are collinear");
    const Eigen::VectorXd coef = qr.solve(cases.y);
    const double rss = (cases.y - design * coef).squaredNorm();
    OlsFit out;
    out.intercept = coef(0);
    out.slopes.assign(coef.data() + 1, coef.data() + coef.size());
    out.sigma = std::sqrt(rss / static_cast<double>(n - p - 1));
    return out;
}

DataGenerator bootstrap_generator(const CompleteCases& cases, const MechanismSpec& mechanism, std::size_t n) {
    mechanism.validate(cases.dimension());
    if (cases.size() == 0) throw ConfigError("no complete cases to resample");
    return [cases, mechanism, n](std::uint64_t seed) {
        const std::size_t p = cases.dimension();
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, cases.size() - 1);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        GeneratedData out{Dataset(p), {}};
        out.data.reserve(n);
        out.outcomes.reserve(n);
        std::vector<double> x(p);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = static_cast<Eigen::Index>(pick(rng));
            for (std::size_t j = 0; j < p; ++j) x[j] = cases.x(row, static_cast<Eigen::Index>(j));
            const double y = cases.y(row);
            const bool missing = unif(rng) < mechanism_prob(mechanism, x, y);
            out.data.add_row(x, missing ? std::nullopt : std::optional<double>(y));
            out.outcomes.push_back(y);
        }
        return out;
    };
}

MechanismSpec real_data_mechanism(char scenario) {
    MechanismSpec mech;
    mech.shape = MechanismShape::scenario_one(Link::Logit, 1);
    switch (scenario) {
        case 'A':
        case 'a':
            mech.lambda = {50.0, -5.0};
            mech.psi = {0.016};
            break;
        case 'B':
        case 'b':
            mech.lambda = {-52.0, 5.0};
            mech.psi = {-0.017};
            break;
        default: throw ConfigError(std::string("unknown real-data scenario '") + scenario + "' (expected A or B)");
    }
    return mech;
}

BootstrapReport run_bootstrap_real(const CompleteCases& cases, const BootstrapStudy& study,
                                   const SimulationSettings& settings) {
    if (cases.size() < 100) throw ConfigError("real-data bootstrap needs at least 100 complete cases");
    BootstrapReport report;
    report.ols = fit_ols(cases);

    ModelSpec design_model;
    design_model.regression = report.ols.regression();
    design_model.covariates = study.covariates;
    design_model.mechanism = study.mechanism;
    design_model.validate();

    report.model_missing_fraction = prob_missing(design_model, study.power.search.quadrature);
    if (std::abs(report.model_missing_fraction - study.expected_missing_fraction) > study.preflight_tolerance) {
        report.warnings.push_back("model missing fraction " + std::to_string(report.model_missing_fraction) +
                                  " deviates from the expected " + std::to_string(study.expected_missing_fraction) +
                                  " by more than " + std::to_string(study.preflight_tolerance));
    }

    std::vector<CurveSpec> curves;
    if (study.power.include_optimal)
        curves.push_back(optimal_curve(design_model, study.c1_grid, study.power.criterion, study.power.link_mode,
                                       study.power.search, "optimal", &report.designs));
    if (study.power.include_random) curves.push_back(random_curve(design_model, study.c1_grid, study.power.link_mode));

    const DataGenerator base = bootstrap_generator(cases, study.mechanism, cases.size());
    std::vector<double> fraction(settings.replications, 0.0);
    const DataGenerator recorded = [&](std::uint64_t seed) {
        GeneratedData g = base(seed);
        fraction[seed - settings.seed] =
            static_cast<double>(g.data.missing_count()) / static_cast<double>(g.data.size());
        return g;
    };
    report.curves = run_curves(recorded, study.mechanism, curves, settings);
    report.injected_missing_fraction =
        std::accumulate(fraction.begin(), fraction.end(), 0.0) / static_cast<double>(fraction.size());
    return report;
}

}  // namespace mnar
