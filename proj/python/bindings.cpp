#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mnar/cli.hpp"
#include "mnar/design.hpp"
#include "mnar/error.hpp"
#include "mnar/io.hpp"
#include "mnar/power.hpp"
#include "mnar/quadrature.hpp"

namespace py = pybind11;
using namespace mnar;

namespace {

ModelSpec parse_model(const std::string& text) { return model_from_json(Json::parse(text)); }

Region parse_region(const ModelSpec& model, const std::string& text) {
    return text.empty() ? Region::unbounded(model.dimension()) : region_from_json(Json::parse(text), model.dimension());
}

DesignSearchOptions search_options(std::size_t n, std::size_t starts, std::uint64_t seed) {
    DesignSearchOptions opts;
    opts.n = n;
    opts.starts = starts;
    opts.seed = seed;
    return opts;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Recovery sampling designs for testing missing-not-at-random data";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<SpecificationError>(m, "SpecificationError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

    m.def("prob_missing", [](const std::string& model) { return prob_missing(parse_model(model)); }, py::arg("model"),
          "Pr(M=1) of a model document (JSON string).");

    m.def(
        "evaluate_region",
        [](const std::string& model, double c1, const std::string& region, const std::string& criterion,
           const std::string& link_mode, std::size_t n) {
            const ModelSpec spec = parse_model(model);
            const CriterionEvaluation e = evaluate_region(spec, c1, parse_region(spec, region), parse_criterion(criterion),
                                                          parse_link_mode(link_mode), search_options(n, 1, 0));
            return Json{{"c2", e.c2},
                        {"prob_recovered", e.prob_recovered},
                        {"prob_observed", e.prob_observed},
                        {"slack", e.slack},
                        {"gamma", e.gamma},
                        {"target_variance", e.target_variance},
                        {"approx_power", e.power}}
                .dump();
        },
        py::arg("model"), py::arg("c1"), py::arg("region") = "", py::arg("criterion") = "ncp",
        py::arg("link_mode") = "auto", py::arg("n") = 1000, "Scores a region; returns a JSON string.");

    m.def(
        "optimize_region",
        [](const std::string& model, double c1, const std::string& criterion, const std::string& link_mode,
           std::size_t n, std::size_t starts, std::uint64_t seed) {
            const ModelSpec spec = parse_model(model);
            DesignSearchResult r;
            {
                py::gil_scoped_release release;
                r = optimize_region(spec, c1, parse_criterion(criterion), parse_link_mode(link_mode),
                                    search_options(n, starts, seed));
            }
            return to_json(r).dump();
        },
        py::arg("model"), py::arg("c1"), py::arg("criterion") = "variance", py::arg("link_mode") = "auto",
        py::arg("n") = 1000, py::arg("starts") = 20, py::arg("seed") = 20240601,
        "Searches the recovery region; returns a JSON string.");

    m.def("noncentral_chi2_cdf", &noncentral_chi2_cdf, py::arg("x"), py::arg("df"), py::arg("ncp"));
    m.def("approx_power", &approx_power, py::arg("gamma"), py::arg("df"), py::arg("alpha") = 0.05);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out;
            std::ostringstream err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a command; returns (exit_code, stdout, stderr).");
}
