#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "mnar/cli.hpp"
#include "mnar/error.hpp"
#include "mnar/io.hpp"
#include "mnar/quadrature.hpp"

using namespace mnar;
namespace fs = std::filesystem;

namespace {

const char* kModel = R"({
  "regression": {"beta0": 2.0, "beta": [-2.0], "sigma_y": 2.0},
  "covariates": [{"type": "normal", "mean": 0.0, "sd": 4.0}],
  "link": "logit",
  "mechanism": {"scenario": 1, "lambda": [-2.0, 0.4], "psi": [-0.15]}
})";

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("mnar_io_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

}  // namespace

TEST_SUITE("io") {
    TEST_CASE("model documents round trip") {
        const ModelSpec m = model_from_json(Json::parse(kModel));
        CHECK(prob_missing(m) == doctest::Approx(prob_missing(fixtures::single_covariate())).epsilon(1e-14));
        const ModelSpec again = model_from_json(to_json(m));
        CHECK(again.mechanism.lambda == m.mechanism.lambda);
        CHECK(again.mechanism.shape.z_terms == m.mechanism.shape.z_terms);
        CHECK(to_json(again) == to_json(m));

        Json explicit_terms = Json::parse(kModel);
        explicit_terms["mechanism"] = {{"w", {"1", "x1"}}, {"z", {"x1*y", "y"}}, {"lambda", {-1, -0.5}}, {"psi", {0.05, 0.1}}};
        const ModelSpec three = model_from_json(explicit_terms);
        CHECK(three.mechanism.shape.z_terms[0] == OutcomeTerm::interaction(0));
    }

    TEST_CASE("schema violations are configuration errors") {
        Json doc = Json::parse(kModel);
        doc["extra"] = 1;
        CHECK_THROWS_AS(model_from_json(doc), ConfigError);
        doc = Json::parse(kModel);
        doc["regression"].erase("sigma_y");
        CHECK_THROWS_AS(model_from_json(doc), ConfigError);
        doc = Json::parse(kModel);
        doc["regression"]["sigma_y"] = -1.0;
        CHECK_THROWS_AS(model_from_json(doc), ConfigError);
        doc = Json::parse(kModel);
        doc["covariates"][0]["type"] = "gamma";
        CHECK_THROWS_AS(model_from_json(doc), ConfigError);
        doc = Json::parse(kModel);
        doc["mechanism"]["lambda"] = {1.0};
        CHECK_THROWS_AS(model_from_json(doc), ConfigError);
        CHECK_THROWS_AS(experiment_from_json(Json{{"experiment", {{"c1_grid", {0.0}}}}}), ConfigError);
        CHECK_THROWS_AS(experiment_from_json(Json{{"experiment", {{"replications", 0}}}}), ConfigError);
        CHECK_THROWS_AS(experiment_from_json(Json{{"experiment", {{"criterion", "bogus"}}}}), ConfigError);
    }

    TEST_CASE("regions in JSON") {
        const Region r = region_from_json(Json::parse("[[null, 2.5]]"), 1);
        CHECK(std::isinf(r.intervals(0)[0].lower));
        CHECK(r.intervals(0)[0].upper == 2.5);
        CHECK(to_json(r) == Json::parse("[[null, 2.5]]"));
        const Region u = region_from_json(Json::parse("[[[0, 1], [2, 3]]]"), 1);
        CHECK(u.intervals(0).size() == 2);
        CHECK_THROWS_AS(region_from_json(Json::parse("[[3, 1]]"), 1), ConfigError);
        CHECK_THROWS_AS(region_from_json(Json::parse("[[0, 1]]"), 2), ConfigError);
    }

    TEST_CASE("CSV reading skips incomplete rows") {
        std::istringstream in("id,x,y\n1,1.5,3\n2,,4\n3,2.5,\n\n4,\"3.5\",7\n");
        const CompleteCases c = read_complete_cases(in, {"x"}, "y");
        CHECK(c.rows_read == 4);
        CHECK(c.size() == 2);
        CHECK(c.x(1, 0) == 3.5);
        CHECK(c.y(1) == 7.0);
    }

    TEST_CASE("malformed CSV reports the line") {
        std::istringstream bad("x,y\n1,2\n3,abc\n");
        try {
            read_complete_cases(bad, {"x"}, "y");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
        std::istringstream ragged("x,y\n1,2,3\n");
        CHECK_THROWS_AS(read_complete_cases(ragged, {"x"}, "y"), ParseError);
        std::istringstream missing("a,b\n1,2\n");
        CHECK_THROWS_AS(read_complete_cases(missing, {"x"}, "y"), ConfigError);
    }

    TEST_CASE("curve CSV layout") {
        CurveResult c;
        c.label = "random";
        CurvePoint p;
        p.c1 = 0.5;
        p.rate = 0.25;
        p.se = 0.1;
        p.mse_psi = {0.01};
        p.mean_estimates = {1, 2, 3};
        p.kept = 10;
        c.points.push_back(p);
        std::ostringstream os;
        write_curves_csv(os, {c});
        CHECK(os.str() ==
              "c1,design,rate,se,mse_psi_1,discarded,kept,enlarged,mean_1,mean_2,mean_3\n"
              "0.5,random,0.25,0.1,0.01,0,10,0,1,2,3\n");
    }
}

TEST_SUITE("cli") {
    TEST_CASE("usage errors exit with 1") {
        std::string err;
        CHECK(cli({"frobnicate"}, nullptr, &err) == 1);
        CHECK(err.find("unknown command") != std::string::npos);
        CHECK(err.find("design") != std::string::npos);
        CHECK(cli({}) == 1);
        CHECK(cli({"design"}) == 1);
        CHECK(cli({"design", "--config", "/nonexistent.json"}) == 1);
    }

    TEST_CASE("configuration and numerical failures") {
        const fs::path dir = scratch_dir("codes");
        Json doc = {{"model", Json::parse(kModel)}};
        std::ofstream(dir / "mnar.json") << doc.dump();
        CHECK(cli({"type-one", "--config", (dir / "mnar.json").string(), "--out", (dir / "o").string()}) == 1);

        doc["model"]["link"] = "probit";
        doc["model"]["mechanism"]["lambda"] = {12.0, 0.0};
        doc["model"]["mechanism"]["psi"] = {0.0};
        doc["design"] = {{"starts", 2}};
        std::ofstream(dir / "hidden.json") << doc.dump();
        CHECK(cli({"design", "--config", (dir / "hidden.json").string(), "--c1", "0.5", "--out", (dir / "o").string()}) ==
              2);
    }

    TEST_CASE("same config and seed give identical files; manifests replay") {
        const fs::path dir = scratch_dir("replay");
        Json doc = {{"model", Json::parse(kModel)}, {"experiment", {{"c1_grid", {0.3, 0.6}}, {"replications", 30}}}};
        doc["model"]["mechanism"]["psi"] = {0.0};
        std::ofstream(dir / "cfg.json") << doc.dump();

        const std::string cfg = (dir / "cfg.json").string();
        REQUIRE(cli({"type-one", "--config", cfg, "--seed", "5", "--out", (dir / "a").string()}) == 0);
        REQUIRE(cli({"type-one", "--config", cfg, "--seed", "5", "--jobs", "2", "--out", (dir / "b").string()}) == 0);
        REQUIRE(cli({"type-one", "--config", (dir / "a" / "manifest.json").string(), "--out", (dir / "c").string()}) ==
                0);
        const std::string a = slurp(dir / "a" / "type_one.csv");
        CHECK(a == slurp(dir / "b" / "type_one.csv"));
        CHECK(a == slurp(dir / "c" / "type_one.csv"));
        CHECK(a.rfind("c1,design,rate,se,mse_psi_1,discarded", 0) == 0);

        const Json manifest = read_json_file((dir / "a" / "manifest.json").string());
        CHECK(manifest["command"] == "type-one");
        CHECK(manifest["config"]["experiment"]["seed"] == 5);
        CHECK(manifest["seeds"]["simulation"] == 5);

        REQUIRE(cli({"type-one", "--config", cfg, "--seed", "6", "--out", (dir / "d").string()}) == 0);
        CHECK(a != slurp(dir / "d" / "type_one.csv"));
    }

    TEST_CASE("design and criterion-eval write JSON") {
        const fs::path dir = scratch_dir("design");
        Json doc = {{"model", Json::parse(kModel)}, {"design", {{"starts", 4}, {"region", Json::parse("[[-12, 3]]")}}}};
        std::ofstream(dir / "cfg.json") << doc.dump();
        std::string out;
        REQUIRE(cli({"design", "--config", (dir / "cfg.json").string(), "--c1", "0.3", "--out", (dir / "o").string()},
                    &out) == 0);
        const Json result = Json::parse(out);
        CHECK(result["designs"][0]["c1"] == 0.3);
        CHECK(result["designs"][0]["slack"].get<double>() >= -1e-9);
        CHECK(result["designs"][0]["bounds"].size() == 1);
        CHECK(fs::exists(dir / "o" / "design.json"));
        CHECK(fs::exists(dir / "o" / "manifest.json"));

        REQUIRE(cli({"criterion-eval", "--config", (dir / "cfg.json").string(), "--c1", "0.3", "--out",
                     (dir / "e").string()},
                    &out) == 0);
        const Json eval = Json::parse(out);
        CHECK(eval["evaluations"][0]["bounds"] == Json::parse("[[-12.0, 3.0]]"));
        CHECK(eval["evaluations"][0]["gamma"].get<double>() > 0.0);
    }

    TEST_CASE("real-data command reads a CSV") {
        const fs::path dir = scratch_dir("real");
        {
            std::ofstream csv(dir / "cases.csv");
            csv << "x,y\n";
            std::mt19937_64 rng(3);
            std::normal_distribution<double> nd(0.0, 1.0);
            for (int i = 0; i < 300; ++i) {
                const double x = 11.0 + 1.2 * nd(rng);
                csv << x << ',' << 69.0 + 3.1 * x + 13.0 * nd(rng) << '\n';
            }
            csv << "12.0,\n";
        }
        std::string out;
        REQUIRE(cli({"real-data", "--csv", (dir / "cases.csv").string(), "--scenario", "B", "--reps", "4", "--c1",
                     "0.5", "--out", (dir / "o").string()},
                    &out) == 0);
        const Json report = read_json_file((dir / "o" / "real_data.json").string());
        CHECK(report["complete_cases"] == 300);
        CHECK(report["rows_read"] == 301);
        CHECK(fs::exists(dir / "o" / "real_data.csv"));
        CHECK(cli({"real-data", "--csv", (dir / "cases.csv").string(), "--scenario", "C", "--out",
                   (dir / "o").string()}) == 1);
        CHECK(cli({"real-data", "--csv", (dir / "nope.csv").string(), "--out", (dir / "o").string()}) == 1);
    }
}
