import math

import pytest

import mnar_recovery as mr

SINGLE_COVARIATE = {
    "regression": {"beta0": 2.0, "beta": [-2.0], "sigma_y": 2.0},
    "covariates": [{"type": "normal", "mean": 0.0, "sd": 4.0}],
    "link": "logit",
    "mechanism": {"scenario": 1, "lambda": [-2.0, 0.4], "psi": [-0.15]},
}


def test_prob_missing():
    assert mr.prob_missing(SINGLE_COVARIATE) == pytest.approx(0.2441, abs=5e-4)


def test_noncentral_chi2_df1():
    x, ncp = 3.84, 4.0
    a, r = math.sqrt(ncp), math.sqrt(x)
    phi = lambda t: 0.5 * math.erfc(-t / math.sqrt(2.0))
    assert mr.noncentral_chi2_cdf(x, 1, ncp) == pytest.approx(phi(r - a) - phi(-r - a), abs=1e-10)
    assert mr.approx_power(0.0, 1) == pytest.approx(0.05, abs=1e-10)


def test_evaluate_random_region():
    e = mr.evaluate_region(SINGLE_COVARIATE, 0.3)
    assert e["c2"] == 1.0
    assert e["slack"] == pytest.approx(0.7 * mr.prob_missing(SINGLE_COVARIATE), rel=1e-8)
    assert 0.0 < e["approx_power"] < 1.0


def test_optimized_region_beats_random():
    best = mr.optimize_region(SINGLE_COVARIATE, 0.3, starts=4)
    random = mr.evaluate_region(SINGLE_COVARIATE, 0.3, criterion="variance")
    assert best["slack"] >= -1e-9
    assert best["approx_power"] > random["approx_power"]


def test_errors_map_to_exceptions():
    bad = dict(SINGLE_COVARIATE, regression={"beta0": 2.0, "beta": [-2.0], "sigma_y": -1.0})
    with pytest.raises(mr.ConfigError):
        mr.prob_missing(bad)
    assert issubclass(mr.ConfigError, mr.Error)


def test_cli_usage_error():
    code, _, err = mr.run_cli("frobnicate")
    assert code == 1
    assert "unknown command" in err


def test_shipped_configs_follow_the_schema():
    jsonschema = pytest.importorskip("jsonschema")
    import json
    import pathlib

    root = pathlib.Path(__file__).resolve().parents[2]
    schema = json.loads((root / "docs" / "config.schema.json").read_text())
    for path in sorted((root / "configs").glob("*.json")):
        jsonschema.validate(json.loads(path.read_text()), schema)
