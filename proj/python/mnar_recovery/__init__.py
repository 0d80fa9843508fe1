"""Recovery sampling designs for testing missing-not-at-random data."""

import json

from . import _core
from ._core import (
    ConfigError,
    Error,
    NumericalError,
    SpecificationError,
    approx_power,
    noncentral_chi2_cdf,
)

__all__ = [
    "ConfigError",
    "Error",
    "NumericalError",
    "SpecificationError",
    "approx_power",
    "evaluate_region",
    "noncentral_chi2_cdf",
    "optimize_region",
    "prob_missing",
    "run_cli",
]


def _dump(doc):
    return doc if isinstance(doc, str) else json.dumps(doc)


def prob_missing(model):
    """Pr(M=1) for a model document (dict or JSON string)."""
    return _core.prob_missing(_dump(model))


def evaluate_region(model, c1, region=None, criterion="ncp", link_mode="auto", n=1000):
    """Scores a recovery region; region is a list of [lower, upper] per covariate (None = unbounded)."""
    text = "" if region is None else _dump(region)
    return json.loads(_core.evaluate_region(_dump(model), c1, text, criterion, link_mode, n))


def optimize_region(model, c1, criterion="variance", link_mode="auto", n=1000, starts=20, seed=20240601):
    """Searches the recovery region for one recovery proportion."""
    return json.loads(_core.optimize_region(_dump(model), c1, criterion, link_mode, n, starts, seed))


def run_cli(*args):
    """Runs a command line; returns (exit_code, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])
