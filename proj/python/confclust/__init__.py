"""Split conformal confidence sets for cluster labels.

Labels are 1-based everywhere in this module. Generator, clusterer, classifier and
experiment configurations are plain dicts with the same keys as the CLI configs.
"""

import csv
import io
import json

import numpy as np

from . import _core
from ._core import (
    InvalidArgument,
    Pipeline,
    PipelineError,
    aps_score,
    calibration_threshold,
    cutoff_set,
    prediction_set,
    solve_assignment,
)

__all__ = [
    "InvalidArgument",
    "Pipeline",
    "PipelineError",
    "aps_score",
    "calibration_threshold",
    "cutoff_set",
    "evaluate_coverage",
    "fit",
    "prediction_set",
    "run_diagnostics",
    "run_experiment",
    "simulate",
    "solve_assignment",
]


def simulate(generator, n, seed):
    """Draw n points; returns (X of shape (n, p), labels of shape (n,))."""
    X, y = _core.simulate(json.dumps(generator), int(n), int(seed))
    return np.asarray(X), np.asarray(y, dtype=np.int64)


def fit(X, K, seed, *, alpha=0.1, train_fraction=0.5, mode="stochastic", clusterer=None, classifier=None,
        skip_classifier=False, labels=None):
    """Fit a conformal pipeline. With `labels`, clustering is skipped (exchangeable control)."""
    return _core.fit_pipeline(
        np.asarray(X, dtype=np.float64), int(K), int(seed), alpha, train_fraction, mode,
        json.dumps(clusterer or {}), json.dumps(classifier or {}), skip_classifier,
        None if labels is None else [int(v) for v in labels],
    )


def evaluate_coverage(pipeline, X, labels):
    """Oracle-aligned coverage report as a dict."""
    return json.loads(_core.evaluate_coverage(pipeline, np.asarray(X, dtype=np.float64), [int(v) for v in labels]))


def run_diagnostics(generator, n, reps, seed, *, alpha=0.1, clusterer=None):
    return json.loads(_core.run_diagnostics(json.dumps(generator), json.dumps(clusterer or {}), int(n), int(reps),
                                            alpha, int(seed)))


def _rows(text):
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def run_experiment(config, seed):
    """Returns (tidy rows, aggregate rows) as lists of dicts with string values."""
    tidy, aggregate = _core.run_experiment(json.dumps(config), int(seed))
    return _rows(tidy), _rows(aggregate)
