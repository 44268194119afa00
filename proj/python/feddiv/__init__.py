"""Python bindings for the FedDiv noisy-label federated learning simulator."""

import json

from ._core import (
    ConfigError,
    GmmFit,
    GmmParams,
    Model,
    aggregate_filters,
    debias_logits,
    fedavg_aggregate,
    fit_local_gmm,
    gmm_posterior_clean,
    init_model,
    make_blobs,
    softmax,
    training_stability,
)
from . import _core

__all__ = [
    "ConfigError",
    "GmmFit",
    "GmmParams",
    "Model",
    "aggregate_filters",
    "debias_logits",
    "default_config",
    "fedavg_aggregate",
    "fit_local_gmm",
    "gmm_posterior_clean",
    "init_model",
    "make_blobs",
    "run_experiment",
    "softmax",
    "training_stability",
]


def default_config():
    """Default run configuration as a dict."""
    return json.loads(_core._default_config_json())


def run_experiment(config=None, **overrides):
    """Run one experiment and return its summary, including a per-round curve.

    ``config`` is a dict of config fields; keyword arguments override it.
    Unknown fields and invalid values raise ``ConfigError``.
    """
    merged = dict(config or {})
    merged.update(overrides)
    return json.loads(_core._run_experiment_json(json.dumps(merged)))
