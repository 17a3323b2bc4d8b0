"""Confidence-guided training for continuous time-series classification."""

import json as _json

from ._core import (
    CctrainError,
    ConfigError,
    auc_roc,
    data_uncertainty,
    evaluate_run,
    prediction_interval,
    should_stop,
    transfer_metrics,
)
from . import _core as _impl

__all__ = [
    "CctrainError",
    "ConfigError",
    "auc_roc",
    "data_uncertainty",
    "evaluate_run",
    "gen_data",
    "prediction_interval",
    "run_pipeline",
    "should_stop",
    "transfer_metrics",
]


def _config_text(config):
    if isinstance(config, str):
        return config
    return _json.dumps(config)


def gen_data(config):
    """Write the config's synthetic dataset CSV; returns its path."""
    return _impl.gen_data(_config_text(config))


def run_pipeline(config, run_dir=""):
    """Train per the config (dict or JSON text) and return the metrics dict."""
    return _impl.run_pipeline(_config_text(config), run_dir)
