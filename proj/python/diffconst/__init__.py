"""Differentiable satellite constellation design."""

import json

from ._core import (
    AnalysisError,
    ConfigError,
    Elements,
    GeoError,
    MetricsReport,
    OptimError,
    RunResult,
    SpecError,
    TraceRow,
    evaluate,
    numpy_uniform,
    presets,
    walker,
)
from ._core import Experiment as _Experiment

__all__ = [
    "AnalysisError",
    "ConfigError",
    "Elements",
    "Experiment",
    "GeoError",
    "MetricsReport",
    "OptimError",
    "RunResult",
    "SpecError",
    "TraceRow",
    "evaluate",
    "numpy_uniform",
    "presets",
    "walker",
]


def Experiment(preset="exp2", overrides=None, threads=0):
    """Resolved experiment from a preset plus optional config overrides (a dict
    in the run-directory config.json layout)."""
    return _Experiment(preset, json.dumps(overrides) if overrides else "", threads)
