"""Figures from the simulator's metrics.csv and run.json files."""

from .series import KINDS, SchemaError, build_series, moving_average

__all__ = ["KINDS", "SchemaError", "build_series", "moving_average"]
