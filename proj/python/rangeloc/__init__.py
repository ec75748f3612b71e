"""Sliding-window range-only and range-orientation localization."""

from ._core import (
    Config,
    ConfigError,
    Error,
    InsufficientGeometry,
    InvalidRotation,
    ParseError,
    StreamError,
    exp_se3,
    exp_so3,
    localize,
    log_se3,
    log_so3,
    metrics,
    preset_anchors,
    preset_names,
    pseudo_huber,
    simulate,
)

__all__ = [
    "Config",
    "ConfigError",
    "Error",
    "InsufficientGeometry",
    "InvalidRotation",
    "ParseError",
    "StreamError",
    "exp_se3",
    "exp_so3",
    "localize",
    "log_se3",
    "log_so3",
    "metrics",
    "preset_anchors",
    "preset_names",
    "pseudo_huber",
    "simulate",
]
