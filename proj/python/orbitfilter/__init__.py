"""Python bindings for the orbitfilter C++ core."""

from ._orbitfilter import (
    ConfigError,
    Error,
    FormatError,
    Model,
    ShapeError,
    arch_names,
    calibrate,
    default_link,
    default_mac_rate,
    display_name,
    generate_synthetic,
    mac_count,
    metrics,
    normalize_config,
    resize_bilinear,
    run_experiment,
    transmit,
)

__all__ = [
    "ConfigError",
    "Error",
    "FormatError",
    "Model",
    "ShapeError",
    "arch_names",
    "calibrate",
    "default_link",
    "default_mac_rate",
    "display_name",
    "generate_synthetic",
    "mac_count",
    "metrics",
    "normalize_config",
    "resize_bilinear",
    "run_experiment",
    "transmit",
]
