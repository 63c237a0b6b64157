"""Wi-Fi sensing toolkit: simulator, CSI synthesis, features and inverse model."""

from ._core import (
    EVENTS,
    SLOTS,
    ConfigError,
    DataError,
    Model,
    UnifiError,
    config_fingerprint,
    default_config,
    extract_features,
    generate_sequence,
    normalize_config,
    range_rate,
    simulate,
    synthesize_csi,
    train,
    wavelength,
)

__all__ = [
    "EVENTS",
    "SLOTS",
    "ConfigError",
    "DataError",
    "Model",
    "UnifiError",
    "config_fingerprint",
    "default_config",
    "extract_features",
    "generate_sequence",
    "normalize_config",
    "range_rate",
    "simulate",
    "synthesize_csi",
    "train",
    "wavelength",
]
