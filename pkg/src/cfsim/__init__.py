"""Uplink cell-free massive MIMO simulator with subspace-projection decontamination."""

from cfsim.config import ConfigError, Estimator, Scheme, SimConfig, WgfMetric, load_config

__all__ = [
    "ConfigError",
    "Estimator",
    "Scheme",
    "SimConfig",
    "WgfMetric",
    "load_config",
]

__version__ = "0.1.0"
