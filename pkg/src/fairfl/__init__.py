"""Fluid-antenna-aided over-the-air federated learning simulator."""

from .channel import port_correlations, sample_symbol_channels, symbol_channels
from .config import ConfigError, ExperimentConfig, load_config
from .estimator import FAirFLClassifier, NumericalAbort
from .experiment import run_experiment
from .learner import MLP
from .numerics import bessel_j0, dbm_to_linear, derive_stream

__all__ = [
    "FAirFLClassifier",
    "NumericalAbort",
    "MLP",
    "ExperimentConfig",
    "ConfigError",
    "load_config",
    "run_experiment",
    "bessel_j0",
    "dbm_to_linear",
    "derive_stream",
    "port_correlations",
    "sample_symbol_channels",
    "symbol_channels",
]

__version__ = "0.1.0"
