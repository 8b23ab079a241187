"""Discrete-event simulator of leaf-spine data center networks running a
PISA-style traffic engineering pipeline, with ECMP and HULA baselines."""

from .config import ExperimentConfig, load_config
from .experiment import run_cell, sweep
from .network import InvariantViolation, Network
from .topology import ConfigError

__all__ = ["ConfigError", "ExperimentConfig", "InvariantViolation", "Network", "load_config", "run_cell", "sweep"]
__version__ = "0.1.0"
