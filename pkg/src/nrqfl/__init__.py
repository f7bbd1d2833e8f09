"""Desk-scale simulator for noise-resilient quantum federated aggregation."""

from .config import ExperimentConfig, parse_config
from .qcore import (
    DensityMatrix,
    KrausChannel,
    NoiseModel,
    Observable,
    amplitude_damping_channel,
    dephasing_channel,
    depolarizing_channel,
)

__all__ = [
    "DensityMatrix",
    "ExperimentConfig",
    "KrausChannel",
    "NoiseModel",
    "Observable",
    "amplitude_damping_channel",
    "dephasing_channel",
    "depolarizing_channel",
    "parse_config",
]
