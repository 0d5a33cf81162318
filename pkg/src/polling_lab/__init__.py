"""Two-queue polling model with exponential visit timers: analysis and simulation."""
from .errors import *  # noqa: F401,F403
from .model import (
    Deterministic,
    Erlang,
    Exponential,
    HyperExponential,
    Pareto,
    PollingModel,
    QueueParams,
    check_stability,
)

__version__ = "0.1.0"

__all__ = [
    "Deterministic",
    "Erlang",
    "Exponential",
    "HyperExponential",
    "Pareto",
    "PollingModel",
    "QueueParams",
    "check_stability",
]
