"""PyTorch-like model-building API over the fennsim toolchain."""

from .model import (LI, LIF, EventContainer, Linear, NeuronUpdateProcess,
                    Parameter, PyFennError, Variable)
from .network import Network, RunResult, run

__all__ = [
    "EventContainer",
    "LI",
    "LIF",
    "Linear",
    "Network",
    "NeuronUpdateProcess",
    "Parameter",
    "PyFennError",
    "RunResult",
    "Variable",
    "run",
]
