"""Simulation toolkit for the externally driven quantum Van der Pol oscillator."""

__version__ = "0.1.0"

from qvdp.errors import (
    ConfigError,
    DomainError,
    InstabilityError,
    QvdpError,
    ResourceError,
    SolverError,
)
from qvdp.hilbert import FockSpace

__all__ = [
    "__version__",
    "FockSpace",
    "QvdpError",
    "ConfigError",
    "ResourceError",
    "SolverError",
    "InstabilityError",
    "DomainError",
]
