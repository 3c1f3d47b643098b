"""Simulator for Hilbert-space scarring in dimerized spin-1/2 XY models."""

__version__ = "0.1.0"

from . import analysis, dynamics, hamiltonian, hilbert, model, spectral
from .errors import (
    CapacityError,
    ConfigError,
    DispersiveRegimeError,
    IntegrationError,
    SymmetryAbsentError,
)

__all__ = [
    "analysis",
    "dynamics",
    "hamiltonian",
    "hilbert",
    "model",
    "spectral",
    "CapacityError",
    "ConfigError",
    "DispersiveRegimeError",
    "IntegrationError",
    "SymmetryAbsentError",
    "__version__",
]
