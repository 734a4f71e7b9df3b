"""Transdimensional Poisson point process models of vehicular networks.

SIR meta distributions for vehicles on Poisson line and stick street systems,
their transdimensional (1D + 2D PPP) approximation, a Monte Carlo oracle, and
meta-distribution based transmit-rate control.
"""

from .model import (
    PLP,
    PSP,
    AlphaOutOfRange,
    Deterministic,
    DerivedParams,
    Model,
    NetworkParams,
    NonPositiveParam,
    ParameterError,
    ProbOutOfRange,
    Rayleigh,
    load_params,
    validate,
)
from .numerics import MaxSubdivisions, NoConvergence, NoSignChange

__version__ = "0.1.0"

__all__ = [
    "PLP",
    "PSP",
    "AlphaOutOfRange",
    "Deterministic",
    "DerivedParams",
    "MaxSubdivisions",
    "Model",
    "NetworkParams",
    "NoConvergence",
    "NoSignChange",
    "NonPositiveParam",
    "ParameterError",
    "ProbOutOfRange",
    "Rayleigh",
    "load_params",
    "validate",
    "__version__",
]
