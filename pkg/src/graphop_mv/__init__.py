"""Entropy-method toolkit for mean-field equations on graph limits."""

from .errors import (CFLViolationError, ConvergenceWarning, DimensionError, InvalidParameterError,
                     PositivityError, SelfAdjointnessError)
from .graphops import (GraphopOperator, NetworkSpace, PowerLawParams, constant_graphon,
                       identity_graphop, numerical_radius, power_law_graphop, spherical_graphop)
from .solver import DensityField, SolverConfig, make_initial_condition, run, steady_state
from .torus import InteractionPotential, TorusGrid, make_cosine_potential, make_kuramoto_potential

__version__ = "0.1.0"

__all__ = [
    "CFLViolationError", "ConvergenceWarning", "DensityField", "DimensionError", "GraphopOperator",
    "InteractionPotential", "InvalidParameterError", "NetworkSpace", "PositivityError", "PowerLawParams",
    "SelfAdjointnessError", "SolverConfig", "TorusGrid", "constant_graphon", "identity_graphop",
    "make_cosine_potential", "make_initial_condition", "make_kuramoto_potential", "numerical_radius",
    "power_law_graphop", "run", "spherical_graphop", "steady_state",
]
