"""Nonautonomous Ornstein-Uhlenbeck processes: kernels, entrance laws and their asymptotics."""
from .coefficients import BUILTINS, CoefficientField, DomainError, UsageError, builtin
from .measures import entrance_law, transition_kernel
from .propagator import get_propagator

__version__ = "0.1.0"

__all__ = ["BUILTINS", "CoefficientField", "DomainError", "UsageError", "builtin",
           "entrance_law", "transition_kernel", "get_propagator", "__version__"]
