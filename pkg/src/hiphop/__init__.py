"""Periodic hip-hop solutions of the equal-mass 2N-body problem."""
from .model import Params, ReducedState, derived_constants

__all__ = ["Params", "ReducedState", "derived_constants"]
__version__ = "0.1.0"
