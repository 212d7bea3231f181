"""Verification laboratory for 1D hyperbolic conservation laws."""

from .bv import Interval, PiecewiseConstantFn, l1_distance, total_variation
from .models import Burgers, LinearSystem, PSystem, make_model

__all__ = [
    "Interval",
    "PiecewiseConstantFn",
    "l1_distance",
    "total_variation",
    "Burgers",
    "PSystem",
    "LinearSystem",
    "make_model",
]
