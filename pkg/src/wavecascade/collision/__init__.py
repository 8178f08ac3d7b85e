"""Discrete 3-wave and 4-wave collision operators on a frequency grid."""

from .rates import RateResult, apply
from .tables import OPERATORS, CollisionTables, Toggles, build_tables
from .weak import weak_eval

__all__ = ["OPERATORS", "CollisionTables", "RateResult", "Toggles", "apply",
           "build_tables", "weak_eval"]
