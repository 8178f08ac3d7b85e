"""Simulator and diagnostics for the isotropic three-operator wave kinetic equation."""

__version__ = "0.1.0"
