"""Numerics for periodic waves of a Hunter-Saxton-type equation and for
perturbations of its peaked wave."""

__version__ = "0.1.0"
