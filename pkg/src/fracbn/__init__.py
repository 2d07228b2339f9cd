"""Spectral fractional operators with variable coefficients and critical-exponent tests.

Subpackages and modules
-----------------------
domain       descriptors, grids and coefficient fields
operator     stiffness assembly, spectral decomposition, fractional powers
extension    weighted cylinder extension and Dirichlet-to-Neumann map
bubbles      extremal profiles, their extensions and test functions
energy       Sobolev quotient, sharp constants, Nehari minimization, certificates
pohozaev     Pohozaev identity and nonexistence audit
asymptotics  scaling-law sweeps and exponent fits
experiments  configuration, caching, reports and the command-line interface
"""

__version__ = "0.1.0"

from .exceptions import (ContainmentError, ConvergenceError, FracBNError, HypothesisViolation, NumericalError,
                         PreconditionError, QuadratureError)

__all__ = [
    "__version__",
    "FracBNError",
    "PreconditionError",
    "HypothesisViolation",
    "ContainmentError",
    "NumericalError",
    "ConvergenceError",
    "QuadratureError",
]
