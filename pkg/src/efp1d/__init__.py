"""Fourier spectral solvers for the 1D Gross-Pitaevskii equation.

The package provides an extended Fourier pseudospectral (eFP) spatial
discretization that never samples the potential pointwise — the
potential enters only through spectrally projected phase factors — plus
Lie-Trotter and Strang time splittings on top of it, a quadrature-based
Fourier spectral baseline, and a convergence-study harness.
"""

from efp1d.errors import BlowUpError, ConfigError, QuadratureError
from efp1d.spectral import (
    Domain,
    NodalField,
    SpectralField,
    UniformGrid,
    diff_norm,
    evaluate_on_grid,
    extended_product,
    free_flow,
    interpolate,
    sample_function,
    sobolev_norm,
    truncate,
)

__all__ = [
    "BlowUpError",
    "ConfigError",
    "QuadratureError",
    "Domain",
    "UniformGrid",
    "SpectralField",
    "NodalField",
    "interpolate",
    "evaluate_on_grid",
    "truncate",
    "free_flow",
    "extended_product",
    "sobolev_norm",
    "diff_norm",
    "sample_function",
]

__version__ = "0.1.0"
