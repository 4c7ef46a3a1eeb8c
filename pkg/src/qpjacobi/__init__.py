"""Finite-scale numerics for quasiperiodic Jacobi matrices.

The operator acts on sequences by

    (H phi)(n) = -b(x + (n+1) w) phi(n+1) - b~(x + n w) phi(n-1) + a(x + n w) phi(n)

with ``a`` real, ``b`` complex and ``b~`` the analytic extension of
``conj(b)``.  Submodules cover frequencies, sampling functions, finite
windows, transfer cocycles, the Avalanche Principle, Green's functions,
localization diagnostics and resonance elimination; :mod:`qpjacobi.harness`
is the command-line driver.
"""
from .frequency import GOLDEN, SILVER, continued_fraction, diophantine_check, torus_norm
from .intervals import IntervalUnion
from .operator import (JacobiWindow, SpectralData, build_window, determinant, dirichlet_eigenvector,
                       eigensystem, eigenvalues)
from .sampling import SamplingPair, TrigPolynomial, evaluate, load_model, mean_log_modulus, truncate
from .scaled import ScaledMatrix2, ScaledValue
from .transfer import birkhoff_sums, count_zeros_disk, lyapunov, transfer_product

__version__ = "0.1.0"

__all__ = [
    "GOLDEN", "SILVER", "continued_fraction", "diophantine_check", "torus_norm",
    "IntervalUnion",
    "JacobiWindow", "SpectralData", "build_window", "determinant", "dirichlet_eigenvector",
    "eigensystem", "eigenvalues",
    "SamplingPair", "TrigPolynomial", "evaluate", "load_model", "mean_log_modulus", "truncate",
    "ScaledMatrix2", "ScaledValue",
    "birkhoff_sums", "count_zeros_disk", "lyapunov", "transfer_product",
    "__version__",
]
