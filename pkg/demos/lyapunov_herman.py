"""Lyapunov exponent of the almost Mathieu family against Herman's bound.

For ``a(x) = 2 lam cos(2 pi x)`` and ``b = 1`` the exponent satisfies
``L(E) >= log lam`` on the spectrum when ``lam > 1``.  We sample energies
from a finite window and compare ``L_N`` with that floor for a few
couplings, then show how ``L_N`` settles as ``N`` grows.
"""
import math

import numpy as np

from qpjacobi import GOLDEN, eigenvalues, lyapunov
from qpjacobi.frequency import convergent_grid_size
from qpjacobi.models import almost_mathieu

grid = convergent_grid_size(GOLDEN, 4096)
print(f"phase grid: {grid} points (a Fibonacci denominator)")

print("\ncoupling   log(lam)   min L_256 over 8 energies")
for lam in (1.5, 2.0, 3.0, 5.0):
    pair = almost_mathieu(lam)
    spec = eigenvalues(pair, 0.1, GOLDEN, 0, 127)
    Ls = [lyapunov(pair, 0.0, GOLDEN, float(E), 256, grid).value for E in spec[8::16]]
    print(f"{lam:8.1f}   {math.log(lam):8.4f}   {min(Ls):8.4f}")

pair = almost_mathieu(3.0)
E = float(eigenvalues(pair, 0.1, GOLDEN, 0, 127)[40])
print(f"\nconvergence at E = {E:.6f} (lam = 3)")
for N in (16, 32, 64, 128, 256, 512):
    est = lyapunov(pair, 0.0, GOLDEN, E, N, grid)
    print(f"N = {N:4d}   L_N = {est.value:.6f}   quadrature error ~ {est.quadrature_error_estimate:.1e}"
          f"   |L - (L^a - D)| = {est.relation_residual:.1e}")

# N L_N is subadditive, so L_N decreases towards L along doublings
vals = [lyapunov(pair, 0.0, GOLDEN, E, N, grid).value for N in (32, 64, 128, 256)]
print("\nL_N along doublings nonincreasing:", bool(np.all(np.diff(vals) <= 1e-3)))
