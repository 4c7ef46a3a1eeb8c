"""Continued fractions, torus distance and Diophantine scans for frequencies."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ContinuedFraction",
    "DiophantineReport",
    "continued_fraction",
    "torus_norm",
    "diophantine_check",
    "convergent_grid_size",
    "GOLDEN",
    "SILVER",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SILVER = math.sqrt(2.0) - 1.0

# remainders below this are treated as an exact rational hit
_UNDERFLOW = 1e-12


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients ``a_1, a_2, ...`` of ``omega = [0; a_1, a_2, ...]``.

    ``convergents[s] = (p_s, q_s)`` with ``p_0/q_0 = 0/1``.
    ``terminating`` is set when the Gauss map hit an (approximately) rational
    remainder before ``depth`` was exhausted.
    """

    omega: float
    partial_quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    terminating: bool

    @property
    def denominators(self) -> tuple[int, ...]:
        return tuple(q for _, q in self.convergents)


@dataclass(frozen=True)
class DiophantineReport:
    c: float
    alpha: float
    n_max: int
    worst_n: int
    worst_margin: float
    passes: bool


def continued_fraction(omega: float, depth: int) -> ContinuedFraction:
    """Expand ``omega`` in (0, 1) by the Gauss map ``t -> {1/t}``."""
    if depth < 1:
        raise ValueError("depth must be positive")
    omega = float(omega)
    if not 0.0 < omega < 1.0:
        raise ValueError(f"omega must lie in (0, 1), got {omega}")
    quotients: list[int] = []
    convergents = [(0, 1)]
    p_prev, q_prev = 1, 0
    p, q = 0, 1
    t = omega
    terminating = False
    for _ in range(depth):
        inv = 1.0 / t
        a = int(math.floor(inv + _UNDERFLOW))
        quotients.append(a)
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        convergents.append((p, q))
        t = inv - a
        if t < _UNDERFLOW:
            terminating = True
            break
    return ContinuedFraction(omega, tuple(quotients), tuple(convergents), terminating)


def torus_norm(t):
    """Distance from ``t`` to the nearest integer (works elementwise)."""
    r = np.abs(np.asarray(t, dtype=float) - np.rint(t))
    return float(r) if r.ndim == 0 else r


def diophantine_check(omega: float, c: float, alpha: float, n_max: int) -> DiophantineReport:
    """Exhaustive scan of ``||n omega|| n (log n)^alpha / c`` over ``2 <= n <= n_max``."""
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    n = np.arange(2, n_max + 1, dtype=np.int64)
    # n*omega in float is fine up to n ~ 1e12 at double precision
    margins = torus_norm(n * omega) * n * np.log(n) ** alpha / c
    i = int(np.argmin(margins))
    worst = float(margins[i])
    return DiophantineReport(c, alpha, n_max, int(n[i]), worst, worst >= 1.0)


def convergent_grid_size(omega: float, target: int = 4096, depth: int = 40) -> int:
    """Convergent denominator of ``omega`` closest to ``target``.

    Falls back to ``target`` itself when the expansion terminates early with
    only small denominators (rational or nearly rational ``omega``).
    """
    cf = continued_fraction(omega, depth)
    qs = [q for q in cf.denominators if q >= 8]
    if not qs:
        return target
    best = min(qs, key=lambda q: (abs(q - target), q))
    if best < target // 4:
        return target
    return best
