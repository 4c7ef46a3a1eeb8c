"""Transfer cocycles, Birkhoff sums, Lyapunov exponents and zero counting.

The analytic transfer matrix is the ordered product

    M^a_N(z) = S_{N-1} ... S_0,
    S_j = [[a(z + j w) - E, -b~(z + j w)],
           [b(z + (j+1) w),  0          ]],

which never divides by ``b``.  The plain cocycle is
``M_N = M^a_N / prod_{j=1}^{N} b(z + j w)`` and the unimodular one is
``M^u_N = M_N / sqrt|det M_N|``.  All three are returned in scaled form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .frequency import convergent_grid_size
from .operator import orbit
from .sampling import SamplingPair, mean_log_modulus
from .scaled import LN2, ScaledMatrix2, ScaledValue, renormalize

__all__ = [
    "LyapunovEstimate",
    "BirkhoffSums",
    "ZeroCountError",
    "SingularCocycleError",
    "transfer_product",
    "birkhoff_sums",
    "lyapunov",
    "count_zeros_disk",
    "energy_slice",
    "phase_slice",
]

VARIANTS = ("plain", "a", "u")


class SingularCocycleError(ValueError):
    """``b`` (or ``b~``) vanishes on the orbit, so the requested variant is undefined."""

    def __init__(self, message: str, site: int):
        super().__init__(message)
        self.site = site


class ZeroCountError(RuntimeError):
    pass


@dataclass(frozen=True)
class BirkhoffSums:
    """``S_N = sum_{k<N} log|b(z + k w)|`` and the same with ``b~``.

    ``zero_sites`` lists orbit indices where ``b`` or ``b~`` vanished (the
    corresponding sums are ``-inf``).
    """

    S: np.ndarray
    S_tilde: np.ndarray
    zero_sites: tuple[int, ...]


@dataclass(frozen=True)
class LyapunovEstimate:
    N: int
    y: float
    E: complex
    value: float
    variant: str
    grid_size: int
    quadrature_error_estimate: float
    relation_residual: float
    D_N: float
    D: float
    excluded_points: int


def _compensated_sum(terms: np.ndarray) -> np.ndarray:
    """Neumaier summation along the leading axis."""
    s = np.zeros(terms.shape[1:])
    c = np.zeros(terms.shape[1:])
    for t in terms:
        u = s + t
        big = np.abs(s) >= np.abs(t)
        c = c + np.where(big, (s - u) + t, (t - u) + s)
        s = u
    with np.errstate(invalid="ignore"):
        out = s + c
    # -inf terms leave nan in the correction
    return np.where(np.isneginf(s), -np.inf, out)


def birkhoff_sums(pair: SamplingPair, z, omega: float, N: int) -> BirkhoffSums:
    """Compensated log-sums of ``|b|`` and ``|b~|`` along ``z, z + w, ..., z + (N-1) w``."""
    z = np.asarray(z, dtype=complex)
    _, b, tb = orbit(pair, z, omega, 0, max(N, 1))
    b, tb = b[:N], tb[:N]
    with np.errstate(divide="ignore"):
        lb = np.log(np.abs(b))
        ltb = np.log(np.abs(tb))
    S = _compensated_sum(lb)
    # on the real line |b~| = |b|; reuse the same terms so the sums agree exactly
    St = S.copy() if np.all(z.imag == 0) else _compensated_sum(ltb)
    dead = np.isneginf(lb) | np.isneginf(ltb)
    sites = tuple(int(k) for k in np.flatnonzero(dead.reshape(N, -1).any(axis=1))) if N else ()
    if z.ndim == 0:
        S, St = float(S), float(St)
    return BirkhoffSums(S, St, sites)


def _split_log(logval: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``exp(logval) = rem * 2**k`` with ``k`` integer and ``rem`` in ``[1, 2)``."""
    k = np.floor(logval / LN2)
    return np.exp(logval - k * LN2), k.astype(np.int64)


def _analytic_product(pair, z, omega, N, E, cadence):
    z = np.asarray(z, dtype=complex)
    E = np.asarray(E, dtype=complex)
    shape = np.broadcast_shapes(z.shape, E.shape)
    a, b, tb = orbit(pair, z, omega, 0, N + 1)
    m00 = np.ones(shape, complex)
    m01 = np.zeros(shape, complex)
    m10 = np.zeros(shape, complex)
    m11 = np.ones(shape, complex)
    ex = np.zeros(shape, np.int64)
    for j in range(N):
        p = a[j] - E
        q = -tb[j]
        r = b[j + 1]
        m00, m01, m10, m11 = p * m00 + q * m10, p * m01 + q * m11, r * m00, r * m01
        if (j + 1) % cadence == 0 or j == N - 1:
            ent = np.stack([np.stack([m00, m01], -1), np.stack([m10, m11], -1)], -2)
            ent, ex = renormalize(ent, ex)
            m00, m01, m10, m11 = ent[..., 0, 0], ent[..., 0, 1], ent[..., 1, 0], ent[..., 1, 1]
    ent = np.stack([np.stack([m00, m01], -1), np.stack([m10, m11], -1)], -2)
    if N == 0:
        ent, ex = renormalize(ent, ex)
    return ScaledMatrix2(ent, ex), b, tb


def transfer_product(pair: SamplingPair, z, omega: float, N: int, E, variant: str = "a",
                     cadence: int = 1, floor: float = 0.0) -> ScaledMatrix2:
    """``M_N``, ``M^a_N`` or ``M^u_N`` at ``(z, w, E)`` in scaled form.

    Parameters
    ----------
    variant : {"plain", "a", "u"}
    cadence : int
        Renormalize after every ``cadence`` steps.  Scaling is by powers of
        two, so the result does not depend on it (barring overflow).
    floor : float
        For ``plain``: ``|b(z + j w)|`` must exceed this for ``j = 1..N``.
        For ``u``: sites where ``|b|`` or ``|b~|`` is ``<= floor`` make the
        determinant vanish.

    Raises
    ------
    SingularCocycleError
        If the variant divides by a value of ``b`` that vanishes; ``site``
        names the first offending orbit index.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if N < 0:
        raise ValueError("N must be non-negative")
    if cadence < 1:
        raise ValueError("cadence must be positive")
    pair.check_strip(z)
    ma, b, tb = _analytic_product(pair, z, omega, N, E, cadence)
    if variant == "a":
        return ma
    bb = b[1:N + 1]
    bad = np.abs(bb) <= floor
    if variant == "u":
        bad = bad | (np.abs(tb[:N]) <= floor)
    if np.any(bad):
        site = int(np.flatnonzero(bad.reshape(N, -1).any(axis=1))[0])
        which = "b(z + {}w)".format(site + 1) if np.any(np.abs(bb[site]) <= floor) else f"b~(z + {site}w)"
        raise SingularCocycleError(f"{which} vanishes (|.| <= {floor}); site j={site}", site)
    logb = np.log(np.abs(bb)).sum(axis=0) if N else np.zeros(np.shape(ma.exp2))
    phase = np.prod(bb / np.abs(bb), axis=0) if N else 1.0
    # plain: divide by prod_{j=1}^{N} b(z + j w)
    logfac = -logb
    if variant == "u":
        logtb = np.log(np.abs(tb[:N])).sum(axis=0) if N else 0.0
        # |det M_N| = prod |b~_j| / |b_{j+1}|
        logfac = logfac - 0.5 * (logtb - logb)
    rem, k = _split_log(np.asarray(logfac, dtype=float))
    ent, ex = renormalize(ma.entries * (rem / phase)[..., None, None], ma.exp2 + k)
    return ScaledMatrix2(ent, ex)


def lyapunov(pair: SamplingPair, y: float, omega: float, E, N: int,
             grid_size: int | None = None, variant: str = "plain",
             floor: float = 1e-300) -> LyapunovEstimate:
    """``L_N(y, w, E) = (1/N) mean_x log||M_N(x + i y)||`` on an equispaced grid.

    The grid defaults to the convergent denominator of ``w`` nearest 4096.
    The quadrature error estimate compares with the half-cell shifted grid.
    ``relation_residual`` is ``|L_N - (L^a_N - D_N)|`` with ``D_N`` the
    matching grid average of ``S_N(x + w)/N``; ``D`` is the converged
    ``D(y)`` for comparison.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if N < 1:
        raise ValueError("N must be positive")
    if grid_size is None:
        grid_size = convergent_grid_size(omega)
    if grid_size < 8:
        raise ValueError("grid_size must be at least 8")

    def on_grid(offset):
        x = (np.arange(grid_size) + offset) / grid_size
        z = x + 1j * y
        ma, b, tb = _analytic_product(pair, z, omega, N, E, 1)
        la = ma.log_norm()
        with np.errstate(divide="ignore"):
            sb = np.log(np.abs(b[1:N + 1])).sum(axis=0)  # S_N(z + w)
            stb = np.log(np.abs(tb[:N])).sum(axis=0)  # S~_N(z)
        ok = np.all(np.abs(b[1:N + 1]) > floor, axis=0)
        if variant == "u":
            ok &= np.all(np.abs(tb[:N]) > floor, axis=0)
        if variant == "a":
            vals = la
            ok = np.ones_like(ok)
        elif variant == "plain":
            vals = la - sb
        else:
            vals = la - 0.5 * (stb + sb)
        L = float(np.mean(vals[ok])) / N
        La = float(np.mean(la[ok])) / N
        DN = float(np.mean(sb[ok])) / N
        Lp = float(np.mean((la - sb)[ok])) / N
        return L, La, DN, Lp, int(grid_size - np.count_nonzero(ok))

    L, La, DN, Lp, excluded = on_grid(0.0)
    L2 = on_grid(0.5)[0]
    D, _ = mean_log_modulus(pair.b, float(y))
    return LyapunovEstimate(N, float(y), complex(E), L, variant, int(grid_size), abs(L - L2),
                            abs(Lp - (La - DN)), DN, D, excluded)


# -- zero counting ---------------------------------------------------------

def energy_slice(pair: SamplingPair, z, omega: float, lo: int, hi: int) -> Callable:
    """``E -> f^a_[lo, hi](z, w, E)`` as a vectorized scaled handle."""
    from .operator import determinant_sequence

    n = hi - lo + 1
    return lambda E: determinant_sequence(pair, z, omega, lo, n, np.asarray(E))[-1]


def phase_slice(pair: SamplingPair, omega: float, E, lo: int, hi: int) -> Callable:
    """``z -> f^a_[lo, hi](z, w, E)`` as a vectorized scaled handle."""
    from .operator import determinant_sequence

    n = hi - lo + 1
    return lambda z: determinant_sequence(pair, np.asarray(z), omega, lo, n, E)[-1]


def _phase_and_logmod(values):
    if isinstance(values, ScaledValue):
        return np.angle(values.mantissa), values.log_magnitude
    v = np.asarray(values, dtype=complex)
    with np.errstate(divide="ignore"):
        return np.angle(v), np.log(np.abs(v))


def _winding(func, center, radius, n):
    t = np.arange(n) / n
    pts = center + radius * np.exp(2j * math.pi * t)
    ang, logmod = _phase_and_logmod(func(pts))
    d = np.diff(np.concatenate([ang, ang[:1]]))
    d = (d + math.pi) % (2 * math.pi) - math.pi
    total = float(np.sum(d)) / (2 * math.pi)
    return total, float(np.max(np.abs(d))), logmod


def count_zeros_disk(func: Callable, center: complex, radius: float, samples: int = 512,
                     max_samples: int = 1 << 16, return_radius: bool = False):
    """Number of zeros of an analytic ``func`` inside ``|w - center| < radius``.

    ``func`` maps an array of points to complex values or a ``ScaledValue``.
    The winding number of the phase is accumulated on ``samples`` points and
    the sampling doubles until the count is stable twice with every phase
    step below ``pi/2``.  A zero at distance ``d`` from the contour makes
    ``log|func|`` at the nearest sample drop by about ``log(d/h)`` below its
    neighbours (``h`` the sample spacing); when that local dip puts ``d``
    under ``1e-9 radius`` the radius is pushed outward, by at most 1%.
    With ``return_radius`` the result is ``(count, radius_used)``.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    last_err = None
    for nudge in (0.0, 0.001, 0.003, 0.006, 0.01):
        r = radius * (1.0 + nudge)
        n = samples
        total, step, logmod = _winding(func, center, r, n)
        spacing = 2 * math.pi * r / n
        with np.errstate(invalid="ignore"):
            dip = logmod - np.maximum(np.roll(logmod, 1), np.roll(logmod, -1))
        if not np.all(np.isfinite(logmod)) or np.min(dip) < math.log(1e-9 * radius / spacing):
            last_err = f"zero within reach of the contour at radius {r:g}"
            continue
        history = [round(total)]
        stable = 0
        while n < max_samples:
            n *= 2
            total, step, _ = _winding(func, center, r, n)
            k = round(total)
            stable = stable + 1 if k == history[-1] and abs(total - k) <= 0.25 and step < math.pi / 2 else 0
            history.append(k)
            if stable >= 2:
                return (int(k), r) if return_radius else int(k)
        last_err = f"winding number did not settle (last {total:.3f} with {n} samples)"
    raise ZeroCountError(last_err)
