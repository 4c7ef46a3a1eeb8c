"""Localization centres, tail masses, decay-rate fits and window proximity."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operator import build_window, eigensystem, eigenvalues
from .sampling import SamplingPair

__all__ = [
    "LocalizationProfile",
    "ProximityResult",
    "localization_center",
    "tail_mass",
    "fitted_rate",
    "restriction_distance",
    "center_proximity",
    "localization_profile",
]


@dataclass(frozen=True)
class LocalizationProfile:
    j: int
    center: int
    window: tuple[int, int]
    tail_mass: dict[int, float] = field(default_factory=dict)
    fitted_rate: float = float("nan")
    restriction_distance: float = float("nan")


@dataclass(frozen=True)
class ProximityResult:
    holds: bool
    vacuous: bool
    gap: float
    centers: tuple[int, int]


def localization_center(psi: np.ndarray) -> int:
    """Index of the largest ``|psi|``; ties go to the smallest index."""
    a = np.abs(np.asarray(psi))
    return int(np.flatnonzero(a == a.max())[0])


def tail_mass(psi: np.ndarray, center: int, Q: int) -> float:
    """``sum |psi(k)|^2`` over ``k`` outside ``[center - Q, center + Q]``."""
    if Q < 0:
        raise ValueError("Q must be non-negative")
    w = np.abs(np.asarray(psi)) ** 2
    k = np.arange(w.size)
    outside = np.abs(k - center) > Q
    return float(np.sum(w[outside]))


def fitted_rate(psi: np.ndarray, center: int | None = None, min_distance: int = 5,
                floor: float = 1e-14) -> float:
    """Least-squares decay rate ``r`` in ``log|psi(k)| ~ c - r |k - center|``.

    Uses only entries with ``|psi| > floor`` at distance ``>= min_distance``;
    returns ``nan`` when fewer than five such points remain.
    """
    a = np.abs(np.asarray(psi))
    if center is None:
        center = localization_center(psi)
    d = np.abs(np.arange(a.size) - center)
    use = (a > floor) & (d >= min_distance)
    if np.count_nonzero(use) < 5:
        return float("nan")
    slope = np.polyfit(d[use], np.log(a[use]), 1)[0]
    return float(-slope)


def restriction_distance(pair: SamplingPair, x: float, omega: float, E: float,
                         window: tuple[int, int]) -> float:
    """``dist(E, spec H_window(x, w))``."""
    lo, hi = window
    spec = eigenvalues(pair, x, omega, lo, hi)
    return float(np.min(np.abs(spec - E)))


def localization_profile(pair: SamplingPair, x: float, omega: float, N: int, j: int,
                         Q: int, Qs=()) -> LocalizationProfile:
    """Profile of the ``j``-th eigenvector of ``H^(N)(x, w)`` with window radius ``Q``."""
    sd = eigensystem(build_window(pair, x, omega, 0, N - 1))
    psi = sd.eigenvectors[:, j]
    nu = localization_center(psi)
    lo, hi = max(nu - Q, 0), min(nu + Q, N - 1)
    masses = {int(q): tail_mass(psi, nu, int(q)) for q in sorted(set(Qs) | {Q})}
    return LocalizationProfile(j, nu, (lo, hi), masses, fitted_rate(psi, nu),
                               restriction_distance(pair, x, omega, float(sd.eigenvalues[j]), (lo, hi)))


def center_proximity(pair: SamplingPair, x: float, omega: float, N: int, j1: int, j2: int,
                     sigma: float, Q: int, spectral=None) -> ProximityResult:
    """Test ``|E_j1 - E_j2| <= sigma/2  =>  |nu_j1 - nu_j2| < 2Q``.

    ``spectral`` may pass a precomputed ``SpectralData`` for the window.  A
    failure is a resonance candidate, not an error.
    """
    sd = spectral if spectral is not None else eigensystem(build_window(pair, x, omega, 0, N - 1))
    e1, e2 = float(sd.eigenvalues[j1]), float(sd.eigenvalues[j2])
    gap = abs(e1 - e2)
    c1 = localization_center(sd.eigenvectors[:, j1])
    c2 = localization_center(sd.eigenvectors[:, j2])
    if gap > sigma / 2:
        return ProximityResult(True, True, gap, (c1, c2))
    return ProximityResult(abs(c1 - c2) < 2 * Q, False, gap, (c1, c2))
