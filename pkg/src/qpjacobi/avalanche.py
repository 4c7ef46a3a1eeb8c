"""Avalanche Principle checks for 2x2 matrix chains and determinant blocks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .operator import determinant, determinant_sequence
from .sampling import SamplingPair
from .scaled import ScaledMatrix2
from .transfer import transfer_product

__all__ = ["APReport", "ChainReport", "ap_check", "ap_sum", "chain_blocks", "chain_residuals",
           "ChainProfile", "chain_zero_profile", "real_zeros",
           "random_ap_sequence"]

_CORNER = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)


@dataclass(frozen=True)
class APReport:
    n: int
    mu: float
    cond1: bool
    cond2: bool
    cond3: bool
    discrepancy: float
    bound_ratio: float

    @property
    def conditions_hold(self) -> bool:
        return self.cond1 and self.cond2 and self.cond3


@dataclass(frozen=True)
class ChainReport:
    lengths: tuple[int, ...]
    starts: tuple[int, ...]
    blocks: tuple[ScaledMatrix2, ...]
    log_abs_f: float
    residual: float
    sum_a: float
    sum_u: float
    u_equality: float
    hypothesis: bool | None = None


def _as_scaled(matrices) -> list[ScaledMatrix2]:
    if isinstance(matrices, ScaledMatrix2):
        return [matrices[i] for i in range(matrices.entries.shape[0])]
    out = []
    for m in matrices:
        out.append(m if isinstance(m, ScaledMatrix2) else ScaledMatrix2.from_array(m))
    return out


def _pair_terms(mats: list[ScaledMatrix2]):
    norms = np.array([float(m.log_norm()) for m in mats])
    pairs = np.array([float((mats[j + 1] @ mats[j]).log_norm()) for j in range(len(mats) - 1)])
    prod = mats[0]
    for m in mats[1:]:
        prod = m @ prod
    return norms, pairs, float(prod.log_norm())


def ap_sum(matrices) -> float:
    """``log||A_n...A_1|| + sum_{j=2}^{n-1} log||A_j|| - sum_{j<n} log||A_{j+1} A_j||``."""
    mats = _as_scaled(matrices)
    norms, pairs, whole = _pair_terms(mats)
    return whole + float(np.sum(norms[1:-1])) - float(np.sum(pairs))


def ap_check(matrices) -> APReport:
    """Evaluate the three Avalanche Principle conditions and the discrepancy.

    Parameters
    ----------
    matrices : sequence of 2x2 arrays or ScaledMatrix2, applied as ``A_n ... A_1``
        (``matrices[0]`` is ``A_1``).

    Notes
    -----
    ``mu`` is taken as ``min_j ||A_j||``.  A determinant formed from the
    entries of ``A_j`` carries rounding of order ``eps ||A_j||^2``, so the
    condition ``|det A_j| <= 1`` is tested as
    ``|det A_j| <= 1 + 64 eps ||A_j||^2``.
    """
    mats = _as_scaled(matrices)
    n = len(mats)
    if n < 2:
        raise ValueError("need at least two matrices")
    for i, m in enumerate(mats):
        if not np.any(m.entries):
            raise ValueError(f"A_{i + 1} is the zero matrix")
    norms, pairs, whole = _pair_terms(mats)
    logdet = np.array([float(m.log_abs_det()) for m in mats])
    mu_log = float(np.min(norms))
    mu = float(np.exp(mu_log))
    with np.errstate(over="ignore"):
        slack = 64 * np.finfo(float).eps * np.exp(2 * norms)
        cond1 = bool(np.all(np.exp(np.minimum(logdet, 700.0)) <= 1.0 + slack))
    cond2 = bool(mu > n)
    cond3 = bool(np.max(norms[1:] + norms[:-1] - pairs) < 0.5 * mu_log)
    disc = abs(whole + float(np.sum(norms[1:-1])) - float(np.sum(pairs)))
    return APReport(n, mu, cond1, cond2, cond3, disc, disc * mu / n)


def _rotation(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def random_ap_sequence(rng: np.random.Generator, n: int, mu: float = 1e3,
                       spread: float = 3.0, max_tries: int = 100) -> list[np.ndarray]:
    """Random ``SL(2, R)`` sequence satisfying the three Avalanche Principle conditions.

    ``A_j = R(t_j) diag(s_j, 1/s_j) R(u_j)`` with ``log s_j`` uniform in
    ``[log mu, log mu + spread]``.  Each input angle is drawn within
    ``pi/3`` of the previous output direction, and the whole sequence is
    redrawn until :func:`ap_check` confirms all conditions.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    for _ in range(max_tries):
        mats = []
        prev_out = rng.uniform(0, np.pi)
        for j in range(n):
            s = np.exp(rng.uniform(np.log(mu), np.log(mu) + spread))
            t_in = prev_out + rng.uniform(-np.pi / 3, np.pi / 3)
            t_out = rng.uniform(0, np.pi)
            A = _rotation(t_out) @ np.diag([s, 1 / s]) @ _rotation(-t_in)
            mats.append(A)
            prev_out = t_out
        if ap_check(mats).conditions_hold:
            return mats
    raise RuntimeError(f"no condition-satisfying sequence in {max_tries} draws")


def chain_blocks(pair: SamplingPair, z, omega: float, E, lengths: Sequence[int],
                 l: float | None = None, La: float | None = None, H: float | None = None,
                 C0: float = 1.0) -> ChainReport:
    """Cut ``[0, s_{m+1})`` into blocks and compare the AP sum with ``log|f^a|``.

    ``A_1 = M^a_{l_1}(z) P``, ``A_m = P M^a_{l_m}(z + s_m w)`` and
    ``A_j = M^a_{l_j}(z + s_j w)`` in between, with ``P = diag(1, 0)``.
    ``residual`` is ``|log|f^a_{s_{m+1}}(z)| + sum_{j=2}^{m-1} log||A_j||
    - sum_j log||A_{j+1} A_j|||`` where ``f^a`` comes from the determinant
    recursion, not from the blocks.  ``u_equality`` compares the AP sums
    built from ``M^a`` and ``M^u``.

    When ``La`` (a measured ``L^a``) and ``H`` are given, ``hypothesis``
    records whether the large-deviation lower bounds
    ``log|f^a_{l_j}(z + s_j w)| > l_j La - H (log l_j)^C0`` and the same for
    adjacent pairs of blocks hold, i.e. whether the sample lies in the regime
    where the residual is expected to be exponentially small.
    """
    lengths = tuple(int(v) for v in lengths)
    m = len(lengths)
    if m < 2:
        raise ValueError("need at least two blocks")
    if min(lengths) < 1:
        raise ValueError("block lengths must be positive")
    if l is not None and not all(l <= v <= 3 * l for v in lengths):
        raise ValueError(f"block lengths must lie in [{l}, {3 * l}]")
    starts = tuple(int(s) for s in np.concatenate([[0], np.cumsum(lengths)[:-1]]))
    total = int(sum(lengths))

    def blocks(variant):
        out = []
        for j, (s, lj) in enumerate(zip(starts, lengths)):
            M = transfer_product(pair, complex(z) + s * omega, omega, lj, E, variant)
            if j == 0:
                M = M @ ScaledMatrix2.from_array(_CORNER)
            elif j == m - 1:
                M = ScaledMatrix2.from_array(_CORNER) @ M
            out.append(M)
        return out

    A = blocks("a")
    norms, pairs, whole = _pair_terms(A)
    f = determinant(pair, z, omega, 0, total - 1, E)
    log_f = float(f.log_magnitude)
    inner = float(np.sum(norms[1:-1])) - float(np.sum(pairs))
    sum_a = whole + inner
    sum_u = ap_sum(blocks("u"))
    hyp = None
    if La is not None and H is not None:
        hyp = True
        for j in range(m):
            runs = [lengths[j]] + ([lengths[j] + lengths[j + 1]] if j < m - 1 else [])
            for n in runs:
                fj = determinant(pair, complex(z) + starts[j] * omega, omega, 0, n - 1, E)
                if not float(fj.log_magnitude) > n * La - H * np.log(n) ** C0:
                    hyp = False
    return ChainReport(lengths, starts, tuple(A), log_f, abs(log_f + inner), sum_a, sum_u,
                       abs(sum_a - sum_u), hyp)


def chain_residuals(pair: SamplingPair, z, omega: float, E, lengths: Sequence[int]) -> np.ndarray:
    """The ``chain_blocks`` residual for an array of phases at once."""
    lengths = tuple(int(v) for v in lengths)
    m = len(lengths)
    if m < 2:
        raise ValueError("need at least two blocks")
    z = np.asarray(z, dtype=complex)
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    corner = ScaledMatrix2.from_array(_CORNER)
    A = []
    for j, (s, lj) in enumerate(zip(starts, lengths)):
        M = transfer_product(pair, z + s * omega, omega, lj, E, "a")
        if j == 0:
            M = M @ corner
        elif j == m - 1:
            M = corner @ M
        A.append(M)
    inner = sum(A[j].log_norm() for j in range(1, m - 1)) - sum(
        (A[j + 1] @ A[j]).log_norm() for j in range(m - 1))
    log_f = determinant_sequence(pair, z, omega, 0, int(sum(lengths)), E)[-1].log_magnitude
    return np.abs(log_f + inner)


@dataclass(frozen=True)
class ChainProfile:
    lengths: tuple[int, ...]
    E: float
    zeros: np.ndarray
    offsets: tuple[float, ...]
    residuals: np.ndarray

    def median(self, offset_index: int = 0) -> float:
        return float(np.median(self.residuals[offset_index])) if self.zeros.size else float("nan")


def real_zeros(pair: SamplingPair, omega: float, E: float, n: int, grid: int,
               iterations: int = 60) -> np.ndarray:
    """Real phases where ``f^a_n(x, E)`` changes sign, bisected ``iterations`` times.

    For real ``x`` and ``E`` the determinant is real, so sign changes on
    the grid bracket zeros; pairs of zeros closer than the grid spacing are
    missed.
    """
    x = (np.arange(grid) + 0.5) / grid
    sign = np.sign(determinant_sequence(pair, x, omega, 0, n, E)[-1].mantissa.real)
    i = np.flatnonzero(sign * np.roll(sign, -1) < 0)
    a, b = x[i], x[i] + 1.0 / grid
    sa = sign[i]
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        sm = np.sign(determinant_sequence(pair, mid, omega, 0, n, E)[-1].mantissa.real)
        left = sm == sa
        a = np.where(left, mid, a)
        b = np.where(left, b, mid)
    return np.mod(0.5 * (a + b), 1.0)


def chain_zero_profile(pair: SamplingPair, omega: float, E: float, lengths: Sequence[int],
                       offsets=(1e-9,), grid: int | None = None) -> ChainProfile:
    """Chain residual at fixed distances on both sides of the real zeros of ``f^a``.

    Away from the zeros of ``f^a_{s_{m+1}}(., E)`` the residual is at
    rounding level; next to a zero ``x0`` it behaves like ``delta/|x - x0|``,
    where ``delta`` is how far the block approximation moves the zero.
    Sampling at fixed offsets therefore measures ``delta`` directly.
    ``residuals`` has shape ``(len(offsets), 2 * zeros)``.
    """
    lengths = tuple(int(v) for v in lengths)
    n = int(sum(lengths))
    grid = 64 * n if grid is None else grid
    z0 = real_zeros(pair, omega, E, n, grid)
    rows = []
    for d in offsets:
        pts = np.concatenate([z0 - d, z0 + d])
        rows.append(chain_residuals(pair, pts, omega, E, lengths) if pts.size else np.zeros(0))
    return ChainProfile(lengths, float(E), z0, tuple(float(d) for d in offsets), np.array(rows))
