"""Green's function entries from determinant ratios, decay and Poisson checks.

For a tridiagonal ``T = H - E`` with ``T(i, i+1) = u_i`` and ``T(i+1, i) = l_i``
Cramer's rule gives, for ``j < k``,

    G(j, k) = f_[0, j-1] * prod_{i=j}^{k-1} (-u_i) * f_[k+1, n-1] / f_[0, n-1]

and the mirror formula with ``-l_i`` for ``j > k``.  For the quasiperiodic
window ``-u_i = b(x + (i+1) w)`` and ``-l_i = b~(x + (i+1) w)``, so the middle
factor is a Birkhoff product of ``b`` (or ``b~``).  Empty blocks have
determinant 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .operator import JacobiWindow, _recursion, build_window, eigenvalues
from .sampling import SamplingPair
from .scaled import LN2, ScaledValue
from .transfer import lyapunov

__all__ = [
    "GreenEntry",
    "DecayCertificate",
    "SingularResolventError",
    "green_entry",
    "green_matrix",
    "window_green",
    "poisson_residual",
    "poisson_sweep",
    "PoissonSweep",
    "decay_certificate",
]

# materialize only below this log-magnitude
MAX_LOG = 300.0


class SingularResolventError(ValueError):
    """``E`` is within the declared floor of the window spectrum."""


@dataclass(frozen=True)
class GreenEntry:
    j: int
    k: int
    scaled: ScaledValue
    formula_case: str

    @property
    def log_magnitude(self) -> float:
        return float(self.scaled.log_magnitude)

    @property
    def value(self) -> complex:
        if abs(self.log_magnitude) > MAX_LOG and not np.isneginf(self.log_magnitude):
            raise OverflowError(f"|log G({self.j},{self.k})| = {self.log_magnitude:.1f} exceeds {MAX_LOG}")
        return complex(self.scaled.to_complex())


@dataclass(frozen=True)
class DecayCertificate:
    applicable: bool
    holds: bool
    max_violation: float
    gamma: float
    K: float
    log_abs_f: float
    La: float


def _cramer(diag: np.ndarray, upper: np.ndarray, lower: np.ndarray, E) -> ScaledValue:
    """All entries of ``(T - E)^{-1}`` as an ``(n, n)`` ScaledValue."""
    n = diag.size
    d = np.asarray(diag, dtype=complex) - E
    prod = np.concatenate([[0j], np.asarray(upper) * np.asarray(lower)])
    pre = _recursion(d, prod)  # pre[i] = det of the leading i x i block
    # suf[i] = det of rows i..n-1, by the same recursion run right to left
    suf = _recursion(d[::-1], np.concatenate([[0j], prod[1:][::-1]]))[::-1]
    lp = pre.log_magnitude
    ls = suf.log_magnitude
    ph_p, ph_s = pre.unit, suf.unit
    with np.errstate(divide="ignore"):
        lu = np.log(np.abs(upper)) if n > 1 else np.zeros(0)
        ll = np.log(np.abs(lower)) if n > 1 else np.zeros(0)
    uu = np.where(np.abs(upper) > 0, -np.asarray(upper) / np.where(np.abs(upper) > 0, np.abs(upper), 1), 1)
    ul = np.where(np.abs(lower) > 0, -np.asarray(lower) / np.where(np.abs(lower) > 0, np.abs(lower), 1), 1)
    cu = np.concatenate([[0.0], np.cumsum(lu)])  # sum of log|u_i| for i < t
    cl = np.concatenate([[0.0], np.cumsum(ll)])
    pu = np.concatenate([[1.0 + 0j], np.cumprod(uu)])
    pl = np.concatenate([[1.0 + 0j], np.cumprod(ul)])
    j = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    lo, hi = np.minimum(j, k), np.maximum(j, k)
    mid_log = np.where(j < k, cu[hi] - cu[lo], cl[hi] - cl[lo])
    mid_ph = np.where(j < k, pu[hi] / pu[lo], pl[hi] / pl[lo])
    with np.errstate(invalid="ignore"):
        logmag = lp[lo] + mid_log + ls[hi + 1] - lp[n]
    phase = ph_p[lo] * mid_ph * ph_s[hi + 1] / ph_p[n]
    finite = np.isfinite(logmag)
    e2 = np.where(finite, np.floor(np.where(finite, logmag, 0) / LN2), 0).astype(np.int64)
    mant = np.where(finite, np.exp(np.where(finite, logmag, 0) - e2 * LN2), 0.0) * phase
    return ScaledValue.from_parts(mant, e2)


def _check_floor(spec: np.ndarray, E, floor: float) -> None:
    dist = float(np.min(np.abs(spec - E)))
    if dist < floor:
        raise SingularResolventError(f"dist(E, spec) = {dist:.3g} is below the floor {floor:.3g}")


def window_green(window: JacobiWindow, E, floor: float | None = None) -> ScaledValue:
    """Resolvent ``(H_window - E)^{-1}`` of an arbitrary window, entrywise scaled."""
    scale = max(window.norm_estimate(), 1e-300)
    if floor is None:
        floor = 1e-10 * scale
    if window.is_real_phase:
        spec = np.linalg.eigvalsh(window.dense()) if window.size > 1 else np.real(window.diag)
        _check_floor(spec, E, floor)
    return _cramer(window.diag, window.upper, window.lower, E)


def green_matrix(pair: SamplingPair, x, omega: float, N: int, E, floor: float | None = None) -> ScaledValue:
    """All entries of ``(H^(N)(x, w) - E)^{-1}``."""
    return window_green(build_window(pair, x, omega, 0, N - 1), E, floor)


def green_entry(pair: SamplingPair, x, omega: float, N: int, E, j: int, k: int,
                floor: float | None = None) -> GreenEntry:
    """``G^(N)(j, k)`` at ``(x, w, E)`` via the Cramer formulas.

    Raises
    ------
    SingularResolventError
        If ``E`` is closer than ``floor`` (default ``1e-10 * scale``) to the
        spectrum of the window.
    """
    if not (0 <= j < N and 0 <= k < N):
        raise IndexError(f"({j}, {k}) outside [0, {N - 1}]")
    win = build_window(pair, x, omega, 0, N - 1)
    scale = max(win.norm_estimate(), 1e-300)
    if floor is None:
        floor = 1e-10 * scale
    if win.is_real_phase:
        _check_floor(eigenvalues(pair, float(np.real(x)), omega, 0, N - 1), E, floor)
    G = _cramer(win.diag, win.upper, win.lower, E)
    case = "j<k" if j < k else ("j>k" if j > k else "j=k")
    return GreenEntry(j, k, G[j, k], case)


def poisson_residual(window: JacobiWindow, psi: np.ndarray, E, sub: tuple[int, int], m: int,
                     floor: float | None = None) -> float:
    """Defect of the Poisson formula on ``sub = [a, b]`` at site ``m``.

    ``psi(m) - G(m, a) b~(x + a w) psi(a-1) - G(m, b) b(x + (b+1) w) psi(b+1)``,
    where ``G`` is the resolvent of the sub-window and sites are absolute
    (in ``[window.lo, window.hi]``).  Boundary values outside the window are 0.
    """
    a, b = sub
    lo, hi = window.lo, window.hi
    if not (lo <= a <= m <= b <= hi):
        raise ValueError(f"need {lo} <= a <= m <= b <= {hi}, got a={a}, m={m}, b={b}")
    psi = np.asarray(psi)
    ia, ib, im = a - lo, b - lo, m - lo
    d = window.diag[ia:ib + 1]
    up = window.upper[ia:ib]
    lw = window.lower[ia:ib]
    scale = max(window.norm_estimate(), 1e-300)
    if floor is None:
        floor = 1e-10 * scale
    if window.is_real_phase:
        sw = JacobiWindow(a, b, window.z, window.omega, d, up, lw)
        spec = np.linalg.eigvalsh(sw.dense()) if sw.size > 1 else np.real(d)
        _check_floor(spec, E, floor)
    G = _cramer(d, up, lw, E)
    rhs = 0j
    if ia > 0:
        rhs += complex(G[im - ia, 0].to_complex()) * (-window.lower[ia - 1]) * psi[ia - 1]
    if ib < window.size - 1:
        rhs += complex(G[im - ia, ib - ia].to_complex()) * (-window.upper[ib]) * psi[ib + 1]
    return float(abs(psi[im] - rhs))


@dataclass(frozen=True)
class PoissonSweep:
    max_residual: float
    per_eigenvalue: np.ndarray
    windows_checked: int
    windows_skipped: int


def _block_logdets(d: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``T[p, e] = log det[p .. e-1]`` (complex log) for ``p <= e``; ``T[p, p] = 0``.

    ``c[i]`` couples sites ``i-1`` and ``i``.  All starts ``p`` advance
    together, one block length per step, with a running log scale.
    """
    n = d.size
    T = np.full((n + 1, n + 1), np.nan + 0j)
    p = np.arange(n + 1)
    T[p, p] = 0.0
    u = np.ones(n + 1, complex)
    v = np.zeros(n + 1, complex)
    scale = np.zeros(n + 1)
    dd = np.concatenate([d, [0j]])
    cc = np.concatenate([c, [0j]])
    for r in range(1, n + 1):
        q = np.arange(n + 1 - r)
        e = q + r
        w = dd[e - 1] * u[q] - (cc[e - 1] * v[q] if r > 1 else 0)
        v[q], u[q] = u[q], w
        m = np.maximum(np.abs(u[q]), np.abs(v[q]))
        m = np.where(m > 0, m, 1.0)
        u[q] /= m
        v[q] /= m
        scale[q] += np.log(m)
        with np.errstate(divide="ignore"):
            T[q, e] = np.log(u[q]) + scale[q]
    return T


def poisson_sweep(window: JacobiWindow, evals: np.ndarray, evecs: np.ndarray,
                  floor: float | None = None) -> PoissonSweep:
    """Poisson defect for every eigenpair, every interior sub-window and every site.

    Interior means ``lo < a <= b < hi`` so both boundary terms are present.
    Sub-windows whose spectrum comes within ``floor`` (default
    ``1e-6 * scale``) of the eigenvalue are skipped and counted: there the
    resolvent amplifies the eigenpair's own rounding beyond any fixed
    tolerance.
    """
    n = window.size
    scale = max(window.norm_estimate(), 1e-300)
    if floor is None:
        floor = 1e-6 * scale
    diag = np.asarray(window.diag, complex)
    up, lw = np.asarray(window.upper), np.asarray(window.lower)
    c = np.concatenate([[0j], up * lw])
    with np.errstate(divide="ignore"):
        Cu = np.concatenate([[0j], np.cumsum(np.log(-up + 0j))])
        Cl = np.concatenate([[0j], np.cumsum(np.log(-lw + 0j))])
    real_d = diag.real
    mag = np.abs(up)
    evals = np.asarray(evals, dtype=float)
    ok = np.zeros((n, n, evals.size), dtype=bool)  # ok[a, b, i]
    for a in range(1, n - 1):
        for b in range(a, n - 1):
            sp = (np.array([real_d[a]]) if a == b
                  else eigvalsh_tridiagonal(real_d[a:b + 1], mag[a:b]))
            pos = np.clip(np.searchsorted(sp, evals), 1, sp.size) - 1
            nxt = np.minimum(pos + 1, sp.size - 1)
            dist = np.minimum(np.abs(sp[pos] - evals), np.abs(sp[nxt] - evals))
            ok[a, b] = dist >= floor
    per = np.zeros(len(evals))
    checked = skipped = 0
    for i, E in enumerate(evals):
        psi = evecs[:, i]
        with np.errstate(divide="ignore"):
            lpsi = np.log(psi + 0j)
        T = _block_logdets(diag - E, c)
        worst = 0.0
        for a in range(1, n - 1):
            ok_b = ok[a, a:n - 1, i]
            skipped += int(np.count_nonzero(~ok_b))
            checked += int(np.count_nonzero(ok_b))
            b_idx = np.arange(a, n - 1)[ok_b]
            if b_idx.size == 0:
                continue
            B = b_idx[:, None]
            M = np.arange(a, n - 1)[None, :]
            valid = M <= B
            Mc = np.minimum(M, B)
            with np.errstate(invalid="ignore", over="ignore"):
                t1 = np.exp(Cl[Mc] - Cl[a - 1] + lpsi[a - 1] + T[Mc + 1, B + 1] - T[a, B + 1])
                t2 = np.exp(T[a, Mc] + Cu[B + 1] - Cu[Mc] + lpsi[B + 1] - T[a, B + 1])
                res = np.abs(psi[Mc] - np.nan_to_num(t1) - np.nan_to_num(t2))
            worst = max(worst, float(np.max(np.where(valid, res, 0.0))))
        per[i] = worst
    return PoissonSweep(float(np.max(per, initial=0.0)), per, checked, skipped)


def decay_certificate(pair: SamplingPair, x: float, omega: float, N: int, E: float, K: float,
                      gamma: float | None = None, La: float | None = None,
                      grid_size: int | None = None) -> DecayCertificate:
    """Check ``|G(j, k)| <= exp(-gamma |k - j| + K)`` for every entry.

    ``La`` defaults to the measured ``L^a_N(E)`` and ``gamma`` to the measured
    ``L_N(E) = L^a_N - D_N`` at the same scale.  The certificate only applies
    when ``log|f^a_N(x, E)| >= N La - K/2``; otherwise ``applicable`` is False
    and nothing is asserted.
    """
    if La is None or gamma is None:
        est_a = lyapunov(pair, 0.0, omega, E, N, grid_size, variant="a")
        est = lyapunov(pair, 0.0, omega, E, N, grid_size, variant="plain")
        La = est_a.value if La is None else La
        gamma = est.value if gamma is None else gamma
    win = build_window(pair, x, omega, 0, N - 1)
    G = _cramer(win.diag, win.upper, win.lower, E)
    n = N
    log_f = float(_recursion(np.asarray(win.diag, complex) - E,
                             np.concatenate([[0j], win.upper * win.lower])).log_magnitude[n])
    applicable = log_f >= N * La - K / 2
    dist = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    excess = G.log_magnitude + gamma * dist - K
    worst = float(np.max(excess))
    return DecayCertificate(bool(applicable), bool(worst <= 0) if applicable else True, worst,
                            float(gamma), float(K), log_f, float(La))
