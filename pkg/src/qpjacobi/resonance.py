"""Shift resonances, eigenvalue slopes, slope bad sets and gap statistics.

Eigenvalue branches of ``H^(l)(x, w)`` are labelled by sorted order.  With
nonzero off-diagonals the spectrum is simple, so the j-th sorted eigenvalue
is a real-analytic function of ``x`` and the labelling is consistent.

Slopes come from first-order perturbation theory.  Only ``a`` and ``|b|``
enter the spectrum, so batched computations work with the real symmetric
matrix ``diag(a) + offdiag(|b|)`` and differentiate ``|b|`` directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .intervals import IntervalUnion
from .operator import build_window, determinant_sequence, eigensystem, eigenvalues, spectra
from .sampling import SamplingPair, TrigPolynomial, truncate
from .transfer import lyapunov
from .frequency import GOLDEN

__all__ = [
    "SlopeBadSet",
    "ResonanceEvent",
    "ScanResult",
    "GapReport",
    "LDTReport",
    "SlopeResult",
    "StabilityReport",
    "DriftReport",
    "spectra_distance",
    "eigenvalue_slope",
    "branch_data",
    "branch_point",
    "slope_bad_set",
    "verify_slope_guarantee",
    "elimination_scan",
    "refine_bad_set",
    "gap_report",
    "gap_threshold",
    "ldt_empirical",
    "derivative_stability",
    "truncation_drift",
    "paper_parameters",
]

TWO_PI = 2.0 * math.pi


# -- types -----------------------------------------------------------------

@dataclass(frozen=True)
class SlopeResult:
    value: float
    gap: float
    degraded: bool


@dataclass(frozen=True)
class SlopeBadSet:
    tau: float
    l: int
    Z: IntervalUnion
    raw: IntervalUnion
    regions: tuple[tuple[int, float, float], ...]
    source_counts: tuple[int, ...]
    grid_size: int
    excluded_points: int
    energy_range: tuple[float, float]

    def metadata(self, omega: float, fingerprint: str, sigma: float | None = None) -> dict:
        return {"tau": self.tau, "sigma": sigma, "l": self.l, "omega": omega,
                "grid": self.grid_size, "model": fingerprint}


@dataclass(frozen=True)
class ResonanceEvent:
    x: float
    m: int
    j: int
    k: int
    gap: float
    E_j: float
    excluded: bool


@dataclass(frozen=True)
class ScanResult:
    events: tuple[ResonanceEvent, ...]
    violations: int
    excluded: int
    vacuous: bool
    grid_size: int
    Q: int
    M: int
    sigma: float
    l: int


@dataclass(frozen=True)
class GapReport:
    N: int
    p: float
    eigenvalues: np.ndarray
    min_gaps: np.ndarray
    threshold: float
    below_fraction: float
    considered: int
    histogram: tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class LDTReport:
    N: int
    E: float
    La: float
    C0: float
    grid_size: int
    fractions: dict
    max_deviation: float


@dataclass(frozen=True)
class StabilityReport:
    ratios: np.ndarray
    skipped: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DriftReport:
    K: int
    l: int
    drift: float
    weyl_bound: float
    grid_sup_error: float


# -- spectra ---------------------------------------------------------------

def _min_sorted_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Two-pointer merge of two ascending arrays."""
    i = j = 0
    best = math.inf
    while i < A.size and j < B.size:
        d = A[i] - B[j]
        if abs(d) < best:
            best = abs(d)
        if d < 0:
            i += 1
        else:
            j += 1
    return float(best)


def spectra_distance(pair: SamplingPair, x: float, omega: float, l1: int, l2: int, m: int,
                     energy_window: tuple[float, float] | None = None) -> float:
    """``min |E - E'|`` over ``E`` in ``spec H^(l1)(x)`` (inside the window) and ``E'``
    in ``spec H^(l2)(x + m w)``.  ``inf`` when no ``E`` falls in the window."""
    if l1 < 1 or l2 < 1:
        raise ValueError("window lengths must be positive")
    A = eigenvalues(pair, x, omega, 0, l1 - 1)
    B = eigenvalues(pair, (x + m * omega) % 1.0, omega, 0, l2 - 1)
    if energy_window is not None:
        A = A[(A >= energy_window[0]) & (A <= energy_window[1])]
    return _min_sorted_distance(A, B)


# -- slopes ----------------------------------------------------------------

def eigenvalue_slope(pair: SamplingPair, x: float, omega: float, window: tuple[int, int], j: int,
                     gap_floor: float | None = None) -> SlopeResult:
    """``d/dx E_j`` of ``H_window(x, w)`` as ``<psi_j, (dH/dx) psi_j>``."""
    lo, hi = window
    win = build_window(pair, x, omega, lo, hi)
    sd = eigensystem(win)
    n = win.size
    k = np.arange(lo, hi + 1)
    pts = x + k * omega
    da = pair.da(pts).real
    db = pair.db(pts[1:]) if n > 1 else np.zeros(0)
    dtb = pair.dtilde_b(pts[1:]) if n > 1 else np.zeros(0)
    psi = sd.eigenvectors[:, j]
    val = np.sum(da * np.abs(psi) ** 2)
    if n > 1:
        val += np.sum(np.conj(psi[:-1]) * (-db) * psi[1:]) + np.sum(np.conj(psi[1:]) * (-dtb) * psi[:-1])
    gap = float(sd.gaps()[j])
    scale = max(win.norm_estimate(), 1e-300)
    if gap_floor is None:
        gap_floor = 1e-8 * scale
    return SlopeResult(float(np.real(val)), gap, gap < gap_floor)


def _abs_b_derivatives(pair: SamplingPair, pts):
    b = pair.b(pts)
    db = pair.db(pts)
    d2b = pair.db.derivative()(pts)
    r = np.abs(b)
    rs = np.where(r > 0, r, 1.0)
    r1 = np.real(np.conj(b) * db) / rs
    r2 = (np.abs(db) ** 2 + np.real(np.conj(b) * d2b)) / rs - r1 ** 2 / rs
    return r, r1, r2


def branch_data(pair: SamplingPair, phases, omega: float, l: int, order: int = 1,
                chunk: int = 4096):
    """Eigenvalues and their ``x``-derivatives for many real phases.

    Returns ``E``, ``dE`` and (``order=2``) ``d2E``, each of shape
    ``(len(phases), l)``, plus the distance of each eigenvalue to the rest of
    its spectrum.
    """
    x = np.asarray(phases, dtype=float).ravel()
    E = np.empty((x.size, l))
    S = np.empty((x.size, l))
    S2 = np.empty((x.size, l)) if order >= 2 else None
    d2a_poly = pair.da.derivative()
    idx = np.arange(l)
    for s in range(0, x.size, chunk):
        xs = x[s:s + chunk]
        pts = xs[None, :] + idx[:, None] * omega  # (l, B)
        a = pair.a(pts).real.T
        da = pair.da(pts).real.T
        if l > 1:
            r, r1, r2 = (v.T for v in _abs_b_derivatives(pair, pts[1:]))
        B = xs.size
        H = np.zeros((B, l, l))
        H[:, idx, idx] = a
        if l > 1:
            H[:, idx[:-1], idx[1:]] = r
            H[:, idx[1:], idx[:-1]] = r
        w, V = np.linalg.eigh(H)
        E[s:s + B] = w
        # first derivatives: V^T dH V on the diagonal
        S[s:s + B] = np.einsum("bkj,bk->bj", V ** 2, da)
        if l > 1:
            S[s:s + B] += 2 * np.einsum("bkj,bk->bj", V[:, :-1, :] * V[:, 1:, :], r1)
        if order >= 2:
            d2a = d2a_poly(pts).real.T
            T2 = np.einsum("bkj,bk->bj", V ** 2, d2a)
            # dH/dx is tridiagonal: apply it as a stencil, then one batched product
            DV = da[:, :, None] * V
            if l > 1:
                T2 += 2 * np.einsum("bkj,bk->bj", V[:, :-1, :] * V[:, 1:, :], r2)
                DV[:, :-1] += r1[:, :, None] * V[:, 1:]
                DV[:, 1:] += r1[:, :, None] * V[:, :-1]
            W = np.swapaxes(V, 1, 2) @ DV
            dE = w[:, :, None] - w[:, None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                coup = np.where(np.eye(l, dtype=bool)[None], 0.0, W ** 2 / np.where(dE == 0, np.inf, dE))
            S2[s:s + B] = T2 + 2 * coup.sum(axis=2)
    gaps = np.full_like(E, np.inf)
    if l > 1:
        d = np.diff(E, axis=1)
        gaps[:, 1:] = d
        gaps[:, :-1] = np.minimum(gaps[:, :-1], d)
    return (E, S, S2, gaps) if order >= 2 else (E, S, gaps)


def branch_point(pair: SamplingPair, phases, omega: float, l: int, branch,
                 iterations: int = 56) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalue ``E_j`` and slope ``dE_j/dx`` of one branch per phase.

    Works in ``O(l)`` per phase: Sturm-count bisection locates ``E_j`` of the
    real symmetric reduction, and a twisted factorization at that shift gives
    its eigenvector.  ``branch`` is broadcast against ``phases``.
    """
    x = np.asarray(phases, dtype=float).ravel()
    j = np.broadcast_to(np.asarray(branch, dtype=int).ravel(), x.shape)
    P = x.size
    if P == 0:
        return np.empty(0), np.empty(0)
    pts = x[None, :] + np.arange(l)[:, None] * omega
    d = pair.a(pts).real
    da = pair.da(pts).real
    if l > 1:
        e, r1, _ = _abs_b_derivatives(pair, pts[1:])
    else:
        e = r1 = np.zeros((0, P))
    e2 = e ** 2
    reach = 2 * np.max(np.abs(e), axis=0) if l > 1 else np.zeros(P)
    lo = np.min(d, axis=0) - reach - 1e-12
    hi = np.max(d, axis=0) + reach + 1e-12
    tiny = np.finfo(float).tiny ** 0.5
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        q = d[0] - mid
        q = np.where(q == 0, -tiny, q)
        count = (q < 0).astype(int)
        for k in range(1, l):
            q = d[k] - mid - e2[k - 1] / q
            q = np.where(q == 0, -tiny, q)
            count += q < 0
        below = count <= j
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    lam = 0.5 * (lo + hi)
    # twisted factorization of T - lam
    dp = np.empty((l, P))
    dm = np.empty((l, P))
    dp[0] = d[0] - lam
    for k in range(1, l):
        prev = np.where(dp[k - 1] == 0, tiny, dp[k - 1])
        dp[k] = d[k] - lam - e2[k - 1] / prev
    dm[l - 1] = d[l - 1] - lam
    for k in range(l - 2, -1, -1):
        nxt = np.where(dm[k + 1] == 0, tiny, dm[k + 1])
        dm[k] = d[k] - lam - e2[k] / nxt
    gamma = dp + dm - (d - lam)
    ks = np.argmin(np.abs(gamma), axis=0)
    v = np.zeros((l, P))
    v[ks, np.arange(P)] = 1.0
    for k in range(l - 2, -1, -1):
        piv = np.where(dp[k] == 0, tiny, dp[k])
        v[k] = np.where(k < ks, -e[k] * v[k + 1] / piv, v[k])
    for k in range(1, l):
        piv = np.where(dm[k] == 0, tiny, dm[k])
        v[k] = np.where(k > ks, -e[k - 1] * v[k - 1] / piv, v[k])
    v /= np.linalg.norm(v, axis=0)
    S = np.sum(da * v ** 2, axis=0)
    if l > 1:
        S += 2 * np.sum(r1 * v[:-1] * v[1:], axis=0)
    return lam, S


def _bisect(pair, omega, l, a, b, branch, value, width, max_iter=200):
    """Shrink brackets ``[a, b]`` (arrays) until ``|b - a| <= width``.

    ``value(E, S, jobs)`` is positive on the ``a`` side and not positive
    on the ``b`` side.  Steps are Illinois false position; once a bracket is within ``64 width``
    each step is also probed at ``c -+ 0.45 width`` so the bracket closes as
    soon as the crossing is pinned.  A step that fails to halve the bracket is followed by a bisection.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    branch = np.broadcast_to(np.asarray(branch, dtype=int), a.shape)
    if a.size == 0:
        return a, b
    every = np.arange(a.size)
    fa = value(*branch_point(pair, a, omega, l, branch), every)
    fb = value(*branch_point(pair, b, omega, l, branch), every)
    fa = np.where(fa > 0, fa, np.finfo(float).tiny)
    fb = np.where(fb <= 0, fb, 0.0)
    side = np.zeros(a.shape, dtype=int)   # last retained end: -1 a, +1 b
    bisect_next = np.zeros(a.shape, dtype=bool)
    for _ in range(max_iter):
        open_ = np.abs(b - a) > width
        if not np.any(open_):
            break
        idx = np.nonzero(open_)[0]
        A, B, FA, FB = a[idx], b[idx], fa[idx], fb[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            c = A + (B - A) * FA / (FA - FB)
        c = np.where(bisect_next[idx] | ~np.isfinite(c), 0.5 * (A + B), c)
        lo_end, hi_end = np.minimum(A, B), np.maximum(A, B)
        half = 0.45 * width
        c = np.clip(c, lo_end + half, hi_end - half)
        step = np.sign(B - A)
        near = np.abs(B - A) <= 64 * width
        c1 = np.where(near, c - step * half, c)
        c2 = c + step * half
        v1 = value(*branch_point(pair, c1, omega, l, branch[idx]), idx)
        v2 = v1.copy()
        if np.any(near):
            v2[near] = value(*branch_point(pair, c2[near], omega, l, branch[idx][near]), idx[near])
        c2 = np.where(near, c2, c)
        old = np.abs(B - A)
        # c1 is nearer a, c2 nearer b
        in_mid = (v1 > 0) & (v2 <= 0)
        go_b = v2 > 0          # crossing beyond c2: new a = c2
        go_a = v1 <= 0         # crossing before c1: new b = c1
        nA = np.where(in_mid, c1, np.where(go_b, c2, A))
        nB = np.where(in_mid, c2, np.where(go_a, c1, B))
        nFA = np.where(in_mid, v1, np.where(go_b, v2, FA))
        nFB = np.where(in_mid, v2, np.where(go_a, v1, FB))
        s_old = side[idx]
        # Illinois: halve the value at an end retained twice in a row
        keep_a = go_a & ~in_mid
        keep_b = go_b & ~in_mid
        nFA = np.where(keep_a & (s_old == -1), 0.5 * nFA, nFA)
        nFB = np.where(keep_b & (s_old == 1), 0.5 * nFB, nFB)
        side[idx] = np.where(keep_a, -1, np.where(keep_b, 1, 0))
        bisect_next[idx] = ~bisect_next[idx] & (np.abs(nB - nA) > 0.5 * old)
        a[idx], b[idx], fa[idx], fb[idx] = nA, nB, nFA, nFB
    return a, b


def slope_bad_set(pair: SamplingPair, omega: float, l: int, tau: float, grid_size: int = 256,
                  prior: IntervalUnion | None = None, width: float = 1e-10,
                  sub: int = 16, gap_floor: float | None = None) -> SlopeBadSet:
    """Energies whose branch may have ``|dE/dx| <= tau``, fattened by ``tau``.

    On each grid cell and branch a Hermite cubic of the slope (from the
    first and second perturbative derivatives) screens for places where
    ``|slope| <= 2 tau`` or the slope changes sign.  Screened cells are
    resampled at ``sub`` points; region boundaries are bisected to ``width``.
    The images ``[min E_j, max E_j]`` of the regions, together with
    ``prior``, are fattened by ``tau``.
    """
    if grid_size < 256:
        raise ValueError("grid_size must be at least 256")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    G = grid_size
    h = 1.0 / G
    X = np.arange(G) / G
    E, S, S2, gaps = branch_data(pair, X, omega, l, order=2)
    scale = pair.scale
    if gap_floor is None:
        gap_floor = 1e-8 * scale
    excluded = int(np.count_nonzero(gaps < gap_floor))
    two_tau = 2.0 * tau
    # Hermite screen of the slope across each cell [X_i, X_i + h]
    s0, s1 = S, np.roll(S, -1, axis=0)
    d0, d1 = S2, np.roll(S2, -1, axis=0)
    t = np.linspace(0.0, 1.0, 33)[:, None, None]
    h00 = 2 * t ** 3 - 3 * t ** 2 + 1
    h10 = t ** 3 - 2 * t ** 2 + t
    h01 = -2 * t ** 3 + 3 * t ** 2
    h11 = t ** 3 - t ** 2
    cubic = h00 * s0 + h10 * h * d0 + h01 * s1 + h11 * h * d1
    margin = 0.25 * two_tau + 1e-12 * scale
    screen = (np.min(np.abs(cubic), axis=0) <= two_tau + margin) | (s0 * s1 <= 0)
    cells, branches = np.nonzero(screen)
    regions: list[tuple[int, float, float]] = []
    images: list[tuple[float, float]] = []
    if cells.size:
        ucells = np.unique(cells)
        tq = np.linspace(0.0, 1.0, sub + 1)
        px = (X[ucells][:, None] + h * tq[None, :]).ravel()
        Es, Ss, _ = branch_data(pair, px, omega, l)
        Es = Es.reshape(ucells.size, sub + 1, l)
        Ss = Ss.reshape(ucells.size, sub + 1, l)
        pos = {int(c): i for i, c in enumerate(ucells)}
        # collect bisection jobs: (kind, lo, hi, branch, region id, which end)
        bound_jobs = []   # boundary between |s| > 2tau (first) and |s| <= 2tau (second)
        root_jobs = []    # sign change of s between the two points
        pending = []      # (branch, left, right, E samples)
        for c, j in zip(cells.tolist(), branches.tolist()):
            xs = X[c] + h * tq
            ev, sv = Es[pos[c], :, j], Ss[pos[c], :, j]
            g = np.abs(sv) - two_tau
            q = 0
            while q <= sub:
                if g[q] <= 0:
                    qa = q
                    while q + 1 <= sub and g[q + 1] <= 0:
                        q += 1
                    qb = q
                    rid = len(pending)
                    pending.append([j, xs[qa], xs[qb], list(ev[qa:qb + 1])])
                    if qa > 0:
                        bound_jobs.append((xs[qa - 1], xs[qa], j, rid, 0))
                    if qb < sub:
                        bound_jobs.append((xs[qb + 1], xs[qb], j, rid, 1))
                q += 1
            for q in range(sub):
                if g[q] > 0 and g[q + 1] > 0 and sv[q] * sv[q + 1] < 0:
                    rid = len(pending)
                    pending.append([j, None, None, []])
                    root_jobs.append((xs[q], xs[q + 1], j, rid, sv[q] > 0))
        # roots of the signed slope
        if root_jobs:
            ra = np.array([r[0] for r in root_jobs])
            rb = np.array([r[1] for r in root_jobs])
            rj = np.array([r[2] for r in root_jobs])
            pos_a = np.array([r[4] for r in root_jobs])
            a_end, b_end = _bisect(pair, omega, l, ra, rb, rj,
                                   lambda e, s, k: np.where(pos_a[k], s, -s), width)
            roots = 0.5 * (a_end + b_end)
            Er, _ = branch_point(pair, roots, omega, l, rj)
            for i, (lo_x, hi_x, j, rid, _) in enumerate(root_jobs):
                pending[rid][1] = pending[rid][2] = roots[i]
                pending[rid][3].append(Er[i])
                bound_jobs.append((lo_x, roots[i], j, rid, 0))
                bound_jobs.append((hi_x, roots[i], j, rid, 1))
        if bound_jobs:
            ba = np.array([r[0] for r in bound_jobs])
            bb = np.array([r[1] for r in bound_jobs])
            bj = np.array([r[2] for r in bound_jobs])
            outer, inner = _bisect(pair, omega, l, ba, bb, bj,
                                   lambda e, s, k: np.abs(s) - two_tau, width)
            Eo, _ = branch_point(pair, outer, omega, l, bj)
            for i, (_, _, j, rid, end) in enumerate(bound_jobs):
                if end == 0:
                    pending[rid][1] = outer[i]
                else:
                    pending[rid][2] = outer[i]
                pending[rid][3].append(Eo[i])
        for j, xl, xr, evals in pending:
            regions.append((int(j), float(xl), float(xr)))
            images.append((float(min(evals)), float(max(evals))))
    counts = np.zeros(l, dtype=int)
    for j, _, _ in regions:
        counts[j] += 1
    raw = IntervalUnion(tuple(images))
    base = raw if prior is None else raw.union(prior)
    e_lo, e_hi = float(E.min()), float(E.max())
    Z = base.fatten(tau).clip(e_lo - tau, e_hi + tau)
    return SlopeBadSet(float(tau), int(l), Z, raw, tuple(regions), tuple(int(c) for c in counts),
                       G, excluded, (e_lo - tau, e_hi + tau))


def verify_slope_guarantee(pair: SamplingPair, omega: float, bad: SlopeBadSet,
                           factor: int = 4) -> tuple[int, int]:
    """Count fine-grid points with ``E_j`` outside ``Z`` yet ``|dE_j/dx| <= tau``.

    Returns ``(violations, checked)`` on the ``factor``-times finer grid.
    """
    n = bad.grid_size * factor
    X = np.arange(n) / n
    E, S, _ = branch_data(pair, X, omega, bad.l)
    outside = ~bad.Z.contains(E)
    viol = outside & (np.abs(S) <= bad.tau)
    return int(np.count_nonzero(viol)), int(E.size)


# -- elimination -----------------------------------------------------------

def elimination_scan(pair: SamplingPair, omega: float, l: int, sigma: float, Q: int, M: int,
                     bad_set: IntervalUnion | None = None, grid_size: int = 256,
                     l2: int | None = None, m_chunk: int = 32,
                     desk_bound: int = 4096) -> ScanResult:
    """All near-coincidences ``|E_j(x) - E_k(x + m w)| < sigma`` with ``Q <= |m| <= M``.

    Events whose ``E_j`` lies in ``bad_set`` are kept but marked excluded;
    ``violations`` counts the rest.  Events are ordered by ``(x, m, j, k)``.
    """
    if M > desk_bound:
        raise ValueError(f"M={M} exceeds the desk bound {desk_bound}")
    l2 = l if l2 is None else l2
    bad_set = bad_set if bad_set is not None else IntervalUnion()
    if M < Q:
        return ScanResult((), 0, 0, True, grid_size, Q, M, sigma, l)
    X = np.arange(grid_size) / grid_size
    E1 = spectra(pair, X, omega, l)
    inside = bad_set.contains(E1)
    shifts = np.array([m for m in range(-M, M + 1) if abs(m) >= Q])
    rows = []
    for s in range(0, shifts.size, m_chunk):
        ms = shifts[s:s + m_chunk]
        ph = np.mod(X[:, None] + ms[None, :] * omega, 1.0)
        E2 = spectra(pair, ph.ravel(), omega, l2).reshape(grid_size, ms.size, l2)
        diff = np.abs(E1[:, None, :, None] - E2[:, :, None, :])
        xi, mi, j, k = np.nonzero(diff < sigma)
        if xi.size:
            rows.append(np.stack([xi, ms[mi], j, k, diff[xi, mi, j, k]], axis=1))
    if not rows:
        return ScanResult((), 0, 0, False, grid_size, Q, M, sigma, l)
    ev = np.concatenate(rows)
    order = np.lexsort((ev[:, 3], ev[:, 2], ev[:, 1], ev[:, 0]))
    ev = ev[order]
    events = []
    for xi, m, j, k, gap in ev:
        xi, j = int(xi), int(j)
        events.append(ResonanceEvent(float(X[xi]), int(m), j, int(k), float(gap),
                                     float(E1[xi, j]), bool(inside[xi, j])))
    n_ex = sum(e.excluded for e in events)
    return ScanResult(tuple(events), len(events) - n_ex, n_ex, False, grid_size, Q, M, sigma, l)


def refine_bad_set(bad_set: IntervalUnion, events, sigma: float) -> IntervalUnion:
    """Add the energies of unexcluded events and fatten everything by ``sigma``."""
    hits = [e.E_j for e in events if not e.excluded]
    return bad_set.union(IntervalUnion.points(hits)).fatten(sigma)


# -- gaps and large deviations ---------------------------------------------

def gap_threshold(N: int, p: float) -> float:
    """``1 / (N (ln N)^p)``."""
    return 1.0 / (N * math.log(N) ** p)


def gap_report(pair: SamplingPair, x: float, omega: float, N: int, p: float,
               excluded: IntervalUnion | None = None,
               bins=None) -> GapReport:
    """Distance of each eigenvalue of ``H^(N)(x, w)`` to the rest of the spectrum."""
    if N < 2:
        raise ValueError("N must be at least 2")
    E = eigenvalues(pair, x, omega, 0, N - 1)
    d = np.diff(E)
    gaps = np.minimum(np.concatenate([[np.inf], d]), np.concatenate([d, [np.inf]]))
    thr = gap_threshold(N, p)
    keep = np.ones(N, bool) if excluded is None else ~excluded.contains(E)
    considered = int(np.count_nonzero(keep))
    frac = float(np.count_nonzero(gaps[keep] < thr)) / considered if considered else 0.0
    if bins is None:
        bins = np.arange(-20.0, 1.5, 0.5)
    with np.errstate(divide="ignore"):
        hist = np.histogram(np.log10(gaps), bins=bins)
    return GapReport(N, p, E, gaps, thr, frac, considered, (hist[1], hist[0]))


def ldt_empirical(pair: SamplingPair, omega: float, E: float, N: int, H_values,
                  grid_size: int = 4096, C0: float = 1.0, La: float | None = None) -> LDTReport:
    """Fraction of the phase grid where ``|log|f^a_N(x, E)| - N La| > H (ln N)^C0``.

    ``La`` defaults to the measured ``L^a_N(E)``.
    """
    if grid_size < 1024:
        raise ValueError("grid_size must be at least 1024")
    if La is None:
        La = lyapunov(pair, 0.0, omega, E, N, variant="a").value
    X = np.arange(grid_size) / grid_size
    f = determinant_sequence(pair, X, omega, 0, N, E)[-1]
    dev = np.abs(f.log_magnitude - N * La)
    Hs = sorted(float(h) for h in H_values)
    fr = {}
    for H in Hs:
        fr[H] = float(np.count_nonzero(dev > H * math.log(N) ** C0)) / grid_size
    return LDTReport(N, float(E), float(La), C0, grid_size, fr, float(np.max(dev)))


def derivative_stability(pair: SamplingPair, x: float, omega: float, omega_prime: float,
                         l: int, sigma_gap: float, C_est: float | None = None) -> StabilityReport:
    """``|dE_j/dx(x, w) - dE_j/dx(x, w')| / (l |w - w'| / sigma_gap)`` per branch.

    Branches whose gap at ``(x, w)`` is below ``sigma_gap`` are skipped, as is
    the whole comparison when ``|w - w'|`` exceeds ``sigma_gap / (C_est l)``
    (``C_est`` defaults to ``2 pi`` times the model's coefficient scale).
    """
    ratios = np.full(l, np.nan)
    skipped = {}
    dw = abs(omega - omega_prime)
    if dw == 0:
        return StabilityReport(np.zeros(l), {})
    if C_est is None:
        C_est = TWO_PI * max(pair.scale, 1e-300) * max(pair.degree, 1)
    if dw > sigma_gap / (C_est * l):
        return StabilityReport(ratios, {j: "frequency step exceeds sigma_gap/(C l)" for j in range(l)})
    E0, S0, g0 = branch_data(pair, [x], omega, l)
    _, S1, _ = branch_data(pair, [x], omega_prime, l)
    for j in range(l):
        if g0[0, j] < sigma_gap:
            skipped[j] = "gap below sigma_gap"
            continue
        ratios[j] = abs(S0[0, j] - S1[0, j]) / (l * dw / sigma_gap)
    return StabilityReport(ratios, skipped)


def truncation_drift(pair: SamplingPair, K: int, l: int, grid_size: int = 256,
                     omega: float = GOLDEN) -> DriftReport:
    """Largest eigenvalue drift between the model and its degree-``K`` truncation.

    ``weyl_bound`` is ``cert_a + 2 cert_b``: by Weyl's inequality no
    eigenvalue moves by more than the operator-norm change, which the
    truncation certificates bound on the real line.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    ta = truncate(pair.a, K, pair.rho0)
    tb = truncate(pair.b, K, pair.rho0)
    a_k = ta.polynomial
    if not a_k.real_valued:
        a_k = TrigPolynomial(0.5 * (a_k.coeffs + np.conj(a_k.coeffs[::-1])), True)
    if tb.polynomial.is_zero():
        raise ValueError("truncated b vanishes identically")
    pk = SamplingPair(a_k, tb.polynomial, pair.rho0)
    X = np.arange(grid_size) / grid_size
    drift = float(np.max(np.abs(spectra(pair, X, omega, l) - spectra(pk, X, omega, l))))
    cert_a = ta.certificate if ta.certificate is not None else math.inf
    cert_b = tb.certificate if tb.certificate is not None else math.inf
    xs = np.arange(4096) / 4096
    sup_err = float(np.max(np.abs(pair.a(xs) - pk.a(xs)))) + 2 * float(np.max(np.abs(pair.b(xs) - pk.b(xs))))
    return DriftReport(K, l, drift, cert_a + 2 * cert_b, sup_err)


# -- presets ---------------------------------------------------------------

def paper_parameters(N: int, p: float = 16.0, A: float = 2.0) -> dict:
    """Scale relations ``sigma = 2/(N (ln N)^p)``, ``Q = (ln N)^{6A}``,
    ``l = 2 floor((ln N)^A)``, ``tau = (ln N)^{-4} (ln ln N)^{-1}``, ``M = N``.

    ``A`` is a free parameter (default 2, not a value from the analysis).
    """
    if N < 16:
        raise ValueError("N must be at least 16")
    L = math.log(N)
    l = 2 * int(math.floor(L ** A))
    return {
        "N": N, "p": p, "A": A,
        "sigma": 2.0 / (N * L ** p),
        "Q": L ** (6 * A),
        "l": l,
        "lengths": [l, l + 1, 2 * l, 2 * l + 1],
        "tau": L ** -4 / math.log(L),
        "M": N,
    }
