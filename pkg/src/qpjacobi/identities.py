"""Exact identities between the determinant, cocycle and resolvent computations.

Each check returns a nonnegative defect; :func:`identity_suite` runs all of
them over a batch of random models and collects one row per case.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .green import green_matrix, poisson_sweep
from .operator import build_window, determinant_sequence, eigensystem, eigenvalues, orbit
from .resonance import eigenvalue_slope
from .sampling import SamplingPair
from .scaled import LN2, ScaledValue
from .transfer import birkhoff_sums, count_zeros_disk, energy_slice, lyapunov, transfer_product

__all__ = [
    "IdentityRow",
    "relative_defect",
    "entry_identity_defect",
    "product_determinant",
    "det_identity_defect",
    "u_relation_defect",
    "cadence_defect",
    "cramer_defect",
    "poisson_defect",
    "slope_defect",
    "zero_count_defect",
    "identity_case",
    "suite_model",
    "identity_suite",
]


@dataclass(frozen=True)
class IdentityRow:
    suite: str
    case: int
    N: int
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tol)


def relative_defect(u: ScaledValue, v: ScaledValue) -> float:
    """``|v/u - 1|`` computed without leaving scaled form; 0 if both vanish."""
    uz, vz = bool(u.is_zero), bool(v.is_zero)
    if uz or vz:
        return 0.0 if uz and vz else float("inf")
    r = (v / u).to_complex()
    return float(abs(r - 1.0))


def _scalar(value) -> ScaledValue:
    return ScaledValue.from_complex(np.complex128(value))


def entry_identity_defect(pair: SamplingPair, z, omega: float, N: int, E) -> float:
    """Largest relative defect of ``M^a_N`` against its determinant expressions.

    ``M^a_N = [[f_N(z), -b~(z) f_{N-1}(z+w)], [b(z+Nw) f_{N-1}(z), -b~(z) b(z+Nw) f_{N-2}(z+w)]]``
    with ``f_0 = 1`` and ``f_{-1} = 0``.
    """
    if N < 1:
        raise ValueError("N must be positive")
    M = transfer_product(pair, z, omega, N, E, "a")
    f = determinant_sequence(pair, z, omega, 0, N, E)
    g = determinant_sequence(pair, complex(z) + omega, omega, 0, N - 1, E)
    tb0 = _scalar(-pair.tilde_b(z))
    bN = _scalar(pair.b(complex(z) + N * omega))
    zero = ScaledValue.from_complex(np.complex128(0))
    expected = [
        f[N],
        tb0 * g[N - 1],
        bN * f[N - 1],
        tb0 * bN * (g[N - 2] if N >= 2 else zero),
    ]
    got = [M.entry(0, 0), M.entry(0, 1), M.entry(1, 0), M.entry(1, 1)]
    return max(relative_defect(u, v) for u, v in zip(got, expected))


def product_determinant(pair: SamplingPair, z, omega: float, N: int, E) -> ScaledValue:
    """``det M^a_N`` from a QR-tracked product of the step matrices.

    Forming ``det`` from the entries of ``M^a_N`` cancels catastrophically
    once ``||M^a_N||^2`` dwarfs ``|det|``.  Here each step ``S_k Q_{k-1}`` is
    refactored as ``Q_k R_k`` with ``det Q_k = 1``, and the determinant is
    the product of the triangular diagonals, each computed to relative
    accuracy ``cond(S_k) eps``.
    """
    a, b, tb = orbit(pair, np.complex128(z), omega, 0, N + 1)
    E = complex(E)
    q = np.eye(2, dtype=complex)
    log_abs = 0.0
    phase = 1.0 + 0j
    for k in range(N):
        S = np.array([[a[k] - E, -tb[k]], [b[k + 1], 0.0]], dtype=complex)
        A = S @ q
        n = float(np.hypot(abs(A[0, 0]), abs(A[1, 0])))
        u0, u1 = A[0, 0] / n, A[1, 0] / n
        r22 = -u1 * A[0, 1] + u0 * A[1, 1]
        q = np.array([[u0, -np.conj(u1)], [u1, np.conj(u0)]])
        log_abs += np.log(n) + np.log(abs(r22))
        phase *= r22 / abs(r22)
    k2 = int(np.floor(log_abs / LN2))
    return ScaledValue.from_parts(np.exp(log_abs - k2 * LN2) * phase, k2)


def det_identity_defect(pair: SamplingPair, x: float, omega: float, l: int, E,
                        direct: bool = False) -> float:
    """Relative defect of ``det M^a_l(x) = conj(P_l(x)) P_l(x + w)``, ``P_l = prod_{j<l} b(x + j w)``.

    ``det M^a_l`` comes from :func:`product_determinant`; ``direct=True``
    instead takes it from the entries of the scaled product, which is only
    meaningful for short products.
    """
    if direct:
        M = transfer_product(pair, x, omega, l, E, "a")
        e = M.entries
        det = ScaledValue.from_parts(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0], 2 * np.asarray(M.exp2))
    else:
        det = product_determinant(pair, x, omega, l, E)
    b = pair.b(x + np.arange(l + 1) * omega)
    logP = np.log(np.abs(b[:l])).sum() + np.log(np.abs(b[1:])).sum()
    phase = np.prod(np.conj(b[:l]) / np.abs(b[:l])) * np.prod(b[1:] / np.abs(b[1:]))
    k = int(np.floor(logP / LN2))
    rhs = ScaledValue.from_parts(np.exp(logP - k * LN2) * phase, k)
    return relative_defect(det, rhs)


def u_relation_defect(pair: SamplingPair, z, omega: float, N: int, E) -> float:
    """``|log||M^u|| - log||M^a|| + (S~_N(z) + S_N(z + w))/2|``."""
    lu = float(transfer_product(pair, z, omega, N, E, "u").log_norm())
    la = float(transfer_product(pair, z, omega, N, E, "a").log_norm())
    s0 = birkhoff_sums(pair, z, omega, N)
    s1 = birkhoff_sums(pair, complex(z) + omega, omega, N)
    return abs(lu - la + 0.5 * (float(s0.S_tilde) + float(s1.S)))


def cadence_defect(pair: SamplingPair, z, omega: float, N: int, E, cadence: int = 16) -> float:
    """Log-norm difference between renormalizing every step and every ``cadence`` steps."""
    l1 = float(transfer_product(pair, z, omega, N, E, "a", cadence=1).log_norm())
    l2 = float(transfer_product(pair, z, omega, N, E, "a", cadence=cadence).log_norm())
    return abs(l1 - l2)


def cramer_defect(pair: SamplingPair, x: float, omega: float, N: int, E) -> float:
    """Max entrywise ``|G_cramer - (H - E)^{-1}|``."""
    G = green_matrix(pair, x, omega, N, E).to_complex()
    H = build_window(pair, x, omega, 0, N - 1).dense()
    ref = np.linalg.inv(H - E * np.eye(N))
    return float(np.max(np.abs(G - ref)))


def poisson_defect(pair: SamplingPair, x: float, omega: float, N: int) -> float:
    """Largest Poisson defect over eigenpairs, interior sub-windows and sites (unit ``psi``)."""
    win = build_window(pair, x, omega, 0, N - 1)
    sd = eigensystem(win)
    return poisson_sweep(win, sd.eigenvalues, sd.eigenvectors).max_residual


def slope_defect(pair: SamplingPair, x: float, omega: float, N: int, h: float = 1e-6,
                 min_gap: float = 1e-3) -> float:
    """Largest ``|dE_j/dx - central difference|`` over branches with gap ``>= min_gap``."""
    Ep = eigenvalues(pair, x + h, omega, 0, N - 1)
    Em = eigenvalues(pair, x - h, omega, 0, N - 1)
    worst = 0.0
    for j in range(N):
        s = eigenvalue_slope(pair, x, omega, (0, N - 1), j)
        if s.gap < min_gap:
            continue
        worst = max(worst, abs(s.value - (Ep[j] - Em[j]) / (2 * h)))
    return worst


def zero_count_defect(pair: SamplingPair, x: float, omega: float, N: int, center: complex,
                      radius: float) -> int:
    """``|argument-principle count - eigensolver count|`` for one disk in ``E``.

    The eigensolver count uses the radius the contour count settled on,
    which may be nudged outward when an eigenvalue sits on the circle.
    """
    spec = eigenvalues(pair, x, omega, 0, N - 1)
    got, r = count_zeros_disk(energy_slice(pair, x, omega, 0, N - 1), center, radius, return_radius=True)
    want = int(np.count_nonzero(np.abs(spec - center) < r))
    return abs(got - want)


def identity_case(pair: SamplingPair, omega: float, rng: np.random.Generator, case: int = 0,
                  N_max: int = 32) -> list[IdentityRow]:
    """Every identity on one model at a random scale, phase and energy drawn from ``rng``."""
    N = int(rng.integers(2, N_max + 1))
    x = float(rng.random())
    spec = eigenvalues(pair, x, omega, 0, N - 1)
    E = complex(rng.uniform(spec[0] - 1, spec[-1] + 1), rng.normal() * 0.1)
    rows = [
        IdentityRow("entry", case, N, entry_identity_defect(pair, x, omega, N, E), 1e-9),
        IdentityRow("determinant", case, N, det_identity_defect(pair, x, omega, N, E), 1e-9),
        IdentityRow("unimodular", case, N, u_relation_defect(pair, x, omega, N, E), 1e-9),
        IdentityRow("cadence", case, N, cadence_defect(pair, x, omega, N, E), 1e-10),
    ]
    n_g = min(N, 16)
    spec_g = eigenvalues(pair, x, omega, 0, n_g - 1)
    rows.append(IdentityRow("cramer", case, n_g, cramer_defect(pair, x, omega, n_g, float(spec_g[0] - 0.5)), 1e-8))
    rows.append(IdentityRow("poisson", case, n_g, poisson_defect(pair, x, omega, n_g), 1e-8))
    rows.append(IdentityRow("slope", case, N, slope_defect(pair, x, omega, N), 1e-5))
    center = complex(rng.uniform(spec[0], spec[-1]), 0.0)
    radius = float(rng.uniform(0.1, 0.5) * (spec[-1] - spec[0] + 1))
    rows.append(IdentityRow("zeros", case, N, float(zero_count_defect(pair, x, omega, N, center, radius)), 0.0))
    est = lyapunov(pair, 0.0, omega, float(spec[N // 2]), 32, grid_size=987)
    rows.append(IdentityRow("lyapunov-relation", case, 32, float(est.relation_residual), 1e-6))
    return rows


def suite_model(rng: np.random.Generator) -> SamplingPair:
    """Random degree-3 model with ``b`` kept away from zero."""
    from .models import random_model

    return random_model(rng, K=3, b_shift=1.5)


def identity_suite(pair: SamplingPair, omega: float, seed: int = 0, cases: int = 5,
                   N_max: int = 32) -> list[IdentityRow]:
    """Run :func:`identity_case` on ``pair`` (case 0) and on ``cases`` random models.

    Case ``c`` draws everything from its own child of ``SeedSequence(seed)``,
    so any subset of cases can be rerun independently.
    """
    rows: list[IdentityRow] = []
    for c, ss in enumerate(np.random.SeedSequence(seed).spawn(cases + 1)):
        rng = np.random.default_rng(ss)
        p = pair if c == 0 else suite_model(rng)
        rows.extend(identity_case(p, omega, rng, c, N_max))
    return rows
