"""Finite Jacobi windows, their eigensystems and analytic determinants.

The window on ``[lo, hi]`` at phase ``z`` has

    diag[k]  =  a(z + k w)
    upper[k] = -b(z + (k+1) w)        (entry (k, k+1))
    lower[k] = -b~(z + (k+1) w)       (entry (k+1, k))

for ``k`` in the window.  For real ``z`` it is Hermitian.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal

from .sampling import SamplingPair
from .scaled import ScaledValue

__all__ = [
    "JacobiWindow",
    "SpectralData",
    "DirichletVector",
    "EigensolverError",
    "build_window",
    "eigensystem",
    "eigenvalues",
    "spectra",
    "orbit",
    "determinant",
    "determinant_sequence",
    "suffix_determinants",
    "dirichlet_eigenvector",
]

SPLIT_TOL = 1e-13


class EigensolverError(RuntimeError):
    pass


def orbit(pair: SamplingPair, z, omega: float, start: int, count: int):
    """``a``, ``b``, ``b~`` sampled at ``z + k w`` for ``k = start .. start+count-1``.

    ``z`` may be an array; outputs have shape ``(count, *z.shape)``.
    """
    z = np.asarray(z, dtype=complex)
    k = np.arange(start, start + count).reshape((count,) + (1,) * z.ndim)
    pts = z + k * omega
    a = pair.a(pts)
    if np.all(np.imag(z) == 0):
        a = a.real + 0j
    return a, pair.b(pts), pair.tilde_b(pts)


@dataclass(frozen=True)
class JacobiWindow:
    lo: int
    hi: int
    z: complex
    omega: float
    diag: np.ndarray
    upper: np.ndarray
    lower: np.ndarray

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def is_real_phase(self) -> bool:
        return complex(self.z).imag == 0.0

    def dense(self) -> np.ndarray:
        n = self.size
        h = np.diag(self.diag.astype(complex))
        if n > 1:
            h[np.arange(n - 1), np.arange(1, n)] = self.upper
            h[np.arange(1, n), np.arange(n - 1)] = self.lower
        return h

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """``H v`` for a vector or a stack of column vectors."""
        out = self.diag.reshape((-1,) + (1,) * (v.ndim - 1)) * v
        if self.size > 1:
            up = self.upper.reshape((-1,) + (1,) * (v.ndim - 1))
            lo = self.lower.reshape((-1,) + (1,) * (v.ndim - 1))
            out[:-1] += up * v[1:]
            out[1:] += lo * v[:-1]
        return out

    def norm_estimate(self) -> float:
        """Max absolute row sum (bounds the operator norm)."""
        r = np.abs(self.diag).astype(float)
        if self.size > 1:
            r[:-1] += np.abs(self.upper)
            r[1:] += np.abs(self.lower)
        return float(np.max(r))


def build_window(pair: SamplingPair, z, omega: float, lo: int, hi: int) -> JacobiWindow:
    """The restriction ``H_[lo, hi](z, w)``."""
    if hi < lo:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    pair.check_strip(z)
    z = complex(z)
    n = hi - lo + 1
    a, b, tb = orbit(pair, z, omega, lo, n + 1)
    diag = a[:n]
    if z.imag == 0:
        diag = diag.real.astype(float)
    return JacobiWindow(lo, hi, z, float(omega), diag, -b[1:n + 1][: n - 1], -tb[1:n + 1][: n - 1])


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    residuals: np.ndarray
    blocks: tuple[tuple[int, int], ...]

    def __len__(self):
        return self.eigenvalues.size

    def gaps(self) -> np.ndarray:
        """Distance of each eigenvalue to the rest of the spectrum."""
        e = self.eigenvalues
        if e.size < 2:
            return np.full(e.size, np.inf)
        d = np.diff(e)
        left = np.concatenate([[np.inf], d])
        right = np.concatenate([d, [np.inf]])
        return np.minimum(left, right)


def _phase_reduce(window: JacobiWindow):
    """Diagonal unitary ``U`` with ``U H U*`` real symmetric tridiagonal."""
    off = window.upper
    mag = np.abs(off)
    sign = np.where(mag > 0, off / np.where(mag > 0, mag, 1.0), 1.0)
    u = np.concatenate([[1.0 + 0j], np.cumprod(sign)]) if window.size > 1 else np.ones(1, complex)
    return np.asarray(window.diag).real.astype(float), mag, u


def _split(d: np.ndarray, e: np.ndarray, tol: float):
    scale = max(float(np.max(np.abs(d), initial=0.0)), float(np.max(e, initial=0.0)), 1e-300)
    cuts = np.flatnonzero(e < tol * scale)
    starts = np.concatenate([[0], cuts + 1])
    stops = np.concatenate([cuts + 1, [d.size]])
    return list(zip(starts.tolist(), stops.tolist()))


def eigensystem(window: JacobiWindow, split_tol: float = SPLIT_TOL) -> SpectralData:
    """Eigenvalues (ascending) and unit eigenvectors of a real-phase window."""
    if not window.is_real_phase:
        raise ValueError("eigensystem needs a real phase (Hermitian window)")
    d, e, u = _phase_reduce(window)
    n = d.size
    blocks = _split(d, e, split_tol)
    vals, vecs = [], np.zeros((n, n))
    col = 0
    for s, t in blocks:
        if t - s == 1:
            w, v = np.array([d[s]]), np.ones((1, 1))
        else:
            try:
                w, v = eigh_tridiagonal(d[s:t], e[s:t - 1])
            except np.linalg.LinAlgError as exc:
                raise EigensolverError(f"tridiagonal solver failed on block [{s}, {t - 1}]") from exc
        vals.append(w)
        vecs[s:t, col:col + (t - s)] = v
        col += t - s
    allvals = np.concatenate(vals)
    order = np.argsort(allvals, kind="stable")
    phi = vecs[:, order]
    psi = np.conj(u)[:, None] * phi
    evals = allvals[order]
    res = np.linalg.norm(window.matvec(psi) - psi * evals[None, :], axis=0)
    return SpectralData(evals, psi, res, tuple(blocks))


def eigenvalues(pair: SamplingPair, x: float, omega: float, lo: int, hi: int) -> np.ndarray:
    """Spectrum only (no eigenvectors) of ``H_[lo, hi](x, w)``."""
    n = hi - lo + 1
    a, b, _ = orbit(pair, float(x), omega, lo, n)
    d = a.real
    if n == 1:
        return d.copy()
    e = np.abs(b[1:])
    return eigvalsh_tridiagonal(d, e)


def spectra(pair: SamplingPair, phases, omega: float, length: int) -> np.ndarray:
    """Spectra of ``H^(length)(x, w)`` for many real phases, shape ``(len(phases), length)``.

    Only ``a`` and ``|b|`` matter for the spectrum, so the stack is assembled
    as real symmetric matrices and solved in one batched call.
    """
    x = np.asarray(phases, dtype=float).ravel()
    a, b, _ = orbit(pair, x, omega, 0, length)
    d = a.real.T  # (B, length)
    if length == 1:
        return d.copy()
    e = np.abs(b[1:]).T
    h = np.zeros((x.size, length, length))
    i = np.arange(length)
    h[:, i, i] = d
    h[:, i[:-1], i[1:]] = e
    h[:, i[1:], i[:-1]] = e
    return np.linalg.eigvalsh(h)


# -- determinants ----------------------------------------------------------

def _recursion(diag: np.ndarray, coupling: np.ndarray) -> ScaledValue:
    """``f_{k+1} = diag[k] f_k - coupling[k] f_{k-1}``, ``f_0 = 1``, ``f_{-1} = 0``.

    Returns ``f_0 .. f_n`` (leading axis).  The running pair is rescaled by a
    power of two each step.
    """
    n = diag.shape[0]
    shape = diag.shape[1:]
    mant = np.empty((n + 1,) + shape, dtype=complex)
    ex = np.empty((n + 1,) + shape, dtype=np.int64)
    u = np.ones(shape, dtype=complex)
    v = np.zeros(shape, dtype=complex)
    e = np.zeros(shape, dtype=np.int64)
    mant[0], ex[0] = u, e
    for k in range(n):
        w = diag[k] * u - coupling[k] * v
        v, u = u, w
        _, s = np.frexp(np.maximum(np.abs(u), np.abs(v)))
        f = np.exp2(-s.astype(float))
        u, v, e = u * f, v * f, e + s
        mant[k + 1], ex[k + 1] = u, e
    return ScaledValue.from_parts(mant, ex)


def _lift(v: np.ndarray, shape: tuple) -> np.ndarray:
    """Insert axes after the orbit axis so ``v`` broadcasts against ``shape``."""
    extra = len(shape) - (v.ndim - 1)
    return v.reshape(v.shape[:1] + (1,) * extra + v.shape[1:])


def determinant_sequence(pair: SamplingPair, z, omega: float, lo: int, length: int, E) -> ScaledValue:
    """``f^a`` of the windows ``[lo, lo + n - 1]`` for ``n = 0 .. length``.

    ``z`` and ``E`` broadcast against each other; the result has a leading
    axis of size ``length + 1``.
    """
    pair.check_strip(z)
    z = np.asarray(z, dtype=complex)
    E = np.asarray(E, dtype=complex)
    a, b, tb = orbit(pair, z, omega, lo, max(length, 1))
    shape = np.broadcast_shapes(z.shape, E.shape)
    a, b, tb = (_lift(v, shape) for v in (a, b, tb))
    diag = np.broadcast_to(a[:length] - E, (length,) + shape)
    coupling = np.broadcast_to(b[:length] * tb[:length], (length,) + shape)
    return _recursion(diag, coupling)


def determinant(pair: SamplingPair, z, omega: float, lo: int, hi: int, E) -> ScaledValue:
    """``f^a_[lo, hi](z, w, E) = det[H_[lo, hi](z, w) - E]`` in scaled form."""
    if hi < lo:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    return determinant_sequence(pair, z, omega, lo, hi - lo + 1, E)[-1]


def suffix_determinants(pair: SamplingPair, z, omega: float, N: int, E) -> ScaledValue:
    """``g_k = det[H_[k, N-1] - E]`` for ``k = 0 .. N`` (``g_N = 1``).

    Computed by the backward recursion
    ``g_k = (a_k - E) g_{k+1} - b_{k+1} b~_{k+1} g_{k+2}``.
    """
    z = np.asarray(z, dtype=complex)
    E = np.asarray(E, dtype=complex)
    a, b, tb = orbit(pair, z, omega, 0, N + 1)
    shape = np.broadcast_shapes(z.shape, E.shape)
    a, b, tb = (_lift(v, shape) for v in (a, b, tb))
    diag = np.broadcast_to((a[:N] - E)[::-1], (N,) + shape)
    # step r builds g_{N-1-r}; it couples through site N-r
    coupling = np.broadcast_to((b[1:N + 1] * tb[1:N + 1])[::-1], (N,) + shape)
    rev = _recursion(diag, coupling)
    return rev[::-1]


@dataclass(frozen=True)
class DirichletVector:
    vector: np.ndarray
    residual: float
    degraded: bool


def dirichlet_eigenvector(pair: SamplingPair, x: float, omega: float, N: int, E: float,
                          tol: float | None = None) -> DirichletVector:
    """Eigenvector of ``H^(N)(x, w)`` at eigenvalue ``E`` from prefix determinants.

    ``psi(n) = f^a_[0, n-1](E) * prod_{k=n+1}^{N-1} b(x + k w)``, normalised
    once at the end.  The trailing product makes the vector solve the Jacobi
    equation without dividing by ``b``; for ``b = 1`` it is the plain
    determinant sequence.
    """
    x = float(x)
    win = build_window(pair, x, omega, 0, N - 1)
    scale = max(win.norm_estimate(), 1e-300)
    if tol is None:
        tol = 1e-8 * scale
    spec = eigenvalues(pair, x, omega, 0, N - 1)
    dist = float(np.min(np.abs(spec - E)))
    if dist > tol:
        raise ValueError(f"E={E!r} is {dist:.3g} away from the spectrum (tol {tol:.3g})")
    f = determinant_sequence(pair, x, omega, 0, N, E)[:N]
    _, b, _ = orbit(pair, x, omega, 0, N)
    logb = np.log(np.abs(b))
    tail = np.concatenate([np.cumsum(logb[:0:-1])[::-1], [0.0]])  # sum_{k>n} log|b_k|
    phase_b = np.concatenate([np.cumprod((b / np.abs(b))[:0:-1])[::-1], [1.0]])
    logmag = f.log_magnitude + tail
    top = np.max(logmag)
    with np.errstate(under="ignore"):
        v = np.exp(logmag - top) * f.unit * phase_b
    v = v / np.linalg.norm(v)
    res = float(np.linalg.norm(win.matvec(v) - E * v))
    gaps = np.abs(spec - E)
    gaps = gaps[gaps > tol]
    clustered = gaps.size > 0 and float(np.min(gaps)) < 1e-6 * scale
    return DirichletVector(v, res, res > 1e-8 * scale or clustered)
