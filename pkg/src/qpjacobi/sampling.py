"""Trigonometric-polynomial sampling functions ``a``, ``b`` and ``b~``.

The operator is built from a real-analytic ``a : T -> R`` and a complex
``b : T -> C``.  Both are carried as finite Fourier data

    p(z) = sum_{|n| <= K} c_n e(n z),   e(t) = exp(2 pi i t),

which is entire, so any strip ``|Im z| < rho0`` is admissible.  ``b~`` is the
analytic continuation of ``conj(b)`` off the real line; its coefficients are
``conj(c_{-n})``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

__all__ = [
    "TrigPolynomial",
    "SamplingPair",
    "StripBounds",
    "Truncation",
    "StripError",
    "ModelFileError",
    "evaluate",
    "truncate",
    "mean_log_modulus",
    "strip_bounds",
    "load_model",
    "save_model",
    "model_to_dict",
    "model_from_dict",
]

TWO_PI = 2.0 * math.pi


class StripError(ValueError):
    """Evaluation point outside the analyticity strip."""


class ModelFileError(ValueError):
    """Malformed or invalid model JSON."""


@dataclass(frozen=True)
class TrigPolynomial:
    """Fourier coefficients ``c_n`` for ``n = -K..K``, stored densely.

    ``coeffs[n + K] = c_n``.
    """

    coeffs: np.ndarray
    real_valued: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).copy()
        if c.ndim != 1 or c.size % 2 != 1:
            raise ValueError("coefficient array must have odd length 2K+1")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.real_valued:
            scale = np.abs(c).sum() + 1e-300
            if np.max(np.abs(c - np.conj(c[::-1]))) > 1e-12 * scale:
                raise ValueError("real_valued polynomial needs c_{-n} = conj(c_n)")

    @classmethod
    def from_dict(cls, coefficients: Mapping[int, complex], real_valued: bool = False) -> "TrigPolynomial":
        if not coefficients:
            return cls(np.zeros(1, dtype=complex), real_valued)
        K = max(abs(int(n)) for n in coefficients)
        c = np.zeros(2 * K + 1, dtype=complex)
        for n, v in coefficients.items():
            c[int(n) + K] += complex(v)
        return cls(c, real_valued)

    @classmethod
    def constant(cls, value: complex) -> "TrigPolynomial":
        return cls(np.array([value], dtype=complex), real_valued=complex(value).imag == 0.0)

    @classmethod
    def cosine(cls, amplitude: float, phase: float = 0.0) -> "TrigPolynomial":
        """``amplitude * cos(2 pi (x + phase))``."""
        h = 0.5 * amplitude * np.exp(2j * math.pi * phase)
        return cls(np.array([np.conj(h), 0.0, h]), real_valued=True)

    @property
    def degree(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def indices(self) -> np.ndarray:
        K = self.degree
        return np.arange(-K, K + 1)

    def coefficient(self, n: int) -> complex:
        K = self.degree
        return complex(self.coeffs[n + K]) if abs(n) <= K else 0.0j

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def l1_norm(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def tilde(self) -> "TrigPolynomial":
        """Analytic extension of ``conj(p)`` from the real line."""
        return TrigPolynomial(np.conj(self.coeffs[::-1]), self.real_valued)

    def derivative(self) -> "TrigPolynomial":
        """Term-by-term ``d/dz``."""
        return TrigPolynomial(2j * math.pi * self.indices * self.coeffs, False)

    def __call__(self, z):
        return _eval(self, z)


def _eval(p: TrigPolynomial, z) -> np.ndarray:
    z = np.asarray(z)
    K = p.degree
    if K == 0:
        out = np.full(z.shape, p.coeffs[0], dtype=complex)
    else:
        # integer frequencies: reduce Re z mod 1 so 2 pi z rounds at unit scale
        z = np.mod(z.real, 1.0) + 1j * z.imag
        # Horner in w = e(z), after factoring out e(-K z)
        w = np.exp(2j * math.pi * z)
        out = np.full(z.shape, p.coeffs[-1], dtype=complex)
        for c in p.coeffs[-2::-1]:
            out = out * w + c
        out = out * np.exp(-2j * math.pi * K * z)
    return out


def evaluate(p: TrigPolynomial, z, rho0: float | None = None):
    """Evaluate ``sum_n c_n e(n z)``.

    Parameters
    ----------
    p : TrigPolynomial
    z : complex or array of complex
    rho0 : float, optional
        Strip half-width; points with ``|Im z| >= rho0`` are rejected.
    """
    z = np.asarray(z, dtype=complex)
    if rho0 is not None and np.any(np.abs(z.imag) >= rho0):
        raise StripError(f"|Im z| must be < rho0={rho0}")
    out = _eval(p, z)
    if p.real_valued and np.all(z.imag == 0):
        out = out.real + 0j
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SamplingPair:
    """The pair ``(a, b)`` plus the strip half-width ``rho0``."""

    a: TrigPolynomial
    b: TrigPolynomial
    rho0: float = 0.5
    tilde_b: TrigPolynomial = field(init=False)
    da: TrigPolynomial = field(init=False, repr=False)
    db: TrigPolynomial = field(init=False, repr=False)
    dtilde_b: TrigPolynomial = field(init=False, repr=False)

    def __post_init__(self):
        if not self.a.real_valued:
            raise ValueError("a must be real valued")
        if self.b.is_zero():
            raise ValueError("b must not be identically zero")
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        tb = self.b.tilde()
        object.__setattr__(self, "tilde_b", tb)
        object.__setattr__(self, "da", self.a.derivative())
        object.__setattr__(self, "db", self.b.derivative())
        object.__setattr__(self, "dtilde_b", tb.derivative())

    @property
    def scale(self) -> float:
        """Crude operator-norm scale ``||a||_1 + 2||b||_1``."""
        return self.a.l1_norm() + 2.0 * self.b.l1_norm()

    @property
    def degree(self) -> int:
        return max(self.a.degree, self.b.degree)

    def check_strip(self, z) -> None:
        if np.any(np.abs(np.imag(z)) >= self.rho0):
            raise StripError(f"|Im z| must be < rho0={self.rho0}")

    def fingerprint(self) -> str:
        """Short content hash, used to tag persisted bad sets."""
        payload = json.dumps(model_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class StripBounds:
    sup_a: float
    sup_b: float
    b_star: float
    grid: int
    y_grid: int


@dataclass(frozen=True)
class Truncation:
    polynomial: TrigPolynomial
    K: int
    certificate: float | None
    decay_constant: float | None
    certified: bool


def truncate(coefficients, K: int, rho0: float, C: float | None = None) -> Truncation:
    """Keep Fourier modes ``|n| <= K`` and certify the sup error on ``|Im z| < rho0/3``.

    Parameters
    ----------
    coefficients : TrigPolynomial, mapping ``n -> c_n``, or callable ``n -> c_n``
        The coefficient stream.  A callable is sampled for ``|n| <= 4K + 64``
        to estimate the decay constant.
    K : int
    rho0 : float
        Coefficients are expected to satisfy ``|c_n| <= C exp(-pi rho0 |n|)``.
    C : float, optional
        Decay constant; estimated from the visible coefficients if omitted.

    Returns
    -------
    Truncation
        ``certificate = C' exp(-pi rho0 K / 3)`` with
        ``C' = 2 C q / (1 - q)``, ``q = exp(-pi rho0 / 3)``: the tail sum of
        the majorant on ``|Im z| < rho0/3``.  Only issued when every visible
        coefficient obeys the decay hypothesis, else ``certified=False``.
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    if isinstance(coefficients, TrigPolynomial):
        stream = {int(n): complex(c) for n, c in zip(coefficients.indices, coefficients.coeffs)}
        real_valued = coefficients.real_valued
    elif callable(coefficients):
        span = 4 * K + 64
        stream = {n: complex(coefficients(n)) for n in range(-span, span + 1)}
        real_valued = False
    else:
        stream = {int(n): complex(c) for n, c in dict(coefficients).items()}
        real_valued = False
    kept = {n: c for n, c in stream.items() if abs(n) <= K}
    if real_valued:
        poly = TrigPolynomial.from_dict(kept, real_valued=True)
    else:
        poly = TrigPolynomial.from_dict(kept)
        vals = np.asarray([kept.get(n, 0) for n in range(-K, K + 1)])
        if np.allclose(vals, np.conj(vals[::-1]), rtol=0, atol=1e-15 * (np.abs(vals).sum() + 1e-300)):
            poly = TrigPolynomial(0.5 * (vals + np.conj(vals[::-1])), real_valued=True)
    tail = {n: c for n, c in stream.items() if abs(n) > K}
    if not any(abs(c) > 0 for c in tail.values()):
        return Truncation(poly, K, 0.0, C, True)
    weights = {n: abs(c) * math.exp(math.pi * rho0 * abs(n)) for n, c in stream.items()}
    needed = max(weights.values())
    if C is None:
        C = needed
    certified = needed <= C * (1 + 1e-12)
    # sum_{|n|>K} C e^{-pi rho0 |n|} e^{2 pi |n| rho0/3} = C' e^{-pi rho0 K/3}
    q = math.exp(-math.pi * rho0 / 3.0)
    cert = 2.0 * C * q / (1.0 - q) * q ** K if certified else None
    return Truncation(poly, K, cert, C, certified)


def mean_log_modulus(b: TrigPolynomial, y: float = 0.0, grid: int = 1024,
                     tol: float = 1e-10, max_grid: int = 1 << 20) -> tuple[float, float]:
    """``D(y) = int_T log|b(x + i y)| dx`` by the periodic trapezoid rule.

    The grid is doubled until two successive estimates agree within ``tol``.
    Grid points where ``b`` vanishes are dropped.

    Returns
    -------
    value, error_estimate : float, float
    """
    if b.is_zero():
        raise ValueError("b must not be identically zero")

    def rule(n):
        x = (np.arange(n) + 0.5) / n
        v = np.abs(_eval(b, x + 1j * y))
        v = v[v > 0]
        return float(np.mean(np.log(v)))

    n = max(8, int(grid))
    prev = rule(n)
    while True:
        n *= 2
        cur = rule(n)
        err = abs(cur - prev)
        if err <= tol or n >= max_grid:
            return cur, err
        prev = cur


def strip_bounds(pair: SamplingPair, grid: int = 1024, y_points: int = 65) -> StripBounds:
    """Grid lower bounds for ``||a||_inf``, ``||b||_inf`` and ``||b||_*`` on the strip."""
    x = np.arange(grid) / grid
    ys = np.linspace(-pair.rho0, pair.rho0, y_points)
    # closed strip edge replaced by a hair inside
    ys = np.clip(ys, -pair.rho0 * (1 - 1e-9), pair.rho0 * (1 - 1e-9))
    sup_a = sup_b = 0.0
    max_d = 0.0
    for y in ys:
        z = x + 1j * y
        sup_a = max(sup_a, float(np.max(np.abs(_eval(pair.a, z)))))
        sup_b = max(sup_b, float(np.max(np.abs(_eval(pair.b, z)))))
        d, _ = mean_log_modulus(pair.b, float(y), grid=grid, tol=1e-8, max_grid=grid * 16)
        max_d = max(max_d, abs(d))
    return StripBounds(sup_a, sup_b, sup_b + max_d, grid, y_points)


# -- model files -----------------------------------------------------------

def _coeff_list(p: TrigPolynomial) -> list[list[float]]:
    return [[int(n), float(c.real), float(c.imag)]
            for n, c in zip(p.indices, p.coeffs) if c != 0]


def model_to_dict(pair: SamplingPair) -> dict:
    return {"a": _coeff_list(pair.a), "b": _coeff_list(pair.b), "rho0": pair.rho0}


def model_from_dict(doc: Mapping) -> SamplingPair:
    try:
        a_items = {int(n): complex(re, im) for n, re, im in doc["a"]}
        b_items = {int(n): complex(re, im) for n, re, im in doc["b"]}
        rho0 = float(doc.get("rho0", 0.5))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model document: {exc}") from exc
    for n, c in a_items.items():
        partner = a_items.get(-n, 0j)
        if abs(c - np.conj(partner)) > 1e-12 * (1 + abs(c)):
            raise ModelFileError(f"a is not real valued: c_{n} != conj(c_{-n})")
    if not any(abs(c) > 0 for c in b_items.values()):
        raise ModelFileError("b is identically zero")
    try:
        return SamplingPair(TrigPolynomial.from_dict(a_items, real_valued=True),
                            TrigPolynomial.from_dict(b_items), rho0)
    except ValueError as exc:
        raise ModelFileError(str(exc)) from exc


def load_model(path) -> SamplingPair:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    return model_from_dict(doc)


def save_model(pair: SamplingPair, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(pair), indent=2) + "\n")
