"""Ready-made sampling pairs used by tests, demos and the bundled configs."""
from __future__ import annotations

import math

import numpy as np

from .sampling import SamplingPair, TrigPolynomial

__all__ = ["almost_mathieu", "free_laplacian", "random_model", "geometric_model"]


def almost_mathieu(lam: float) -> SamplingPair:
    """``a(x) = 2 lam cos(2 pi x)``, ``b = 1``."""
    return SamplingPair(TrigPolynomial.cosine(2.0 * lam), TrigPolynomial.constant(1.0))


def free_laplacian() -> SamplingPair:
    """``a = 0``, ``b = 1``."""
    return SamplingPair(TrigPolynomial.constant(0.0), TrigPolynomial.constant(1.0))


def random_model(rng: np.random.Generator, K: int = 3, decay: float = 1.0,
                 b_shift: float = 0.0) -> SamplingPair:
    """Random degree-``K`` pair with coefficients damped by ``exp(-decay |n|)``.

    ``b_shift`` is added to the constant coefficient of ``b`` (to keep ``b``
    away from zero when that matters).
    """
    n = np.arange(-K, K + 1)
    damp = np.exp(-decay * np.abs(n))
    ca = (rng.normal(size=n.size) + 1j * rng.normal(size=n.size)) * damp
    ca = 0.5 * (ca + np.conj(ca[::-1]))
    cb = (rng.normal(size=n.size) + 1j * rng.normal(size=n.size)) * damp
    cb[K] += b_shift
    return SamplingPair(TrigPolynomial(ca, True), TrigPolynomial(cb))


def geometric_model(K: int = 40, ratio: float = 0.5) -> SamplingPair:
    """``a`` with coefficients ``ratio^|n|`` (|n| <= K), ``b = 1``.

    The strip width is matched to the decay, ``exp(-pi rho0) = ratio``.
    """
    n = np.arange(-K, K + 1)
    c = ratio ** np.abs(n) + 0j
    rho0 = -math.log(ratio) / math.pi
    return SamplingPair(TrigPolynomial(c, True), TrigPolynomial.constant(1.0), rho0)
