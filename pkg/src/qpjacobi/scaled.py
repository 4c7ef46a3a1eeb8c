"""Overflow-safe scalars and 2x2 matrices.

Determinants and transfer matrices grow like ``exp(N L)``; everything here is
kept as a mantissa times a power of two.  Rescaling by powers of two is exact
in binary floating point, so results do not depend on how often a product is
renormalized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)

__all__ = ["ScaledValue", "ScaledMatrix2", "spectral_norm2", "renormalize"]


@dataclass(frozen=True)
class ScaledValue:
    """``value = mantissa * 2**exp2`` elementwise.

    ``mantissa`` is complex with ``|mantissa|`` in ``[1/2, 1)`` or exactly 0.
    """

    mantissa: np.ndarray
    exp2: np.ndarray

    @classmethod
    def from_parts(cls, mantissa, exp2=0) -> "ScaledValue":
        m = np.asarray(mantissa, dtype=complex)
        e = np.broadcast_to(np.asarray(exp2, dtype=np.int64), m.shape)
        _, shift = np.frexp(np.abs(m))
        return cls(np.ldexp(m.real, -shift) + 1j * np.ldexp(m.imag, -shift), e + shift)

    @classmethod
    def from_complex(cls, value) -> "ScaledValue":
        return cls.from_parts(value, 0)

    @property
    def is_zero(self) -> np.ndarray:
        return self.mantissa == 0

    @property
    def log_magnitude(self) -> np.ndarray:
        """``log|value|``; ``-inf`` for exact zeros."""
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.mantissa)) + self.exp2 * LN2

    @property
    def unit(self) -> np.ndarray:
        """``value/|value|`` (1 for zeros, where it is unused)."""
        a = np.abs(self.mantissa)
        return np.where(a > 0, self.mantissa / np.where(a > 0, a, 1.0), 1.0)

    def to_complex(self) -> np.ndarray:
        """Plain complex value; overflows to inf / underflows to 0 as floats do."""
        with np.errstate(over="ignore", under="ignore"):
            e = np.clip(self.exp2, -2000, 2000)
            out = np.ldexp(self.mantissa.real, e) + 1j * np.ldexp(self.mantissa.imag, e)
        return out

    def __mul__(self, other: "ScaledValue") -> "ScaledValue":
        return ScaledValue.from_parts(self.mantissa * other.mantissa, self.exp2 + other.exp2)

    def __truediv__(self, other: "ScaledValue") -> "ScaledValue":
        with np.errstate(divide="ignore", invalid="ignore"):
            return ScaledValue.from_parts(self.mantissa / other.mantissa, self.exp2 - other.exp2)

    def __getitem__(self, idx) -> "ScaledValue":
        return ScaledValue(self.mantissa[idx], self.exp2[idx])

    def __len__(self):
        return len(self.mantissa)


def renormalize(entries: np.ndarray, exp2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale a stack of 2x2 matrices so the largest entry modulus is in [1/2, 1)."""
    peak = np.max(np.abs(entries), axis=(-2, -1))
    _, shift = np.frexp(peak)
    s = shift[..., None, None]
    out = np.ldexp(entries.real, -s) + 1j * np.ldexp(entries.imag, -s)
    return out, exp2 + shift


def spectral_norm2(m: np.ndarray) -> np.ndarray:
    """Largest singular value of each 2x2 matrix in a stack (closed form)."""
    fro2 = np.sum(np.abs(m) ** 2, axis=(-2, -1))
    det = np.abs(m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0])
    disc = np.sqrt(np.maximum((fro2 - 2 * det) * (fro2 + 2 * det), 0.0))
    return np.sqrt(0.5 * (fro2 + disc))


@dataclass(frozen=True)
class ScaledMatrix2:
    """A stack of 2x2 complex matrices ``entries * 2**exp2``.

    ``entries`` has shape ``(..., 2, 2)`` and ``exp2`` shape ``(...)``.
    """

    entries: np.ndarray
    exp2: np.ndarray

    @classmethod
    def from_array(cls, m) -> "ScaledMatrix2":
        m = np.asarray(m, dtype=complex)
        ent, e = renormalize(m, np.zeros(m.shape[:-2], dtype=np.int64))
        return cls(ent, e)

    @property
    def log_scale(self) -> np.ndarray:
        return self.exp2 * LN2

    def log_norm(self) -> np.ndarray:
        """``log`` of the spectral norm."""
        with np.errstate(divide="ignore"):
            return np.log(spectral_norm2(self.entries)) + self.log_scale

    def entry(self, i: int, j: int) -> ScaledValue:
        return ScaledValue.from_parts(self.entries[..., i, j], self.exp2)

    def log_abs_det(self) -> np.ndarray:
        m = self.entries
        with np.errstate(divide="ignore"):
            return (np.log(np.abs(m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]))
                    + 2 * self.log_scale)

    def __matmul__(self, other: "ScaledMatrix2") -> "ScaledMatrix2":
        ent, e = renormalize(self.entries @ other.entries, self.exp2 + other.exp2)
        return ScaledMatrix2(ent, e)

    def scaled_by(self, factor) -> "ScaledMatrix2":
        """Multiply by a (broadcast) complex scalar."""
        ent, e = renormalize(self.entries * np.asarray(factor)[..., None, None], self.exp2)
        return ScaledMatrix2(ent, e)

    def to_array(self) -> np.ndarray:
        e = np.clip(self.exp2, -2000, 2000)[..., None, None]
        with np.errstate(over="ignore", under="ignore"):
            return np.ldexp(self.entries.real, e) + 1j * np.ldexp(self.entries.imag, e)

    def __getitem__(self, idx) -> "ScaledMatrix2":
        return ScaledMatrix2(self.entries[idx], self.exp2[idx])
