"""Finite unions of closed real intervals with measure and complexity."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = ["IntervalUnion"]


def _normalize(pairs: Iterable) -> tuple[tuple[float, float], ...]:
    items = sorted((float(lo), float(hi)) for lo, hi in pairs)
    out: list[list[float]] = []
    for lo, hi in items:
        if hi < lo:
            raise ValueError(f"reversed interval [{lo}, {hi}]")
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return tuple((lo, hi) for lo, hi in out)


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted, disjoint closed intervals; overlapping or touching input is merged."""

    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "intervals", _normalize(self.intervals))

    @classmethod
    def from_pairs(cls, pairs) -> "IntervalUnion":
        return cls(tuple(map(tuple, pairs)))

    @classmethod
    def points(cls, values) -> "IntervalUnion":
        return cls(tuple((float(v), float(v)) for v in np.ravel(values)))

    @property
    def mes(self) -> float:
        return float(sum(hi - lo for lo, hi in self.intervals))

    @property
    def com(self) -> int:
        return len(self.intervals)

    def __len__(self):
        return self.com

    def __iter__(self):
        return iter(self.intervals)

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion(self.intervals + other.intervals)

    __or__ = union

    def fatten(self, delta: float) -> "IntervalUnion":
        """``{t : dist(t, self) <= delta}``."""
        if delta < 0:
            raise ValueError("delta must be non-negative")
        return IntervalUnion(tuple((lo - delta, hi + delta) for lo, hi in self.intervals))

    def clip(self, lo: float, hi: float) -> "IntervalUnion":
        out = []
        for a, b in self.intervals:
            a2, b2 = max(a, lo), min(b, hi)
            if a2 <= b2:
                out.append((a2, b2))
        return IntervalUnion(tuple(out))

    def contains(self, t):
        """Membership, elementwise for arrays."""
        t = np.asarray(t, dtype=float)
        if not self.intervals:
            out = np.zeros(t.shape, dtype=bool)
        else:
            lo = np.array([a for a, _ in self.intervals])
            hi = np.array([b for _, b in self.intervals])
            i = np.searchsorted(lo, t, side="right") - 1
            ic = np.clip(i, 0, len(lo) - 1)
            out = (i >= 0) & (t <= hi[ic])
        return bool(out) if out.ndim == 0 else out

    def __contains__(self, t) -> bool:
        return bool(self.contains(t))

    def to_dict(self, **meta) -> dict:
        return {"meta": meta, "intervals": [[lo, hi] for lo, hi in self.intervals]}

    @classmethod
    def from_dict(cls, doc) -> "IntervalUnion":
        items = doc["intervals"] if isinstance(doc, dict) else doc
        return cls.from_pairs(items)

    def save(self, path, **meta) -> None:
        Path(path).write_text(json.dumps(self.to_dict(**meta), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "IntervalUnion":
        return cls.from_dict(json.loads(Path(path).read_text()))
