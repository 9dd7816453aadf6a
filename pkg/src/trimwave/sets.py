"""Finite unions of closed intervals and isolated points on the real line."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import EmptySetError, InvalidIntervalError


def _normalize(intervals, points):
    ivs = sorted((float(lo), float(hi)) for lo, hi in intervals)
    for lo, hi in ivs:
        if not lo <= hi:
            raise InvalidIntervalError(f"interval [{lo}, {hi}] has lo > hi")
    merged: list[list[float]] = []
    for lo, hi in ivs:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    # degenerate intervals are points
    pts = [float(p) for p in points] + [lo for lo, hi in merged if lo == hi]
    merged = [(lo, hi) for lo, hi in merged if lo < hi]
    los = np.array([lo for lo, _ in merged])
    his = np.array([hi for _, hi in merged])
    kept = []
    for p in sorted(set(pts)):
        k = np.searchsorted(los, p, side="right") - 1
        if k >= 0 and p <= his[k]:
            continue
        kept.append(p)
    return tuple(merged), tuple(kept)


@dataclass(frozen=True)
class SpectrumSet:
    """Normalized union of disjoint sorted closed intervals and points.

    Construction always normalizes: overlapping or touching intervals merge
    and points inside an interval are absorbed.
    """

    intervals: tuple[tuple[float, float], ...] = ()
    points: tuple[float, ...] = ()

    def __post_init__(self):
        ivs, pts = _normalize(self.intervals, self.points)
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "points", pts)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "SpectrumSet":
        return cls(((lo, hi),))

    @classmethod
    def from_points(cls, points: Iterable[float]) -> "SpectrumSet":
        return cls((), tuple(points))

    @property
    def is_empty(self) -> bool:
        return not self.intervals and not self.points

    @property
    def inf(self) -> float:
        self._require_nonempty()
        return min([lo for lo, _ in self.intervals] + list(self.points))

    @property
    def sup(self) -> float:
        self._require_nonempty()
        return max([hi for _, hi in self.intervals] + list(self.points))

    def _require_nonempty(self):
        if self.is_empty:
            raise EmptySetError("the set is empty")

    def components(self) -> list[tuple[float, float]]:
        """Intervals and points as ``(lo, hi)`` pairs, sorted."""
        return sorted(list(self.intervals) + [(p, p) for p in self.points])

    def union(self, other: "SpectrumSet") -> "SpectrumSet":
        return SpectrumSet(self.intervals + other.intervals, self.points + other.points)

    def minkowski_sum(self, c: float) -> "SpectrumSet":
        """Dilate every component by ``[-c, c]``."""
        if c < 0:
            raise InvalidIntervalError(f"half-width must be >= 0, got {c}")
        if c == 0:
            return self
        return SpectrumSet(tuple((lo - c, hi + c) for lo, hi in self.components()))

    def distance_to(self, e: float) -> float:
        self._require_nonempty()
        best = np.inf
        for lo, hi in self.components():
            if lo <= e <= hi:
                return 0.0
            best = min(best, lo - e if e < lo else e - hi)
        return float(best)

    def distances(self, energies) -> np.ndarray:
        """Vectorized :meth:`distance_to`."""
        self._require_nonempty()
        e = np.asarray(energies, dtype=float)
        comps = np.array(self.components())
        lo, hi = comps[:, 0], comps[:, 1]
        gap = np.maximum(lo[None, :] - e[..., None], e[..., None] - hi[None, :])
        return np.maximum(gap, 0.0).min(axis=-1)

    def contains(self, e: float, tol: float = 0.0) -> bool:
        return self.distance_to(e) <= tol

    def to_dict(self) -> dict:
        return {"intervals": [list(iv) for iv in self.intervals], "points": list(self.points)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SpectrumSet":
        data = json.loads(text)
        return cls(tuple(tuple(iv) for iv in data.get("intervals", [])),
                   tuple(data.get("points", [])))


def hausdorff_distance(a: SpectrumSet, b: SpectrumSet) -> float:
    """Exact Hausdorff distance between two nonempty sets.

    ``t -> dist(t, B)`` is piecewise linear with maxima at component
    endpoints of ``A`` or at midpoints of the gaps of ``B``.
    """
    def one_sided(x: SpectrumSet, y: SpectrumSet) -> float:
        cands = [v for comp in x.components() for v in comp]
        ycomps = y.components()
        for (_, hi), (lo, _) in zip(ycomps[:-1], ycomps[1:]):
            mid = 0.5 * (hi + lo)
            if x.distance_to(mid) == 0.0:
                cands.append(mid)
        return float(np.max(y.distances(cands)))

    return max(one_sided(a, b), one_sided(b, a))
