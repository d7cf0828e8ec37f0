"""Coordinate windows and integer mode bookkeeping.

A window is a finite ordered set of coordinate labels ``j`` standing in for the
infinite index set of the torus.  Mode indices are integer vectors aligned with
the window's labels and stored row-wise in ``int64`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResourceError, WindowMismatchError


@dataclass(frozen=True)
class CoordinateWindow:
    labels: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(j) for j in self.labels)
        if not labels:
            raise ValueError("window needs at least one label")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in window {labels}")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def symmetric(cls, J: int) -> "CoordinateWindow":
        """Labels -J, ..., J."""
        return cls(tuple(range(-J, J + 1)))

    @classmethod
    def first(cls, n: int) -> "CoordinateWindow":
        """Labels 1, ..., n (the finite dimensional torus)."""
        return cls(tuple(range(1, n + 1)))

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def brackets(self) -> np.ndarray:
        """<j> = max(1, |j|) per label."""
        return np.maximum(1, np.abs(np.array(self.labels, dtype=float)))

    def position(self, label: int) -> int:
        try:
            return self.labels.index(int(label))
        except ValueError:
            raise WindowMismatchError(f"label {label} not in window {self.labels}") from None

    def mode(self, entries: dict[int, int] | None = None) -> np.ndarray:
        """Dense mode vector from a sparse ``{label: k_j}`` mapping."""
        k = np.zeros(self.size, dtype=np.int64)
        for label, value in (entries or {}).items():
            k[self.position(label)] = value
        return k

    def __str__(self):
        return f"CoordinateWindow{self.labels}"


def require_same_window(*windows: CoordinateWindow) -> CoordinateWindow:
    first = windows[0]
    for w in windows[1:]:
        if w != first:
            raise WindowMismatchError(f"window mismatch: {first.labels} vs {w.labels}")
    return first


def as_modes(k, n: int) -> np.ndarray:
    arr = np.asarray(k, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.shape[1] != n:
        raise WindowMismatchError(f"mode length {arr.shape[1]} does not match window size {n}")
    return arr


def lex_order(modes: np.ndarray) -> np.ndarray:
    """Stable permutation sorting mode rows lexicographically."""
    if len(modes) == 0:
        return np.zeros(0, dtype=np.int64)
    lo = modes.min(axis=0)
    span = modes.max(axis=0) - lo + 1
    # mixed-radix packing keeps lexicographic order when it fits in int64
    if np.prod(span.astype(float)) < 2.0**62:
        key = np.zeros(len(modes), dtype=np.int64)
        for j in range(modes.shape[1]):
            key = key * int(span[j]) + (modes[:, j] - lo[j])
        return np.argsort(key, kind="stable")
    return np.lexsort(modes.T[::-1])


def group_sum(modes: np.ndarray, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge duplicate mode rows by summing coefficients, in lexicographic order.

    The summation order is fixed by a stable sort, so results are bit-stable.
    """
    if len(modes) == 0:
        return modes.reshape(0, modes.shape[1]), coeffs
    order = lex_order(modes)
    sm = modes[order]
    sc = coeffs[order]
    new = np.ones(len(sm), dtype=bool)
    new[1:] = np.any(sm[1:] != sm[:-1], axis=1)
    starts = np.flatnonzero(new)
    return sm[starts], np.add.reduceat(sc, starts, axis=0)


def box_modes(bounds) -> np.ndarray:
    """All integer vectors with |k_j| <= bounds[j]."""
    axes = [np.arange(-int(b), int(b) + 1, dtype=np.int64) for b in bounds]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def additive_ball(weights: np.ndarray, K: float, strict: bool = False,
                  budget: int = 20_000_000, nonnegative: bool = False) -> np.ndarray:
    """Integer vectors with sum_j weights[j] * |k_j| <= K (or < K when strict).

    Built coordinate by coordinate with the remaining weight budget, so the
    work is proportional to the output size rather than to the bounding box.
    """
    weights = np.asarray(weights, dtype=float)
    partial = np.zeros((1, 0), dtype=np.int64)
    used = np.zeros(1)
    for w in weights:
        cap = int(np.floor(K / w)) if w > 0 else 0
        vals = np.arange(0 if nonnegative else -cap, cap + 1, dtype=np.int64)
        cost = used[:, None] + w * np.abs(vals)[None, :]
        ok = cost < K if strict else cost <= K
        rows, cols = np.nonzero(ok)
        if len(rows) > budget:
            raise ResourceError(f"enumeration exceeds budget of {budget} modes")
        partial = np.concatenate([partial[rows], vals[cols][:, None]], axis=1)
        used = cost[rows, cols]
    return partial
