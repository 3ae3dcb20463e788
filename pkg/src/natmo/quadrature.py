"""Empirical measures on point sets and the inner products they induce.

A ``QuadratureSet`` represents the discrete measure ``sum_j w_j delta_{x_j}``
used by every loss, Gram matrix and momentum projection in the package.
Functions evaluated on its points travel as plain 1-D float64 arrays
("point values"); an optional per-point array of nonnegative metric weights
``h_j`` turns the plain weighted pairing into a Hessian-induced one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QuadratureSet", "uniform_grid", "from_samples", "inner", "norm"]


@dataclass(frozen=True)
class QuadratureSet:
    """Integration points (m, n) and strictly positive weights (m,).

    Immutable after construction; the underlying arrays are marked
    read-only so instances can be shared across concurrent runs.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a nonempty (m, n) array")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (pts.shape[0],):
            raise ValueError(
                f"weights shape {w.shape} does not match {pts.shape[0]} points"
            )
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("points and weights must be finite")
        if np.any(w <= 0.0):
            raise ValueError("all weights must be positive")
        pts = np.ascontiguousarray(pts)
        w = np.ascontiguousarray(w)
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def uniform_grid(a: float, b: float, m: int) -> QuadratureSet:
    """Equispaced grid on [a, b] inclusive, with empirical weights 1/m."""
    if m < 2:
        raise ValueError("uniform_grid needs m >= 2")
    if not a < b:
        raise ValueError("uniform_grid needs a < b")
    pts = np.linspace(a, b, m)
    return QuadratureSet(pts[:, None], np.full(m, 1.0 / m))


def from_samples(points) -> QuadratureSet:
    """Empirical measure of a sample set: uniform weights 1/m."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise ValueError("from_samples needs a nonempty point list")
    if pts.ndim == 1:
        pts = pts[:, None]
    return QuadratureSet(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))


def _check_values(name: str, a, m: int) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.shape != (m,):
        raise ValueError(f"{name} has shape {arr.shape}, expected ({m},)")
    return arr


def inner(a, b, q: QuadratureSet, metric=None) -> float:
    """Weighted pairing sum_j w_j h_j a_j b_j (h = 1 without a metric)."""
    av = _check_values("a", a, q.m)
    bv = _check_values("b", b, q.m)
    if metric is None:
        return float(np.dot(q.weights * av, bv))
    h = _check_values("metric", metric, q.m)
    if np.any(h < 0.0):
        raise ValueError("metric weights must be nonnegative")
    return float(np.dot(q.weights * h * av, bv))


def norm(a, q: QuadratureSet, metric=None) -> float:
    """Norm induced by :func:`inner`."""
    return float(np.sqrt(max(inner(a, a, q, metric), 0.0)))
