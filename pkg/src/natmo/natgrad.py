"""Gram systems, regularized pseudo-inverses and tangent-space projections.

One spectral decomposition per Gram matrix serves every solve within an
optimizer iteration: the natural-gradient direction, the momentum projection
and any diagnostics.  Three regularizations of the pseudo-inverse are
available:

* ``cutoff``:   drop eigenvalues <= eps_rel * lambda_max.
* ``shift``:    solve (G + eps I) c = rhs (eps absolute).
* ``flooring``: cutoff on the large part, and 1/eps on the dropped part, so
  the complement follows the plain-gradient direction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .quadrature import QuadratureSet

__all__ = [
    "RegPolicy",
    "DEFAULT_REG",
    "GramSystem",
    "assemble_gram",
    "apply_pinv",
    "natural_direction",
    "project_onto_tangent",
    "cross_apply",
    "retract",
]

_REG_KINDS = ("cutoff", "shift", "flooring")


@dataclass(frozen=True)
class RegPolicy:
    """Pseudo-inverse regularization; eps is relative to lambda_max for
    cutoff/flooring and absolute for shift."""

    kind: str
    eps: float

    def __post_init__(self):
        if self.kind not in _REG_KINDS:
            raise ValueError(f"unknown regularization {self.kind!r}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


DEFAULT_REG = RegPolicy("flooring", 1e-8)


@dataclass(frozen=True)
class GramSystem:
    """A symmetric PSD Gram matrix with its cached spectral decomposition.

    ``eigvals`` are sorted descending and clamped at zero; ``eigvecs``
    columns match.  Negative eigenvalues beyond roundoff trigger a warning.
    """

    gram: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    reg: RegPolicy

    @property
    def dim(self) -> int:
        return self.gram.shape[0]


def gram_from_matrix(g: np.ndarray, reg: RegPolicy = DEFAULT_REG) -> GramSystem:
    """Decompose an explicitly given symmetric PSD matrix."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("Gram matrix must be square")
    g = 0.5 * (g + g.T)
    vals, vecs = np.linalg.eigh(g)
    vals = vals[::-1].copy()
    vecs = np.ascontiguousarray(vecs[:, ::-1])
    lam_max = vals[0] if vals.size else 0.0
    if vals.size and vals[-1] < -1e-10 * max(lam_max, 0.0):
        warnings.warn(
            f"Gram matrix has negative eigenvalue {vals[-1]:.3e} beyond roundoff",
            RuntimeWarning,
        )
    np.clip(vals, 0.0, None, out=vals)
    return GramSystem(g, vals, vecs, reg)


def assemble_gram(psi, q: QuadratureSet, metric=None, reg: RegPolicy = DEFAULT_REG) -> GramSystem:
    """Gram matrix G_ii' = sum_j w_j h_j psi_i(x_j) psi_i'(x_j)."""
    psi = np.asarray(psi, dtype=np.float64)
    if psi.ndim != 2 or psi.shape[0] != q.m:
        raise ValueError(f"tangent features have shape {psi.shape}, expected ({q.m}, d)")
    wh = q.weights if metric is None else q.weights * np.asarray(metric, dtype=np.float64)
    return gram_from_matrix(psi.T @ (wh[:, None] * psi), reg)


def apply_pinv(gs: GramSystem, rhs) -> np.ndarray:
    """Regularized pseudo-inverse applied to a vector, per the stored policy."""
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape != (gs.dim,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({gs.dim},)")
    vals = gs.eigvals
    coef = gs.eigvecs.T @ rhs
    if gs.reg.kind == "shift":
        return gs.eigvecs @ (coef / (vals + gs.reg.eps))
    lam_max = vals[0] if vals.size else 0.0
    if lam_max <= 0.0:
        return np.zeros_like(rhs)
    thr = gs.reg.eps * lam_max
    inv = np.zeros_like(vals)
    keep = vals > thr
    inv[keep] = 1.0 / vals[keep]
    if gs.reg.kind == "flooring":
        inv[~keep] = 1.0 / thr
    return gs.eigvecs @ (inv * coef)


def natural_direction(gs: GramSystem, grad) -> np.ndarray:
    """Descent direction -G^+ grad of the empirical loss."""
    return -apply_pinv(gs, grad)


def project_onto_tangent(psi, target, q: QuadratureSet, metric=None,
                         reg: RegPolicy = DEFAULT_REG, gram: GramSystem | None = None) -> np.ndarray:
    """Coefficients of the weighted-least-squares projection of ``target``
    onto the span of the tangent features, solved through the same
    regularized normal system as the gradient term."""
    psi = np.asarray(psi, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if psi.ndim != 2 or psi.shape[0] != q.m or target.shape != (q.m,):
        raise ValueError("shape mismatch between features, target and quadrature")
    wh = q.weights if metric is None else q.weights * np.asarray(metric, dtype=np.float64)
    rhs = psi.T @ (wh * target)
    if gram is None:
        gram = assemble_gram(psi, q, metric, reg)
    return apply_pinv(gram, rhs)


def cross_apply(psi_k, psi_km1, q: QuadratureSet, p_km1, metric=None) -> np.ndarray:
    """Right-hand side (psi_k, psi_km1^T p)_X without materializing the
    cross-Gram matrix."""
    psi_k = np.asarray(psi_k, dtype=np.float64)
    psi_km1 = np.asarray(psi_km1, dtype=np.float64)
    p_km1 = np.asarray(p_km1, dtype=np.float64)
    if psi_k.shape[0] != q.m or psi_km1.shape[0] != q.m:
        raise ValueError("feature tables must live on the same quadrature")
    if p_km1.shape != (psi_km1.shape[1],):
        raise ValueError("coefficient vector does not match previous features")
    transported = psi_km1 @ p_km1
    wh = q.weights if metric is None else q.weights * np.asarray(metric, dtype=np.float64)
    return psi_k.T @ (wh * transported)


def retract(theta, delta) -> np.ndarray:
    """The natural retraction: R(D(theta) + psi^T delta) = D(theta + delta)."""
    theta = np.asarray(theta, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if theta.shape != delta.shape:
        raise ValueError("theta and delta must have the same length")
    return theta + delta
