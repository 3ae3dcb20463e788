"""Point-wise losses, empirical loss values and derivative coefficients.

Squared losses use the 1/2 convention so the first derivative equals the
residual.  Binary cross-entropy clamps predictions to [1e-7, 1 - 1e-7]
before any log or ratio, which keeps values, derivatives and the induced
Hessian metric finite for every input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .quadrature import QuadratureSet

__all__ = [
    "LeastSquares",
    "BinaryCrossEntropy",
    "BinaryCrossEntropyLogits",
    "ResidualLS",
    "LossSpec",
    "CLAMP_EPS",
    "sigmoid",
    "reference",
    "loss_value",
    "pointwise_derivs",
    "grad_coeffs",
    "test_metric",
    "metric_weights",
]

CLAMP_EPS = 1e-7

# Tangent-space metric choices: plain L2 pairing, or the pairing weighted by
# the second derivative of the point-wise loss (Gauss-Newton variants).
METRIC_CHOICES = ("l2", "hessian")


@dataclass(frozen=True)
class LeastSquares:
    """l(v, x) = 1/2 (v - u(x))^2 against fixed targets u(x_j)."""

    targets: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "targets", np.asarray(self.targets, dtype=np.float64))


@dataclass(frozen=True)
class BinaryCrossEntropy:
    """l(v, y) = -y log v - (1-y) log(1-v) with labels in {0, 1}."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.float64)
        if not np.all((lab == 0.0) | (lab == 1.0)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "labels", lab)


@dataclass(frozen=True)
class BinaryCrossEntropyLogits:
    """Cross-entropy of a logistic link on raw model outputs f.

    l(f, y) = softplus(f) - y f; first derivative sigma(f) - y, second
    sigma(f)(1 - sigma(f)).  Numerically stable without clamping, and its
    Hessian metric is the classification Fisher weight.
    """

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.float64)
        if not np.all((lab == 0.0) | (lab == 1.0)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "labels", lab)


@dataclass(frozen=True)
class ResidualLS:
    """l(w, x) = 1/2 (w - f(x))^2 on the operator-induced class."""

    rhs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rhs", np.asarray(self.rhs, dtype=np.float64))


LossSpec = Union[LeastSquares, BinaryCrossEntropy, BinaryCrossEntropyLogits, ResidualLS]


def sigmoid(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    out = np.empty_like(f)
    pos = f >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-f[pos]))
    ef = np.exp(f[~pos])
    out[~pos] = ef / (1.0 + ef)
    return out


def reference(loss: LossSpec) -> np.ndarray:
    """The fixed per-point data the loss compares against."""
    if isinstance(loss, LeastSquares):
        return loss.targets
    if isinstance(loss, (BinaryCrossEntropy, BinaryCrossEntropyLogits)):
        return loss.labels
    if isinstance(loss, ResidualLS):
        return loss.rhs
    raise TypeError(f"not a loss spec: {loss!r}")


def _check(loss, v, q) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    ref = reference(loss)
    if v.shape != (q.m,) or ref.shape != (q.m,):
        raise ValueError("values/reference length must match the quadrature")
    return v


def loss_value(loss: LossSpec, v, q: QuadratureSet) -> float:
    v = _check(loss, v, q)
    w = q.weights
    if isinstance(loss, (LeastSquares, ResidualLS)):
        r = v - reference(loss)
        return float(0.5 * np.dot(w, r * r))
    if isinstance(loss, BinaryCrossEntropyLogits):
        return float(np.dot(w, np.logaddexp(0.0, v) - loss.labels * v))
    vc = np.clip(v, CLAMP_EPS, 1.0 - CLAMP_EPS)
    y = loss.labels
    return float(-np.dot(w, y * np.log(vc) + (1.0 - y) * np.log1p(-vc)))


def pointwise_derivs(loss: LossSpec, v, q: QuadratureSet):
    """First and second derivatives of the point-wise loss at each point."""
    v = _check(loss, v, q)
    if isinstance(loss, (LeastSquares, ResidualLS)):
        return v - reference(loss), np.ones_like(v)
    if isinstance(loss, BinaryCrossEntropyLogits):
        s = sigmoid(v)
        return s - loss.labels, s * (1.0 - s)
    vc = np.clip(v, CLAMP_EPS, 1.0 - CLAMP_EPS)
    y = loss.labels
    g = -y / vc + (1.0 - y) / (1.0 - vc)
    h = y / vc**2 + (1.0 - y) / (1.0 - vc) ** 2
    return g, h


def grad_coeffs(loss: LossSpec, v, psi, q: QuadratureSet) -> np.ndarray:
    """Parameter gradient sum_j w_j l'(v_j) psi_i(x_j) of the empirical loss."""
    psi = np.asarray(psi, dtype=np.float64)
    if psi.ndim != 2 or psi.shape[0] != q.m:
        raise ValueError(f"tangent features have shape {psi.shape}, expected ({q.m}, d)")
    g, _ = pointwise_derivs(loss, v, q)
    return psi.T @ (q.weights * g)


def test_metric(kind: str, v, ref, q: QuadratureSet) -> float:
    """Reporting metrics: weighted MSE or the weighted L2 residual norm."""
    v = np.asarray(v, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if v.shape != (q.m,) or ref.shape != (q.m,):
        raise ValueError("values/reference length must match the quadrature")
    mse = float(np.dot(q.weights, (v - ref) ** 2))
    if kind == "mse":
        return mse
    if kind == "l2_residual":
        return float(np.sqrt(mse))
    raise ValueError(f"unknown metric kind {kind!r}")


def metric_weights(loss: LossSpec, v, q: QuadratureSet, choice: str):
    """Per-point weights for the chosen tangent metric (None means all ones)."""
    if choice == "l2":
        return None
    if choice == "hessian":
        _, h = pointwise_derivs(loss, v, q)
        return h
    raise ValueError(f"unknown metric choice {choice!r}")
