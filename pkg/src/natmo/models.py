"""Differentiable parametrizations theta -> D(theta) of function classes.

Provides evaluation on quadrature points, tangent features (the parameter
Jacobian psi_i = dD/dtheta_i evaluated at the points), analytic input
derivatives up to second order for 1-D PDE operators, and a finite-difference
curvature probe.  All derivative propagation is exact layer-wise chain rule;
finite differences appear only in the probe and in test oracles.

Supported specs:

* ``Linear``        -- D(theta) = sum_i theta_i phi_i for fixed features.
* ``ShallowMLP``    -- a^T sigma(Ax + b) + c, d = (n+2)k + 1.
* ``DeepMLP``       -- fully connected net, hidden activations, affine output.
* ``OutputSquash``  -- logistic map on the inner output (classification head).
* ``BCWrap``        -- output transforms enforcing PDE boundary conditions.
* ``ResidualWrap``  -- the operator-induced class w = A(D(theta)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from . import kernels
from .quadrature import QuadratureSet

__all__ = [
    "Feature",
    "monomials",
    "Linear",
    "ShallowMLP",
    "DeepMLP",
    "OutputSquash",
    "BCWrap",
    "ResidualWrap",
    "ModelSpec",
    "EvalBundle",
    "param_count",
    "init_params",
    "evaluate",
    "tangent_features",
    "evaluate_with_tangent",
    "curvature_probe",
]


@dataclass(frozen=True)
class Feature:
    """One feature function for a Linear model, with optional x-derivatives.

    Each callable maps an (m, n) point array to an (m,) value array.
    """

    value: Callable
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None


def monomials(degree: int) -> tuple:
    """Features 1, x, ..., x^degree of a scalar input, with derivatives."""

    def make(k):
        def val(pts):
            return pts[:, 0] ** k

        def der1(pts):
            x = pts[:, 0]
            return k * x ** (k - 1) if k >= 1 else np.zeros_like(x)

        def der2(pts):
            x = pts[:, 0]
            return k * (k - 1) * x ** (k - 2) if k >= 2 else np.zeros_like(x)

        return Feature(val, der1, der2)

    return tuple(make(k) for k in range(degree + 1))


@dataclass(frozen=True)
class Linear:
    features: tuple


@dataclass(frozen=True)
class ShallowMLP:
    input_dim: int
    width: int
    activation: str = "sigmoid"


@dataclass(frozen=True)
class DeepMLP:
    widths: tuple  # full tuple (n_in, hidden..., 1)
    activation: str = "tanh"


@dataclass(frozen=True)
class OutputSquash:
    inner: "ModelSpec"


@dataclass(frozen=True)
class BCWrap:
    inner: "ModelSpec"
    transform: str  # "advection_diffusion" | "reaction_diffusion"


@dataclass(frozen=True)
class ResidualWrap:
    inner: "ModelSpec"
    operator: str  # "advection_diffusion" | "cubic_reaction"
    mu: float = 0.2


ModelSpec = Union[Linear, ShallowMLP, DeepMLP, OutputSquash, BCWrap, ResidualWrap]


@dataclass(frozen=True)
class EvalBundle:
    """Point values and, when requested, first/second input derivatives."""

    v: np.ndarray
    v_x: Optional[np.ndarray] = None
    v_xx: Optional[np.ndarray] = None


class _Rec(NamedTuple):
    v: np.ndarray
    vx: Optional[np.ndarray]
    vxx: Optional[np.ndarray]
    jac: Optional[np.ndarray]
    jac_x: Optional[np.ndarray]
    jac_xx: Optional[np.ndarray]


def param_count(spec: ModelSpec) -> int:
    if isinstance(spec, Linear):
        return len(spec.features)
    if isinstance(spec, ShallowMLP):
        return kernels.param_count((spec.input_dim, spec.width, 1))
    if isinstance(spec, DeepMLP):
        return kernels.param_count(spec.widths)
    if isinstance(spec, OutputSquash):
        return param_count(spec.inner)
    if isinstance(spec, BCWrap):
        extra = 2 if spec.transform == "reaction_diffusion" else 0
        return param_count(spec.inner) + extra
    if isinstance(spec, ResidualWrap):
        return param_count(spec.inner)
    raise TypeError(f"not a model spec: {spec!r}")


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    """I.i.d. standard-normal parameter vector, reproducible from the seed."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal(param_count(spec))


def input_dim(spec: ModelSpec) -> int:
    if isinstance(spec, Linear):
        return -1  # determined by the features; not checked here
    if isinstance(spec, ShallowMLP):
        return spec.input_dim
    if isinstance(spec, DeepMLP):
        return spec.widths[0]
    return input_dim(spec.inner)


def _check_theta(spec, theta) -> np.ndarray:
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    d = param_count(spec)
    if theta.shape != (d,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({d},)")
    return theta


def _scalar_x(pts: np.ndarray) -> np.ndarray:
    if pts.shape[1] != 1:
        raise ValueError("this model transform requires a 1-D input")
    return pts[:, 0]


def _logistic_chain(v, need2, need3):
    pos = v >= 0
    s = np.empty_like(v)
    s[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    s[~pos] = ev / (1.0 + ev)
    s1 = s * (1.0 - s)
    s2 = s1 * (1.0 - 2.0 * s) if need2 else None
    s3 = (s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1) if need3 else None
    return s, s1, s2, s3


def _eval(spec: ModelSpec, theta: np.ndarray, pts: np.ndarray, order: int, want_jac: bool) -> _Rec:
    if isinstance(spec, (ShallowMLP, DeepMLP)):
        widths = (spec.input_dim, spec.width, 1) if isinstance(spec, ShallowMLP) else spec.widths
        out = kernels.mlp_eval(pts, theta, widths, spec.activation, order, want_jac)
        return _Rec(*out)

    if isinstance(spec, Linear):
        cols = [f.value(pts) for f in spec.features]
        phi = np.column_stack(cols) if cols else np.zeros((pts.shape[0], 0))
        v = phi @ theta
        vx = vxx = jx = jxx = None
        if order >= 1:
            if any(f.d1 is None for f in spec.features):
                raise ValueError("Linear features lack first derivatives")
            phi1 = np.column_stack([f.d1(pts) for f in spec.features])
            vx, jx = phi1 @ theta, phi1
        if order >= 2:
            if any(f.d2 is None for f in spec.features):
                raise ValueError("Linear features lack second derivatives")
            phi2 = np.column_stack([f.d2(pts) for f in spec.features])
            vxx, jxx = phi2 @ theta, phi2
        if not want_jac:
            phi = jx = jxx = None
        return _Rec(v, vx, vxx, phi, jx, jxx)

    if isinstance(spec, OutputSquash):
        r = _eval(spec.inner, theta, pts, order, want_jac)
        s, s1, s2, s3 = _logistic_chain(r.v, order >= 1, order >= 2 and want_jac)
        vx = s1 * r.vx if order >= 1 else None
        vxx = s2 * r.vx**2 + s1 * r.vxx if order >= 2 else None
        jac = jx = jxx = None
        if want_jac:
            jac = s1[:, None] * r.jac
            if order >= 1:
                jx = (s2 * r.vx)[:, None] * r.jac + s1[:, None] * r.jac_x
            if order >= 2:
                jxx = (
                    (s3 * r.vx**2 + s2 * r.vxx)[:, None] * r.jac
                    + (2.0 * s2 * r.vx)[:, None] * r.jac_x
                    + s1[:, None] * r.jac_xx
                )
        return _Rec(s, vx, vxx, jac, jx, jxx)

    if isinstance(spec, BCWrap):
        return _eval_bcwrap(spec, theta, pts, order, want_jac)

    if isinstance(spec, ResidualWrap):
        return _eval_residual(spec, theta, pts, order, want_jac)

    raise TypeError(f"not a model spec: {spec!r}")


def _eval_bcwrap(spec: BCWrap, theta, pts, order, want_jac) -> _Rec:
    x = _scalar_x(pts)
    if spec.transform == "advection_diffusion":
        # v = x(1-x) u: clamps the output to zero at both Dirichlet ends.
        r = _eval(spec.inner, theta, pts, order, want_jac)
        g = x * (1.0 - x)
        g1 = 1.0 - 2.0 * x
        v = g * r.v
        vx = g1 * r.v + g * r.vx if order >= 1 else None
        vxx = -2.0 * r.v + 2.0 * g1 * r.vx + g * r.vxx if order >= 2 else None
        jac = jx = jxx = None
        if want_jac:
            jac = g[:, None] * r.jac
            if order >= 1:
                jx = g1[:, None] * r.jac + g[:, None] * r.jac_x
            if order >= 2:
                jxx = -2.0 * r.jac + 2.0 * g1[:, None] * r.jac_x + g[:, None] * r.jac_xx
        return _Rec(v, vx, vxx, jac, jx, jxx)

    if spec.transform == "reaction_diffusion":
        # v = (1-x^2)^2 u + c + a (x^3/3 - x): zero-slope at x = +-1 built in.
        inner_theta, a, c = theta[:-2], theta[-2], theta[-1]
        r = _eval(spec.inner, inner_theta, pts, order, want_jac)
        one_m = 1.0 - x * x
        bfac = one_m * one_m
        b1 = -4.0 * x * one_m
        b2 = 12.0 * x * x - 4.0
        p = x**3 / 3.0 - x
        p1 = x * x - 1.0
        p2 = 2.0 * x
        v = bfac * r.v + c + a * p
        vx = b1 * r.v + bfac * r.vx + a * p1 if order >= 1 else None
        vxx = (
            b2 * r.v + 2.0 * b1 * r.vx + bfac * r.vxx + a * p2 if order >= 2 else None
        )
        jac = jx = jxx = None
        if want_jac:
            m = pts.shape[0]
            jac = np.empty((m, r.jac.shape[1] + 2))
            jac[:, :-2] = bfac[:, None] * r.jac
            jac[:, -2] = p
            jac[:, -1] = 1.0
            if order >= 1:
                jx = np.empty_like(jac)
                jx[:, :-2] = b1[:, None] * r.jac + bfac[:, None] * r.jac_x
                jx[:, -2] = p1
                jx[:, -1] = 0.0
            if order >= 2:
                jxx = np.empty_like(jac)
                jxx[:, :-2] = (
                    b2[:, None] * r.jac
                    + 2.0 * b1[:, None] * r.jac_x
                    + bfac[:, None] * r.jac_xx
                )
                jxx[:, -2] = p2
                jxx[:, -1] = 0.0
        return _Rec(v, vx, vxx, jac, jx, jxx)

    raise ValueError(f"unknown BCWrap transform {spec.transform!r}")


def _eval_residual(spec: ResidualWrap, theta, pts, order, want_jac) -> _Rec:
    if order > 0:
        raise ValueError("input derivatives of the operator image are not supported")
    _scalar_x(pts)
    r = _eval(spec.inner, theta, pts, 2, want_jac)
    if spec.operator == "advection_diffusion":
        w = -spec.mu * r.vxx + r.vx
        jac = -spec.mu * r.jac_xx + r.jac_x if want_jac else None
    elif spec.operator == "cubic_reaction":
        w = -r.vxx + r.v**3
        jac = -r.jac_xx + (3.0 * r.v**2)[:, None] * r.jac if want_jac else None
    else:
        raise ValueError(f"unknown operator {spec.operator!r}")
    return _Rec(w, None, None, jac, None, None)


def evaluate(spec: ModelSpec, theta, q: QuadratureSet, want_input_derivs: bool = False) -> EvalBundle:
    """Values of D(theta) on the quadrature points, optionally with v_x, v_xx."""
    theta = _check_theta(spec, theta)
    if want_input_derivs and q.dim != 1:
        raise ValueError("input derivatives require a 1-D input")
    order = 2 if want_input_derivs else 0
    r = _eval(spec, theta, q.points, order, want_jac=False)
    return EvalBundle(r.v, r.vx, r.vxx)


def tangent_features(spec: ModelSpec, theta, q: QuadratureSet) -> np.ndarray:
    """The (m, d) table psi_i(theta)(x_j) generating the tangent space."""
    theta = _check_theta(spec, theta)
    return _eval(spec, theta, q.points, 0, want_jac=True).jac


def evaluate_with_tangent(spec: ModelSpec, theta, q: QuadratureSet):
    """Values and tangent features from a single propagation pass."""
    theta = _check_theta(spec, theta)
    r = _eval(spec, theta, q.points, 0, want_jac=True)
    return r.v, r.jac


def curvature_probe(spec: ModelSpec, theta, direction, h: float, q: QuadratureSet) -> np.ndarray:
    """Second difference (D(theta+hq) - 2 D(theta) + D(theta-hq)) / h^2.

    Approximates the manifold curvature H_D(theta)(q, q) at the quadrature
    points; used only by oracles, never by the optimizers.
    """
    theta = _check_theta(spec, theta)
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != theta.shape:
        raise ValueError("direction length must match theta")
    if not np.any(direction):
        raise ValueError("direction must be nonzero")
    if h <= 0:
        raise ValueError("h must be positive")
    vp = _eval(spec, theta + h * direction, q.points, 0, False).v
    v0 = _eval(spec, theta, q.points, 0, False).v
    vm = _eval(spec, theta - h * direction, q.points, 0, False).v
    return (vp - 2.0 * v0 + vm) / (h * h)
