"""Update rules: NGD and its heavy-ball / Nesterov momentum variants.

Method tags
-----------
``ngd``     preconditioned descent theta - alpha G_W^+ grad L
``nhb``     heavy ball with exact tangent transport of the momentum
            (cross-Gram right-hand side, never materialized)
``qnhb``    heavy ball with raw parametric momentum
``nhb-fd``  heavy ball with the momentum approximated by the function
            difference v_k - v_{k-1}
``nn1``/``nn1-fd``/``qnn1``   Nesterov with the gradient Gram taken at the
            shifted point y (two decompositions per iteration)
``nn2``/``nn2-fd``/``qnn2``   Nesterov with the Riesz representer of the
            shifted-point differential in the current tangent space (one
            decomposition per iteration when X = W)

The ``-fd`` suffix selects the function-difference momentum, ``q`` prefixes
the parametric (no cross-Gram) momentum.  A ``gn-`` prefix on any tag
switches the gradient metric W to the loss-Hessian-induced one
(Gauss-Newton variants); X stays L2.

Step sizes follow gradient-norm clipping alpha = min(1/|g|, cap) applied to
the preconditioned gradient term only, with h = sqrt(alpha).  Momentum terms
are zero at k = 0.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import losses as ls
from . import models
from .natgrad import DEFAULT_REG, RegPolicy, apply_pinv, assemble_gram, cross_apply
from .traces import IterRecord, RunTrace

__all__ = [
    "OptConfig",
    "OptState",
    "StepInfo",
    "DivergedError",
    "BASE_METHODS",
    "all_methods",
    "config_for_method",
    "clipped_alpha",
    "beta_heavy_ball",
    "beta_nesterov",
    "initial_state",
    "StepContext",
    "step_ngd",
    "step_nhb",
    "step_qnhb",
    "step_nhb_fd",
    "step_nesterov",
    "run",
]

BASE_METHODS = ("ngd", "nhb", "qnhb", "nhb-fd", "nn1", "nn1-fd", "nn2", "nn2-fd", "qnn1", "qnn2")

_NESTEROV_MODES = {
    "nn1": ("nn1", "cross_gram"),
    "nn1-fd": ("nn1", "functional_difference"),
    "qnn1": ("nn1", "parametric"),
    "nn2": ("nn2", "cross_gram"),
    "nn2-fd": ("nn2", "functional_difference"),
    "qnn2": ("nn2", "parametric"),
}


class DivergedError(RuntimeError):
    """Raised by step functions when a non-finite quantity appears."""


def all_methods() -> tuple:
    return BASE_METHODS + tuple("gn-" + m for m in BASE_METHODS)


@dataclass(frozen=True)
class OptConfig:
    kind: str
    reg: RegPolicy = DEFAULT_REG
    metric_w: str = "l2"
    metric_x: str = "l2"
    hb_beta: float = 0.5
    nesterov_scale: float = 1.0
    clip_cap: float = 0.1
    max_iters: int = 2000
    stop_metric: Optional[str] = None     # None: use the problem's
    stop_threshold: Optional[float] = None

    def __post_init__(self):
        base = self.kind[3:] if self.kind.startswith("gn-") else self.kind
        if base not in BASE_METHODS:
            raise ValueError(f"unknown method {self.kind!r}")
        if not 0.0 <= self.hb_beta < 1.0:
            raise ValueError("hb_beta must be in [0, 1)")
        if not 0.0 < self.nesterov_scale <= 1.0:
            raise ValueError("nesterov_scale must be in (0, 1]")
        if not self.clip_cap > 0.0:
            raise ValueError("clip_cap must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")

    @property
    def base_kind(self) -> str:
        return self.kind[3:] if self.kind.startswith("gn-") else self.kind


def config_for_method(tag: str, **overrides) -> OptConfig:
    """Build an OptConfig from a method tag; gn- selects the Hessian metric."""
    if tag.startswith("gn-"):
        overrides.setdefault("metric_w", "hessian")
    return OptConfig(kind=tag, **overrides)


@dataclass
class OptState:
    """Per-run mutable state: current/previous iterate plus the caches the
    method requires (previous values for -fd, previous features for
    cross-Gram transport)."""

    k: int
    theta: np.ndarray
    theta_prev: np.ndarray
    h_prev: Optional[float] = None
    v_prev: Optional[np.ndarray] = None
    psi_prev: Optional[np.ndarray] = None


@dataclass(frozen=True)
class StepInfo:
    alpha: float
    beta: float
    grad_norm: float


def initial_state(theta0) -> OptState:
    theta0 = np.asarray(theta0, dtype=np.float64)
    return OptState(k=0, theta=theta0, theta_prev=theta0.copy())


def clipped_alpha(direction, cap: float):
    """alpha = min(1/|g|, cap) and the induced time step h = sqrt(alpha)."""
    direction = np.asarray(direction, dtype=np.float64)
    if not np.all(np.isfinite(direction)):
        raise DivergedError("non-finite gradient direction")
    nrm = float(np.linalg.norm(direction))
    alpha = cap if nrm == 0.0 else min(1.0 / nrm, cap)
    return alpha, math.sqrt(alpha)


def beta_heavy_ball(cfg: OptConfig, k: int) -> float:
    return cfg.hb_beta


def beta_nesterov(cfg: OptConfig, k: int) -> float:
    """Vanishing-damping schedule (k-1)/(k+1), optionally rescaled; 1-based k."""
    if k < 1:
        raise ValueError("Nesterov schedule starts at k = 1")
    return cfg.nesterov_scale * (k - 1) / (k + 1)


class StepContext:
    """Problem data shared by the step functions of one run, with a small
    memo so the driver's metric evaluation and the step share one forward
    pass per iterate."""

    def __init__(self, model, loss, q, cfg: OptConfig):
        self.model = model
        self.loss = loss
        self.q = q
        self.cfg = cfg
        self._memo = {}

    def _memoized(self, key, fn):
        if key not in self._memo:
            if len(self._memo) > 6:
                self._memo.clear()
            self._memo[key] = fn()
        return self._memo[key]

    def eval_tangent(self, theta):
        key = ("t", theta.tobytes())
        return self._memoized(key, lambda: models.evaluate_with_tangent(self.model, theta, self.q))

    def eval_values(self, theta):
        key = ("v", theta.tobytes())
        tkey = ("t", theta.tobytes())
        if tkey in self._memo:
            return self._memo[tkey][0]
        return self._memoized(key, lambda: models.evaluate(self.model, theta, self.q).v)


def _gradient_term(ctx: StepContext, theta):
    """Shared first stage: values, features, metric weights, W-Gram and the
    preconditioned gradient direction at ``theta``."""
    v, psi = ctx.eval_tangent(theta)
    if not np.all(np.isfinite(v)) or not np.all(np.isfinite(psi)):
        raise DivergedError("non-finite model evaluation")
    grad = ls.grad_coeffs(ctx.loss, v, psi, ctx.q)
    h_w = ls.metric_weights(ctx.loss, v, ctx.q, ctx.cfg.metric_w)
    gram_w = assemble_gram(psi, ctx.q, h_w, ctx.cfg.reg)
    gdir = apply_pinv(gram_w, grad)
    return v, psi, h_w, gram_w, gdir


def _x_gram(ctx: StepContext, v, psi, gram_w, h_w):
    """X-metric Gram, reusing the W decomposition when the metrics agree."""
    if ctx.cfg.metric_x == ctx.cfg.metric_w:
        return gram_w, h_w
    h_x = ls.metric_weights(ctx.loss, v, ctx.q, ctx.cfg.metric_x)
    return assemble_gram(psi, ctx.q, h_x, ctx.cfg.reg), h_x


def _advance(state: OptState, theta_new, h, **caches) -> OptState:
    if not np.all(np.isfinite(theta_new)):
        raise DivergedError("non-finite parameter update")
    return OptState(
        k=state.k + 1,
        theta=theta_new,
        theta_prev=state.theta,
        h_prev=h,
        v_prev=caches.get("v_prev"),
        psi_prev=caches.get("psi_prev"),
    )


def step_ngd(state: OptState, ctx: StepContext):
    _, _, _, _, gdir = _gradient_term(ctx, state.theta)
    alpha, h = clipped_alpha(gdir, ctx.cfg.clip_cap)
    new = _advance(state, state.theta - alpha * gdir, h)
    return new, StepInfo(alpha, 0.0, float(np.linalg.norm(gdir)))


def step_nhb(state: OptState, ctx: StepContext):
    v, psi, h_w, gram_w, gdir = _gradient_term(ctx, state.theta)
    alpha, h = clipped_alpha(gdir, ctx.cfg.clip_cap)
    beta = 0.0
    mom = 0.0
    if state.k > 0:
        beta = beta_heavy_ball(ctx.cfg, state.k)
        gram_x, h_x = _x_gram(ctx, v, psi, gram_w, h_w)
        rhs = cross_apply(psi, state.psi_prev, ctx.q, state.theta - state.theta_prev, h_x)
        mom = (h / state.h_prev) * beta * apply_pinv(gram_x, rhs)
    new = _advance(state, state.theta + mom - alpha * gdir, h, psi_prev=psi)
    return new, StepInfo(alpha, beta, float(np.linalg.norm(gdir)))


def step_qnhb(state: OptState, ctx: StepContext):
    _, _, _, _, gdir = _gradient_term(ctx, state.theta)
    alpha, h = clipped_alpha(gdir, ctx.cfg.clip_cap)
    beta = 0.0
    mom = 0.0
    if state.k > 0:
        beta = beta_heavy_ball(ctx.cfg, state.k)
        mom = (h / state.h_prev) * beta * (state.theta - state.theta_prev)
    new = _advance(state, state.theta + mom - alpha * gdir, h)
    return new, StepInfo(alpha, beta, float(np.linalg.norm(gdir)))


def step_nhb_fd(state: OptState, ctx: StepContext):
    v, psi, h_w, gram_w, gdir = _gradient_term(ctx, state.theta)
    alpha, h = clipped_alpha(gdir, ctx.cfg.clip_cap)
    beta = 0.0
    mom = 0.0
    if state.k > 0:
        beta = beta_heavy_ball(ctx.cfg, state.k)
        gram_x, h_x = _x_gram(ctx, v, psi, gram_w, h_w)
        wh = ctx.q.weights if h_x is None else ctx.q.weights * h_x
        z = psi.T @ (wh * (v - state.v_prev))
        mom = (h / state.h_prev) * beta * apply_pinv(gram_x, z)
    new = _advance(state, state.theta + mom - alpha * gdir, h, v_prev=v)
    return new, StepInfo(alpha, beta, float(np.linalg.norm(gdir)))


def step_nesterov(state: OptState, ctx: StepContext, family: str, dk_mode: str):
    """Natural Nesterov step.

    ``family``: "nn1" evaluates Gram and gradient at the shifted point y;
    "nn2" keeps the current-point Gram and represents the shifted-point loss
    differential in the current tangent space.  ``dk_mode`` picks the
    momentum transport: "cross_gram", "functional_difference" or
    "parametric".
    """
    cfg = ctx.cfg
    beta = beta_nesterov(cfg, state.k + 1)
    v, psi = ctx.eval_tangent(state.theta)
    if not np.all(np.isfinite(v)) or not np.all(np.isfinite(psi)):
        raise DivergedError("non-finite model evaluation")

    gram_x = None
    if state.k == 0 or beta == 0.0:
        y = state.theta
    else:
        if dk_mode == "parametric":
            d_k = state.theta - state.theta_prev
        else:
            h_x = ls.metric_weights(ctx.loss, v, ctx.q, cfg.metric_x)
            gram_x = assemble_gram(psi, ctx.q, h_x, cfg.reg)
            if dk_mode == "cross_gram":
                rhs = cross_apply(psi, state.psi_prev, ctx.q, state.theta - state.theta_prev, h_x)
            elif dk_mode == "functional_difference":
                wh = ctx.q.weights if h_x is None else ctx.q.weights * h_x
                rhs = psi.T @ (wh * (v - state.v_prev))
            else:
                raise ValueError(f"unknown dk mode {dk_mode!r}")
            d_k = apply_pinv(gram_x, rhs)
        y = state.theta + beta * d_k

    if family == "nn1":
        vy, psiy = ctx.eval_tangent(y)
        if not np.all(np.isfinite(vy)) or not np.all(np.isfinite(psiy)):
            raise DivergedError("non-finite evaluation at the shifted point")
        grad_y = ls.grad_coeffs(ctx.loss, vy, psiy, ctx.q)
        h_wy = ls.metric_weights(ctx.loss, vy, ctx.q, cfg.metric_w)
        gram_wy = assemble_gram(psiy, ctx.q, h_wy, cfg.reg)
        gdir = apply_pinv(gram_wy, grad_y)
    elif family == "nn2":
        vy = ctx.eval_values(y)
        if not np.all(np.isfinite(vy)):
            raise DivergedError("non-finite evaluation at the shifted point")
        g_pt, _ = ls.pointwise_derivs(ctx.loss, vy, ctx.q)
        rhs = psi.T @ (ctx.q.weights * g_pt)
        if gram_x is not None and cfg.metric_w == cfg.metric_x:
            gram_w = gram_x  # one decomposition serves d_k and the gradient
        else:
            h_w = ls.metric_weights(ctx.loss, v, ctx.q, cfg.metric_w)
            gram_w = assemble_gram(psi, ctx.q, h_w, cfg.reg)
        gdir = apply_pinv(gram_w, rhs)
    else:
        raise ValueError(f"unknown Nesterov family {family!r}")

    alpha, h = clipped_alpha(gdir, cfg.clip_cap)
    caches = {}
    if dk_mode == "cross_gram":
        caches["psi_prev"] = psi
    elif dk_mode == "functional_difference":
        caches["v_prev"] = v
    new = _advance(state, y - alpha * gdir, h, **caches)
    return new, StepInfo(alpha, beta, float(np.linalg.norm(gdir)))


def _step_function(cfg: OptConfig):
    base = cfg.base_kind
    if base == "ngd":
        return step_ngd
    if base == "nhb":
        return step_nhb
    if base == "qnhb":
        return step_qnhb
    if base == "nhb-fd":
        return step_nhb_fd
    family, mode = _NESTEROV_MODES[base]
    return lambda state, ctx: step_nesterov(state, ctx, family, mode)


_DIVERGENCE_RATIO = 1e6


def run(problem, cfg: OptConfig, seed: int, writer=None) -> RunTrace:
    """Drive one optimization run to convergence, iteration cap or divergence.

    Deterministic given (problem, cfg, seed) up to wall-clock columns.  A
    diverged run is reported through the trace status, never an exception.
    When ``writer`` (a TraceWriter) is given, rows are streamed through it.
    """
    stop_kind = cfg.stop_metric or problem.stop_metric
    threshold = cfg.stop_threshold if cfg.stop_threshold is not None else problem.stop_threshold
    if not threshold > 0:
        raise ValueError("stop threshold must be positive")

    theta0 = models.init_params(problem.model, seed)
    ctx = StepContext(problem.model, problem.loss, problem.train_q, cfg)
    step = _step_function(cfg)
    ref = ls.reference(problem.loss)
    state = initial_state(theta0)

    run_id = f"{problem.name}__{cfg.kind}__seed{seed}"
    records = []

    def emit(rec):
        records.append(rec)
        if writer is not None:
            writer.append(rec)

    status = None
    loss0 = None
    t0 = time.perf_counter()
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        while True:
            k = state.k
            theta_ok = bool(np.all(np.isfinite(state.theta)))
            if theta_ok:
                # The step re-requests this evaluation and hits the memo.
                v, _ = ctx.eval_tangent(state.theta)
                train_loss = ls.loss_value(problem.loss, v, problem.train_q)
                stop_val = ls.test_metric(stop_kind, problem.stop_values(v), ref,
                                          problem.train_q)
                test_val = problem.test_error(state.theta)
            else:
                train_loss = stop_val = test_val = float("nan")
            if loss0 is None:
                loss0 = train_loss
            now_ms = (time.perf_counter() - t0) * 1e3

            if stop_val <= threshold:
                status = "converged"
            elif not theta_ok or not np.isfinite(train_loss) or train_loss > _DIVERGENCE_RATIO * loss0:
                status = "diverged"
            elif k >= cfg.max_iters:
                status = "max_iters"
            if status is not None:
                emit(IterRecord(k, now_ms, train_loss, stop_val, test_val, 0.0, 0.0, 0.0))
                break

            try:
                state, info = step(state, ctx)
            except (DivergedError, np.linalg.LinAlgError):
                status = "diverged"
                emit(IterRecord(k, now_ms, train_loss, stop_val, test_val, 0.0, 0.0, 0.0))
                break
            emit(IterRecord(k, now_ms, train_loss, stop_val, test_val,
                            info.alpha, info.beta, info.grad_norm))

    trace = RunTrace(run_id, problem.name, cfg.kind, seed, threshold, records, status)
    return trace.validate()
