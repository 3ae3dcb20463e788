"""The four benchmark problems: data generation, wiring and exact solutions.

* ``mackey_glass``        delay-map time-series regression (shallow sigmoid net)
* ``xor9``                extended-XOR Gaussian-cluster classification
                          (shallow sigmoid net + logistic head, cross-entropy)
* ``advection_diffusion`` strong-form residual of -mu u'' + u' = 1 on [0, 1]
* ``reaction_diffusion``  strong-form residual of -u'' + u^3 = f on [-1, 1]

Dataset generators are pure functions of their seed; every problem carries a
plain key=value manifest so the generated data is auditable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import losses as ls
from . import models
from .models import BCWrap, DeepMLP, ModelSpec, OutputSquash, ResidualWrap, ShallowMLP
from .quadrature import QuadratureSet, from_samples, uniform_grid

__all__ = [
    "Problem",
    "PROBLEMS",
    "build_problem",
    "mackey_glass_series",
    "mackey_glass_problem",
    "xor9_problem",
    "advection_diffusion_problem",
    "reaction_diffusion_problem",
    "advection_diffusion_exact",
    "reaction_diffusion_exact",
]


@dataclass(frozen=True)
class Problem:
    """A fully wired experiment: model, loss, quadratures and stopping rule.

    ``test_model`` is the model whose output is compared against
    ``test_reference`` on ``test_q`` (for the PDE problems this is the
    boundary-condition ansatz, not the operator image).
    """

    name: str
    model: ModelSpec
    loss: ls.LossSpec
    train_q: QuadratureSet
    test_q: QuadratureSet
    stop_metric: str
    stop_threshold: float
    test_model: ModelSpec
    test_reference: np.ndarray
    test_metric_kind: str = "mse"
    # maps raw train values to the predictions the stop metric compares
    # against the loss reference (e.g. logistic link for classification)
    stop_transform: Optional[Callable] = None
    exact_solution: Optional[Callable] = None
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.stop_threshold > 0:
            raise ValueError("stop threshold must be positive")

    def stop_values(self, v) -> np.ndarray:
        return v if self.stop_transform is None else self.stop_transform(v)

    def test_error(self, theta) -> float:
        v = models.evaluate(self.test_model, theta, self.test_q).v
        return ls.test_metric(self.test_metric_kind, v, self.test_reference, self.test_q)


def mackey_glass_series(n_steps: int, a: float = 0.2, b: float = 0.1,
                        tau: int = 17, z0: float = 1.2) -> np.ndarray:
    """Iterate z(t+1) = (1-b) z(t) + a z(t-tau) / (1 + z(t-tau)^10).

    Constant history z = z0 for t <= 0; returns z[0..n_steps].
    """
    z = np.empty(n_steps + 1)
    z[0] = z0
    for t in range(n_steps):
        zd = z[t - tau] if t >= tau else z0
        z[t + 1] = (1.0 - b) * z[t] + a * zd / (1.0 + zd**10)
    return z


def _mackey_pairs(z: np.ndarray, t_values: np.ndarray):
    x = np.column_stack([z[t_values], z[t_values - 6], z[t_values - 12], z[t_values - 18]])
    y = z[t_values + 6]
    return x, y


def mackey_glass_problem(seed: int = 0) -> Problem:
    """500 train pairs at t in [200, 700), 500 test pairs at t in [5000, 5500).

    Input (z(t), z(t-6), z(t-12), z(t-18)), target z(t+6).  The series is
    deterministic, so the seed only enters the run via parameter init.
    """
    t_train = np.arange(200, 700)
    t_test = np.arange(5000, 5500)
    z = mackey_glass_series(int(t_test[-1]) + 6)
    x_train, y_train = _mackey_pairs(z, t_train)
    x_test, y_test = _mackey_pairs(z, t_test)
    model = ShallowMLP(input_dim=4, width=10, activation="sigmoid")
    manifest = {
        "problem": "mackey_glass", "a": "0.2", "b": "0.1", "tau": "17",
        "z0": "1.2", "train_window": "200:700", "test_window": "5000:5500",
        "n_train": "500", "n_test": "500", "model": "shallow_sigmoid_k10",
        "seed": str(seed),
    }
    return Problem(
        name="mackey_glass",
        model=model,
        loss=ls.LeastSquares(y_train),
        train_q=from_samples(x_train),
        test_q=from_samples(x_test),
        stop_metric="mse",
        stop_threshold=2e-5,
        test_model=model,
        test_reference=y_test,
        manifest=manifest,
    )


# 3x3 cluster grid with checkerboard labels.  A checkerboard on nine
# clusters splits 5/4, so equal 200-per-cluster draws cannot give balanced
# classes; we draw 180 per majority-pattern cluster and 225 per
# minority-pattern cluster, which restores a 900/900 train split.  The test
# set keeps 100 per cluster.  Spacing 6 keeps the Bayes MSE of the mixture
# well below the 3e-2 stopping threshold (spacing 4 bottoms out near 4e-2).
_XOR_COORD = (-6.0, 0.0, 6.0)
_XOR_TRAIN_COUNTS = {0: 180, 1: 225}
_XOR_TEST_COUNT = 100


def _xor_clusters():
    out = []
    for i, cx in enumerate(_XOR_COORD):
        for j, cy in enumerate(_XOR_COORD):
            out.append(((cx, cy), (i + j) % 2))
    return out


def _xor_sample(rng, counts):
    xs, ys = [], []
    for (cx, cy), label in _xor_clusters():
        n = counts[label] if isinstance(counts, dict) else counts
        pts = rng.standard_normal((n, 2)) + np.array([cx, cy])
        xs.append(pts)
        ys.append(np.full(n, float(label)))
    return np.vstack(xs), np.concatenate(ys)


def xor9_problem(seed: int = 0) -> Problem:
    """Extended-XOR classification: the optimized class is the raw shallow
    net with the logistic link folded into the point-wise cross-entropy, so
    the Hessian-induced metric is the Fisher weight sigma(f)(1 - sigma(f)).
    Stop and test metrics compare the squashed predictions with the labels.
    """
    rng = np.random.default_rng(seed)
    x_train, y_train = _xor_sample(rng, _XOR_TRAIN_COUNTS)
    x_test, y_test = _xor_sample(rng, _XOR_TEST_COUNT)
    net = ShallowMLP(input_dim=2, width=10, activation="sigmoid")
    coords = ",".join(f"{c:g}" for c in _XOR_COORD)
    manifest = {
        "problem": "xor9", "centers": "{" + coords + "}^2",
        "labels": "checkerboard",
        "train_counts_per_cluster": "label0:180,label1:225",
        "test_count_per_cluster": str(_XOR_TEST_COUNT),
        "n_train": str(len(y_train)), "n_test": str(len(y_test)),
        "cluster_std": "1.0", "seed": str(seed),
        "model": "shallow_sigmoid_k10_logit_link",
    }
    return Problem(
        name="xor9",
        model=net,
        loss=ls.BinaryCrossEntropyLogits(y_train),
        train_q=from_samples(x_train),
        test_q=from_samples(x_test),
        stop_metric="mse",
        stop_threshold=3e-2,
        test_model=OutputSquash(net),
        test_reference=y_test,
        stop_transform=ls.sigmoid,
        manifest=manifest,
    )


def advection_diffusion_exact(x, mu: float = 0.2):
    """u, u', u'' of the solution of -mu u'' + u' = 1, u(0) = u(1) = 0."""
    x = np.asarray(x, dtype=np.float64)
    denom = np.expm1(1.0 / mu)
    e = np.exp(x / mu)
    u = x - (e - 1.0) / denom
    ux = 1.0 - e / (mu * denom)
    uxx = -e / (mu * mu * denom)
    return u, ux, uxx


def reaction_diffusion_exact(x):
    """u, u', u'' of u = cos(pi x), the solution of -u'' + u^3 = f."""
    x = np.asarray(x, dtype=np.float64)
    u = np.cos(np.pi * x)
    ux = -np.pi * np.sin(np.pi * x)
    uxx = -np.pi**2 * u
    return u, ux, uxx


def advection_diffusion_problem(mu: float = 0.2) -> Problem:
    train_q = uniform_grid(0.0, 1.0, 1000)
    test_q = uniform_grid(0.0, 1.0, 10000)
    inner = BCWrap(DeepMLP(widths=(1, 5, 5, 1), activation="tanh"), "advection_diffusion")
    model = ResidualWrap(inner, "advection_diffusion", mu=mu)
    u_exact, _, _ = advection_diffusion_exact(test_q.points[:, 0], mu)
    manifest = {
        "problem": "advection_diffusion", "mu": str(mu), "domain": "[0,1]",
        "rhs": "1", "n_train": "1000", "n_test": "10000",
        "model": "deep_tanh_5_5_bc_x(1-x)", "bc": "dirichlet_zero",
    }
    return Problem(
        name="advection_diffusion",
        model=model,
        loss=ls.ResidualLS(np.ones(train_q.m)),
        train_q=train_q,
        test_q=test_q,
        stop_metric="l2_residual",
        stop_threshold=1e-4,
        test_model=inner,
        test_reference=u_exact,
        exact_solution=lambda x: advection_diffusion_exact(x, mu)[0],
        manifest=manifest,
    )


def reaction_diffusion_problem() -> Problem:
    train_q = uniform_grid(-1.0, 1.0, 1000)
    test_q = uniform_grid(-1.0, 1.0, 10000)
    inner = BCWrap(DeepMLP(widths=(1, 5, 5, 1), activation="tanh"), "reaction_diffusion")
    model = ResidualWrap(inner, "cubic_reaction")
    x_train = train_q.points[:, 0]
    # f derived by substituting u = cos(pi x) into -u'' + u^3.
    f = np.pi**2 * np.cos(np.pi * x_train) + np.cos(np.pi * x_train) ** 3
    u_exact, _, _ = reaction_diffusion_exact(test_q.points[:, 0])
    manifest = {
        "problem": "reaction_diffusion", "domain": "[-1,1]",
        "rhs": "pi^2 cos(pi x) + cos^3(pi x)", "n_train": "1000",
        "n_test": "10000", "model": "deep_tanh_5_5_bc_neumann_ansatz",
        "bc": "neumann_zero_slope",
    }
    return Problem(
        name="reaction_diffusion",
        model=model,
        loss=ls.ResidualLS(f),
        train_q=train_q,
        test_q=test_q,
        stop_metric="l2_residual",
        stop_threshold=1e-4,
        test_model=inner,
        test_reference=u_exact,
        exact_solution=lambda x: reaction_diffusion_exact(x)[0],
        manifest=manifest,
    )


PROBLEMS = {
    "mackey_glass": mackey_glass_problem,
    "xor9": xor9_problem,
    "advection_diffusion": lambda seed=0: advection_diffusion_problem(),
    "reaction_diffusion": lambda seed=0: reaction_diffusion_problem(),
}


def build_problem(name: str, seed: int = 0) -> Problem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}") from None
    return factory(seed=seed)
