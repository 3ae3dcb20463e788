import numpy as np
import pytest

from natmo import models
from natmo.models import (
    BCWrap,
    DeepMLP,
    Linear,
    OutputSquash,
    ResidualWrap,
    ShallowMLP,
    monomials,
)
from natmo.quadrature import from_samples, uniform_grid

RNG = np.random.default_rng(123)


def fd_jacobian(spec, theta, q, step=1e-5):
    d = theta.size
    fd = np.empty((q.m, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = step
        vp = models.evaluate(spec, theta + e, q).v
        vm = models.evaluate(spec, theta - e, q).v
        fd[:, i] = (vp - vm) / (2.0 * step)
    return fd


def architectures():
    q1 = uniform_grid(-1.0, 1.0, 10)
    q4 = from_samples(RNG.standard_normal((10, 4)))
    q2 = from_samples(RNG.standard_normal((10, 2)))
    return [
        ("linear", Linear(monomials(3)), q1, 1e-6),
        ("shallow_sigmoid", ShallowMLP(4, 10, "sigmoid"), q4, 1e-6),
        ("shallow_tanh", ShallowMLP(1, 5, "tanh"), q1, 1e-6),
        ("deep_tanh", DeepMLP((1, 5, 5, 1), "tanh"), q1, 1e-6),
        ("squash", OutputSquash(ShallowMLP(2, 6, "sigmoid")), q2, 1e-6),
        ("bc_adv", BCWrap(DeepMLP((1, 5, 5, 1), "tanh"), "advection_diffusion"), q1, 1e-6),
        ("bc_reaction", BCWrap(DeepMLP((1, 5, 5, 1), "tanh"), "reaction_diffusion"), q1, 1e-6),
        ("res_adv", ResidualWrap(BCWrap(DeepMLP((1, 5, 5, 1), "tanh"), "advection_diffusion"),
                                 "advection_diffusion", mu=0.2), q1, 1e-5),
        ("res_cubic", ResidualWrap(BCWrap(DeepMLP((1, 5, 5, 1), "tanh"), "reaction_diffusion"),
                                   "cubic_reaction"), q1, 1e-5),
    ]


def test_param_counts():
    assert models.param_count(ShallowMLP(4, 10)) == 61  # (n+2)k + 1
    deep = DeepMLP((1, 5, 5, 1), "tanh")
    assert models.param_count(deep) == 46
    assert models.param_count(BCWrap(deep, "reaction_diffusion")) == 48
    assert models.param_count(BCWrap(deep, "advection_diffusion")) == 46
    assert models.param_count(OutputSquash(ShallowMLP(2, 10))) == 41


def test_init_params_deterministic():
    spec = ShallowMLP(4, 10)
    a = models.init_params(spec, seed=7)
    b = models.init_params(spec, seed=7)
    assert a.shape == (61,)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, models.init_params(spec, seed=8))


def test_init_params_standard_normal_stats():
    theta = models.init_params(DeepMLP((1, 20, 20, 1)), seed=0)
    assert abs(theta.mean()) < 0.2
    assert abs(theta.std() - 1.0) < 0.15


def test_linear_evaluate_example():
    spec = Linear(monomials(1))  # features 1, x
    q = from_samples(np.array([[0.5]]))
    v = models.evaluate(spec, np.array([2.0, 3.0]), q).v
    assert v[0] == pytest.approx(3.5)


def test_linear_tangent_is_theta_independent():
    spec = Linear(monomials(2))
    q = uniform_grid(0.0, 1.0, 5)
    p1 = models.tangent_features(spec, np.zeros(3), q)
    p2 = models.tangent_features(spec, RNG.standard_normal(3), q)
    assert np.array_equal(p1, p2)
    assert np.allclose(p1[:, 1], q.points[:, 0])


def test_shallow_bias_column_is_ones():
    spec = ShallowMLP(3, 4, "sigmoid")
    q = from_samples(RNG.standard_normal((6, 3)))
    psi = models.tangent_features(spec, RNG.standard_normal(models.param_count(spec)), q)
    # the output bias is the last packed parameter
    assert np.allclose(psi[:, -1], 1.0)


@pytest.mark.parametrize("name,spec,q,tol", architectures())
def test_tangent_features_match_fd(name, spec, q, tol):
    for seed in range(3):
        theta = np.random.default_rng(seed).standard_normal(models.param_count(spec))
        psi = models.tangent_features(spec, theta, q)
        fd = fd_jacobian(spec, theta, q)
        scale = max(np.max(np.abs(fd)), 1e-8)
        assert np.max(np.abs(psi - fd)) / scale <= tol, name


@pytest.mark.parametrize("transform", ["advection_diffusion", "reaction_diffusion"])
def test_input_derivatives_match_fd(transform):
    spec = BCWrap(DeepMLP((1, 5, 5, 1), "tanh"), transform)
    theta = RNG.standard_normal(models.param_count(spec))
    q = uniform_grid(-0.8, 0.8, 9)
    bundle = models.evaluate(spec, theta, q, want_input_derivs=True)
    h = 1e-5
    qp = from_samples(q.points[:, 0] + h)
    qm = from_samples(q.points[:, 0] - h)
    vp = models.evaluate(spec, theta, qp).v
    vm = models.evaluate(spec, theta, qm).v
    scale = max(np.max(np.abs(bundle.v_x)), 1.0)
    assert np.max(np.abs((vp - vm) / (2 * h) - bundle.v_x)) / scale <= 1e-5
    scale2 = max(np.max(np.abs(bundle.v_xx)), 1.0)
    assert np.max(np.abs((vp - 2 * bundle.v + vm) / h**2 - bundle.v_xx)) / scale2 <= 1e-5


def test_bcwrap_advection_dirichlet_exact_zero():
    spec = BCWrap(DeepMLP((1, 5, 5, 1), "tanh"), "advection_diffusion")
    q = from_samples(np.array([0.0, 1.0, 0.5]))
    for seed in range(5):
        theta = np.random.default_rng(seed).standard_normal(models.param_count(spec))
        v = models.evaluate(spec, theta, q).v
        assert v[0] == 0.0 and v[1] == 0.0


def test_bcwrap_reaction_neumann_slope():
    spec = BCWrap(DeepMLP((1, 5, 5, 1), "tanh"), "reaction_diffusion")
    q = from_samples(np.array([-1.0, 1.0]))
    for seed in range(10):
        theta = np.random.default_rng(seed).standard_normal(models.param_count(spec))
        bundle = models.evaluate(spec, theta, q, want_input_derivs=True)
        assert np.max(np.abs(bundle.v_x)) <= 1e-10


def test_residual_wrap_is_operator_of_inner_linear_case():
    mu = 0.2
    inner = BCWrap(DeepMLP((1, 5, 5, 1), "tanh"), "advection_diffusion")
    wrap = ResidualWrap(inner, "advection_diffusion", mu=mu)
    q = uniform_grid(0.1, 0.9, 7)
    theta = RNG.standard_normal(models.param_count(wrap))
    psi_wrap = models.tangent_features(wrap, theta, q)
    # column-wise: apply the operator to each inner tangent feature by FD in x
    h = 1e-5
    qp = from_samples(q.points[:, 0] + h)
    qm = from_samples(q.points[:, 0] - h)
    p0 = models.tangent_features(inner, theta, q)
    pp = models.tangent_features(inner, theta, qp)
    pm = models.tangent_features(inner, theta, qm)
    psi_x = (pp - pm) / (2 * h)
    psi_xx = (pp - 2 * p0 + pm) / h**2
    expected = -mu * psi_xx + psi_x
    scale = max(np.max(np.abs(expected)), 1.0)
    assert np.max(np.abs(psi_wrap - expected)) / scale <= 1e-5


def test_residual_wrap_rejects_input_derivs():
    wrap = ResidualWrap(BCWrap(DeepMLP((1, 4, 1), "tanh"), "advection_diffusion"),
                        "advection_diffusion")
    q = uniform_grid(0.0, 1.0, 4)
    theta = RNG.standard_normal(models.param_count(wrap))
    with pytest.raises(ValueError):
        models.evaluate(wrap, theta, q, want_input_derivs=True)


def test_evaluate_rejects_derivs_on_multid_input():
    spec = ShallowMLP(2, 3, "tanh")
    q = from_samples(RNG.standard_normal((4, 2)))
    with pytest.raises(ValueError):
        models.evaluate(spec, RNG.standard_normal(13), q, want_input_derivs=True)


def test_curvature_probe_linear_is_zero():
    spec = Linear(monomials(3))
    q = uniform_grid(0.0, 1.0, 6)
    direction = np.array([1.0, 0.0, 0.0, 0.0])
    vals = models.curvature_probe(spec, RNG.standard_normal(4), direction, 1e-3, q)
    assert np.max(np.abs(vals)) <= 1e-8


def test_curvature_probe_matches_analytic_second_derivative():
    # D(theta) = logistic(theta_1): curvature along e1 is sigma''(theta_1)
    spec = OutputSquash(Linear(monomials(0)))
    q = uniform_grid(0.0, 1.0, 3)
    theta = np.array([0.3])
    vals = models.curvature_probe(spec, theta, np.array([1.0]), 1e-4, q)
    s = 1.0 / (1.0 + np.exp(-0.3))
    expected = s * (1 - s) * (1 - 2 * s)
    assert np.allclose(vals, expected, atol=1e-6)


def test_curvature_probe_richardson():
    spec = ShallowMLP(1, 5, "tanh")
    q = uniform_grid(-1.0, 1.0, 8)
    theta = RNG.standard_normal(models.param_count(spec))
    direction = RNG.standard_normal(theta.size)
    direction /= np.linalg.norm(direction)
    c1 = models.curvature_probe(spec, theta, direction, 1e-2, q)
    c2 = models.curvature_probe(spec, theta, direction, 5e-3, q)
    assert np.max(np.abs(c1 - c2)) <= 1e-3  # O(h^2) agreement


def test_curvature_probe_rejects_zero_direction():
    spec = Linear(monomials(1))
    q = uniform_grid(0.0, 1.0, 3)
    with pytest.raises(ValueError):
        models.curvature_probe(spec, np.zeros(2), np.zeros(2), 1e-3, q)


def test_theta_length_checked():
    spec = ShallowMLP(2, 3)
    q = from_samples(RNG.standard_normal((3, 2)))
    with pytest.raises(ValueError):
        models.evaluate(spec, np.zeros(5), q)
