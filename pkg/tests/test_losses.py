import numpy as np
import pytest

from natmo import losses as ls
from natmo import models
from natmo.quadrature import from_samples, uniform_grid


def test_least_squares_zero_at_targets():
    q = uniform_grid(0.0, 1.0, 4)
    t = np.array([1.0, 2.0, 3.0, 4.0])
    assert ls.loss_value(ls.LeastSquares(t), t, q) == 0.0


def test_least_squares_half_convention():
    q = uniform_grid(0.0, 1.0, 2)
    loss = ls.LeastSquares(np.zeros(2))
    assert ls.loss_value(loss, np.ones(2), q) == pytest.approx(0.5)


def test_bce_perfect_fit_small():
    q = uniform_grid(0.0, 1.0, 4)
    y = np.array([0.0, 1.0, 1.0, 0.0])
    assert ls.loss_value(ls.BinaryCrossEntropy(y), y, q) <= 1e-6


def test_bce_finite_for_any_values():
    q = uniform_grid(0.0, 1.0, 3)
    loss = ls.BinaryCrossEntropy(np.array([1.0, 0.0, 1.0]))
    val = ls.loss_value(loss, np.array([-5.0, 7.0, 0.5]), q)
    assert np.isfinite(val)


def test_bce_rejects_bad_labels():
    with pytest.raises(ValueError):
        ls.BinaryCrossEntropy(np.array([0.0, 0.5]))


def test_pointwise_derivs_least_squares():
    q = uniform_grid(0.0, 1.0, 3)
    t = np.array([1.0, 2.0, 3.0])
    g, h = ls.pointwise_derivs(ls.LeastSquares(t), t, q)
    assert np.allclose(g, 0.0)
    assert np.allclose(h, 1.0)


def test_pointwise_derivs_bce_example():
    q = uniform_grid(0.0, 1.0, 2)
    loss = ls.BinaryCrossEntropy(np.array([1.0, 1.0]))
    g, h = ls.pointwise_derivs(loss, np.array([0.5, 0.5]), q)
    assert np.allclose(g, -2.0)
    assert np.allclose(h, 4.0)


def test_pointwise_derivs_residual_zero_at_solution():
    q = uniform_grid(0.0, 1.0, 3)
    f = np.array([1.0, 1.0, 1.0])
    g, _ = ls.pointwise_derivs(ls.ResidualLS(f), f, q)
    assert np.allclose(g, 0.0)


def test_logit_bce_derivs_and_value():
    q = uniform_grid(0.0, 1.0, 3)
    y = np.array([1.0, 0.0, 1.0])
    f = np.array([0.0, 2.0, -30.0])
    loss = ls.BinaryCrossEntropyLogits(y)
    g, h = ls.pointwise_derivs(loss, f, q)
    s = 1 / (1 + np.exp(-f))
    assert np.allclose(g, s - y)
    assert np.allclose(h, s * (1 - s))
    assert np.isfinite(ls.loss_value(loss, np.array([500.0, -500.0, 0.0]), q))


def test_grad_coeffs_zero_when_g_zero():
    q = uniform_grid(0.0, 1.0, 3)
    t = np.arange(3.0)
    psi = np.random.default_rng(0).standard_normal((3, 4))
    grad = ls.grad_coeffs(ls.LeastSquares(t), t, psi, q)
    assert np.allclose(grad, 0.0)


def test_grad_coeffs_linear_example():
    # Linear {1, x} on grid {0, 1}, targets {0, 0}, theta = (1, 1)
    spec = models.Linear(models.monomials(1))
    q = uniform_grid(0.0, 1.0, 2)
    theta = np.array([1.0, 1.0])
    v = models.evaluate(spec, theta, q).v
    psi = models.tangent_features(spec, theta, q)
    grad = ls.grad_coeffs(ls.LeastSquares(np.zeros(2)), v, psi, q)
    assert np.allclose(grad, [1.5, 1.0])


@pytest.mark.parametrize("case", ["ls", "bce", "logit", "residual"])
def test_grad_coeffs_match_fd(case):
    rng = np.random.default_rng(3)
    if case == "ls":
        spec = models.ShallowMLP(2, 4, "tanh")
        q = from_samples(rng.standard_normal((8, 2)))
        loss = ls.LeastSquares(rng.standard_normal(8))
    elif case == "bce":
        spec = models.OutputSquash(models.ShallowMLP(2, 4, "sigmoid"))
        q = from_samples(rng.standard_normal((8, 2)))
        loss = ls.BinaryCrossEntropy((rng.random(8) > 0.5).astype(float))
    elif case == "logit":
        spec = models.ShallowMLP(2, 4, "sigmoid")
        q = from_samples(rng.standard_normal((8, 2)))
        loss = ls.BinaryCrossEntropyLogits((rng.random(8) > 0.5).astype(float))
    else:
        spec = models.ResidualWrap(
            models.BCWrap(models.DeepMLP((1, 4, 1), "tanh"), "advection_diffusion"),
            "advection_diffusion")
        q = uniform_grid(0.0, 1.0, 8)
        loss = ls.ResidualLS(np.ones(8))
    theta = rng.standard_normal(models.param_count(spec))
    v = models.evaluate(spec, theta, q).v
    psi = models.tangent_features(spec, theta, q)
    grad = ls.grad_coeffs(loss, v, psi, q)
    step = 1e-6
    fd = np.empty_like(grad)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        lp = ls.loss_value(loss, models.evaluate(spec, theta + e, q).v, q)
        lm = ls.loss_value(loss, models.evaluate(spec, theta - e, q).v, q)
        fd[i] = (lp - lm) / (2 * step)
    scale = max(np.max(np.abs(fd)), 1e-8)
    assert np.max(np.abs(grad - fd)) / scale <= 1e-6


def test_metric_weights_positive_for_bce():
    q = uniform_grid(0.0, 1.0, 4)
    loss = ls.BinaryCrossEntropy(np.array([0.0, 1.0, 0.0, 1.0]))
    h = ls.metric_weights(loss, np.array([0.2, 0.9, -3.0, 4.0]), q, "hessian")
    assert np.all(h > 0)
    assert ls.metric_weights(loss, np.zeros(4), q, "l2") is None


def test_metric_weights_least_squares_identity():
    q = uniform_grid(0.0, 1.0, 4)
    h = ls.metric_weights(ls.LeastSquares(np.zeros(4)), np.ones(4), q, "hessian")
    assert np.allclose(h, 1.0)


def test_test_metric_values():
    q = uniform_grid(0.0, 1.0, 4)
    v = np.ones(4)
    assert ls.test_metric("mse", v, v, q) == 0.0
    ref = np.zeros(4)
    assert ls.test_metric("mse", v, ref, q) == pytest.approx(1.0)
    assert ls.test_metric("l2_residual", v, ref, q) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ls.test_metric("linf", v, ref, q)


def test_length_mismatch_rejected():
    q = uniform_grid(0.0, 1.0, 3)
    with pytest.raises(ValueError):
        ls.loss_value(ls.LeastSquares(np.zeros(3)), np.zeros(2), q)
