import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from natmo.quadrature import QuadratureSet, from_samples, inner, norm, uniform_grid


def test_uniform_grid_endpoints():
    q = uniform_grid(0.0, 1.0, 2)
    assert np.allclose(q.points[:, 0], [0.0, 1.0])
    assert np.allclose(q.weights, [0.5, 0.5])


def test_uniform_grid_three_points_forced_midpoint():
    q = uniform_grid(0.0, 1.0, 3)
    assert np.allclose(q.points[:, 0], [0.0, 0.5, 1.0])
    assert np.allclose(q.weights, 1.0 / 3.0)


def test_uniform_grid_paper_sizes():
    q = uniform_grid(-1.0, 1.0, 1000)
    assert q.m == 1000
    assert np.allclose(np.diff(q.points[:, 0]), 2.0 / 999.0)
    assert np.allclose(q.weights, 1e-3)


@pytest.mark.parametrize("a,b,m", [(0.0, 1.0, 1), (1.0, 0.0, 5), (2.0, 2.0, 4)])
def test_uniform_grid_rejects_bad_args(a, b, m):
    with pytest.raises(ValueError):
        uniform_grid(a, b, m)


def test_from_samples_weights():
    pts = np.random.default_rng(0).standard_normal((500, 4))
    q = from_samples(pts)
    assert np.allclose(q.weights, 1.0 / 500.0)
    single = from_samples(np.array([[1.0, 2.0]]))
    assert single.weights[0] == 1.0


def test_from_samples_rejects_empty():
    with pytest.raises(ValueError):
        from_samples(np.empty((0, 2)))


def test_quadrature_rejects_nonpositive_weights():
    with pytest.raises(ValueError):
        QuadratureSet(np.zeros((2, 1)), np.array([0.5, 0.0]))


def test_quadrature_arrays_are_readonly():
    q = uniform_grid(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        q.weights[0] = 2.0


def test_inner_normalization():
    q = from_samples(np.random.default_rng(1).standard_normal((7, 2)))
    ones = np.ones(7)
    assert inner(ones, ones, q) == pytest.approx(1.0)


def test_inner_basic_example():
    q = uniform_grid(0.0, 1.0, 2)
    a = np.array([0.0, 1.0])
    assert inner(a, a, q) == pytest.approx(0.5)


def test_inner_metric_example():
    q = QuadratureSet(np.zeros((2, 1)), np.array([0.5, 0.5]))
    a = np.ones(2)
    assert inner(a, a, q, metric=np.array([2.0, 4.0])) == pytest.approx(3.0)


def test_inner_rejects_length_mismatch():
    q = uniform_grid(0.0, 1.0, 3)
    with pytest.raises(ValueError):
        inner(np.ones(2), np.ones(3), q)


def test_inner_rejects_negative_metric():
    q = uniform_grid(0.0, 1.0, 3)
    with pytest.raises(ValueError):
        inner(np.ones(3), np.ones(3), q, metric=np.array([1.0, -1.0, 1.0]))


_vals = st.lists(st.floats(-10, 10), min_size=5, max_size=5)


@settings(max_examples=30, deadline=None)
@given(a=_vals, b=_vals, c=_vals, lam=st.floats(-3, 3))
def test_inner_symmetric_bilinear(a, b, c, lam):
    q = uniform_grid(0.0, 1.0, 5)
    a, b, c = np.array(a), np.array(b), np.array(c)
    assert inner(a, b, q) == pytest.approx(inner(b, a, q), abs=1e-12)
    lhs = inner(a, b + lam * c, q)
    rhs = inner(a, b, q) + lam * inner(a, c, q)
    assert lhs == pytest.approx(rhs, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(a=_vals, scale=st.floats(0.01, 100))
def test_inner_positive_and_weight_scaling(a, scale):
    q = uniform_grid(0.0, 1.0, 5)
    a = np.array(a)
    base = inner(a, a, q)
    assert base >= 0.0
    scaled = QuadratureSet(q.points, q.weights * scale)
    assert inner(a, a, scaled) == pytest.approx(scale * base, rel=1e-12)


def test_norm_is_sqrt_of_inner():
    q = uniform_grid(0.0, 2.0, 6)
    a = np.arange(6.0)
    assert norm(a, q) == pytest.approx(np.sqrt(inner(a, a, q)))
