from math import factorial

import numpy as np
import pytest

from mixedelast import MixedElastError, edge_rule, triangle_rule


def tri_moment(a, b):
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def test_triangle_basic_moments():
    r = triangle_rule(2)
    x, y = r.xy[:, 0], r.xy[:, 1]
    assert r.weights.sum() == pytest.approx(0.5, rel=1e-15)
    assert (r.weights * x).sum() == pytest.approx(1.0 / 6.0, rel=1e-14)
    r = triangle_rule(4)
    x, y = r.xy[:, 0], r.xy[:, 1]
    assert (r.weights * x**2 * y**2).sum() == pytest.approx(tri_moment(2, 2), rel=1e-13)


@pytest.mark.parametrize("d", range(1, 13))
def test_triangle_monomial_exactness(d):
    r = triangle_rule(d)
    x, y = r.xy[:, 0], r.xy[:, 1]
    for a in range(d + 1):
        for b in range(d + 1 - a):
            val = (r.weights * x**a * y**b).sum()
            assert val == pytest.approx(tri_moment(a, b), rel=1e-13)


@pytest.mark.parametrize("d", range(1, 13))
def test_triangle_points_inside_weights_positive(d):
    r = triangle_rule(d)
    assert np.all(r.weights > 0)
    assert np.all(r.points >= 0.0) and np.all(r.points <= 1.0)
    assert np.allclose(r.points.sum(axis=1), 1.0, atol=1e-14)


def test_edge_basic_moments():
    r = edge_rule(3)
    assert len(r.points) == 2
    assert r.weights.sum() == pytest.approx(1.0, rel=1e-15)
    assert (r.weights * r.points**3).sum() == pytest.approx(0.25, rel=1e-14)
    r = edge_rule(6)
    assert len(r.points) == 4
    assert (r.weights * r.points**6).sum() == pytest.approx(1.0 / 7.0, rel=1e-13)


@pytest.mark.parametrize("d", range(1, 13))
def test_edge_monomial_exactness(d):
    r = edge_rule(d)
    assert len(r.points) == (d + 2) // 2
    for j in range(d + 1):
        assert (r.weights * r.points**j).sum() == pytest.approx(1.0 / (j + 1), rel=1e-13)
    assert np.all(r.weights > 0)
    assert np.all((r.points > 0) & (r.points < 1))


@pytest.mark.parametrize("d", [0, 13, -1])
def test_unsupported_degree(d):
    with pytest.raises(MixedElastError):
        triangle_rule(d)
    with pytest.raises(MixedElastError):
        edge_rule(d)
