import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from signflow.geometry import TWO_PI, ManifoldSpec, nearest_lift, wrap


def test_constructors():
    circle = ManifoldSpec.circle()
    assert circle.dim == 1 and circle.periods == (TWO_PI,)
    torus = ManifoldSpec.torus2()
    assert torus.dim == 2 and torus.is_periodic
    flat = ManifoldSpec.euclidean(3)
    assert flat.dim == 3 and not flat.is_periodic
    assert all(math.isnan(p) for p in flat.periods)


def test_constructor_validation():
    with pytest.raises(ValueError):
        ManifoldSpec.euclidean(0)
    with pytest.raises(ValueError):
        ManifoldSpec("circle", (TWO_PI, TWO_PI))
    with pytest.raises(ValueError):
        ManifoldSpec("euclidean", (-1.0,))
    with pytest.raises(ValueError):
        ManifoldSpec("euclidean", ())


def test_wrap_circle():
    m = ManifoldSpec.circle()
    assert_allclose(wrap(m, 7.0), 7.0 - TWO_PI, rtol=0, atol=1e-15)
    assert_allclose(wrap(m, -0.5), TWO_PI - 0.5, rtol=0, atol=1e-15)
    assert wrap(m, TWO_PI) == 0.0
    assert wrap(m, 0.0) == 0.0


def test_wrap_range_and_idempotence():
    m = ManifoldSpec.circle()
    x = np.linspace(-30.0, 30.0, 501)
    w = wrap(m, x)
    assert np.all((w >= 0.0) & (w < TWO_PI))
    assert_allclose(wrap(m, w), w, rtol=0, atol=0)
    # tiny negative values must not round up onto the period itself
    assert wrap(m, -1e-18) < TWO_PI


def test_wrap_euclidean_passthrough():
    m = ManifoldSpec.euclidean(2)
    x = np.array([[-5.0, 100.0], [0.25, -0.25]])
    assert_allclose(wrap(m, x), x, rtol=0, atol=0)


def test_wrap_torus_last_axis():
    m = ManifoldSpec.torus2()
    x = np.array([7.0, -0.5])
    assert_allclose(wrap(m, x), [7.0 - TWO_PI, TWO_PI - 0.5], atol=1e-15)
    with pytest.raises(ValueError):
        wrap(m, np.zeros(3))
    with pytest.raises(ValueError):
        wrap(m, np.array([np.nan, 0.0]))


def test_nearest_lift_circle():
    m = ManifoldSpec.circle()
    assert_allclose(nearest_lift(m, 6.2, 0.1), 6.2 - TWO_PI, atol=1e-15)
    assert_allclose(nearest_lift(m, 0.1, 6.2), 0.1 + TWO_PI, atol=1e-15)
    assert_allclose(nearest_lift(m, 1.5, 1.0), 1.5, atol=0)


def test_nearest_lift_window_and_tie():
    m = ManifoldSpec.circle()
    c = 1.0
    y = np.linspace(0.0, TWO_PI, 400, endpoint=False)
    lifted = nearest_lift(m, y, c)
    assert np.all(lifted > c - math.pi - 1e-12)
    assert np.all(lifted <= c + math.pi + 1e-12)
    assert_allclose(wrap(m, lifted), y, atol=1e-12)
    # a point exactly opposite the center resolves to the upper lift
    opposite = wrap(m, c + math.pi)
    assert_allclose(nearest_lift(m, opposite, c), c + math.pi, atol=1e-12)


def test_nearest_lift_torus_broadcast():
    m = ManifoldSpec.torus2()
    y = np.array([[0.1, 6.2], [3.0, 3.0]])
    c = np.array([6.2, 0.1])
    lifted = nearest_lift(m, y, c)
    assert lifted.shape == y.shape
    assert_allclose(lifted[0], [0.1 + TWO_PI, 6.2 - TWO_PI], atol=1e-15)
    with pytest.raises(ValueError):
        nearest_lift(m, np.array([np.inf, 0.0]), c)
