import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stickywet import testfunctions as tf

CATALOG = tf.default_catalog(2) + [tf.flattened_bump(2, 0.3), tf.constant(2, 2.5)]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, len(CATALOG) - 1),
       st.lists(st.floats(0.05, 3.0), min_size=2, max_size=2))
def test_derivatives_match_finite_differences(idx, x):
    f = CATALOG[idx]
    X = np.array([x])
    eps = 1e-5
    g = f.grad(X)[0]
    h = f.hess_diag(X)[0]
    for j in range(2):
        e = np.zeros((1, 2))
        e[0, j] = eps
        fp, f0, fm = f.value(X + e)[0], f.value(X)[0], f.value(X - e)[0]
        assert g[j] == pytest.approx((fp - fm) / (2 * eps), abs=1e-6)
        assert h[j] == pytest.approx((fp - 2 * f0 + fm) / eps ** 2, abs=1e-3)


def test_product_is_pointwise():
    f, g = CATALOG[0], CATALOG[3]
    X = np.random.default_rng(1).uniform(0, 2, (50, 2))
    np.testing.assert_allclose((f * g).value(X), f.value(X) * g.value(X), rtol=1e-13)
    fg = f * g
    np.testing.assert_allclose(fg.grad(X), f.grad(X) * g.value(X)[:, None]
                               + f.value(X)[:, None] * g.grad(X), atol=1e-13)


def test_support_is_respected():
    f = tf.bump(2, 0.3, 1.2)
    assert f.compact and np.allclose(f.support, 1.5)
    X = np.array([[1.5, 0.1], [0.2, 2.0]])
    assert np.all(f.value(X) == 0) and np.all(f.grad(X) == 0)


def test_cutoff_and_coordinate_shapes():
    c = tf.cutoff(1, 1.0, 2.0)
    assert c.value(np.array([[0.0], [0.9], [2.5]])) == pytest.approx([1, 1, 0])
    p = tf.truncated_coordinate(2, 1, 1.0)
    X = np.array([[0.4, 1.7]])
    assert p.value(X)[0] == pytest.approx(1.7)
    assert p.grad(X)[0] == pytest.approx([0, 1])


def test_from_dict_and_validation():
    f = tf.from_dict({"family": "bump", "center": 0.5, "radius": 2.0}, 3)
    assert f.n == 3
    with pytest.raises(ValueError):
        tf.from_dict({"family": "spline"}, 1)
    with pytest.raises(ValueError):
        tf.flattened_bump(1, 1.5)
    with pytest.raises(ValueError):
        tf.bump(1, 0.0, -1.0)
