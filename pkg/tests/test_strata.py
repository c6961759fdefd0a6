import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from stickywet.errors import DimensionTooLarge, InvalidStickiness, Negative, NonFinite
from stickywet.strata import (StratumId, enumerate_strata, masks_of, stratum_of, stratum_weight,
                              weights_array)

heights = st.one_of(st.just(0.0), st.floats(1e-300, 1e6))


def test_corner_and_sign_pattern():
    assert stratum_of([0.0, 0.0]) == 0
    assert stratum_of([1.5, 0.0, 0.2]).members() == (0, 2)
    assert stratum_of([0.0, 1e-300]).members() == (1,)
    assert repr(StratumId(0b101)) == "StratumId({1, 3})"


def test_invalid_states():
    with pytest.raises(NonFinite):
        stratum_of([0.0, np.nan])
    with pytest.raises(NonFinite):
        stratum_of([np.inf])
    with pytest.raises(Negative):
        stratum_of([0.5, -1e-12])


def test_enumeration():
    assert enumerate_strata(1) == [0, 1]
    assert [s.members() for s in enumerate_strata(2)] == [(), (0,), (1,), (0, 1)]
    assert len(enumerate_strata(3)) == 8
    with pytest.raises(DimensionTooLarge):
        enumerate_strata(25)


def test_interior_and_size():
    B = StratumId(0b111)
    assert B.is_interior(3) and not B.is_interior(4)
    assert B.size == 3 and StratumId(0).size == 0


def test_weight_examples():
    assert stratum_weight(3, 2.0, StratumId(0b010)).value == 4.0
    assert all(stratum_weight(5, 1.0, StratumId(m)).value == 1.0 for m in range(32))
    assert stratum_weight(2, 0.5, StratumId(0)).value == 0.25
    assert stratum_weight(3, 0.7, StratumId(0b111)).value == 1.0
    with pytest.raises(InvalidStickiness):
        stratum_weight(2, 0.0, StratumId(0))
    with pytest.raises(InvalidStickiness):
        weights_array(2, -1.0)


@given(arrays(float, st.integers(1, 8), elements=heights))
def test_exactly_one_stratum(phi):
    n = phi.size
    hits = [stratum_of(phi) == B for B in enumerate_strata(n)]
    assert sum(hits) == 1
    assert masks_of(phi[None, :])[0] == stratum_of(phi)


@given(st.integers(1, 10), st.floats(1e-3, 1e3), st.data())
def test_weight_multiplicative(n, s, data):
    mask = data.draw(st.integers(0, (1 << n) - 1))
    missing = [j for j in range(n) if not mask >> j & 1]
    if not missing:
        return
    j = data.draw(st.sampled_from(missing))
    w = stratum_weight(n, s, StratumId(mask)).value
    w_plus = stratum_weight(n, s, StratumId(mask | 1 << j)).value
    assert w == pytest.approx(s * w_plus, rel=1e-12)
    assert weights_array(n, s)[mask] == pytest.approx(w, rel=1e-12)
