import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stickywet import testfunctions as tf
from stickywet.diagnostics import (Moments, OccupationAccumulator, PathFunctionals, QVAccumulator,
                                   batch_means_stderr, binomial_z, conservativity, fold,
                                   martingale_residual, qv_check, revuz_check, symmetry_check,
                                   total_variation)
from stickywet.dynamics import build_chain, simulate
from stickywet.errors import InsufficientData, InsufficientReplicas
from stickywet.gibbs import GibbsModel, PotentialSpec
from stickywet.observers import MartingaleObserver, OccupationObserver, QVObserver
from stickywet.rng import replica_generator


@pytest.fixture(scope="module")
def chain():
    return build_chain(GibbsModel.build(1, 2, PotentialSpec.gaussian(), 0.5), 0.1, 5.0)


def _occ(chain, seed, steps=3000):
    ob = OccupationObserver(10)
    res = simulate(chain, [0.0, 0.5], steps=steps, rng=replica_generator(seed, 0), observers=[ob])
    return OccupationAccumulator.from_observer(ob), res


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.floats(-5, 5), min_size=3, max_size=3), min_size=3, max_size=8))
def test_moment_merge_is_associative(rows):
    ms = [Moments.of(r) for r in rows]
    left = fold(ms)
    right = ms[0] + fold(ms[1:])
    assert np.allclose(left.s1, right.s1) and np.allclose(left.s2, right.s2)
    assert np.allclose(left.mean, np.mean(rows, axis=0))
    assert np.allclose(left.var, np.var(rows, axis=0, ddof=1), atol=1e-9)


def test_occupation_fractions_and_merge(chain):
    accs = [_occ(chain, s)[0] for s in range(4)]
    tot = fold(accs)
    assert tot.fractions.sum() == pytest.approx(1.0)
    assert tot.total_steps == 4 * 3000
    alt = (accs[0] + accs[1]) + (accs[2] + accs[3])
    assert np.array_equal(alt.counts, tot.counts)
    assert np.all(tot.stderr() > 0)
    single = accs[0]
    assert np.all(np.isfinite(single.stderr()))  # batch means with one replica


def test_revuz_check_against_exact_arrays():
    t = np.array([0.1, 0.2, 0.2, 0.5])
    rep = revuz_check(t, t)
    assert rep.passed and all(r.z == 0 for r in rep.rows)
    bad = revuz_check(t + [0.01, -0.01, 0, 0], t)
    assert not bad.passed
    assert "mask,empirical_fraction,target_mass,stderr,z" in rep.to_csv().splitlines()[0]
    with pytest.raises(ValueError):
        revuz_check(t, t[:2])


def test_conservativity(chain):
    outs = [_occ(chain, s)[1] for s in range(2)]
    occ = fold(_occ(chain, s)[0] for s in range(2))
    rep = conservativity(outs, occ)
    assert rep.passed and rep.steps == 6000 and rep.k_max <= chain.K


def test_qv_needs_data(chain):
    ob = QVObserver()
    simulate(chain, [0.5, 0.5], steps=100, rng=replica_generator(0, 0), observers=[ob])
    with pytest.raises(InsufficientData):
        qv_check(QVAccumulator.from_observer(ob))


def test_qv_slope_near_two(chain):
    ob = QVObserver()
    simulate(chain, [0.5, 0.5], steps=200_000, rng=replica_generator(0, 0), observers=[ob])
    rep = qv_check(QVAccumulator.from_observer(ob))
    assert rep.slope == pytest.approx([2.0, 2.0], abs=1e-9)
    assert rep.passed


def _paths(chain, functions, replicas, seed=0, steps=200):
    acc = []
    for i in range(replicas):
        ob = MartingaleObserver(functions)
        simulate(chain, [0.0, 0.5], steps=steps, rng=replica_generator(seed, i), observers=[ob])
        acc.append(PathFunctionals.from_observer(ob))
    return fold(acc)


def test_martingale_needs_replicas(chain):
    acc = _paths(chain, [tf.bump(2, 0.3, 1.2)], 5)
    with pytest.raises(InsufficientReplicas):
        martingale_residual(acc)
    with pytest.raises(InsufficientReplicas):
        symmetry_check(acc)


def test_constant_function_has_zero_residual(chain):
    f = tf.constant(2, 3.0)
    acc = _paths(chain, [f, f], 30)
    rep = martingale_residual(acc)
    assert all(r.mean == 0 and r.contains_zero for r in rep.rows)
    sym = symmetry_check(acc)
    assert sym.symmetry[0].mean == 0.0  # f = g makes the antisymmetric term vanish


def test_small_helpers():
    assert total_variation([0.5, 0.5], [1, 0]) == 0.5
    assert binomial_z(60, 100) == pytest.approx(2.0)
    x = np.random.default_rng(0).normal(size=10_000)
    assert batch_means_stderr(x) == pytest.approx(0.01, rel=0.5)
    with pytest.raises(InsufficientData):
        batch_means_stderr([1.0])


def test_single_stratum_run():
    flat = build_chain(GibbsModel.build(1, 1, PotentialSpec.gaussian(), 1.0), 0.1, 4.0,
                       zero_drift=True)
    ob = OccupationObserver(2)
    simulate(flat, [2.0], steps=10, rng=replica_generator(0, 0), observers=[ob])
    rep = revuz_check(OccupationAccumulator.from_observer(ob), np.array([0.0, 1.0]))
    assert [r.empirical_fraction for r in rep.rows] == [0.0, 1.0]
    with pytest.raises(InsufficientData):
        empty = OccupationObserver(2)
        simulate(flat, [2.0], steps=0, observers=[empty])
        revuz_check(OccupationAccumulator.from_observer(empty), np.array([0.0, 1.0]))
