import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stickywet import testfunctions as tf
from stickywet.forms import (apply_L, apply_L_s, boundary_samples, check_form_identities,
                             dirichlet_form, energy_measure_pairing, energy_measure_via_forms,
                             nu_f_pairing, stratified_generator, wentzell_residual)
from stickywet.gibbs import GibbsModel, PotentialSpec
from stickywet.strata import StratumId


def model(N, s=1.0, pot=None):
    return GibbsModel.build(1, N, pot or PotentialSpec.gaussian(), s)


@pytest.mark.parametrize("key,fpar,gpar", [
    ("bump(0.3,1.2)|bump(0.8,1.0)", (0.3, 1.2), (0.8, 1.0)),
    ("bump(0.0,1.5)|bump(0.3,1.2)", (0.0, 1.5), (0.3, 1.2)),
])
def test_single_site_values_match_oracle(frozen, key, fpar, gpar):
    E_ref, nu_ref = frozen["form_n1_s1"][key]
    m = model(1)
    f, g = tf.bump(1, *fpar), tf.bump(1, *gpar)
    assert dirichlet_form(m, f, g).value == pytest.approx(E_ref, rel=1e-9)
    assert nu_f_pairing(m, f, g) == pytest.approx(nu_ref, rel=1e-9)


@pytest.mark.parametrize("pot", [PotentialSpec.gaussian(), PotentialSpec.quartic(0.5, 0.3)])
def test_identities_two_sites(pot):
    cat = tf.default_catalog(2)
    pairs = [(cat[0], cat[5]), (cat[2], cat[3]), (cat[4], cat[1])]
    rep = check_form_identities(model(2, 0.6, pot), pairs)
    assert rep["max_rel_err"]["ibp"] < 1e-8
    assert rep["max_rel_err"]["energy_measure"] < 1e-8
    assert rep["max_symmetry_abs_err"] < 1e-12


def test_positivity():
    m = model(2, 0.4)
    for f in tf.default_catalog(2):
        assert dirichlet_form(m, f, f).value > 0
    assert dirichlet_form(m, tf.constant(2), tf.constant(2)).value == 0.0


def test_nu_f_has_mass_zero():
    # g equals 1 on the support of f, so <nu_f, g> = E(f, g) = 0
    m = model(2, 0.7)
    f = tf.bump(2, 0.3, 1.2)
    g = tf.cutoff(2, 1.6, 3.0)
    assert abs(nu_f_pairing(m, f, g)) < 1e-10


def test_corner_term_sign():
    m = model(1, 0.5)
    f = tf.bump(1, 0.3, 1.2)  # increasing at 0
    g = tf.bump(1, 0.0, 1.5)
    _, parts = nu_f_pairing(m, f, g, return_parts=True)
    assert parts[StratumId(0)] < 0
    assert dirichlet_form(m, f, g).breakdown[StratumId(0)] == 0.0


def test_energy_measure_on_constant_f():
    m = model(1, 1.3)
    g = tf.bump(1, 0.3, 1.2)
    one = tf.cutoff(1, 1.6, 3.0)
    lhs = energy_measure_pairing(m, g, one)
    assert lhs == pytest.approx(2 * dirichlet_form(m, g, g).value, rel=1e-10)
    assert lhs == pytest.approx(energy_measure_via_forms(m, g, one), rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.0, 2.5), min_size=2, max_size=2), st.floats(0.1, 10.0))
def test_sticky_generator_adds_push(x, s):
    m = model(2, s)
    f = tf.monomial_bump(2, 1, 0.5, 1.0)
    X = np.array([x])
    diff = apply_L_s(m, f, X) - apply_L(m, f, X)
    assert diff[0] == pytest.approx(f.grad(X).sum() / s, rel=1e-12, abs=1e-14)


def test_stratified_generator_matches_on_faces():
    m = model(2, 0.8)
    f = tf.bump(2, 0.4, 1.3)
    X = np.array([[0.7, 0.2], [0.0, 0.5], [0.0, 0.0]])
    _, g, h = f.derivatives(X)
    b = m.drift(X)
    want = [(h + g * b)[0].sum(), h[1, 1] + g[1, 1] * b[1, 1] + g[1, 0] / 0.8,
            g[2].sum() / 0.8]
    assert stratified_generator(m, f, X) == pytest.approx(want, rel=1e-12)
    assert stratified_generator(m, f, X, boundary=False)[2] == 0.0


def test_coordinate_push_dominates_when_flat():
    s = 0.25
    m = model(1, s, PotentialSpec.gaussian(1e-12))
    f = tf.truncated_coordinate(1, 0, 1.0)
    X = np.array([[0.0], [0.3], [1.2]])
    assert apply_L_s(m, f, X) == pytest.approx(np.full(3, 1 / s), rel=1e-9)


def test_wentzell_residual():
    m = model(2, 0.5)
    S = boundary_samples(m)
    assert len(S) == 1 + 2 * 4
    res = [wentzell_residual(m, tf.flattened_bump(2, th), S) for th in (0.2, 0.1, 0.05, 0.0)]
    assert all(a > b for a, b in zip(res, res[1:]))
    assert res[-1] < 1e-12
    assert wentzell_residual(m, tf.bump(2, 0.3, 1.2), S) > 0.1
    with pytest.raises(ValueError):
        wentzell_residual(m, tf.bump(2, 0.3, 1.2), np.array([[0.5, 0.5]]))
