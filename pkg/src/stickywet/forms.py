"""Generator, Dirichlet form and measure pairings on the stratified orthant.

All integrals are against the normalised measure
``mu = rho * sum_B s^(n-#B) lambda_B`` and are evaluated face by face with
:mod:`stickywet.quadrature`; sums run in mask order, then coordinate order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gibbs import GibbsModel
from .quadrature import QuadConfig, _check_dim, face_integral, partition_function
from .strata import StratumId, masks_of, validate_heights
from .testfunctions import TestFunction


def _states(phi) -> np.ndarray:
    X = validate_heights(phi)
    return np.atleast_2d(X)


def apply_L(model: GibbsModel, f: TestFunction, phi) -> np.ndarray:
    """``sum_i d_i^2 f + sum_i d_i f * d_i ln rho``, vectorised over rows of ``phi``."""
    X = _states(phi)
    _, g, h = f.derivatives(X)
    return h.sum(axis=1) + (g * model.drift(X)).sum(axis=1)


def apply_L_s(model: GibbsModel, f: TestFunction, phi) -> np.ndarray:
    """:func:`apply_L` plus the sticky push ``(1/s) sum_i d_i f``."""
    X = _states(phi)
    _, g, h = f.derivatives(X)
    return h.sum(axis=1) + (g * model.drift(X)).sum(axis=1) + g.sum(axis=1) / model.s


def stratified_generator(model: GibbsModel, f: TestFunction, X, *, boundary: bool = True):
    """Drift density of ``f(X_t)`` on the face of each row.

    Wet coordinates contribute ``d_i^2 f + d_i f b_i``; dry coordinates
    contribute ``(1/s) d_i f`` (dropped when ``boundary=False``).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, g, h = f.derivatives(X)
    wet = X > 0
    out = np.where(wet, h + g * model.drift(X), 0.0).sum(axis=1)
    if boundary:
        out = out + np.where(wet, 0.0, g).sum(axis=1) / model.s
    return out


@dataclass
class FormValue:
    value: float
    breakdown: dict = field(default_factory=dict)  # mask -> contribution


def _limits(*fns):
    """Common integration box and breakpoints for a product of test functions."""
    upper = np.min([f.support for f in fns], axis=0)
    knots = [tuple(sorted(set().union(*(f.knots[j] for f in fns)))) for j in range(fns[0].n)]
    return upper, knots


def _pair_over_faces(model, integrand, cfg, fns, Z, include_corner: bool):
    L = cfg.cutoff(model)
    Z = partition_function(model, cfg) if Z is None else Z
    upper, knots = _limits(*fns)
    parts = {}
    for mask in range(1 << model.n):
        if mask == 0 and not include_corner:
            parts[StratumId(0)] = 0.0
            continue
        parts[StratumId(mask)] = face_integral(model, integrand, mask, cfg,
                                               upper=upper, knots=knots, L=L) / Z
    return parts


def dirichlet_form(model: GibbsModel, f: TestFunction, g: TestFunction,
                   cfg: QuadConfig = QuadConfig(), *, Z: float | None = None) -> FormValue:
    """``E(f, g) = sum_{B != 0} sum_{i in B} int_{E_+(B)} d_i f d_i g d mu_B``."""
    _check_dim(model)

    def integrand(X, mask):
        wet = np.array(StratumId(mask).members(), dtype=int)
        return (f.grad(X)[:, wet] * g.grad(X)[:, wet]).sum(axis=1)

    parts = _pair_over_faces(model, integrand, cfg, (f, g), Z, include_corner=False)
    return FormValue(float(sum(parts.values())), parts)


def nu_f_pairing(model: GibbsModel, f: TestFunction, g: TestFunction,
                 cfg: QuadConfig = QuadConfig(), *, Z: float | None = None,
                 return_parts: bool = False):
    """``<nu_f, g>`` from the integrated-by-parts representation of ``E(f, g)``.

    On ``E_+(B)`` the density is ``sum_{i in B}(-d_i^2 f - d_i f d_i ln rho)
    - (1/s) sum_{i not in B} d_i f``; the corner carries
    ``-(1/s) sum_i d_i f(0) g(0) s^n rho(0)``.
    """
    _check_dim(model)
    n = model.n

    def integrand(X, mask):
        B = StratumId(mask)
        wet = np.array([B.contains(j) for j in range(n)])
        _, df, d2f = f.derivatives(X)
        b = model.drift(X)
        bulk = np.where(wet, -d2f - df * b, 0.0).sum(axis=1)
        push = np.where(wet, 0.0, df).sum(axis=1) / model.s
        return (bulk - push) * g.value(X)

    parts = _pair_over_faces(model, integrand, cfg, (f, g), Z, include_corner=True)
    total = float(sum(parts.values()))
    return (total, parts) if return_parts else total


def energy_measure_pairing(model: GibbsModel, g: TestFunction, f: TestFunction,
                           cfg: QuadConfig = QuadConfig(), *, Z: float | None = None) -> float:
    """``int f d nu_<g>`` with ``nu_<g> = 2 sum_B sum_{i in B} (d_i g)^2 mu_B``."""
    _check_dim(model)

    def integrand(X, mask):
        wet = np.array(StratumId(mask).members(), dtype=int)
        dg = g.grad(X)[:, wet]
        return 2.0 * (dg * dg).sum(axis=1) * f.value(X)

    parts = _pair_over_faces(model, integrand, cfg, (g, f), Z, include_corner=False)
    return float(sum(parts.values()))


def energy_measure_via_forms(model: GibbsModel, g: TestFunction, f: TestFunction,
                             cfg: QuadConfig = QuadConfig(), *, Z: float | None = None) -> float:
    """``2 E(g f, g) - E(g^2, f)``, the defining identity of the energy measure."""
    Z = partition_function(model, cfg) if Z is None else Z
    return (2.0 * dirichlet_form(model, g * f, g, cfg, Z=Z).value
            - dirichlet_form(model, g * g, f, cfg, Z=Z).value)


def wentzell_residual(model: GibbsModel, f: TestFunction, sample_states) -> float:
    """``max |L^s f|`` over boundary states; zero for members of the Wentzell domain."""
    X = _states(sample_states)
    if np.any(masks_of(X) == (1 << model.n) - 1):
        raise ValueError("wentzell_residual needs states on the boundary of E")
    return float(np.max(np.abs(apply_L_s(model, f, X)))) if len(X) else 0.0


def boundary_samples(model: GibbsModel, heights=(0.25, 0.5, 1.0, 1.5)) -> np.ndarray:
    """Grid of states covering every proper face (the corner included)."""
    n = model.n
    rows = []
    for mask in range(1 << n):
        if mask == (1 << n) - 1:
            continue
        wet = StratumId(mask).members()
        if not wet:
            rows.append(np.zeros(n))
            continue
        for combo in np.array(np.meshgrid(*[heights] * len(wet))).reshape(len(wet), -1).T:
            x = np.zeros(n)
            x[list(wet)] = combo
            rows.append(x)
    return np.array(rows)


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def check_form_identities(model: GibbsModel, pairs, cfg: QuadConfig = QuadConfig()) -> dict:
    """Evaluate both sides of every identity for each ``(f, g)`` pair.

    Returns per-pair values and the maximum relative error per identity.
    """
    Z = partition_function(model, cfg)
    rows = []
    for f, g in pairs:
        e_fg = dirichlet_form(model, f, g, cfg, Z=Z).value
        e_gf = dirichlet_form(model, g, f, cfg, Z=Z).value
        nu = nu_f_pairing(model, f, g, cfg, Z=Z)
        em = energy_measure_pairing(model, g, f, cfg, Z=Z)
        em_forms = energy_measure_via_forms(model, g, f, cfg, Z=Z)
        rows.append({
            "f": f.name, "g": g.name,
            "E(f,g)": e_fg, "E(g,f)": e_gf, "<nu_f,g>": nu,
            "int f dnu<g>": em, "2E(gf,g)-E(g^2,f)": em_forms,
            "ibp_rel_err": _rel(e_fg, nu),
            "energy_rel_err": _rel(em, em_forms),
            "symmetry_abs_err": abs(e_fg - e_gf),
        })
    return {
        "n": model.n,
        "pairs": rows,
        "max_rel_err": {
            "ibp": max((r["ibp_rel_err"] for r in rows), default=0.0),
            "energy_measure": max((r["energy_rel_err"] for r in rows), default=0.0),
        },
        "max_symmetry_abs_err": max((r["symmetry_abs_err"] for r in rows), default=0.0),
    }
